"""Exact/partial span scoring, agreement, and the cross-validation protocol."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

MODES = ("exact", "partial")
METRICS = ("f", "p", "r")
MICRO = "micro"


class DocSetMismatch(ValueError):
    pass


class TooFewDocuments(ValueError):
    pass


class TargetTooLarge(ValueError):
    pass


class ShapeMismatch(ValueError):
    pass


@dataclass
class Counts:
    tp: int = 0
    fp: int = 0
    fn: int = 0

    def __add__(self, other):
        return Counts(self.tp + other.tp, self.fp + other.fp, self.fn + other.fn)

    @property
    def precision(self) -> float:
        d = self.tp + self.fp
        return self.tp / d if d else 0.0

    @property
    def recall(self) -> float:
        d = self.tp + self.fn
        return self.tp / d if d else 0.0

    @property
    def f(self) -> float:
        p, r = self.precision, self.recall
        return 2 * p * r / (p + r) if p + r > 0 else 0.0


@dataclass
class EvalReport:
    types: tuple
    # mode -> entity type -> Counts
    counts: dict = field(default_factory=dict)

    def micro(self, mode: str) -> Counts:
        total = Counts()
        for c in self.counts[mode].values():
            total = total + c
        return total

    def get(self, mode: str, etype: str = MICRO) -> Counts:
        return self.micro(mode) if etype == MICRO else self.counts[mode][etype]

    def f(self, mode="exact", etype=MICRO):
        return self.get(mode, etype).f

    def precision(self, mode="exact", etype=MICRO):
        return self.get(mode, etype).precision

    def recall(self, mode="exact", etype=MICRO):
        return self.get(mode, etype).recall

    def merge(self, other: "EvalReport") -> "EvalReport":
        counts = {m: dict(c) for m, c in self.counts.items()}
        for m, c in other.counts.items():
            counts.setdefault(m, {}).update(c)
        return EvalReport(self.types, counts)

    def metrics(self) -> dict:
        """Flat ``"mode/type/metric" -> value`` view used for seed aggregation."""
        out = {}
        for mode in self.counts:
            for etype in (MICRO, *self.types):
                c = self.get(mode, etype)
                out[f"{mode}/{etype}/f"] = c.f
                out[f"{mode}/{etype}/p"] = c.precision
                out[f"{mode}/{etype}/r"] = c.recall
        return out

    def to_dict(self) -> dict:
        out = {}
        for mode in self.counts:
            out[mode] = {}
            for etype in (MICRO, *self.types):
                c = self.get(mode, etype)
                out[mode][etype] = {
                    "tp": c.tp, "fp": c.fp, "fn": c.fn,
                    "precision": c.precision, "recall": c.recall, "f": c.f,
                }
        return out


def _check_docs(gold, pred):
    if set(gold) != set(pred):
        missing = sorted(set(gold) ^ set(pred))[:5]
        raise DocSetMismatch(f"gold and prediction document sets differ, e.g. {missing}")


def _by_type(mentions, types):
    out = {t: [] for t in types}
    for m in mentions:
        out.setdefault(m.etype, []).append(m)
    return out


def exact_score(gold: dict, pred: dict, types) -> EvalReport:
    _check_docs(gold, pred)
    types = tuple(types)
    counts = {t: Counts() for t in types}
    for doc_id in gold:
        g = _by_type(gold[doc_id], types)
        p = _by_type(pred[doc_id], types)
        for t in types:
            gk = {(m.start, m.end) for m in g.get(t, [])}
            pk = {(m.start, m.end) for m in p.get(t, [])}
            tp = len(gk & pk)
            counts[t] = counts[t] + Counts(tp, len(pk) - tp, len(gk) - tp)
    return EvalReport(types, {"exact": counts})


def _spans(mentions):
    return sorted({(m.start, m.end) for m in mentions})


def _partial_tp(gold, pred) -> int:
    used = [False] * len(gold)
    tp = 0
    for start, end in pred:
        for i, (g_start, g_end) in enumerate(gold):
            if g_start >= end:
                break
            if not used[i] and g_end > start:
                used[i] = True
                tp += 1
                break
    return tp


def partial_score(gold: dict, pred: dict, types) -> EvalReport:
    """Same-type overlap of at least one character, matched one-to-one in document order.

    As in exact scoring, mentions are compared as sets of spans per type, so
    a duplicated mention counts once.
    """
    _check_docs(gold, pred)
    types = tuple(types)
    counts = {t: Counts() for t in types}
    for doc_id in gold:
        g = _by_type(gold[doc_id], types)
        p = _by_type(pred[doc_id], types)
        for t in types:
            gt, pt = _spans(g.get(t, [])), _spans(p.get(t, []))
            tp = _partial_tp(gt, pt)
            counts[t] = counts[t] + Counts(tp, len(pt) - tp, len(gt) - tp)
    return EvalReport(types, {"partial": counts})


def evaluate(gold: dict, pred: dict, types) -> EvalReport:
    return exact_score(gold, pred, types).merge(partial_score(gold, pred, types))


def agreement(ann_a: dict, ann_b: dict, types) -> EvalReport:
    """Inter-annotator agreement, treating ``ann_a`` as the reference."""
    return evaluate(ann_a, ann_b, types)


def check_report(report: EvalReport):
    for mode in report.counts:
        per_type = report.counts[mode].values()
        micro = report.micro(mode)
        assert micro.tp == sum(c.tp for c in per_type)
        for c in (*per_type, micro):
            for v in (c.precision, c.recall, c.f):
                assert 0.0 <= v <= 1.0


# -- folds and sampling -----------------------------------------------------


def _doc_length(doc):
    return int(getattr(doc, "n_tokens"))


def length_buckets(lengths, n_buckets=4):
    """Quartile bucket of each length."""
    lengths = np.asarray(lengths, dtype=np.float64)
    if lengths.size == 0:
        return []
    edges = np.quantile(lengths, np.linspace(0, 1, n_buckets + 1)[1:-1])
    return [int(b) for b in np.searchsorted(edges, lengths, side="right")]


def stratified_folds(docs, k=6, seed=0) -> dict:
    """Assign documents to ``k`` folds.

    Documents are grouped by ``doc_type`` and ordered by length bucket then
    token count, and this sequence is dealt round-robin starting from a
    seeded fold. Each (type, length-quartile) stratum is a contiguous run
    of the deal, so its fold counts differ by at most one.
    """
    docs = list(docs)
    if k < 2:
        raise ValueError("need at least 2 folds")
    if len(docs) < k:
        raise TooFewDocuments(f"{len(docs)} documents cannot fill {k} folds")
    buckets = dict(zip((d.id for d in docs), length_buckets([_doc_length(d) for d in docs])))
    ordered = sorted(docs, key=lambda d: (d.doc_type, buckets[d.id], _doc_length(d), d.id))
    offset = int(np.random.default_rng(seed).integers(k))
    return {d.id: (offset + i) % k for i, d in enumerate(ordered)}


def fold_lists(docs, assignment: dict, k=None):
    k = (max(assignment.values()) + 1) if k is None else k
    folds = [[] for _ in range(k)]
    for d in docs:
        folds[assignment[d.id]].append(d)
    return folds


def _n_mentions(doc):
    return len(doc.mentions)


def take_until(docs, target: int, count=_n_mentions):
    """Prefix of ``docs`` whose cumulative entity count first reaches ``target``."""
    if target <= 0:
        return []
    out, total = [], 0
    for d in docs:
        out.append(d)
        total += count(d)
        if total >= target:
            return out
    raise TargetTooLarge(f"only {total} entities available, target {target}")


def subsample_to_entity_count(docs, target_entities: int, seed=0, count=None):
    docs = list(docs)
    count = count or _n_mentions
    total = sum(count(d) for d in docs)
    if target_entities > total:
        raise TargetTooLarge(f"only {total} entities available, target {target_entities}")
    perm = np.random.default_rng(seed).permutation(len(docs))
    return take_until([docs[i] for i in perm], target_entities, count)


# -- seed aggregation -------------------------------------------------------


@dataclass
class MultiSeedReport:
    n: int
    mean: dict
    min: dict
    max: dict

    def cell(self, key: str) -> str:
        lo, mu, hi = self.min[key], self.mean[key], self.max[key]
        if self.n == 1 or lo == hi:
            return f"{100 * mu:.1f}"
        return f"{100 * mu:.1f} [{100 * lo:.1f}-{100 * hi:.1f}]"

    def to_dict(self) -> dict:
        return {"n": self.n, "mean": self.mean, "min": self.min, "max": self.max}


def aggregate_seeds(reports) -> MultiSeedReport:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to aggregate")
    flat = [r.metrics() if isinstance(r, EvalReport) else dict(r) for r in reports]
    keys = sorted(flat[0])
    for f in flat[1:]:
        if sorted(f) != keys:
            raise ShapeMismatch("reports cover different metrics")
    mean, lo, hi = {}, {}, {}
    for key in keys:
        vals = sorted(f[key] for f in flat)
        mean[key] = math.fsum(vals) / len(vals)
        lo[key] = vals[0]
        hi[key] = vals[-1]
    return MultiSeedReport(len(flat), mean, lo, hi)


def format_table(rows, etype=MICRO) -> str:
    """Comparison table, one row per system, exact and partial F/P/R.

    ``rows`` is a sequence of ``(corpus, system, MultiSeedReport)``.
    """
    header = ["Corpus", "System"] + [f"{mode}-{m.upper()}" for mode in MODES for m in METRICS]
    lines = [header]
    for corpus, system, rep in rows:
        cells = [corpus, system]
        for mode in MODES:
            for m in METRICS:
                key = f"{mode}/{etype}/{m}"
                cells.append(rep.cell(key) if key in rep.mean else "-")
        lines.append(cells)
    widths = [max(len(r[i]) for r in lines) for i in range(len(header))]
    return "\n".join("  ".join(c.ljust(w) for c, w in zip(r, widths)).rstrip() for r in lines) + "\n"


def report_json(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=True) + "\n"


# -- cross-validation -------------------------------------------------------


def pooled_report(pairs, types) -> EvalReport:
    """Score several (gold, pred) dicts as one, pooling their counts."""
    gold, pred = {}, {}
    for g, p in pairs:
        gold.update(g)
        pred.update(p)
    return evaluate(gold, pred, types)


def cross_validate(docs, assignment: dict, system_factory, seeds, types):
    """Train on k-1 folds, predict the held-out fold, pool counts over folds.

    ``system_factory(train_docs, seed)`` returns a callable mapping a
    document to predicted mentions. Returns ``(MultiSeedReport, [EvalReport per seed])``.
    """
    folds = fold_lists(docs, assignment)
    per_seed = []
    for seed in seeds:
        pairs = []
        for i, held in enumerate(folds):
            if not held:
                continue
            train = [d for j, f in enumerate(folds) if j != i for d in f]
            predict = system_factory(train, seed)
            pairs.append(({d.id: d.mentions for d in held}, {d.id: list(predict(d)) for d in held}))
        per_seed.append(pooled_report(pairs, types))
    return aggregate_seeds(per_seed), per_seed

"""Comparison harness: terminology vs pure vs hybrid taggers over seeds.

An experiment is described by a flat config file (JSON or ``key=value``).
It either cross-validates over stratified folds of one corpus, or, when a
``test`` corpus is given, trains on the corpus and scores the test set.
Every system is run once per seed; the terminology system is seed-free
and runs once. Results are written as a text table, a JSON report with
all counts, and one JSON file per run.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .annotation import DEFAULT_TYPES
from .corpus import read_corpus, write_text
from .evaluation import (
    aggregate_seeds,
    check_report,
    evaluate,
    fold_lists,
    format_table,
    pooled_report,
    report_json,
    stratified_folds,
    subsample_to_entity_count,
)
from .gazetteer import (
    DEFAULT_TOP_N,
    annotate,
    build_matcher,
    filter_common_terms,
    load_frequency,
    load_stopwords,
    load_terms,
    parse_policy,
    top_n_threshold,
)
from .sections import load_heading_lexicon
from .tagger import (
    ConfigError,
    FeatureSource,
    TaggerConfig,
    TaggerSystem,
    load_embeddings,
    predict,
    read_flat_config,
    train_with_mean_epoch,
)

log = logging.getLogger(__name__)

SYSTEMS = ("terminology", "pure", "hybrid")
EPOCH_SELECTION = ("dev", "mean_epoch")
PATH_FIELDS = ("corpus", "test", "output", "dictionary", "stopwords", "frequency", "headings", "embeddings")


@dataclass
class ExperimentConfig:
    corpus: str = ""
    output: str = "experiment-out"
    corpus_name: str = ""
    test: str = ""
    systems: tuple = SYSTEMS
    types: tuple = DEFAULT_TYPES
    seeds: tuple = (0, 1, 2, 3, 4)
    folds: int = 6
    fold_seed: int = 0
    train_docs: int = 0        # keep only the first N training documents (0 = all)
    train_entities: int = 0    # seeded subsample reaching this many gold mentions (0 = off)
    dictionary: str = ""
    stopwords: str = ""
    frequency: str = ""
    top_n: int = DEFAULT_TOP_N
    headings: str = ""
    policy: str = "det"
    dev_fraction: float = 0.2
    epoch_selection: str = "dev"
    embeddings: str = ""
    tagger: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, d: dict, base_dir=None) -> "ExperimentConfig":
        d = dict(d)
        # flat files spell tagger overrides as tagger.<field>=value
        tagger = dict(d.pop("tagger", {}) or {})
        for key in [k for k in d if k.startswith("tagger.")]:
            tagger[key[len("tagger."):]] = d.pop(key)
        known = {f.name: f for f in fields(cls)}
        unknown = sorted(set(d) - set(known))
        if unknown:
            raise ConfigError(f"unknown experiment field(s): {', '.join(unknown)}")
        kw = {"tagger": tagger}
        for name, value in d.items():
            kw[name] = _coerce(name, value, known[name].default if name not in ("systems", "types", "seeds")
                               else ())
        cfg = cls(**kw)
        if base_dir is not None:
            for name in PATH_FIELDS:
                value = getattr(cfg, name)
                if value and not Path(value).is_absolute():
                    setattr(cfg, name, str(Path(base_dir) / value))
        cfg.validate()
        return cfg

    def validate(self):
        if not self.corpus:
            raise ConfigError("corpus: a corpus directory is required")
        if not self.systems:
            raise ConfigError("systems: at least one system is required")
        for s in self.systems:
            if s not in SYSTEMS:
                raise ConfigError(f"systems: unknown system {s!r} (expected one of {', '.join(SYSTEMS)})")
        if not self.seeds:
            raise ConfigError("seeds: at least one seed is required")
        if not self.test and self.folds < 2:
            raise ConfigError("folds: cross-validation needs at least 2 folds")
        if not 0.0 < self.dev_fraction < 1.0:
            raise ConfigError("dev_fraction: must lie in (0, 1)")
        if self.epoch_selection not in EPOCH_SELECTION:
            raise ConfigError(f"epoch_selection: expected one of {', '.join(EPOCH_SELECTION)}")
        if self.train_docs < 0 or self.train_entities < 0:
            raise ConfigError("train_docs/train_entities: must be non-negative")
        if self.train_docs and self.train_entities:
            raise ConfigError("train_entities: cannot be combined with train_docs")
        if self.top_n < 1:
            raise ConfigError("top_n: must be positive")
        try:
            parse_policy(self.policy)
        except ValueError as exc:
            raise ConfigError(f"policy: {exc}") from None
        needs_dict = {"terminology", "hybrid"} & set(self.systems)
        if needs_dict and not self.dictionary:
            raise ConfigError(f"dictionary: required by system {sorted(needs_dict)[0]!r}")
        try:
            tagger = self.tagger_config()
        except ConfigError as exc:
            raise ConfigError(f"tagger.{exc}") from None
        if "hybrid" in self.systems and not self.headings and self.hybrid_flags(tagger)[1]:
            raise ConfigError("headings: required by the section feature of system 'hybrid'")

    def tagger_config(self) -> TaggerConfig:
        d = dict(self.tagger)
        d.setdefault("entity_types", list(self.types))
        return TaggerConfig.from_dict(d)

    def hybrid_flags(self, tagger: TaggerConfig | None = None):
        """Feature switches of the hybrid system; both on unless the tagger block turns one off explicitly."""
        tagger = tagger or self.tagger_config()
        gaz = tagger.use_gazetteer_feature if "use_gazetteer_feature" in self.tagger else True
        sec = tagger.use_section_feature if "use_section_feature" in self.tagger else True
        if not (gaz or sec):
            raise ConfigError("tagger: the hybrid system needs at least one feature enabled")
        return gaz, sec

    def to_dict(self) -> dict:
        d = asdict(self)
        for k in ("systems", "types", "seeds"):
            d[k] = list(d[k])
        return d


def _coerce(name, value, default):
    try:
        if isinstance(default, tuple):
            if isinstance(value, str):
                value = [v.strip() for v in value.split(",") if v.strip()]
            elif isinstance(value, int) and name == "seeds":
                value = list(range(value))
            value = tuple(int(v) for v in value) if name == "seeds" else tuple(str(v) for v in value)
        elif isinstance(default, int):
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(f"expected an integer, got {value}")
            value = int(value)
        elif isinstance(default, float):
            value = float(value)
        elif isinstance(default, str):
            if not isinstance(value, (str, int, float)):
                raise ValueError(f"expected a string, got {type(value).__name__}")
            value = str(value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}: {exc}") from None
    return value


def load_experiment_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        raw = read_flat_config(path)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: expected a JSON object or key=value lines")
    return ExperimentConfig.from_dict(raw, base_dir=path.parent)


# -- resources and systems ----------------------------------------------------


@dataclass
class Resources:
    features: FeatureSource
    embeddings: tuple | None = None


def load_resources(cfg: ExperimentConfig) -> Resources:
    matcher = lexicon = None
    if cfg.dictionary:
        stop = load_stopwords(cfg.stopwords) if cfg.stopwords else frozenset()
        terms = load_terms(cfg.dictionary, types=cfg.types, stopwords=stop)
        if cfg.frequency:
            freq = load_frequency(cfg.frequency)
            terms = filter_common_terms(terms, freq, top_n_threshold(freq, cfg.top_n))
        matcher = build_matcher(terms)
    if cfg.headings:
        lexicon = load_heading_lexicon(cfg.headings)
    embeddings = load_embeddings(cfg.embeddings) if cfg.embeddings else None
    return Resources(FeatureSource(matcher, lexicon, cfg.policy), embeddings)


def split_dev(docs, fraction, seed):
    """Seeded ``(train, dev)`` split with at least one document on each side."""
    docs = list(docs)
    if len(docs) < 2:
        raise ValueError("need at least 2 documents to hold out a dev set")
    n_dev = min(max(1, int(round(fraction * len(docs)))), len(docs) - 1)
    order = np.random.default_rng(seed).permutation(len(docs))
    dev_idx = set(int(i) for i in order[:n_dev])
    return [d for i, d in enumerate(docs) if i not in dev_idx], [d for i, d in enumerate(docs) if i in dev_idx]


def tagger_config_for(cfg: ExperimentConfig, system: str, seed: int) -> TaggerConfig:
    base = cfg.tagger_config()
    gaz, sec = cfg.hybrid_flags() if system == "hybrid" else (False, False)
    return base.replace(seed=seed, use_gazetteer_feature=gaz, use_section_feature=sec)


def make_predictor(cfg: ExperimentConfig, res: Resources, system: str, train_docs, seed: int):
    """Train ``system`` on ``train_docs`` and return ``doc -> mentions``."""
    if system == "terminology":
        return lambda doc: annotate(res.features.matcher, doc.tdoc, cfg.policy)
    tcfg = tagger_config_for(cfg, system, seed)
    ts = TaggerSystem(tcfg, res.features, res.embeddings)
    if cfg.epoch_selection == "dev":
        tr, dev = split_dev(train_docs, cfg.dev_fraction, seed)
        ts.fit(tr, dev)
        return ts.predict
    k = max(2, cfg.folds - 1)
    inner = [f for f in fold_lists(train_docs, stratified_folds(train_docs, k, seed)) if f]
    result = train_with_mean_epoch(ts.new_model, inner, res.features)
    model = result.model
    return lambda doc: predict(model, doc.tdoc, *res.features.for_model(model, doc.tdoc))


def restrict_training(cfg: ExperimentConfig, docs, seed):
    if cfg.train_docs:
        return list(docs)[: cfg.train_docs]
    if cfg.train_entities:
        return subsample_to_entity_count(docs, cfg.train_entities, seed)
    return list(docs)


# -- running ----------------------------------------------------------------------


def run_system(cfg: ExperimentConfig, res: Resources, system: str, docs, test_docs=None, seed=0):
    """One seed of one system; returns the pooled EvalReport."""
    if test_docs is not None:
        train = restrict_training(cfg, docs, seed)
        predict_fn = make_predictor(cfg, res, system, train, seed)
        gold = {d.id: d.mentions for d in test_docs}
        return evaluate(gold, {d.id: list(predict_fn(d)) for d in test_docs}, cfg.types)
    folds = fold_lists(docs, stratified_folds(docs, cfg.folds, cfg.fold_seed), cfg.folds)
    pairs = []
    for i, held in enumerate(folds):
        if not held:
            continue
        rest = [d for j, f in enumerate(folds) if j != i for d in f]
        predict_fn = make_predictor(cfg, res, system, restrict_training(cfg, rest, seed), seed)
        pairs.append(({d.id: d.mentions for d in held}, {d.id: list(predict_fn(d)) for d in held}))
    return pooled_report(pairs, cfg.types)


def run_experiment(config, output=None) -> dict:
    """Run every configured system and seed; write ``table.txt``, ``report.json`` and ``runs/``.

    ``config`` is a path or an :class:`ExperimentConfig`. Returns the
    report dictionary (also written as JSON).
    """
    cfg = config if isinstance(config, ExperimentConfig) else load_experiment_config(config)
    out = Path(output or cfg.output)
    res = load_resources(cfg)
    docs = read_corpus(cfg.corpus, cfg.types)
    if not docs:
        raise ConfigError(f"corpus: no documents found in {cfg.corpus}")
    test_docs = read_corpus(cfg.test, cfg.types) if cfg.test else None
    name = cfg.corpus_name or Path(cfg.corpus).name

    report = {"corpus": name, "protocol": "holdout" if test_docs is not None else f"{cfg.folds}-fold",
              "config": cfg.to_dict(), "systems": {}}
    rows = []
    for system in cfg.systems:
        seeds = cfg.seeds[:1] if system == "terminology" else cfg.seeds
        per_seed = []
        for seed in seeds:
            log.info("running %s seed %d", system, seed)
            rep = run_system(cfg, res, system, docs, test_docs, seed)
            check_report(rep)
            run = {"system": system, "seed": seed, "report": rep.to_dict()}
            write_text(out / "runs" / f"{system}-seed{seed}.json", report_json(run))
            per_seed.append(rep)
        agg = aggregate_seeds(per_seed)
        report["systems"][system] = {
            "aggregate": agg.to_dict(),
            "per_seed": [{"seed": s, "report": r.to_dict()} for s, r in zip(seeds, per_seed)],
        }
        rows.append((name, system, agg))
    table = format_table(rows)
    write_text(out / "table.txt", table)
    write_text(out / "report.json", report_json(report))
    report["table"] = table
    return report

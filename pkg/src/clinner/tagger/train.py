"""Training loop, early stopping, mean-epoch retraining, prediction."""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..annotation import decode_iob, encode_document
from ..evaluation import exact_score
from ..gazetteer import annotate
from ..nn.optim import Adam
from ..sections import assign_section_feature, detect_headings
from .model import FeatureConfigMismatch, TaggerModel, featurize
from .vocab import build_vocab

log = logging.getLogger(__name__)


class NoTrainingData(ValueError):
    pass


@dataclass
class FeatureSource:
    """Produces the hybrid inputs of a document: gazetteer mentions and section ids."""
    matcher: object = None
    lexicon: object = None
    policy: str = "det"

    def gazetteer(self, tdoc):
        if self.matcher is None:
            raise FeatureConfigMismatch("gazetteer feature requested but no matcher configured")
        return annotate(self.matcher, tdoc, self.policy)

    def sections(self, tdoc):
        if self.lexicon is None:
            raise FeatureConfigMismatch("section feature requested but no heading lexicon configured")
        return assign_section_feature(tdoc, detect_headings(tdoc, self.lexicon), self.lexicon)

    def for_model(self, model: TaggerModel, tdoc):
        c = model.config
        gaz = self.gazetteer(tdoc) if c.use_gazetteer_feature else None
        sec = self.sections(tdoc) if c.use_section_feature else None
        return gaz, sec


@dataclass
class Example:
    doc: object
    sentences: list
    gold: list


def make_examples(model: TaggerModel, docs, features: FeatureSource | None = None, with_gold=True):
    features = features or FeatureSource()
    out = []
    for d in docs:
        gaz, sec = features.for_model(model, d.tdoc)
        sents = featurize(d.tdoc, model.vocab, model.labels, gaz, sec, model.config.max_word_chars)
        gold = []
        if with_gold:
            gold = [np.array(model.labels.encode(t), dtype=np.int64) for t in encode_document(d.tdoc, d.mentions)]
        out.append(Example(d, sents, gold))
    return out


@dataclass
class TrainReport:
    train_loss: list = field(default_factory=list)
    dev_f: list = field(default_factory=list)
    stopped_epoch: int = 0
    best_epoch: int = 0
    best_dev_f: float = float("nan")
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self):
        return {
            "train_loss": self.train_loss, "dev_f": self.dev_f, "stopped_epoch": self.stopped_epoch,
            "best_epoch": self.best_epoch, "best_dev_f": self.best_dev_f, "wall_time": self.wall_time,
        }


def predict_example(model: TaggerModel, ex: Example):
    tdoc = ex.doc.tdoc
    out = []
    for sent, fs in zip(tdoc.sentences, ex.sentences):
        out.extend(decode_iob(sent, model.decode(fs), tdoc.doc.text))
    return out


def predict(model: TaggerModel, tdoc, gaz_mentions=None, section_ids=None):
    c = model.config
    if c.use_gazetteer_feature != (gaz_mentions is not None):
        raise FeatureConfigMismatch(
            "gazetteer mentions must be given exactly when the model uses the gazetteer feature"
        )
    if c.use_section_feature != (section_ids is not None):
        raise FeatureConfigMismatch("section ids must be given exactly when the model uses the section feature")
    sents = featurize(tdoc, model.vocab, model.labels, gaz_mentions, section_ids, c.max_word_chars)
    out = []
    for sent, fs in zip(tdoc.sentences, sents):
        out.extend(decode_iob(sent, model.decode(fs), tdoc.doc.text))
    return out


def dev_f_score(model: TaggerModel, examples) -> float:
    gold = {ex.doc.id: ex.doc.mentions for ex in examples}
    pred = {ex.doc.id: predict_example(model, ex) for ex in examples}
    return exact_score(gold, pred, model.labels.types).f("exact")


def _snapshot(model):
    return {k: q.value.copy() for k, q in model.params.items()}


def _restore(model, snap):
    for k, q in model.params.items():
        np.copyto(q.value, snap[k])


def train(model: TaggerModel, train_docs, dev_docs=None, features=None, fixed_epochs=None,
          progress=None) -> TrainReport:
    """Adam on single sentences (seeded shuffle), dev exact-F early stopping.

    With ``fixed_epochs`` the model trains for exactly that many epochs and
    keeps the final weights; otherwise training runs until dev F has not
    improved for ``patience`` epochs (or ``max_epochs``) and the best
    epoch's weights are restored.
    """
    c = model.config
    if fixed_epochs is None and not dev_docs:
        raise ValueError("a non-empty dev set is required unless fixed_epochs is given")
    t0 = time.perf_counter()
    train_ex = make_examples(model, train_docs, features)
    pairs = [(fs, g) for ex in train_ex for fs, g in zip(ex.sentences, ex.gold) if len(fs)]
    if not pairs:
        raise NoTrainingData("no non-empty training sentences")
    dev_ex = make_examples(model, dev_docs, features) if dev_docs else []

    shuffle_rng, drop_rng = (np.random.default_rng(s) for s in np.random.SeedSequence(c.seed).spawn(2))
    opt = Adam(model.params.values(), lr=c.lr)
    weights = model.weight_params()
    lam = c.l2_lambda
    report = TrainReport()
    n_epochs = fixed_epochs if fixed_epochs is not None else c.max_epochs
    best_snap, bad = None, 0

    for epoch in range(1, n_epochs + 1):
        total = 0.0
        for idx in shuffle_rng.permutation(len(pairs)):
            fs, gold = pairs[idx]
            opt.zero_grad()
            loss = model.loss_and_grad(fs, gold, train=True, rng=drop_rng)
            if lam:
                for q in weights:
                    q.grad += (2.0 * lam) * q.value
            if not math.isfinite(loss):
                raise FloatingPointError(f"non-finite loss at epoch {epoch}")
            total += loss
            opt.step()
        penalty = lam * sum(float(np.sum(q.value * q.value)) for q in weights)
        report.train_loss.append(total / len(pairs) + penalty)
        report.stopped_epoch = epoch
        if not all(np.isfinite(q.value).all() for q in model.params.values()):
            raise FloatingPointError(f"non-finite parameters after epoch {epoch}")

        if dev_ex:
            f = dev_f_score(model, dev_ex)
            report.dev_f.append(f)
            if progress:
                progress(epoch, report.train_loss[-1], f)
            if fixed_epochs is None:
                if best_snap is None or f > report.best_dev_f:
                    report.best_dev_f, report.best_epoch = f, epoch
                    best_snap, bad = _snapshot(model), 0
                else:
                    bad += 1
                    if bad >= max(c.patience, 1):
                        break
        elif progress:
            progress(epoch, report.train_loss[-1], None)

    if fixed_epochs is None:
        _restore(model, best_snap)
    else:
        report.best_epoch = report.stopped_epoch
        if report.dev_f:
            report.best_dev_f = report.dev_f[-1]
    report.wall_time = time.perf_counter() - t0
    log.info("trained %d epochs (best %d, dev F %.4f) in %.1fs", report.stopped_epoch,
             report.best_epoch, report.best_dev_f, report.wall_time)
    return report


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


@dataclass
class MeanEpochResult:
    model: TaggerModel
    best_epochs: list
    n_epochs: int
    reports: list


def train_with_mean_epoch(model_factory, folds, features=None) -> MeanEpochResult:
    """Cross-validate to find each fold's best epoch, then retrain on everything.

    ``model_factory(train_docs)`` returns a fresh TaggerModel. The final
    model trains on all folds for ``round(mean(best epochs))`` epochs
    (halves round up) without early stopping.
    """
    folds = [list(f) for f in folds]
    if len(folds) < 2:
        raise ValueError("train_with_mean_epoch needs at least 2 folds")
    best, reports = [], []
    for i, held in enumerate(folds):
        rest = [d for j, f in enumerate(folds) if j != i for d in f]
        model = model_factory(rest)
        rep = train(model, rest, held, features)
        best.append(rep.best_epoch)
        reports.append(rep)
    n = max(round_half_up(sum(best) / len(best)), 1)
    everything = [d for f in folds for d in f]
    final = model_factory(everything)
    reports.append(train(final, everything, None, features, fixed_epochs=n))
    return MeanEpochResult(final, best, n, reports)


class TaggerSystem:
    """A tagger plus whatever produces its hybrid features; the unit the experiment harness trains."""

    def __init__(self, config, features: FeatureSource | None = None, embeddings=None, n_sections=None):
        self.config = config
        self.features = features or FeatureSource()
        self.embeddings = embeddings
        if n_sections is None and self.features.lexicon is not None:
            n_sections = self.features.lexicon.n_classes
        self.n_sections = n_sections
        self.model = None
        self.report = None

    def new_model(self, train_docs, seed=None) -> TaggerModel:
        cfg = self.config if seed is None else self.config.replace(seed=seed)
        extra = self.embeddings[0] if self.embeddings is not None else ()
        vocab = build_vocab([d.tdoc for d in train_docs], extra)
        return TaggerModel(cfg, vocab, self.n_sections, self.embeddings)

    def fit(self, train_docs, dev_docs=None, seed=None, fixed_epochs=None, progress=None):
        self.model = self.new_model(train_docs, seed)
        self.report = train(self.model, train_docs, dev_docs, self.features, fixed_epochs, progress)
        return self

    def predict(self, doc):
        gaz, sec = self.features.for_model(self.model, doc.tdoc)
        return predict(self.model, doc.tdoc, gaz, sec)

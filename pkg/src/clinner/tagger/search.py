"""Seeded random hyperparameter search scored by cross-validated dev exact-F."""
from __future__ import annotations

import logging
import math

import numpy as np

from ..evaluation import pooled_report
from .config import TaggerConfig
from .train import TaggerSystem

log = logging.getLogger(__name__)


def _sample_axis(rng, spec):
    if isinstance(spec, list):
        return spec[int(rng.integers(len(spec)))]
    if isinstance(spec, tuple):
        spec = {"low": spec[0], "high": spec[1]}
    lo, hi = spec["low"], spec["high"]
    if spec.get("log"):
        return float(math.exp(rng.uniform(math.log(lo), math.log(hi))))
    if isinstance(lo, int) and isinstance(hi, int):
        return int(rng.integers(lo, hi + 1))
    return float(rng.uniform(lo, hi))


def sample_config(space: dict, base: TaggerConfig, rng) -> TaggerConfig:
    """Draw one config: lists are uniform choices, ``(low, high)`` or
    ``{"low", "high", "log"}`` are uniform (log-uniform) ranges."""
    return base.replace(**{name: _sample_axis(rng, space[name]) for name in sorted(space)})


def cv_score(config, folds, features=None, embeddings=None) -> float:
    pairs = []
    for i, held in enumerate(folds):
        rest = [d for j, f in enumerate(folds) if j != i for d in f]
        system = TaggerSystem(config, features, embeddings).fit(rest, held)
        pairs.append(({d.id: d.mentions for d in held}, {d.id: system.predict(d) for d in held}))
    return pooled_report(pairs, config.entity_types).f("exact")


def random_search(space: dict, folds, budget: int, seed=0, base: TaggerConfig | None = None,
                  features=None, embeddings=None, scorer=None):
    """Returns ``(best_config, trials)``; ``trials`` lists every sampled config with its score.

    ``scorer(config, folds)`` defaults to cross-validated dev exact-F.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    folds = [list(f) for f in folds]
    base = base or TaggerConfig()
    rng = np.random.default_rng(seed)
    scorer = scorer or (lambda cfg, fl: cv_score(cfg, fl, features, embeddings))
    trials = []
    best, best_score = None, -math.inf
    for trial in range(budget):
        cfg = sample_config(space, base, rng)
        score = scorer(cfg, folds)
        trials.append({"trial": trial, "score": score, "params": {k: getattr(cfg, k) for k in sorted(space)}})
        log.info("trial %d: score %.4f %s", trial, score, trials[-1]["params"])
        if score > best_score:
            best, best_score = cfg, score
    return best, trials

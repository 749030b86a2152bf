"""Linear-chain CRF over an IOB label set."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .annotation import LabelSet

MASKED = -1e4


class LengthMismatch(ValueError):
    pass


class InstanceTooLarge(ValueError):
    pass


@dataclass
class Transitions:
    """Pairwise scores ``trans[prev, next]`` plus start and stop scores.

    ``mask`` marks structurally forbidden entries (pinned to ``MASKED``):
    ``(trans_mask, start_mask)``, or ``None`` for an unconstrained CRF.
    """
    trans: np.ndarray
    start: np.ndarray
    stop: np.ndarray
    mask: tuple | None = None

    @property
    def n_labels(self) -> int:
        return self.trans.shape[0]

    @classmethod
    def zeros(cls, n_labels: int):
        return cls(np.zeros((n_labels, n_labels)), np.zeros(n_labels), np.zeros(n_labels))

    @classmethod
    def for_labels(cls, labels: LabelSet, constrained: bool = True):
        tr = cls.zeros(len(labels))
        if constrained:
            tr.mask = iob_mask(labels)
            tr.apply_mask()
        return tr

    def apply_mask(self):
        if self.mask is not None:
            tmask, smask = self.mask
            self.trans[tmask] = MASKED
            self.start[smask] = MASKED


def iob_mask(labels: LabelSet):
    """Forbidden moves: anything but ``B-t``/``I-t`` into ``I-t``, and starting on ``I-t``."""
    K = len(labels)
    tmask = np.zeros((K, K), dtype=bool)
    smask = np.zeros(K, dtype=bool)
    for t in labels.types:
        i_t = labels.index[f"I-{t}"]
        allowed = {labels.index[f"B-{t}"], i_t}
        for prev in range(K):
            if prev not in allowed:
                tmask[prev, i_t] = True
        smask[i_t] = True
    return tmask, smask


def _check(E, tags=None):
    E = np.ascontiguousarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] == 0:
        raise ValueError(f"emissions must be a non-empty (T, K) matrix, got shape {E.shape}")
    if tags is not None and len(tags) != E.shape[0]:
        raise LengthMismatch(f"{len(tags)} tags for {E.shape[0]} emission rows")
    return E


def score_sequence(E, tr: Transitions, tags) -> float:
    E = _check(E, tags)
    tags = [int(t) for t in tags]
    s = tr.start[tags[0]] + tr.stop[tags[-1]]
    for t, y in enumerate(tags):
        s += E[t, y]
    for a, b in zip(tags, tags[1:]):
        s += tr.trans[a, b]
    return float(s)


def log_partition(E, tr: Transitions) -> float:
    E = _check(E)
    _, logz = kernels.crf_forward(E, tr.trans, tr.start, tr.stop)
    return float(logz)


def crf_nll(E, tr: Transitions, gold):
    """Negative log-likelihood of ``gold`` and its exact gradients.

    Returns ``(loss, dE, (dtrans, dstart, dstop))``. Gradients on masked
    entries are zeroed since those entries are not free parameters.
    """
    E = _check(E, gold)
    gold = np.asarray(gold, dtype=np.int64)
    logz, unary, pair = kernels.crf_marginals(E, tr.trans, tr.start, tr.stop)
    loss = float(logz) - score_sequence(E, tr, gold)
    T = len(gold)
    dE = unary.copy()
    dE[np.arange(T), gold] -= 1.0
    dtrans = pair
    np.subtract.at(dtrans, (gold[:-1], gold[1:]), 1.0)
    dstart = unary[0].copy()
    dstart[gold[0]] -= 1.0
    dstop = unary[-1].copy()
    dstop[gold[-1]] -= 1.0
    if tr.mask is not None:
        dtrans[tr.mask[0]] = 0.0
        dstart[tr.mask[1]] = 0.0
    return max(loss, 0.0), dE, (dtrans, dstart, dstop)


def viterbi_decode(E, tr: Transitions):
    E = _check(E)
    path, score = kernels.crf_viterbi(E, tr.trans, tr.start, tr.stop)
    return [int(p) for p in path], float(score)


def brute_force(E, tr: Transitions, max_paths: int = 10**6):
    """Enumerate every label sequence: ``(logZ, best_tags, best_score)``. Test oracle only."""
    E = np.asarray(E, dtype=np.float64)
    if E.ndim != 2 or E.shape[0] == 0:
        raise ValueError("brute force needs at least one position")
    T, K = E.shape
    if K ** T > max_paths:
        raise InstanceTooLarge(f"{K}^{T} sequences exceed the enumeration limit {max_paths}")
    scores = []
    best, best_score = None, -math.inf
    for tags in itertools.product(range(K), repeat=T):
        s = score_sequence(E, tr, tags)
        scores.append(s)
        if s > best_score:
            best, best_score = list(tags), s
    m = max(scores)
    logz = m + math.log(math.fsum(math.exp(s - m) for s in scores))
    return logz, best, best_score

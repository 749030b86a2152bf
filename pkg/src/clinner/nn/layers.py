"""Layers with hand-written forward and backward passes.

Everything is float64. Forward functions that feed a backward pass return
``(output, cache)``; the matching ``*_backward`` consumes that cache.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import kernels


class ShapeMismatch(ValueError):
    pass


class EmptySequence(ValueError):
    pass


class Parameter:
    __slots__ = ("name", "value", "grad", "decay")

    def __init__(self, name: str, value, decay: bool = False):
        self.name = name
        self.value = np.ascontiguousarray(value, dtype=np.float64)
        self.grad = np.zeros_like(self.value)
        # whether the L2 penalty applies
        self.decay = decay

    @property
    def shape(self):
        return self.value.shape

    def zero_grad(self):
        self.grad.fill(0.0)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


def uniform_init(rng, shape, fan_in=None):
    fan_in = shape[-1] if fan_in is None else fan_in
    bound = np.sqrt(3.0 / fan_in)
    return rng.uniform(-bound, bound, size=shape)


# -- GRU --------------------------------------------------------------------


@dataclass
class GruParams:
    """Stacked gate weights, order (update, reset, candidate)."""
    W: np.ndarray  # (3, d_h, d_in)
    U: np.ndarray  # (3, d_h, d_h)
    b: np.ndarray  # (3, d_h)

    def __post_init__(self):
        if self.W.ndim != 3 or self.W.shape[0] != 3:
            raise ShapeMismatch(f"W must be (3, d_h, d_in), got {self.W.shape}")
        d_h = self.W.shape[1]
        if self.U.shape != (3, d_h, d_h) or self.b.shape != (3, d_h):
            raise ShapeMismatch(f"inconsistent GRU shapes W{self.W.shape} U{self.U.shape} b{self.b.shape}")

    @property
    def d_in(self):
        return self.W.shape[2]

    @property
    def d_h(self):
        return self.W.shape[1]

    W_z = property(lambda self: self.W[0])
    W_r = property(lambda self: self.W[1])
    W_h = property(lambda self: self.W[2])
    U_z = property(lambda self: self.U[0])
    U_r = property(lambda self: self.U[1])
    U_h = property(lambda self: self.U[2])
    b_z = property(lambda self: self.b[0])
    b_r = property(lambda self: self.b[1])
    b_h = property(lambda self: self.b[2])

    @classmethod
    def init(cls, rng, d_in, d_h):
        W = np.stack([uniform_init(rng, (d_h, d_in)) for _ in range(3)])
        U = np.stack([uniform_init(rng, (d_h, d_h)) for _ in range(3)])
        return cls(W, U, np.zeros((3, d_h)))


def _sigmoid(a):
    return 0.5 * (1.0 + np.tanh(0.5 * a))


def gru_cell_forward(x, h_prev, p: GruParams):
    x = np.asarray(x, dtype=np.float64)
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if x.shape != (p.d_in,) or h_prev.shape != (p.d_h,):
        raise ShapeMismatch(f"x{x.shape}, h_prev{h_prev.shape} do not fit GRU ({p.d_in} -> {p.d_h})")
    z = _sigmoid(p.W_z @ x + p.U_z @ h_prev + p.b_z)
    r = _sigmoid(p.W_r @ x + p.U_r @ h_prev + p.b_r)
    c = np.tanh(p.W_h @ x + p.U_h @ (r * h_prev) + p.b_h)
    h = (1.0 - z) * c + z * h_prev
    return h, (x, h_prev, z, r, c)


def gru_cell(x, h_prev, p: GruParams):
    return gru_cell_forward(x, h_prev, p)[0]


def gru_cell_backward(dh, cache, p: GruParams):
    """Returns ``(dx, dh_prev, GruParams-shaped gradients)`` for one step."""
    x, hp, z, r, c = cache
    dc = dh * (1.0 - z)
    dz = dh * (hp - c)
    dhp = dh * z
    dac = dc * (1.0 - c * c)
    drh = p.U_h.T @ dac
    dhp = dhp + drh * r
    daz = dz * z * (1.0 - z)
    dar = drh * hp * r * (1.0 - r)
    dW = np.stack([np.outer(daz, x), np.outer(dar, x), np.outer(dac, x)])
    dU = np.stack([np.outer(daz, hp), np.outer(dar, hp), np.outer(dac, r * hp)])
    db = np.stack([daz, dar, dac])
    dx = p.W_z.T @ daz + p.W_r.T @ dar + p.W_h.T @ dac
    dhp = dhp + p.U_z.T @ daz + p.U_r.T @ dar
    return dx, dhp, GruParams(dW, dU, db)


def gru_sequence(X, p: GruParams, reverse=False):
    X = np.ascontiguousarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptySequence("GRU input must be a non-empty (T, d_in) matrix")
    if X.shape[1] != p.d_in:
        raise ShapeMismatch(f"input dim {X.shape[1]} != GRU input dim {p.d_in}")
    H, Z, R, C, HP = kernels.gru_seq_forward(X, p.W, p.U, p.b, reverse)
    return H, (X, Z, R, C, HP, reverse)


def gru_sequence_backward(dH, cache, p: GruParams):
    X, Z, R, C, HP, reverse = cache
    dX, dW, dU, db = kernels.gru_seq_backward(
        np.ascontiguousarray(dH), X, p.W, p.U, Z, R, C, HP, reverse
    )
    return dX, GruParams(dW, dU, db)


def bigru_forward(seq, p_fwd: GruParams, p_bwd: GruParams):
    X = np.asarray(seq, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] == 0:
        raise EmptySequence("biGRU needs a non-empty sequence")
    Hf, cf = gru_sequence(X, p_fwd, reverse=False)
    Hb, cb = gru_sequence(X, p_bwd, reverse=True)
    return np.concatenate([Hf, Hb], axis=1), (cf, cb, p_fwd.d_h)


def bigru(seq, p_fwd: GruParams, p_bwd: GruParams):
    """Per position: forward state after x_1..x_t next to backward state after x_T..x_t."""
    return bigru_forward(seq, p_fwd, p_bwd)[0]


def bigru_backward(dOut, cache, p_fwd: GruParams, p_bwd: GruParams):
    cf, cb, d_h = cache
    dXf, gf = gru_sequence_backward(dOut[:, :d_h], cf, p_fwd)
    dXb, gb = gru_sequence_backward(dOut[:, d_h:], cb, p_bwd)
    return dXf + dXb, gf, gb


# -- char CNN ---------------------------------------------------------------


def char_cnn_batch_forward(Xc, lengths, filters, bias):
    """Batched char CNN over padded tokens ``Xc`` (N, L, d_c); ``filters`` (d_c, 3, d_f)."""
    if filters.ndim != 3 or filters.shape[1] != 3 or filters.shape[0] != Xc.shape[2]:
        raise ShapeMismatch(f"filters {filters.shape} do not fit char embeddings {Xc.shape}")
    lengths = np.asarray(lengths, dtype=np.int64)
    if lengths.min() < 3:
        raise ShapeMismatch("every token needs at least 3 (padded) characters")
    Fk = np.ascontiguousarray(filters.transpose(1, 0, 2))
    out, arg = kernels.char_conv_forward(np.ascontiguousarray(Xc), lengths, Fk, bias)
    return out, (Xc, arg, Fk)


def char_cnn_batch_backward(dOut, cache):
    Xc, arg, Fk = cache
    dXc, dFk, dbias = kernels.char_conv_backward(np.ascontiguousarray(dOut), Xc, arg, Fk)
    return dXc, np.ascontiguousarray(dFk.transpose(1, 0, 2)), dbias


def char_cnn(char_embs, filters, bias):
    char_embs = np.asarray(char_embs, dtype=np.float64)
    if char_embs.ndim != 2:
        raise ShapeMismatch(f"char embeddings must be (L, d_c), got {char_embs.shape}")
    out, _ = char_cnn_batch_forward(char_embs[None], [char_embs.shape[0]], filters, bias)
    return out[0]


# -- dense pieces -------------------------------------------------------------


def linear(x, W, b):
    """``W`` is (out, in); works row-wise on a (T, in) batch."""
    if np.shape(x)[-1] != W.shape[1]:
        raise ShapeMismatch(f"input dim {np.shape(x)[-1]} != layer input dim {W.shape[1]}")
    return x @ W.T + b


def linear_backward(dy, x, W):
    """Returns ``(dx, dW, db)``."""
    if dy.ndim == 1:
        return W.T @ dy, np.outer(dy, x), dy
    return dy @ W, dy.T @ x, dy.sum(axis=0)


def dropout(x, rate, rng=None, train=True):
    """Inverted dropout. Returns ``(y, mask)``; ``mask`` is None when inactive."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if not train or rate == 0.0:
        return x, None
    mask = (rng.random(np.shape(x)) >= rate) / (1.0 - rate)
    return x * mask, mask


def dropout_backward(dy, mask):
    return dy if mask is None else dy * mask


def l2_penalty(weights, lam):
    """``lam * sum ||W||^2`` and the per-weight gradients."""
    total = 0.0
    grads = []
    for w in weights:
        total += float(np.sum(w * w))
        grads.append(2.0 * lam * w)
    return lam * total, grads

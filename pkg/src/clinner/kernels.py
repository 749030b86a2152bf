"""Hot loops: GRU sequence pass, width-3 char convolution, CRF dynamic programs, Adam update.

Each kernel is written against the numba-compatible subset of numpy and
compiled by :func:`clinner._jit.njit` unless JIT is disabled. Where an
explicit loop is the fast form for numba but slow when interpreted, a
vectorized numpy twin is registered as the fallback. Arrays must
be C-contiguous float64 (int64 for indices).
"""
import numpy as np

from ._jit import njit


@njit
def sigmoid(a):
    # tanh form never overflows
    return 0.5 * (1.0 + np.tanh(0.5 * a))


@njit
def logsumexp(v):
    m = np.max(v)
    if m == -np.inf:
        return -np.inf
    return m + np.log(np.sum(np.exp(v - m)))


# -- GRU ------------------------------------------------------------------


@njit
def gru_seq_forward(X, W, U, b, reverse):
    """Run one GRU direction over ``X`` (T, d_in).

    ``W`` (3, d_h, d_in), ``U`` (3, d_h, d_h), ``b`` (3, d_h), gate order
    update, reset, candidate. Returns states H plus the gate activations
    and previous states needed by the backward pass, all indexed by the
    original time position.
    """
    T = X.shape[0]
    dh = U.shape[1]
    H = np.zeros((T, dh))
    Z = np.zeros((T, dh))
    R = np.zeros((T, dh))
    C = np.zeros((T, dh))
    HP = np.zeros((T, dh))
    h = np.zeros(dh)
    # input projections for all steps at once; only the recurrence is sequential
    XZ = np.dot(X, W[0].T) + b[0]
    XR = np.dot(X, W[1].T) + b[1]
    XC = np.dot(X, W[2].T) + b[2]
    for s in range(T):
        t = T - 1 - s if reverse else s
        z = sigmoid(XZ[t] + np.dot(U[0], h))
        r = sigmoid(XR[t] + np.dot(U[1], h))
        c = np.tanh(XC[t] + np.dot(U[2], r * h))
        HP[t] = h
        h = (1.0 - z) * c + z * h
        H[t] = h
        Z[t] = z
        R[t] = r
        C[t] = c
    return H, Z, R, C, HP


@njit
def gru_seq_backward(dH, X, W, U, Z, R, C, HP, reverse):
    """Backpropagate ``dH`` (gradient w.r.t. every output state) through time."""
    T = X.shape[0]
    dh_dim = U.shape[1]
    DA = np.zeros((3, T, dh_dim))  # pre-activation grads per gate
    carry = np.zeros(dh_dim)
    for s in range(T):
        # walk in reverse processing order
        t = s if reverse else T - 1 - s
        z, r, c, hp = Z[t], R[t], C[t], HP[t]
        g = dH[t] + carry
        dac = g * (1.0 - z) * (1.0 - c * c)
        drh = np.dot(dac, U[2])
        daz = g * (hp - c) * z * (1.0 - z)
        dar = drh * hp * r * (1.0 - r)
        DA[0, t] = daz
        DA[1, t] = dar
        DA[2, t] = dac
        carry = g * z + drh * r + np.dot(daz, U[0]) + np.dot(dar, U[1])
    dW = np.empty(W.shape)
    dU = np.empty(U.shape)
    db = np.empty((3, dh_dim))
    dX = np.zeros(X.shape)
    RH = R * HP
    for k in range(3):
        dW[k] = np.dot(DA[k].T, X)
        dU[k] = np.dot(DA[k].T, RH if k == 2 else HP)
        db[k] = DA[k].sum(axis=0)
        dX += np.dot(DA[k], W[k])
    return dX, dW, dU, db


def _adam_update_numpy(value, grad, m, v, beta1, beta2, alpha, eps_hat):
    m *= beta1
    m += (1.0 - beta1) * grad
    v *= beta2
    v += (1.0 - beta2) * (grad * grad)
    value -= alpha * m / (np.sqrt(v) + eps_hat)


@njit(fallback=_adam_update_numpy)
def adam_update(value, grad, m, v, beta1, beta2, alpha, eps_hat):
    """In-place Adam moment and parameter update over flat arrays."""
    for i in range(value.shape[0]):
        g = grad[i]
        m[i] = beta1 * m[i] + (1.0 - beta1) * g
        v[i] = beta2 * v[i] + (1.0 - beta2) * g * g
        value[i] -= alpha * m[i] / (np.sqrt(v[i]) + eps_hat)


# -- char CNN -------------------------------------------------------------


@njit
def char_conv_forward(Xc, lengths, Fk, bias):
    """Width-3 convolution + max over positions for every token.

    ``Xc`` (N, L, d_c) padded char embeddings, ``lengths`` valid lengths
    (each >= 3), ``Fk`` (3, d_c, d_f). Ties in the max keep the first
    position.
    """
    N = Xc.shape[0]
    df = Fk.shape[2]
    out = np.empty((N, df))
    arg = np.zeros((N, df), dtype=np.int64)
    for n in range(N):
        for p in range(lengths[n] - 2):
            resp = bias + np.dot(Xc[n, p], Fk[0]) + np.dot(Xc[n, p + 1], Fk[1]) + np.dot(Xc[n, p + 2], Fk[2])
            for f in range(df):
                if p == 0 or resp[f] > out[n, f]:
                    out[n, f] = resp[f]
                    arg[n, f] = p
    return out, arg


def _char_conv_backward_numpy(dOut, Xc, arg, Fk):
    N = Xc.shape[0]
    dXc = np.zeros(Xc.shape)
    dFk = np.zeros(Fk.shape)
    rows = np.broadcast_to(np.arange(N)[:, None], arg.shape)
    for k in range(3):
        pos = arg + k
        dFk[k] = np.einsum("nfc,nf->cf", Xc[rows, pos], dOut)
        np.add.at(dXc, (rows, pos), dOut[:, :, None] * Fk[k].T[None])
    return dXc, dFk, dOut.sum(axis=0)


@njit(fallback=_char_conv_backward_numpy)
def char_conv_backward(dOut, Xc, arg, Fk):
    N = Xc.shape[0]
    dc = Fk.shape[1]
    df = Fk.shape[2]
    dXc = np.zeros(Xc.shape)
    dFk = np.zeros(Fk.shape)
    dbias = np.zeros(df)
    for n in range(N):
        for f in range(df):
            g = dOut[n, f]
            dbias[f] += g
            if g == 0.0:
                continue
            p = arg[n, f]
            for k in range(3):
                for c in range(dc):
                    dFk[k, c, f] += Xc[n, p + k, c] * g
                    dXc[n, p + k, c] += Fk[k, c, f] * g
    return dXc, dFk, dbias


# -- linear-chain CRF -----------------------------------------------------


@njit
def crf_forward(E, trans, start, stop):
    """Log-space alphas and log-partition."""
    T, K = E.shape
    alpha = np.empty((T, K))
    alpha[0] = start + E[0]
    for t in range(1, T):
        for j in range(K):
            alpha[t, j] = logsumexp(alpha[t - 1] + trans[:, j]) + E[t, j]
    return alpha, logsumexp(alpha[T - 1] + stop)


@njit
def crf_backward(E, trans, stop):
    T, K = E.shape
    beta = np.empty((T, K))
    beta[T - 1] = stop
    for t in range(T - 2, -1, -1):
        v = E[t + 1] + beta[t + 1]
        for i in range(K):
            beta[t, i] = logsumexp(trans[i] + v)
    return beta


@njit
def crf_marginals(E, trans, start, stop):
    """Log-partition, unary marginals (T, K) and summed pairwise marginals (K, K)."""
    T, K = E.shape
    alpha, logz = crf_forward(E, trans, start, stop)
    beta = crf_backward(E, trans, stop)
    unary = np.exp(alpha + beta - logz)
    pair = np.zeros((K, K))
    for t in range(T - 1):
        v = E[t + 1] + beta[t + 1] - logz
        for i in range(K):
            pair[i] += np.exp(alpha[t, i] + trans[i] + v)
    return logz, unary, pair


@njit
def crf_viterbi(E, trans, start, stop):
    T, K = E.shape
    delta = start + E[0]
    back = np.zeros((T, K), dtype=np.int64)
    for t in range(1, T):
        nxt = np.empty(K)
        for j in range(K):
            best = 0
            bval = delta[0] + trans[0, j]
            for i in range(1, K):
                v = delta[i] + trans[i, j]
                if v > bval:
                    bval = v
                    best = i
            back[t, j] = best
            nxt[j] = bval + E[t, j]
        delta = nxt
    final = delta + stop
    last = 0
    for j in range(1, K):
        if final[j] > final[last]:
            last = j
    path = np.empty(T, dtype=np.int64)
    path[T - 1] = last
    for t in range(T - 1, 0, -1):
        path[t - 1] = back[t, path[t]]
    return path, final[last]

"""Central finite-difference gradient checking."""
import numpy as np


def relative_error(analytic, numeric):
    a = np.asarray(analytic, dtype=np.float64)
    n = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(a), np.abs(n)), 1e-8)
    return np.abs(a - n) / denom


def numeric_grad(loss_fn, x, eps=1e-5):
    """Central differences of ``loss_fn()`` w.r.t. array ``x``, perturbed in place."""
    g = np.zeros_like(x)
    flat = x.reshape(-1)
    gflat = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + eps
        up = loss_fn()
        flat[i] = orig - eps
        down = loss_fn()
        flat[i] = orig
        gflat[i] = (up - down) / (2.0 * eps)
    return g


def grad_check(model_fn, params, eps=1e-5):
    """Max relative error between analytic and numeric gradients.

    ``params`` maps names to arrays that ``model_fn`` reads; it is called
    with no arguments and returns ``(loss, {name: grad})``. Arrays are
    perturbed in place and restored.
    """
    _, analytic = model_fn()
    worst = 0.0
    for name, x in params.items():
        num = numeric_grad(lambda: model_fn()[0], x, eps)
        err = relative_error(analytic[name], num)
        if err.size:
            worst = max(worst, float(err.max()))
    return worst

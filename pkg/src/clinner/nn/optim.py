"""Adam with bias-corrected moments."""
import numpy as np

from .. import kernels


class Adam:
    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self.m = [np.zeros_like(p.value) for p in self.params]
        self.v = [np.zeros_like(p.value) for p in self.params]

    def step(self):
        self.step_count += 1
        t = self.step_count
        b1, b2 = self.beta1, self.beta2
        # fold both bias corrections into the step size
        alpha = self.lr * np.sqrt(1.0 - b2 ** t) / (1.0 - b1 ** t)
        eps_hat = self.eps * np.sqrt(1.0 - b2 ** t)
        for p, m, v in zip(self.params, self.m, self.v):
            kernels.adam_update(p.value.reshape(-1), p.grad.reshape(-1), m.reshape(-1), v.reshape(-1),
                                b1, b2, alpha, eps_hat)

    def zero_grad(self):
        for p in self.params:
            p.grad.fill(0.0)


def adam_step(params, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """Functional form on plain arrays; ``state`` is ``{"t": int, "m": [...], "v": [...]}``, updated in place."""
    if not state:
        state.update(t=0, m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params])
    state["t"] += 1
    t = state["t"]
    for p, g, m, v in zip(params, grads, state["m"], state["v"]):
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        m_hat = m / (1.0 - beta1 ** t)
        v_hat = v / (1.0 - beta2 ** t)
        p -= lr * m_hat / (np.sqrt(v_hat) + eps)

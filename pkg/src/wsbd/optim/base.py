"""Gradient optimizers with a coordinate mask on the applied update."""
from __future__ import annotations

import numpy as np


class SGD:
    kind = "sgd"

    def __init__(self, lr: float = 0.1):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr

    def update(self, grad: np.ndarray) -> np.ndarray:
        return grad


class Adam:
    """Adam with bias correction; ``amsgrad=True`` keeps the running max of v."""

    kind = "adam"

    def __init__(self, lr: float = 0.01, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8,
                 amsgrad: bool = False):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.amsgrad = amsgrad
        self.m = None
        self.v = None
        self.v_max = None
        self.t = 0

    def update(self, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(grad)
            self.v = np.zeros_like(grad)
            self.v_max = np.zeros_like(grad)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad**2
        m_hat = self.m / (1 - self.beta1**self.t)
        if self.amsgrad:
            self.v_max = np.maximum(self.v_max, self.v)
            v_hat = self.v_max / (1 - self.beta2**self.t)
        else:
            v_hat = self.v / (1 - self.beta2**self.t)
        return m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, **kwargs):
    kind = kind.lower()
    if kind == "sgd":
        return SGD(**{k: v for k, v in kwargs.items() if k == "lr"})
    if kind == "adam":
        return Adam(**kwargs)
    raise ValueError(f"unknown base optimizer {kind!r}")


def masked_step(state, params: np.ndarray, grad, mask=None):
    """One update ``theta - lr * (mask * u)``; frozen coordinates are left untouched.

    The base optimizer sees the masked gradient (zeros where frozen), so
    Adam's moments and step counter still advance every call.
    """
    values = np.asarray(getattr(grad, "values", grad), dtype=float)
    if mask is None:
        mask = getattr(grad, "active_mask", np.ones(len(values), dtype=bool))
    mask = np.asarray(mask, dtype=bool)
    g = np.where(mask, values, 0.0)
    u = state.update(g)
    new = np.array(params, dtype=float, copy=True)
    new[mask] -= state.lr * u[mask]
    return new, state

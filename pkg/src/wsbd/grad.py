"""Parameter-shift gradients, a finite-difference oracle, and the
forward-pass / shot ledger."""
from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import UnsupportedGateError

SECONDS_PER_FP = 4.74


@dataclass
class EvalCounter:
    """Running totals of circuit forward passes and shots.

    ``shots_per_pass`` is what one forward pass costs in shots (0 in the
    infinite-shot mode).
    """

    seconds_per_fp: float = SECONDS_PER_FP
    shots_per_pass: int = 0
    forward_passes: int = 0
    shots_consumed: int = 0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def charge(self, passes: int = 1):
        if passes < 0:
            raise ValueError("cannot charge a negative number of passes")
        with self._lock:
            self.forward_passes += passes
            self.shots_consumed += passes * self.shots_per_pass

    @property
    def wall_clock_estimate_s(self) -> float:
        return self.forward_passes * self.seconds_per_fp

    def snapshot(self, step: int) -> dict:
        return {"step": step, "forward_passes": self.forward_passes, "shots": self.shots_consumed,
                "wall_estimate_s": self.wall_clock_estimate_s}


CSV_COLUMNS = ("step", "forward_passes", "shots", "wall_estimate_s")


def _identity(outputs: np.ndarray) -> float:
    return float(np.sum(outputs))


def _ones(outputs: np.ndarray) -> np.ndarray:
    return np.ones_like(outputs)


@dataclass
class Objective:
    """A cost ``loss(outputs(theta))``.

    ``outputs`` returns one circuit-level value per data instance (each
    instance is one forward pass) and must be affine in expectation values,
    so the shift rule applies to it directly. ``loss`` maps outputs to the
    scalar cost and ``loss_grad`` gives d loss / d outputs; both default to
    a plain sum.
    """

    outputs: Callable[[np.ndarray], np.ndarray]
    loss: Callable[[np.ndarray], float] = _identity
    loss_grad: Callable[[np.ndarray], np.ndarray] = _ones
    n_instances: int = 1
    psr_constants: np.ndarray | None = None
    linear: bool = True  # loss is the plain sum, no chain rule needed

    def value(self, params) -> float:
        return self.loss(self.evaluate(params))

    def evaluate(self, params) -> np.ndarray:
        return np.atleast_1d(np.asarray(self.outputs(np.asarray(params, dtype=float)), dtype=float))


def as_objective(cost) -> Objective:
    if isinstance(cost, Objective):
        return cost
    return Objective(outputs=lambda p: np.atleast_1d(cost(p)))


@dataclass(frozen=True)
class GradientVector:
    values: np.ndarray
    active_mask: np.ndarray

    def __post_init__(self):
        if np.any(self.values[~self.active_mask] != 0.0):
            raise ValueError("frozen entries of a gradient must be exactly zero")


def counted_cost(cost, params, counter: EvalCounter | None = None, return_outputs: bool = False):
    """Evaluate ``C(params)`` once, charging its forward passes to ``counter``."""
    obj = as_objective(cost)
    outputs = obj.evaluate(params)
    if counter is not None:
        counter.charge(obj.n_instances)
    loss = obj.loss(outputs)
    return (loss, outputs) if return_outputs else loss


def psr_gradient(cost, params, active_mask=None, counter: EvalCounter | None = None,
                 outputs_at_params: np.ndarray | None = None) -> GradientVector:
    """Shift-rule gradient over the active parameters only.

    For each active k, ``d outputs / d theta_k = s [f(theta + pi/(4s) e_k) - f(theta - pi/(4s) e_k)]``
    with ``s`` the gate's shift constant (1/2 for Pauli rotations). A
    non-linear loss is chained through ``loss_grad`` evaluated at
    ``outputs_at_params``, which the caller obtains from :func:`counted_cost`.
    Exactly two forward passes per active parameter and instance are charged.
    """
    obj = as_objective(cost)
    params = np.asarray(params, dtype=float)
    n = len(params)
    mask = np.ones(n, dtype=bool) if active_mask is None else np.asarray(active_mask, dtype=bool)
    if mask.shape != (n,):
        raise ValueError(f"mask length {mask.shape} does not match {n} parameters")
    consts = np.full(n, 0.5) if obj.psr_constants is None else np.asarray(obj.psr_constants, dtype=float)
    active = np.flatnonzero(mask)
    bad = [int(k) for k in active if not (np.isfinite(consts[k]) and consts[k] > 0)]
    if bad:
        raise UnsupportedGateError(f"parameters {bad} have no shift-rule constant")
    if obj.linear:
        weights = None
    else:
        if outputs_at_params is None:
            raise ValueError("a non-linear loss needs the unshifted outputs for the chain rule")
        weights = np.asarray(obj.loss_grad(np.asarray(outputs_at_params, dtype=float)))
    grad = np.zeros(n)
    for k in active:
        s = consts[k]
        shift = np.pi / (4 * s)
        plus = params.copy()
        plus[k] += shift
        minus = params.copy()
        minus[k] -= shift
        diff = s * (obj.evaluate(plus) - obj.evaluate(minus))
        grad[k] = float(np.sum(diff)) if weights is None else float(weights @ diff)
    if counter is not None:
        counter.charge(2 * len(active) * obj.n_instances)
    return GradientVector(grad, mask)


def finite_difference_gradient(cost, params, step: float = 1e-5) -> GradientVector:
    """Central differences over every parameter. Never charged to a counter."""
    if step <= 0:
        raise ValueError("step must be positive")
    obj = as_objective(cost)
    params = np.asarray(params, dtype=float)
    grad = np.zeros(len(params))
    for k in range(len(params)):
        plus = params.copy()
        plus[k] += step
        minus = params.copy()
        minus[k] -= step
        grad[k] = (obj.value(plus) - obj.value(minus)) / (2 * step)
    return GradientVector(grad, np.ones(len(params), dtype=bool))


def gradient_variance_probe(circuit, observable, n_samples: int, rng_seed=None) -> np.ndarray:
    """Per-parameter variance of dC/dtheta_k over uniform random parameters.

    Uses the population formula, so a single sample gives variance 0.
    """
    from .circuit import run_statevector
    from .qsim import expectation

    if n_samples < 1:
        raise ValueError("n_samples must be >= 1")
    rng = np.random.default_rng(rng_seed)
    obj = Objective(outputs=lambda p: expectation(run_statevector(circuit, p), observable),
                    psr_constants=circuit.psr_constants())
    grads = np.empty((n_samples, circuit.n_params))
    for i in range(n_samples):
        theta = rng.uniform(0.0, 2 * np.pi, size=circuit.n_params)
        grads[i] = psr_gradient(obj, theta).values
    return grads.var(axis=0)

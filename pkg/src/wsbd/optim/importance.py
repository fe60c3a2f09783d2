"""Windowed per-parameter importance scores."""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class Metric(enum.Enum):
    SUM = "sum"
    RECENT = "recent"
    VARIANCE = "variance"
    EMA = "ema"
    FISHER = "fisher"


class ImportanceTracker:
    """Accumulates gradient statistics for every parameter.

    All five metrics are tracked side by side so the choice of metric only
    matters at :meth:`finalize`. Frozen parameters are never written, which
    is what caches their scores across windows.
    """

    def __init__(self, n_params: int, metric: Metric = Metric.SUM, beta: float = 0.9):
        if not 0.0 <= beta < 1.0:
            raise ValueError(f"EMA decay must lie in [0, 1), got {beta}")
        self.metric = Metric(metric)
        self.beta = beta
        self.raw_sum = np.zeros(n_params)
        self.recent = np.zeros(n_params)
        self.ema = np.zeros(n_params)
        self.sq_sum = np.zeros(n_params)
        self.welford_count = np.zeros(n_params, dtype=int)
        self.welford_mean = np.zeros(n_params)
        self.welford_m2 = np.zeros(n_params)
        self.steps_in_window = 0

    @property
    def n_params(self) -> int:
        return len(self.raw_sum)

    def update(self, grad: np.ndarray, active: np.ndarray):
        g = np.asarray(grad, dtype=float)
        a = np.asarray(active, dtype=bool)
        self.raw_sum[a] += g[a]
        self.recent[a] = g[a]
        self.ema[a] = self.beta * self.ema[a] + (1 - self.beta) * g[a]
        self.sq_sum[a] += g[a] ** 2
        # Welford
        self.welford_count[a] += 1
        delta = g[a] - self.welford_mean[a]
        self.welford_mean[a] += delta / self.welford_count[a]
        self.welford_m2[a] += delta * (g[a] - self.welford_mean[a])
        self.steps_in_window += 1

    def raw_scores(self) -> np.ndarray:
        count = np.maximum(self.welford_count, 1)
        if self.metric is Metric.SUM:
            return self.raw_sum.copy()
        if self.metric is Metric.RECENT:
            return self.recent.copy()
        if self.metric is Metric.VARIANCE:
            return self.welford_m2 / count  # population variance
        if self.metric is Metric.EMA:
            return self.ema.copy()
        return self.sq_sum / count

    def finalize(self, epsilon: float = 1e-8) -> np.ndarray:
        if epsilon <= 0:
            raise ValueError("epsilon must be positive")
        return np.abs(self.raw_scores()) + epsilon

    def reset(self, active: np.ndarray):
        a = np.asarray(active, dtype=bool)
        for arr in (self.raw_sum, self.recent, self.ema, self.sq_sum, self.welford_mean, self.welford_m2):
            arr[a] = 0.0
        self.welford_count[a] = 0
        self.steps_in_window = 0


def importance_update(tracker: ImportanceTracker, grad, active=None) -> ImportanceTracker:
    values = getattr(grad, "values", grad)
    if active is None:
        active = getattr(grad, "active_mask", np.ones(len(values), dtype=bool))
    tracker.update(values, active)
    return tracker


def finalize_scores(tracker: ImportanceTracker, epsilon: float = 1e-8) -> np.ndarray:
    return tracker.finalize(epsilon)


@dataclass
class WindowStats:
    """Snapshot taken at a freeze event."""

    step: int
    scores: np.ndarray
    probabilities: np.ndarray
    active: np.ndarray

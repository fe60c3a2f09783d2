"""The windowed training loop shared by WSBD, its ablations, and plain baselines."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..grad import EvalCounter, counted_cost, psr_gradient
from .base import masked_step
from .importance import ImportanceTracker, Metric, WindowStats
from .selection import Variant, n_active_for, sample_active_set, selection_probabilities

# independent RNG streams derived from one run seed
STREAM_INIT = 0
STREAM_DATA = 1
STREAM_FREEZE = 2
STREAM_SHOTS = 3
STREAM_SPSA = 4


def stream(seed: int, which: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), which])


def init_params(n_params: int, seed: int, low: float = 0.0, high: float = 2 * np.pi) -> np.ndarray:
    return stream(seed, STREAM_INIT).uniform(low, high, size=n_params)


@dataclass
class FreezeConfig:
    lambda_f: float = 0.7
    tau: int = 100
    epsilon: float = 1e-8
    variant: Variant = Variant.WSBD
    metric: Metric = Metric.SUM
    ema_beta: float = 0.9
    rng_seed: int | None = None

    def __post_init__(self):
        self.variant = Variant(self.variant)
        self.metric = Metric(self.metric)
        if not 0.0 <= self.lambda_f < 1.0:
            raise ValueError(f"lambda_f must lie in [0, 1), got {self.lambda_f}")
        if int(self.tau) != self.tau or self.tau < 1:
            raise ValueError(f"tau must be a positive integer, got {self.tau}")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")


@dataclass
class Budget:
    max_fp: int | None = None
    max_steps: int | None = None

    def __post_init__(self):
        if self.max_fp is None and self.max_steps is None:
            raise ValueError("a budget needs max_fp and/or max_steps")

    def exhausted(self, step: int, fp: int) -> bool:
        return (self.max_steps is not None and step >= self.max_steps) or \
            (self.max_fp is not None and fp >= self.max_fp)


TRACE_COLUMNS = ("step", "window", "n_active", "loss", "forward_passes", "shots", "wall_estimate_s")


@dataclass
class TrainResult:
    rows: list = field(default_factory=list)
    params: np.ndarray | None = None
    converged: bool = False  # stop callback fired
    exhausted: bool = False  # budget ran out first
    windows: list = field(default_factory=list)
    param_history: list = field(default_factory=list)

    @property
    def incomplete(self) -> bool:
        return self.exhausted and not self.converged

    @property
    def losses(self) -> np.ndarray:
        return np.array([r["loss"] for r in self.rows])

    @property
    def forward_passes(self) -> np.ndarray:
        return np.array([r["forward_passes"] for r in self.rows], dtype=int)

    def n_freeze_events(self) -> int:
        return len(self.windows)


def _row(step, window, n_active, loss, counter: EvalCounter) -> dict:
    return {"step": step, "window": window, "n_active": n_active, "loss": float(loss),
            "forward_passes": counter.forward_passes, "shots": counter.shots_consumed,
            "wall_estimate_s": counter.wall_clock_estimate_s}


def wsbd_train(task, params0, config: FreezeConfig | None, base, budget: Budget, seed: int = 0,
               counter: EvalCounter | None = None, batch_size: int = 1,
               stop: Callable[[int, np.ndarray, dict], bool] | None = None,
               record_params: bool = False, layer_of: dict | None = None) -> TrainResult:
    """Train ``task`` from ``params0``.

    ``config=None`` runs the bare base optimizer. ``stop(step, params, row)``
    is called after every step with the updated parameters; returning True
    ends training as converged. Rows record the loss at the parameters the
    step's gradient was taken at, and the counter totals after the step.
    """
    params = np.array(params0, dtype=float, copy=True)
    n = len(params)
    counter = counter if counter is not None else EvalCounter(shots_per_pass=task.shots_per_eval)
    data_rng = stream(seed, STREAM_DATA)
    freeze_seed = seed if config is None or config.rng_seed is None else config.rng_seed
    freeze_rng = stream(freeze_seed, STREAM_FREEZE)
    if layer_of is None:
        circuit = getattr(task, "circuit", None)
        layer_of = circuit.layer_of if circuit is not None else None
    active = np.ones(n, dtype=bool)
    tracker = ImportanceTracker(n, config.metric, config.ema_beta) if config else None
    n_active = n_active_for(config.lambda_f, n) if config else n
    result = TrainResult()
    if record_params:
        result.param_history.append(params.copy())
    step = 0
    while not budget.exhausted(step, counter.forward_passes):
        obj = task.sample_objective(data_rng, batch_size)
        loss, outputs = counted_cost(obj, params, counter, return_outputs=True)
        grad = psr_gradient(obj, params, active, counter, outputs)
        params, base = masked_step(base, params, grad, active)
        window = step // config.tau if config else 0
        row = _row(step, window, int(active.sum()), loss, counter)
        result.rows.append(row)
        if record_params:
            result.param_history.append(params.copy())
        if tracker is not None:
            tracker.update(grad.values, active)
        step += 1
        if config is not None and step % config.tau == 0:
            scores = tracker.finalize(config.epsilon)
            probs = selection_probabilities(scores)
            mask = sample_active_set(probs, n_active, freeze_rng, config.variant, scores, layer_of)
            active = mask.active
            if config.variant is not Variant.NO_RESET:
                tracker.reset(active)
            result.windows.append(WindowStats(step, scores, probs, active.copy()))
        if stop is not None and stop(step, params, row):
            result.converged = True
            break
    else:
        result.exhausted = True
    result.params = params
    return result


def train_baseline(task, params0, base, budget: Budget, seed: int = 0, **kwargs) -> TrainResult:
    return wsbd_train(task, params0, None, base, budget, seed, **kwargs)

"""Derivative-free baselines: SPSA and Nelder-Mead, both fully counted."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..grad import EvalCounter, counted_cost
from .train import STREAM_DATA, STREAM_SPSA, Budget, TrainResult, stream


@dataclass
class SpsaCoefficients:
    a: float = 0.2
    c: float = 0.1
    A: float = 10.0
    alpha: float = 0.602
    gamma: float = 0.101

    def gains(self, k: int) -> tuple[float, float]:
        return self.a / (k + 1 + self.A) ** self.alpha, self.c / (k + 1) ** self.gamma


def spsa_step(cost, params, k: int, coefficients: SpsaCoefficients | None = None,
              counter: EvalCounter | None = None, rng=None) -> tuple[np.ndarray, float]:
    """One simultaneous-perturbation step. Returns the new params and the
    mean of the two evaluated costs."""
    coefficients = coefficients or SpsaCoefficients()
    rng = np.random.default_rng(rng)
    params = np.asarray(params, dtype=float)
    a_k, c_k = coefficients.gains(k)
    delta = rng.choice((-1.0, 1.0), size=len(params))
    y_plus = counted_cost(cost, params + c_k * delta, counter)
    y_minus = counted_cost(cost, params - c_k * delta, counter)
    ghat = (y_plus - y_minus) / (2 * c_k) * delta  # 1/delta == delta for +-1
    return params - a_k * ghat, 0.5 * (y_plus + y_minus)


def spsa_train(task, params0, budget: Budget, seed: int = 0, coefficients: SpsaCoefficients | None = None,
               counter: EvalCounter | None = None, batch_size: int = 1, stop=None) -> TrainResult:
    params = np.array(params0, dtype=float, copy=True)
    counter = counter if counter is not None else EvalCounter(shots_per_pass=task.shots_per_eval)
    data_rng = stream(seed, STREAM_DATA)
    rng = stream(seed, STREAM_SPSA)
    result = TrainResult()
    step = 0
    while not budget.exhausted(step, counter.forward_passes):
        obj = task.sample_objective(data_rng, batch_size)
        params, loss = spsa_step(obj, params, step, coefficients, counter, rng)
        row = {"step": step, "window": 0, "n_active": len(params), "loss": float(loss),
               "forward_passes": counter.forward_passes, "shots": counter.shots_consumed,
               "wall_estimate_s": counter.wall_clock_estimate_s}
        result.rows.append(row)
        step += 1
        if stop is not None and stop(step, params, row):
            result.converged = True
            break
    else:
        result.exhausted = True
    result.params = params
    return result


@dataclass
class NelderMeadResult:
    params: np.ndarray
    value: float
    evaluations: int
    iterations: int
    converged: bool
    history: list  # (evaluations so far, best value) after each iteration


def nelder_mead_minimize(cost, params0, budget: int, counter: EvalCounter | None = None, spread: float = 0.1,
                         xtol: float = 1e-6, ftol: float = 1e-10, alpha: float = 1.0, gamma: float = 2.0,
                         rho: float = 0.5, sigma: float = 0.5) -> NelderMeadResult:
    """Minimise ``cost`` with at most ``budget`` counted evaluations.

    The initial simplex is ``params0`` plus ``spread`` along each axis.
    """
    x0 = np.array(params0, dtype=float, copy=True)
    n = len(x0)
    used = 0

    def f(x):
        nonlocal used
        used += 1
        return counted_cost(cost, x, counter)

    if budget < n + 1:
        # not enough to even build the simplex: evaluate what we can, keep the best
        value = f(x0) if budget >= 1 else np.inf
        return NelderMeadResult(x0, float(value), used, 0, False, [])

    simplex = [x0] + [x0 + spread * np.eye(n)[i] for i in range(n)]
    values = [f(x) for x in simplex]
    history = []
    it = 0
    converged = False
    while True:
        order = np.argsort(values, kind="stable")
        simplex = [simplex[i] for i in order]
        values = [values[i] for i in order]
        if max(abs(v - values[0]) for v in values[1:]) <= ftol and \
                max(np.max(np.abs(x - simplex[0])) for x in simplex[1:]) <= xtol:
            converged = True
            break
        if used >= budget:
            break
        it += 1
        centroid = np.mean(simplex[:-1], axis=0)
        worst = simplex[-1]
        xr = centroid + alpha * (centroid - worst)
        fr = f(xr)
        if values[0] <= fr < values[-2]:
            simplex[-1], values[-1] = xr, fr
        elif fr < values[0]:
            if used >= budget:
                simplex[-1], values[-1] = xr, fr
            else:
                xe = centroid + gamma * (xr - centroid)
                fe = f(xe)
                simplex[-1], values[-1] = (xe, fe) if fe < fr else (xr, fr)
        elif used < budget:
            if fr < values[-1]:
                xc = centroid + rho * (xr - centroid)
                fc = f(xc)
                accept = fc <= fr
            else:
                xc = centroid + rho * (worst - centroid)
                fc = f(xc)
                accept = fc < values[-1]
            if accept:
                simplex[-1], values[-1] = xc, fc
            else:
                for i in range(1, n + 1):
                    if used >= budget:
                        break
                    simplex[i] = simplex[0] + sigma * (simplex[i] - simplex[0])
                    values[i] = f(simplex[i])
        history.append((used, float(min(values))))
    best = int(np.argmin(values))
    return NelderMeadResult(simplex[best], float(values[best]), used, it, converged, history)

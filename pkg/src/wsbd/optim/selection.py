"""Choosing the next active set from importance scores."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from ..errors import InvariantError


class Variant(enum.Enum):
    WSBD = "wsbd"
    DBD = "dbd"
    SBD = "sbd"
    LAYERWISE = "layerwise"
    NO_RESET = "no_reset"


@dataclass
class ActiveMask:
    active: np.ndarray
    cached_scores: np.ndarray | None = None

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.active))


def n_active_for(lambda_f: float, n_params: int) -> int:
    if not 0.0 <= lambda_f < 1.0:
        raise ValueError(f"freeze threshold must lie in [0, 1), got {lambda_f}")
    # round before ceil so 0.3 * 20 = 6.000000000000001 stays 6
    return max(1, math.ceil(round((1.0 - lambda_f) * n_params, 9)))


def selection_probabilities(scores) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    if np.any(~np.isfinite(s)) or np.any(s <= 0):
        raise InvariantError("selection needs strictly positive, finite scores")
    return s / s.sum()


def exponential_keys(probabilities: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Keys whose descending order is a weighted draw without replacement.

    ``log(u) / p`` orders items exactly like ``u ** (1 / p)``.
    """
    u = 1.0 - rng.random(len(probabilities))  # (0, 1]
    return np.log(u) / probabilities


def layer_scores(scores: np.ndarray, layer_of) -> dict[int, float]:
    out: dict[int, float] = {}
    for k, layer in sorted(dict(layer_of).items()):
        out[layer] = out.get(layer, 0.0) + float(scores[k])
    return out


def sample_active_set(probabilities, n_active: int, rng_seed=None, variant: Variant = Variant.WSBD,
                      scores=None, layer_of=None) -> ActiveMask:
    """Draw the next active set.

    WSBD / NO_RESET sample ``n_active`` parameters without replacement with
    weights ``probabilities``; DBD keeps the top scores (ties to the lower
    index); SBD ignores the scores; LAYERWISE draws whole layers by summed
    score until at least ``n_active`` parameters are active.
    """
    p = np.asarray(probabilities, dtype=float)
    n = len(p)
    if not 1 <= n_active <= n:
        raise ValueError(f"n_active={n_active} must lie in [1, {n}]")
    variant = Variant(variant)
    rng = np.random.default_rng(rng_seed)
    scores = p if scores is None else np.asarray(scores, dtype=float)
    active = np.zeros(n, dtype=bool)
    if n_active == n:
        active[:] = True
    elif variant in (Variant.WSBD, Variant.NO_RESET):
        keys = exponential_keys(p, rng)
        active[np.argsort(-keys, kind="stable")[:n_active]] = True
    elif variant is Variant.DBD:
        active[np.argsort(-scores, kind="stable")[:n_active]] = True
    elif variant is Variant.SBD:
        active[rng.choice(n, size=n_active, replace=False)] = True
    else:
        if layer_of is None:
            raise ValueError("LAYERWISE selection needs the parameter-to-layer map")
        agg = layer_scores(scores, layer_of)
        layers = np.array(sorted(agg))
        weights = np.array([agg[l] for l in layers])
        order = layers[np.argsort(-exponential_keys(weights / weights.sum(), rng), kind="stable")]
        members = {l: [k for k, ll in dict(layer_of).items() if ll == l] for l in layers}
        for layer in order:
            active[members[layer]] = True
            if active.sum() >= n_active:
                break
    return ActiveMask(active, cached_scores=None if scores is None else scores.copy())

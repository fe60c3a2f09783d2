"""Hardware-style noise: Kraus channels, a configurable model, and the
gate/channel schedule that drives the density-matrix backend."""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, fields
from functools import lru_cache, reduce
from typing import Iterable, Mapping

import numpy as np

from . import qsim
from .circuit import Circuit, GateInstance, _check_encoding, _check_params
from .errors import InvariantError
from .observables import PAULI


def _check_probability(name: str, value: float):
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def amplitude_damping_channel(gamma: float) -> qsim.KrausChannel:
    _check_probability("gamma", gamma)
    k0 = np.array([[1, 0], [0, math.sqrt(1 - gamma)]], dtype=complex)
    k1 = np.array([[0, math.sqrt(gamma)], [0, 0]], dtype=complex)
    return qsim.KrausChannel((k0, k1))


def phase_damping_channel(lambda_pd: float) -> qsim.KrausChannel:
    """Pure dephasing: off-diagonals scale by sqrt(1 - lambda), populations fixed."""
    _check_probability("lambda_pd", lambda_pd)
    k0 = np.array([[1, 0], [0, math.sqrt(1 - lambda_pd)]], dtype=complex)
    k1 = np.array([[0, 0], [0, math.sqrt(lambda_pd)]], dtype=complex)
    return qsim.KrausChannel((k0, k1))


def depolarizing_channel(p: float, k_qubits: int = 1) -> qsim.KrausChannel:
    """``rho -> (1 - p) rho + p I / 2**k`` on ``k_qubits`` qubits."""
    _check_probability("p", p)
    if k_qubits not in (1, 2):
        raise ValueError(f"k_qubits must be 1 or 2, got {k_qubits}")
    d2 = 4**k_qubits
    ops = []
    for letters in itertools.product("IXYZ", repeat=k_qubits):
        pauli = reduce(np.kron, (PAULI[c] for c in letters))
        if set(letters) == {"I"}:
            weight = 1 - p + p / d2
        else:
            weight = p / d2
        ops.append(math.sqrt(weight) * pauli)
    return qsim.KrausChannel(tuple(ops))


def damping_gamma(t: float, t1: float) -> float:
    return 1.0 - math.exp(-t / t1) if t1 > 0 and math.isfinite(t1) else 0.0


def dephasing_lambda(t: float, t1: float, t2: float) -> float:
    """Phase-damping strength for duration ``t`` given T1 and T2.

    The pure-dephasing rate is ``1/T2 - 1/(2 T1)``; amplitude damping
    already contributes the ``1/(2 T1)`` part of the coherence decay.
    """
    if t2 > 2 * t1 * (1 + 1e-12):
        raise InvariantError(f"T2 = {t2} exceeds 2*T1 = {2 * t1}")
    rate = (1.0 / t2 if t2 > 0 and math.isfinite(t2) else 0.0) - (
        1.0 / (2 * t1) if t1 > 0 and math.isfinite(t1) else 0.0)
    rate = max(rate, 0.0)
    return 1.0 - math.exp(-2 * t * rate)


def _per_qubit(value, q: int) -> float:
    if isinstance(value, (tuple, list)):
        return float(value[q])
    return float(value)


@dataclass(frozen=True)
class NoiseModel:
    """Device noise parameters. Times are in seconds, probabilities unitless.

    ``t1``/``t2`` may be scalars or per-qubit tuples. ``readout_confusion``
    is one 2x2 row-stochastic matrix ``P[read j | true i]`` shared by all
    qubits, or a tuple of them per qubit.
    """

    t1: float | tuple = 200e-6
    t2: float | tuple = 150e-6
    gate_time_1q: float = 50e-9
    gate_time_2q: float = 300e-9
    depol_1q: float = 3e-4
    depol_2q: float = 3e-3
    idle_error: float = 1e-4
    readout_confusion: tuple = ((0.99, 0.01), (0.01, 0.99))

    def __post_init__(self):
        for name in ("t1", "t2", "readout_confusion"):
            value = getattr(self, name)
            if isinstance(value, list):
                object.__setattr__(self, name, _freeze(value))
        for name in ("depol_1q", "depol_2q", "idle_error"):
            _check_probability(name, getattr(self, name))
        if self.gate_time_1q < 0 or self.gate_time_2q < 0:
            raise ValueError("gate times must be non-negative")
        t1s = self.t1 if isinstance(self.t1, tuple) else (self.t1,)
        t2s = self.t2 if isinstance(self.t2, tuple) else (self.t2,)
        if len(t1s) != len(t2s) and len(t1s) > 1 and len(t2s) > 1:
            raise ValueError("per-qubit t1 and t2 must have equal length")
        for q in range(max(len(t1s), len(t2s))):
            t1 = t1s[min(q, len(t1s) - 1)]
            t2 = t2s[min(q, len(t2s) - 1)]
            if t1 <= 0 or t2 <= 0:
                raise ValueError("T1 and T2 must be positive")
            if t2 > 2 * t1 * (1 + 1e-12):
                raise InvariantError(f"T2 = {t2} exceeds 2*T1 = {2 * t1} on qubit {q}")
        for c in self._confusions():
            if c.shape != (2, 2) or np.any(c < 0) or np.any(np.abs(c.sum(axis=1) - 1) > 1e-12):
                raise ValueError(f"readout confusion must be 2x2 row-stochastic, got {c.tolist()}")

    def _confusions(self) -> list:
        arr = np.asarray(self.readout_confusion, dtype=float)
        return [arr] if arr.ndim == 2 else list(arr)

    def confusion(self, q: int) -> np.ndarray:
        mats = self._confusions()
        return mats[0] if len(mats) == 1 else mats[q]

    def readout(self, n_qubits: int) -> list:
        return [self.confusion(q) for q in range(n_qubits)]

    @classmethod
    def noiseless(cls) -> NoiseModel:
        return cls(t1=math.inf, t2=math.inf, gate_time_1q=0.0, gate_time_2q=0.0, depol_1q=0.0,
                   depol_2q=0.0, idle_error=0.0, readout_confusion=((1.0, 0.0), (0.0, 1.0)))

    @classmethod
    def from_mapping(cls, values: Mapping) -> NoiseModel:
        """Build from config keys; ``readout_flip`` is shorthand for a symmetric confusion."""
        known = {f.name for f in fields(cls)} | {"readout_flip"}
        unknown = set(values) - known
        if unknown:
            raise KeyError(f"unknown noise keys: {sorted(unknown)}")
        kwargs = {}
        for k, v in values.items():
            if k == "readout_flip":
                kwargs["readout_confusion"] = symmetric_readout(float(v))
            else:
                kwargs[k] = _freeze(v) if isinstance(v, list) else v
        return cls(**kwargs)


def _freeze(value):
    if isinstance(value, (list, tuple)):
        return tuple(_freeze(v) for v in value)
    return float(value)


DEFAULT_NOISE = NoiseModel()


def symmetric_readout(p_flip: float) -> tuple:
    _check_probability("p_flip", p_flip)
    return ((1 - p_flip, p_flip), (p_flip, 1 - p_flip))


def apply_readout_confusion(probabilities, model: NoiseModel) -> np.ndarray:
    probs = np.asarray(probabilities, dtype=float)
    if np.any(probs < -1e-12) or abs(probs.sum() - 1) > 1e-9:
        raise ValueError(f"input distribution must be non-negative and sum to 1 (sum = {probs.sum()})")
    n = int(round(math.log2(len(probs))))
    if 2**n != len(probs):
        raise ValueError(f"distribution length {len(probs)} is not a power of two")
    return qsim.confuse(probs, model.readout(n))


@lru_cache(maxsize=None)
def _relaxation(t: float, t1: float, t2: float) -> qsim.KrausChannel:
    return amplitude_damping_channel(damping_gamma(t, t1)).compose(
        phase_damping_channel(dephasing_lambda(t, t1, t2)))


@lru_cache(maxsize=None)
def gate_noise_1q(model: NoiseModel, q: int) -> qsim.KrausChannel:
    """Depolarizing then T1/T2 relaxation for one single-qubit gate duration."""
    relax = _relaxation(model.gate_time_1q, _per_qubit(model.t1, q), _per_qubit(model.t2, q))
    return depolarizing_channel(model.depol_1q, 1).compose(relax)


@lru_cache(maxsize=None)
def gate_noise_2q(model: NoiseModel, a: int, b: int) -> qsim.KrausChannel:
    """Two-qubit depolarizing then independent T1/T2 relaxation on both qubits."""
    ra = _relaxation(model.gate_time_2q, _per_qubit(model.t1, a), _per_qubit(model.t2, a))
    rb = _relaxation(model.gate_time_2q, _per_qubit(model.t1, b), _per_qubit(model.t2, b))
    local = qsim.KrausChannel(tuple(np.kron(x, y) for x in ra.operators for y in rb.operators))
    return depolarizing_channel(model.depol_2q, 2).compose(local)


@lru_cache(maxsize=None)
def idle_noise(model: NoiseModel) -> qsim.KrausChannel:
    return depolarizing_channel(model.idle_error, 1)


@dataclass(frozen=True)
class ChannelOp:
    channel: qsim.KrausChannel
    targets: tuple
    kind: str  # "gate" or "idle"


def noisy_schedule(circuit: Circuit, model: NoiseModel, encoding: Iterable[GateInstance] = ()) -> list:
    """Interleave noise channels with the gates of ``encoding + circuit``.

    Every gate is followed by one composite channel on its qubits. Gates are
    grouped by layer tag (the encoding forms its own group); qubits that no
    gate touches within a group receive one idle channel at its end.
    """
    encoding = _check_encoding(circuit, encoding)
    groups: list[list[GateInstance]] = []
    if encoding:
        groups.append(list(encoding))
    current = None
    for g in circuit.gates:
        if current is None or g.layer != current:
            groups.append([])
            current = g.layer
        groups[-1].append(g)
    program: list = []
    for group in groups:
        touched = set()
        for g in group:
            program.append(g)
            touched.update(g.qubits)
            if g.kind.arity == 1:
                program.append(ChannelOp(gate_noise_1q(model, g.qubits[0]), g.qubits, "gate"))
            else:
                program.append(ChannelOp(gate_noise_2q(model, *g.qubits), g.qubits, "gate"))
        for q in range(circuit.n_qubits):
            if q not in touched:
                program.append(ChannelOp(idle_noise(model), (q,), "idle"))
    return program


def run_noisy(circuit: Circuit, params, model: NoiseModel, encoding: Iterable[GateInstance] = ()) -> qsim.DensityMatrix:
    params = _check_params(circuit, params)
    n = circuit.n_qubits
    rho = qsim.zero_density(n).matrix
    for op in noisy_schedule(circuit, model, encoding):
        if isinstance(op, ChannelOp):
            rho = qsim._apply_superop_rho(rho, op.channel.superoperator, op.targets, n)
        else:
            rho = qsim._apply_unitary_rho(rho, op.matrix(params), op.qubits, n)
    return qsim.DensityMatrix(n, rho)

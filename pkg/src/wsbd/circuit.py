"""Circuit IR, ansatz and encoding builders, and the execution pipeline."""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import qsim
from .errors import FormatError, UnsupportedGateError


class GateKind(enum.Enum):
    RX = ("RX", 1, 0.5)
    RZ = ("RZ", 1, 0.5)
    X = ("X", 1, None)
    H = ("H", 1, None)
    CNOT = ("CNOT", 2, None)
    CZ = ("CZ", 2, None)

    def __init__(self, label, arity, psr_constant):
        self.label = label
        self.arity = arity
        # shift-rule constant; the gradient shift is pi / (4 * psr_constant)
        self.psr_constant = psr_constant

    @property
    def parametrized(self) -> bool:
        return self.psr_constant is not None


_CONST = {
    GateKind.X: np.array([[0, 1], [1, 0]], dtype=complex),
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2),
    GateKind.CNOT: np.array([[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex),
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(complex),
}


def rotation_matrix(kind: GateKind, angle: float) -> np.ndarray:
    c, s = math.cos(angle / 2), math.sin(angle / 2)
    if kind is GateKind.RX:
        return np.array([[c, -1j * s], [-1j * s, c]], dtype=complex)
    if kind is GateKind.RZ:
        return np.array([[c - 1j * s, 0], [0, c + 1j * s]], dtype=complex)
    raise UnsupportedGateError(f"{kind.label} is not a rotation")


def gate_matrix(kind: GateKind, angle: float | None = None) -> qsim.GateMatrix:
    if kind.parametrized:
        return qsim.GateMatrix(rotation_matrix(kind, float(angle)), generator_norm=kind.psr_constant)
    return qsim.GateMatrix(_CONST[kind])


@dataclass(frozen=True)
class GateInstance:
    kind: GateKind
    qubits: tuple
    param_slot: int | None = None
    fixed_angle: float | None = None
    layer: int = 0

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if len(self.qubits) != self.kind.arity:
            raise ValueError(f"{self.kind.label} takes {self.kind.arity} qubit(s), got {self.qubits}")
        if len(set(self.qubits)) != len(self.qubits):
            raise ValueError(f"duplicate qubits {self.qubits}")
        if self.kind.parametrized:
            if (self.param_slot is None) == (self.fixed_angle is None):
                raise ValueError(f"{self.kind.label} needs exactly one of param_slot / fixed_angle")
        elif self.param_slot is not None or self.fixed_angle is not None:
            raise ValueError(f"{self.kind.label} is a constant gate")

    def matrix(self, params: np.ndarray | None = None) -> np.ndarray:
        if not self.kind.parametrized:
            return _CONST[self.kind]
        angle = self.fixed_angle if self.param_slot is None else params[self.param_slot]
        return rotation_matrix(self.kind, angle)


@dataclass(frozen=True)
class Circuit:
    n_qubits: int
    gates: tuple
    n_params: int

    def __post_init__(self):
        object.__setattr__(self, "gates", tuple(self.gates))
        seen = set()
        for g in self.gates:
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise ValueError(f"gate {g} addresses a qubit outside [0, {self.n_qubits})")
            if g.param_slot is not None:
                if not 0 <= g.param_slot < self.n_params:
                    raise ValueError(f"param slot {g.param_slot} out of range")
                seen.add(g.param_slot)
        if len(seen) != self.n_params:
            missing = sorted(set(range(self.n_params)) - seen)
            raise ValueError(f"parameter slots {missing} are never used")

    @property
    def layer_of(self) -> dict[int, int]:
        return {g.param_slot: g.layer for g in self.gates if g.param_slot is not None}

    @property
    def n_layers(self) -> int:
        layers = {g.layer for g in self.gates if g.layer > 0}
        return len(layers)

    def psr_constants(self) -> np.ndarray:
        """Shift-rule constant of each parameter slot."""
        out = np.full(self.n_params, np.nan)
        for g in self.gates:
            if g.param_slot is None:
                continue
            if not np.isnan(out[g.param_slot]):
                raise UnsupportedGateError(f"slot {g.param_slot} drives several gates; the two-term shift rule does not apply")
            out[g.param_slot] = g.kind.psr_constant
        return out

    def count(self, arity: int) -> int:
        return sum(1 for g in self.gates if g.kind.arity == arity)

    def to_text(self) -> str:
        lines = [f"circuit n_qubits={self.n_qubits} n_params={self.n_params}"]
        lines.extend(gate_to_line(g) for g in self.gates)
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> Circuit:
        lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
        if not lines or not lines[0].startswith("circuit "):
            raise FormatError("missing 'circuit n_qubits=.. n_params=..' header")
        header = dict(tok.split("=") for tok in lines[0].split()[1:])
        gates = [gate_from_line(ln) for ln in lines[1:]]
        return cls(int(header["n_qubits"]), tuple(gates), int(header["n_params"]))


def gate_to_line(g: GateInstance) -> str:
    parts = [g.kind.label, ",".join(map(str, g.qubits))]
    if g.param_slot is not None:
        parts.append(f"slot={g.param_slot}")
    if g.fixed_angle is not None:
        parts.append(f"angle={g.fixed_angle!r}")
    parts.append(f"layer={g.layer}")
    return " ".join(parts)


def gate_from_line(line: str) -> GateInstance:
    tokens = line.split()
    try:
        kind = GateKind[tokens[0]]
        qubits = tuple(int(q) for q in tokens[1].split(","))
        opts = dict(tok.split("=") for tok in tokens[2:])
    except (KeyError, IndexError, ValueError) as exc:
        raise FormatError(f"cannot parse gate line {line!r}") from exc
    slot = int(opts["slot"]) if "slot" in opts else None
    angle = float(opts["angle"]) if "angle" in opts else None
    return GateInstance(kind, qubits, slot, angle, int(opts.get("layer", 0)))


def build_hardware_efficient_ansatz(n_qubits: int, n_layers: int) -> Circuit:
    """RX then RZ on every qubit, then a CNOT ring i -> (i+1) mod n, per layer."""
    if n_qubits < 1 or n_layers < 1:
        raise ValueError("need n_qubits >= 1 and n_layers >= 1")
    gates = []
    slot = 0
    for layer in range(1, n_layers + 1):
        for q in range(n_qubits):
            gates.append(GateInstance(GateKind.RX, (q,), param_slot=slot, layer=layer))
            gates.append(GateInstance(GateKind.RZ, (q,), param_slot=slot + 1, layer=layer))
            slot += 2
        if n_qubits > 1:
            for q in range(n_qubits):
                gates.append(GateInstance(GateKind.CNOT, (q, (q + 1) % n_qubits), layer=layer))
    return Circuit(n_qubits, tuple(gates), slot)


def angle_encoding(features: Sequence[float], n_qubits: int | None = None) -> tuple:
    features = [float(x) for x in features]
    if n_qubits is not None and len(features) != n_qubits:
        raise ValueError(f"{len(features)} features for {n_qubits} qubits")
    return tuple(GateInstance(GateKind.RX, (q,), fixed_angle=x) for q, x in enumerate(features))


def parity_encoding(bits: Sequence[int] | str, n_qubits: int | None = None) -> tuple:
    if any(str(b) not in ("0", "1") for b in bits):
        raise ValueError(f"non-binary input {bits!r}")
    bits = [int(b) for b in bits]
    if n_qubits is not None and len(bits) != n_qubits:
        raise ValueError(f"{len(bits)} bits for {n_qubits} qubits")
    return tuple(GateInstance(GateKind.X, (q,)) for q, b in enumerate(bits) if b)


def _check_params(circuit: Circuit, params) -> np.ndarray:
    params = np.asarray(params, dtype=float)
    if params.shape != (circuit.n_params,):
        raise ValueError(f"expected {circuit.n_params} parameters, got shape {params.shape}")
    return params


def _check_encoding(circuit: Circuit, encoding: Iterable[GateInstance]) -> tuple:
    encoding = tuple(encoding)
    for g in encoding:
        if g.param_slot is not None:
            raise ValueError("encoding gates must not consume parameter slots")
        if any(not 0 <= q < circuit.n_qubits for q in g.qubits):
            raise ValueError(f"encoding gate {g} addresses a qubit outside the register")
    return encoding


def run_statevector(circuit: Circuit, params, encoding: Iterable[GateInstance] = ()) -> qsim.StateVector:
    params = _check_params(circuit, params)
    encoding = _check_encoding(circuit, encoding)
    n = circuit.n_qubits
    psi = qsim.zero_state(n).amplitudes
    for g in encoding + circuit.gates:
        psi = qsim._apply_matrix(psi, g.matrix(params), g.qubits, n)
    return qsim.StateVector(n, psi)


def run_circuit(circuit: Circuit, params, encoding: Iterable[GateInstance] = (), noise=None):
    """Prepare ``U(params) A(x) |0...0>``.

    ``noise=None`` runs the exact state-vector backend; a ``NoiseModel``
    runs the density-matrix backend with channels interleaved per
    :func:`wsbd.noise.noisy_schedule`.
    """
    if noise is None:
        return run_statevector(circuit, params, encoding)
    from .noise import run_noisy

    return run_noisy(circuit, params, noise, encoding)

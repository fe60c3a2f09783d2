"""Dense state-vector and density-matrix simulation for few-qubit registers.

Basis convention: qubit 0 is the most significant bit of the basis index, so
``|q0 q1 ... q_{n-1}>`` sits at index ``q0 * 2**(n-1) + ... + q_{n-1}``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import InvariantError, SizeError

ATOL = 1e-10
MAX_QUBITS = 14

_I2 = np.eye(2, dtype=complex)
_H = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
_SDG = np.array([[1, 0], [0, -1j]], dtype=complex)
# measurement basis changes: rotate the eigenbasis of each Pauli onto Z
_BASIS_CHANGE = {"X": _H, "Y": _H @ _SDG, "Z": _I2}


@dataclass(frozen=True, eq=False)
class StateVector:
    n_qubits: int
    amplitudes: np.ndarray

    def __post_init__(self):
        if self.amplitudes.shape != (2**self.n_qubits,):
            raise SizeError(f"expected {2**self.n_qubits} amplitudes, got {self.amplitudes.shape}")

    def norm_sq(self) -> float:
        return float(np.vdot(self.amplitudes, self.amplitudes).real)

    def probabilities(self) -> np.ndarray:
        return np.abs(self.amplitudes) ** 2

    def to_density(self) -> DensityMatrix:
        return DensityMatrix(self.n_qubits, np.outer(self.amplitudes, self.amplitudes.conj()))


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    n_qubits: int
    matrix: np.ndarray

    def __post_init__(self):
        d = 2**self.n_qubits
        if self.matrix.shape != (d, d):
            raise SizeError(f"expected {d}x{d} density matrix, got {self.matrix.shape}")

    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def purity(self) -> float:
        # tr(rho^2) = sum |rho_ij|^2 for Hermitian rho
        return float(np.sum(np.abs(self.matrix) ** 2))

    def hermiticity_error(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.conj().T)))

    def probabilities(self) -> np.ndarray:
        return np.clip(np.diagonal(self.matrix).real, 0.0, None)


@dataclass(frozen=True, eq=False)
class GateMatrix:
    """A unitary on one or two qubits.

    ``generator_norm`` is the operator norm of the rotation generator ``G``
    in ``U = exp(-i theta G)``; zero for constant gates.
    """

    matrix: np.ndarray
    generator_norm: float = 0.0

    def __post_init__(self):
        if self.matrix.shape not in ((2, 2), (4, 4)):
            raise SizeError(f"gate must be 2x2 or 4x4, got {self.matrix.shape}")
        err = np.max(np.abs(self.matrix.conj().T @ self.matrix - np.eye(len(self.matrix))))
        if err > ATOL:
            raise InvariantError(f"gate is not unitary (max |U^dag U - I| = {err:.3g})")

    @property
    def n_qubits(self) -> int:
        return 1 if self.matrix.shape[0] == 2 else 2


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """A CPTP map given by Kraus operators of equal dimension."""

    operators: tuple
    _superop: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.operators)
        if not ops:
            raise InvariantError("channel needs at least one Kraus operator")
        dim = ops[0].shape[0]
        if dim not in (2, 4) or any(k.shape != (dim, dim) for k in ops):
            raise SizeError("Kraus operators must all be 2x2 or all 4x4")
        total = sum(k.conj().T @ k for k in ops)
        err = float(np.max(np.abs(total - np.eye(dim))))
        if err > ATOL:
            raise InvariantError(f"Kraus set is incomplete (max |sum K^dag K - I| = {err:.3g})")
        object.__setattr__(self, "operators", ops)
        # row-major vec: vec(K rho K^dag) = (K (x) conj(K)) vec(rho)
        object.__setattr__(self, "_superop", sum(np.kron(k, k.conj()) for k in ops))

    @property
    def n_qubits(self) -> int:
        return 1 if self.operators[0].shape[0] == 2 else 2

    @property
    def superoperator(self) -> np.ndarray:
        return self._superop

    def compose(self, after: KrausChannel) -> KrausChannel:
        """Channel that applies ``self`` first, then ``after``."""
        return KrausChannel(tuple(b @ a for a in self.operators for b in after.operators))


def zero_state(n_qubits: int) -> StateVector:
    if not 1 <= n_qubits <= MAX_QUBITS:
        raise SizeError(f"n_qubits must be in [1, {MAX_QUBITS}], got {n_qubits}")
    amps = np.zeros(2**n_qubits, dtype=complex)
    amps[0] = 1.0
    return StateVector(n_qubits, amps)


def zero_density(n_qubits: int) -> DensityMatrix:
    return zero_state(n_qubits).to_density()


def _check_targets(targets: Sequence[int], n_qubits: int, arity: int) -> tuple:
    targets = tuple(int(t) for t in targets)
    if len(targets) != arity:
        raise ValueError(f"gate acts on {arity} qubit(s) but {len(targets)} target(s) given")
    if len(set(targets)) != len(targets):
        raise ValueError(f"duplicate targets {targets}")
    for t in targets:
        if not 0 <= t < n_qubits:
            raise ValueError(f"target {t} out of range for {n_qubits} qubits")
    return targets


def _apply_matrix(psi: np.ndarray, u: np.ndarray, targets: tuple, n: int) -> np.ndarray:
    """Apply a 2x2 or 4x4 matrix to the given axes of a flat state vector."""
    if len(targets) == 1:
        q = targets[0]
        view = psi.reshape(2**q, 2, 2 ** (n - q - 1))
        return np.matmul(u, view).reshape(-1)
    tensor = psi.reshape((2,) * n)
    moved = np.moveaxis(tensor, targets, (0, 1)).reshape(4, -1)
    out = (u @ moved).reshape((2,) * n)
    return np.moveaxis(out, (0, 1), targets).reshape(-1)


def apply_gate(state: StateVector, gate: GateMatrix | np.ndarray, targets: Sequence[int]) -> StateVector:
    u = gate.matrix if isinstance(gate, GateMatrix) else np.asarray(gate, dtype=complex)
    arity = 1 if u.shape[0] == 2 else 2
    targets = _check_targets(targets, state.n_qubits, arity)
    return StateVector(state.n_qubits, _apply_matrix(state.amplitudes, u, targets, state.n_qubits))


def _apply_unitary_rho(rho: np.ndarray, u: np.ndarray, targets: tuple, n: int) -> np.ndarray:
    # U rho U^dag: act on rows as a 2n-qubit vector, then on columns
    k = len(targets)
    tensor = rho.reshape((2,) * (2 * n))
    rows = targets
    cols = tuple(t + n for t in targets)
    moved = np.moveaxis(tensor, rows + cols, tuple(range(2 * k)))
    shape = moved.shape
    m = moved.reshape(2**k, 2**k, -1)
    m = np.einsum("ij,jkr,lk->ilr", u, m, u.conj(), optimize=False)
    out = np.moveaxis(m.reshape(shape), tuple(range(2 * k)), rows + cols)
    return out.reshape(2**n, 2**n)


def _apply_superop_rho(rho: np.ndarray, superop: np.ndarray, targets: tuple, n: int) -> np.ndarray:
    k = len(targets)
    tensor = rho.reshape((2,) * (2 * n))
    rows = targets
    cols = tuple(t + n for t in targets)
    moved = np.moveaxis(tensor, rows + cols, tuple(range(2 * k)))
    shape = moved.shape
    out = (superop @ moved.reshape(4**k, -1)).reshape(shape)
    return np.moveaxis(out, tuple(range(2 * k)), rows + cols).reshape(2**n, 2**n)


def apply_gate_density(rho: DensityMatrix, gate: GateMatrix | np.ndarray, targets: Sequence[int]) -> DensityMatrix:
    u = gate.matrix if isinstance(gate, GateMatrix) else np.asarray(gate, dtype=complex)
    arity = 1 if u.shape[0] == 2 else 2
    targets = _check_targets(targets, rho.n_qubits, arity)
    return DensityMatrix(rho.n_qubits, _apply_unitary_rho(rho.matrix, u, targets, rho.n_qubits))


def apply_channel(rho: DensityMatrix, channel: KrausChannel, targets: Sequence[int]) -> DensityMatrix:
    if not isinstance(channel, KrausChannel):
        # completeness is validated on construction
        channel = KrausChannel(tuple(channel))
    targets = _check_targets(targets, rho.n_qubits, channel.n_qubits)
    out = _apply_superop_rho(rho.matrix, channel.superoperator, targets, rho.n_qubits)
    return DensityMatrix(rho.n_qubits, out)


def _state_array(state) -> tuple[np.ndarray, bool]:
    if isinstance(state, StateVector):
        return state.amplitudes, False
    if isinstance(state, DensityMatrix):
        return state.matrix, True
    raise TypeError(f"expected StateVector or DensityMatrix, got {type(state).__name__}")


def _real(value: complex) -> float:
    if abs(value.imag) > ATOL * max(1.0, abs(value.real)):
        raise InvariantError(f"expectation has imaginary residue {value.imag:.3g}")
    return float(value.real)


def _rotated_probabilities(state, letters: str, readout=None) -> np.ndarray:
    """Born distribution after rotating each non-identity letter onto Z."""
    arr, mixed = _state_array(state)
    n = state.n_qubits
    for q, letter in enumerate(letters):
        if letter in "XY":
            u = _BASIS_CHANGE[letter]
            arr = _apply_unitary_rho(arr, u, (q,), n) if mixed else _apply_matrix(arr, u, (q,), n)
    probs = np.clip(np.diagonal(arr).real, 0.0, None) if mixed else np.abs(arr) ** 2
    probs = probs / probs.sum()
    if readout is not None:
        probs = confuse(probs, readout)
    return probs


def parity_signs(letters: str) -> np.ndarray:
    """Eigenvalue (+1/-1) of the Z-rotated Pauli string on every basis index."""
    n = len(letters)
    idx = np.arange(2**n)
    signs = np.ones(2**n)
    for q, letter in enumerate(letters):
        if letter != "I":
            bit = (idx >> (n - 1 - q)) & 1
            signs = signs * (1 - 2 * bit)
    return signs


def confuse(probs: np.ndarray, readout) -> np.ndarray:
    """Push a basis distribution through independent per-qubit confusion matrices.

    ``readout[q][i, j]`` is P(read j | true i) for qubit q.
    """
    n = int(round(np.log2(len(probs))))
    tensor = probs.reshape((2,) * n)
    for q in range(n):
        c = np.asarray(readout[q], dtype=float)
        tensor = np.moveaxis(np.tensordot(tensor, c, axes=([q], [0])), -1, q)
    return tensor.reshape(-1)


def expectation(state, observable, readout=None) -> float:
    """Exact expectation value of a Hermitian Pauli-sum observable.

    With ``readout`` set, each term is evaluated from its measured
    distribution after per-qubit assignment errors.
    """
    arr, mixed = _state_array(state)
    if observable.n_qubits != state.n_qubits:
        raise ValueError(f"observable acts on {observable.n_qubits} qubits, state has {state.n_qubits}")
    if readout is not None:
        total = 0.0
        for term in observable.terms:
            if set(term.letters) <= {"I"}:
                total += term.coefficient
                continue
            probs = _rotated_probabilities(state, term.letters, readout)
            total += term.coefficient * float(probs @ parity_signs(term.letters))
        return total
    m = observable.dense()
    if mixed:
        value = np.sum(m.T * arr)
    else:
        value = np.vdot(arr, m @ arr)
    return _real(complex(value))


def sample_counts(state, shots: int, rng_seed=None) -> dict[int, int]:
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    rng = np.random.default_rng(rng_seed)
    probs = state.probabilities()
    probs = probs / probs.sum()
    counts = rng.multinomial(shots, probs)
    return {int(i): int(c) for i, c in enumerate(counts) if c}


def estimate_expectation_shots(state, observable, shots: int | None, rng_seed=None, readout=None) -> float:
    """Estimate ``<observable>`` by sampling ``shots`` outcomes per Pauli term.

    ``shots=None`` is the infinite-shot limit and returns ``expectation`` exactly.
    """
    if shots is None:
        return expectation(state, observable, readout=readout)
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    if observable.n_qubits != state.n_qubits:
        raise ValueError(f"observable acts on {observable.n_qubits} qubits, state has {state.n_qubits}")
    rng = np.random.default_rng(rng_seed)
    total = 0.0
    for term in observable.terms:
        if set(term.letters) <= {"I"}:
            total += term.coefficient
            continue
        probs = _rotated_probabilities(state, term.letters, readout)
        counts = rng.multinomial(shots, probs)
        total += term.coefficient * float(counts @ parity_signs(term.letters)) / shots
    return total

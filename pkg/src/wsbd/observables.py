"""Pauli-sum Hamiltonians, the TFIM builder and ground-energy oracles."""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import reduce

import numpy as np

from .errors import SizeError

MAX_DENSE_QUBITS = 10

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


@dataclass(frozen=True)
class PauliString:
    coefficient: float
    letters: str

    def __post_init__(self):
        if not np.isfinite(self.coefficient):
            raise ValueError(f"non-finite coefficient {self.coefficient}")
        if not self.letters or set(self.letters) - set(PAULI):
            raise ValueError(f"bad Pauli letters {self.letters!r}")

    @classmethod
    def sites(cls, n_qubits: int, coefficient: float, placement: dict[int, str]) -> PauliString:
        letters = ["I"] * n_qubits
        for q, letter in placement.items():
            letters[q] = letter
        return cls(float(coefficient), "".join(letters))


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    n_qubits: int
    terms: tuple
    J: float | None = None
    h: float | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        for t in self.terms:
            if len(t.letters) != self.n_qubits:
                raise ValueError(f"term {t.letters!r} does not act on {self.n_qubits} qubits")

    def dense(self) -> np.ndarray:
        """Cached dense matrix; see :func:`to_dense_matrix`."""
        if "dense" not in self._cache:
            self._cache["dense"] = to_dense_matrix(self)
        return self._cache["dense"]

    def norm_bound(self) -> float:
        return float(sum(abs(t.coefficient) for t in self.terms))


def pauli_z_string(n_qubits: int, qubits=None, coefficient: float = 1.0) -> Hamiltonian:
    """Product of Z on ``qubits`` (all qubits by default)."""
    qubits = range(n_qubits) if qubits is None else qubits
    term = PauliString.sites(n_qubits, coefficient, {q: "Z" for q in qubits})
    return Hamiltonian(n_qubits, (term,))


def tfim_hamiltonian(n_qubits: int, J: float = 1.0, h: float = 1.0) -> Hamiltonian:
    """Open-boundary ``-J sum Z_i Z_{i+1} - h sum X_i``."""
    if n_qubits < 1:
        raise ValueError("n_qubits must be >= 1")
    terms = [PauliString.sites(n_qubits, -J, {i: "Z", i + 1: "Z"}) for i in range(n_qubits - 1)]
    terms += [PauliString.sites(n_qubits, -h, {i: "X"}) for i in range(n_qubits)]
    return Hamiltonian(n_qubits, tuple(terms), J=float(J), h=float(h))


def _check_dense_size(n_qubits: int):
    if n_qubits > MAX_DENSE_QUBITS:
        raise SizeError(f"dense matrices are limited to {MAX_DENSE_QUBITS} qubits, got {n_qubits}")


def to_dense_matrix(hamiltonian: Hamiltonian) -> np.ndarray:
    _check_dense_size(hamiltonian.n_qubits)
    d = 2**hamiltonian.n_qubits
    out = np.zeros((d, d), dtype=complex)
    for t in hamiltonian.terms:
        out += t.coefficient * reduce(np.kron, (PAULI[c] for c in t.letters))
    return out


def exact_ground_energy(hamiltonian: Hamiltonian) -> float:
    _check_dense_size(hamiltonian.n_qubits)
    return float(np.linalg.eigvalsh(hamiltonian.dense())[0])


# Independent oracle: matrix assembled bit by bit (no Kronecker products),
# minimum eigenvalue by power iteration on (c I - H).

def bruteforce_matrix(hamiltonian: Hamiltonian) -> np.ndarray:
    n = hamiltonian.n_qubits
    _check_dense_size(n)
    d = 2**n
    out = np.zeros((d, d), dtype=complex)
    for t in hamiltonian.terms:
        for col in range(d):
            row, phase = col, 1.0 + 0j
            for q, letter in enumerate(t.letters):
                bit = (col >> (n - 1 - q)) & 1
                if letter == "X":
                    row ^= 1 << (n - 1 - q)
                elif letter == "Y":
                    row ^= 1 << (n - 1 - q)
                    phase *= 1j if bit == 0 else -1j
                elif letter == "Z" and bit:
                    phase = -phase
            out[row, col] += t.coefficient * phase
    return out


def power_iteration_ground_energy(hamiltonian: Hamiltonian, tol: float = 1e-14,
                                  max_iter: int = 500_000, seed: int = 0) -> float:
    m = bruteforce_matrix(hamiltonian)
    d = len(m)
    shift = hamiltonian.norm_bound() + 1.0
    a = shift * np.eye(d) - m
    v = np.random.default_rng(seed).normal(size=d) + 0j
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = a @ v
        new = float(np.vdot(v, w).real)
        v = w / np.linalg.norm(w)
        if abs(new - lam) < tol * max(1.0, abs(new)):
            lam = new
            break
        lam = new
    return shift - lam

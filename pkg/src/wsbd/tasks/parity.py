"""Parity of a bit string, encoded with X gates."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from ..circuit import build_hardware_efficient_ansatz, parity_encoding
from ..errors import SizeError
from .classify import BinaryClassifier, prediction

MAX_EXHAUSTIVE_BITS = 16


def parity(bits) -> int:
    return int(sum(int(b) for b in bits) % 2)


def generate_parity_dataset(n_bits: int, size: int | None = None, rng_seed=None) -> list:
    """All ``2**n_bits`` strings when ``size`` is None, else ``size`` uniform draws."""
    if n_bits < 1:
        raise SizeError("n_bits must be >= 1")
    if size is None:
        if n_bits > MAX_EXHAUSTIVE_BITS:
            raise SizeError(f"exhaustive enumeration is limited to {MAX_EXHAUSTIVE_BITS} bits")
        strings = itertools.product((0, 1), repeat=n_bits)
        return [(s, parity(s)) for s in strings]
    if size < 1:
        raise SizeError("size must be >= 1")
    rng = np.random.default_rng(rng_seed)
    draws = rng.integers(0, 2, size=(size, n_bits))
    return [(tuple(int(b) for b in row), parity(row)) for row in draws]


@dataclass
class ParityTask(BinaryClassifier):
    dataset: list = field(default_factory=list)

    def __post_init__(self):
        super().__post_init__()
        n = self.circuit.n_qubits
        for bits, label in self.dataset:
            if len(bits) != n or label != parity(bits):
                raise ValueError(f"bad parity example {bits!r} -> {label}")

    @classmethod
    def exhaustive(cls, n_qubits: int, n_layers: int, **kwargs) -> ParityTask:
        return cls(build_hardware_efficient_ansatz(n_qubits, n_layers),
                   dataset=generate_parity_dataset(n_qubits), **kwargs)

    @property
    def kind(self) -> str:
        return "parity"

    @property
    def n_bits(self) -> int:
        return self.circuit.n_qubits

    @property
    def train_set(self) -> list:
        return self.dataset

    def encode(self, x):
        return parity_encoding(x, self.circuit.n_qubits)


def parity_prediction(params, bitstring, task: ParityTask, counter=None) -> float:
    if len(bitstring) != task.n_bits:
        raise ValueError(f"expected {task.n_bits} bits, got {len(bitstring)}")
    return prediction(params, bitstring, task, counter)

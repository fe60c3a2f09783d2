"""Binary classifiers read out as p = (1 - <Z_r>) / 2 on one qubit."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from ..circuit import Circuit, run_circuit
from ..grad import EvalCounter, Objective, counted_cost
from ..noise import NoiseModel
from ..observables import pauli_z_string
from ..qsim import estimate_expectation_shots, expectation


@dataclass
class BinaryClassifier:
    """Shared machinery: subclasses provide ``encode(x)`` and the datasets."""

    circuit: Circuit
    readout_qubit: int = 0
    noise: NoiseModel | None = None
    shots: int | None = None
    shot_seed: int | None = None

    def __post_init__(self):
        self.observable = pauli_z_string(self.circuit.n_qubits, [self.readout_qubit])
        self._rng = np.random.default_rng(self.shot_seed)
        self._readout = None if self.noise is None else self.noise.readout(self.circuit.n_qubits)
        self._consts = self.circuit.psr_constants()

    def encode(self, x):
        raise NotImplementedError

    @property
    def train_set(self) -> list:
        raise NotImplementedError

    @property
    def test_set(self) -> list:
        return self.train_set

    @property
    def shots_per_eval(self) -> int:
        return 0 if self.shots is None else self.shots

    def _z(self, params, encoding, exact: bool) -> float:
        state = run_circuit(self.circuit, params, encoding, noise=self.noise)
        if exact or self.shots is None:
            return expectation(state, self.observable, readout=self._readout)
        return estimate_expectation_shots(state, self.observable, self.shots, self._rng, readout=self._readout)

    def predict(self, params, x, exact: bool = False) -> float:
        return (1.0 - self._z(params, self.encode(x), exact)) / 2.0

    def objective(self, batch: Sequence) -> Objective:
        """MSE of p against the labels of ``batch`` (a list of (x, y) pairs)."""
        if not batch:
            raise ValueError("batch must be non-empty")
        encodings = [self.encode(x) for x, _ in batch]
        labels = np.array([y for _, y in batch], dtype=float)
        size = len(batch)

        def outputs(params):
            return np.array([(1.0 - self._z(params, enc, False)) / 2.0 for enc in encodings])

        return Objective(
            outputs=outputs,
            loss=lambda p: float(np.sum((p - labels) ** 2) / size),
            loss_grad=lambda p: 2.0 * (p - labels) / size,
            n_instances=size,
            psr_constants=self._consts,
            linear=False,
        )

    def sample_objective(self, rng: np.random.Generator, batch_size: int = 1) -> Objective:
        data = self.train_set
        idx = rng.integers(0, len(data), size=batch_size)
        return self.objective([data[i] for i in idx])

    def accuracy(self, params, dataset=None, threshold: float = 0.5) -> float:
        """Fraction classified correctly. Evaluation only: never charged."""
        dataset = self.test_set if dataset is None else dataset
        hits = sum(int(self.predict(params, x, exact=True) >= threshold) == y for x, y in dataset)
        return hits / len(dataset)

    def mean_loss(self, params, dataset=None) -> float:
        dataset = self.train_set if dataset is None else dataset
        return float(np.mean([(self.predict(params, x, exact=True) - y) ** 2 for x, y in dataset]))

    def evaluate(self, params) -> dict:
        return {"accuracy": self.accuracy(params)}


def prediction(params, x, task: BinaryClassifier, counter: EvalCounter | None = None) -> float:
    """Counted single-instance prediction p = (1 - <Z_r>) / 2."""
    _, outputs = counted_cost(task.objective([(x, 0)]), params, counter, return_outputs=True)
    return float(outputs[0])


def mse_loss(params, batch, task: BinaryClassifier, counter: EvalCounter | None = None) -> float:
    return counted_cost(task.objective(batch), params, counter)


def accuracy(params, dataset, task: BinaryClassifier, threshold: float = 0.5) -> float:
    return task.accuracy(params, dataset, threshold)

"""Ground-state energy minimisation for the transverse-field Ising model."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..circuit import Circuit, build_hardware_efficient_ansatz, run_circuit
from ..grad import EvalCounter, Objective, counted_cost
from ..noise import NoiseModel
from ..observables import Hamiltonian, exact_ground_energy, tfim_hamiltonian
from ..qsim import estimate_expectation_shots


@dataclass
class VqeTask:
    hamiltonian: Hamiltonian
    circuit: Circuit
    noise: NoiseModel | None = None
    shots: int | None = None
    shot_seed: int | None = None
    target_energy: float = field(init=False)

    def __post_init__(self):
        if self.hamiltonian.n_qubits != self.circuit.n_qubits:
            raise ValueError("hamiltonian and circuit act on different qubit counts")
        self.target_energy = exact_ground_energy(self.hamiltonian)
        self._rng = np.random.default_rng(self.shot_seed)
        self._readout = None if self.noise is None else self.noise.readout(self.circuit.n_qubits)
        self._consts = self.circuit.psr_constants()

    @classmethod
    def tfim(cls, n_qubits: int, n_layers: int, J: float = 1.0, h: float = 1.0, **kwargs) -> VqeTask:
        return cls(tfim_hamiltonian(n_qubits, J, h), build_hardware_efficient_ansatz(n_qubits, n_layers), **kwargs)

    @property
    def kind(self) -> str:
        return "vqe"

    @property
    def shots_per_eval(self) -> int:
        if self.shots is None:
            return 0
        measured = sum(1 for t in self.hamiltonian.terms if set(t.letters) != {"I"})
        return self.shots * measured

    def energy(self, params) -> float:
        state = run_circuit(self.circuit, params, noise=self.noise)
        seed = None if self.shots is None else self._rng
        return estimate_expectation_shots(state, self.hamiltonian, self.shots, seed, readout=self._readout)

    def objective(self, instance=None) -> Objective:
        return Objective(outputs=self.energy, psr_constants=self._consts)

    def sample_objective(self, rng: np.random.Generator, batch_size: int = 1) -> Objective:
        # no data: every step sees the same cost
        return self.objective()

    def evaluate(self, params) -> dict:
        """Uncounted, noiseless-readout monitoring of the current energy."""
        state = run_circuit(self.circuit, params, noise=self.noise)
        from ..qsim import expectation

        return {"energy": expectation(state, self.hamiltonian, readout=self._readout)}


def vqe_cost(params, task: VqeTask, counter: EvalCounter | None = None) -> float:
    return counted_cost(task.objective(), params, counter)

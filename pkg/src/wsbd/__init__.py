"""Weighted stochastic block descent for variational quantum circuits."""
from .circuit import Circuit, GateKind, build_hardware_efficient_ansatz, run_circuit
from .grad import EvalCounter, counted_cost, finite_difference_gradient, psr_gradient
from .noise import DEFAULT_NOISE, NoiseModel
from .observables import exact_ground_energy, tfim_hamiltonian
from .optim import Adam, Budget, FreezeConfig, Metric, SGD, Variant, wsbd_train

__version__ = "0.1.0"

__all__ = [
    "DEFAULT_NOISE", "SGD", "Adam", "Budget", "Circuit", "EvalCounter", "FreezeConfig", "GateKind", "Metric",
    "NoiseModel", "Variant", "build_hardware_efficient_ansatz", "counted_cost", "exact_ground_energy",
    "finite_difference_gradient", "psr_gradient", "run_circuit", "tfim_hamiltonian", "wsbd_train",
]

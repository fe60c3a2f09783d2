"""Experiment configuration: a TOML file of flat dotted keys.

Example::

    task.kind = "vqe"          # vqe | parity | mnist
    circuit.n_qubits = 2
    circuit.n_layers = 2
    optim.kind = "adam"        # sgd | adam | spsa | nelder_mead
    optim.wsbd = true
    optim.lambda_f = 0.7
    budget.max_fp = 20000
    run.seeds = [0, 1, 2, 3, 4]
"""
from __future__ import annotations

import hashlib
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from ..errors import ConfigError
from ..optim import Metric, Variant

TASKS = ("vqe", "parity", "mnist")
OPTIMIZERS = ("sgd", "adam", "spsa", "nelder_mead")
TARGETS = ("energy", "accuracy", "loss")


@dataclass
class ExperimentConfig:
    task: str = "vqe"
    J: float = 1.0
    h: float = 1.0
    mnist_dir: str | None = None
    mnist_classes: tuple = (0, 1)
    mnist_train_size: int = 512
    mnist_test_size: int = 512
    n_qubits: int = 2
    n_layers: int = 2
    optimizer: str = "adam"
    wsbd: bool = False
    lr: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    amsgrad: bool = False
    lambda_f: float = 0.7
    tau: int = 100
    epsilon: float = 1e-8
    variant: str = "wsbd"
    metric: str = "sum"
    ema_beta: float = 0.9
    batch_size: int = 1
    spsa_a: float = 0.2
    spsa_c: float = 0.1
    spsa_A: float = 10.0
    init_low: float = 0.0
    init_high: float = 6.283185307179586
    shots: int | None = None
    noise: str = "none"  # none | default
    noise_overrides: dict = field(default_factory=dict)
    max_fp: int | None = 20000
    max_steps: int | None = None
    seeds: tuple = (0, 1, 2, 3, 4)
    target_kind: str | None = None  # default follows the task
    target_value: float | str | None = None  # number, "exact", or "baseline"
    tol_e: float = 0.05
    patience: int = 200
    min_improvement: float = 1e-4
    eval_every: int = 1
    seconds_per_fp: float = 4.74
    out: str = "runs"
    grid_lambda_f: tuple = (0.0, 0.1, 0.3, 0.5, 0.7, 0.9)
    grid_tau: tuple = (25, 100, 300, 500)
    grid_mode: str = "two_phase"  # two_phase | cross

    def __post_init__(self):
        self.validate()

    @property
    def resolved_target_kind(self) -> str:
        if self.target_kind is not None:
            return self.target_kind
        return "energy" if self.task == "vqe" else "accuracy"

    @property
    def resolved_lr(self) -> float:
        if self.lr is not None:
            return self.lr
        return 0.1 if self.optimizer == "sgd" else 0.01

    @property
    def label(self) -> str:
        if self.wsbd:
            return f"{self.variant}-{self.optimizer}"
        return self.optimizer

    def validate(self):
        def need(ok, key, msg):
            if not ok:
                raise ConfigError(key, msg)

        need(self.task in TASKS, "task.kind", f"must be one of {TASKS}, got {self.task!r}")
        need(isinstance(self.n_qubits, int) and 1 <= self.n_qubits <= 14, "circuit.n_qubits",
             "must be an integer in [1, 14]")
        need(isinstance(self.n_layers, int) and self.n_layers >= 1, "circuit.n_layers", "must be >= 1")
        need(self.optimizer in OPTIMIZERS, "optim.kind", f"must be one of {OPTIMIZERS}, got {self.optimizer!r}")
        need(not self.wsbd or self.optimizer in ("sgd", "adam"), "optim.wsbd",
             "block descent needs a gradient optimizer (sgd or adam)")
        need(self.lr is None or self.lr > 0, "optim.lr", "must be positive")
        need(0.0 <= self.lambda_f < 1.0, "optim.lambda_f", "must lie in [0, 1)")
        need(isinstance(self.tau, int) and self.tau >= 1, "optim.tau", "must be a positive integer")
        need(self.epsilon > 0, "optim.epsilon", "must be positive")
        need(self.variant in {v.value for v in Variant}, "optim.variant",
             f"must be one of {[v.value for v in Variant]}")
        need(self.metric in {m.value for m in Metric}, "optim.metric",
             f"must be one of {[m.value for m in Metric]}")
        need(0.0 <= self.ema_beta < 1.0, "optim.ema_beta", "must lie in [0, 1)")
        need(self.batch_size >= 1, "optim.batch_size", "must be >= 1")
        need(self.shots is None or (isinstance(self.shots, int) and self.shots >= 1), "run.shots",
             "must be a positive integer or omitted for exact expectations")
        need(self.noise in ("none", "default"), "noise.preset", "must be 'none' or 'default'")
        need(self.max_fp is not None or self.max_steps is not None, "budget",
             "set budget.max_fp and/or budget.max_steps")
        need(self.max_fp is None or self.max_fp >= 0, "budget.max_fp", "must be >= 0")
        need(self.max_steps is None or self.max_steps >= 0, "budget.max_steps", "must be >= 0")
        need(len(self.seeds) > 0, "run.seeds", "must be non-empty")
        need(all(isinstance(s, int) and s >= 0 for s in self.seeds), "run.seeds",
             "must be non-negative integers")
        kind = self.resolved_target_kind
        need(kind in TARGETS, "target.kind", f"must be one of {TARGETS}")
        need((kind == "energy") == (self.task == "vqe") or kind == "loss", "target.kind",
             f"{kind!r} does not apply to task {self.task!r}")
        if isinstance(self.target_value, str):
            need(self.target_value in ("exact", "baseline"), "target.value",
                 "must be a number, 'exact' or 'baseline'")
            need(self.target_value != "exact" or kind == "energy", "target.value",
                 "'exact' only applies to energy targets")
        if kind == "accuracy" and isinstance(self.target_value, (int, float)):
            need(0.0 <= self.target_value <= 1.0, "target.value", "accuracy must lie in [0, 1]")
        need(self.tol_e >= 0, "target.tol_e", "must be >= 0")
        need(self.patience >= 1, "target.patience", "must be >= 1")
        need(self.eval_every >= 1, "target.eval_every", "must be >= 1")
        need(self.seconds_per_fp > 0, "run.seconds_per_fp", "must be positive")
        need(self.task != "mnist" or self.mnist_dir is not None, "task.data_dir",
             "mnist needs a directory with the four IDX files")
        need(self.grid_mode in ("two_phase", "cross"), "grid.mode", "must be 'two_phase' or 'cross'")

    def config_hash(self) -> str:
        """Stable digest of everything that affects a run except the seed list and output dir."""
        d = asdict(self)
        for k in ("seeds", "out", "grid_lambda_f", "grid_tau", "grid_mode"):
            d.pop(k)
        blob = json.dumps(d, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode()).hexdigest()[:12]

    def with_(self, **changes) -> ExperimentConfig:
        return replace(self, **changes)

    def to_dict(self) -> dict:
        return asdict(self)


# dotted key -> field name
KEYS = {
    "task.kind": "task", "task.J": "J", "task.h": "h", "task.data_dir": "mnist_dir",
    "task.classes": "mnist_classes", "task.train_size": "mnist_train_size", "task.test_size": "mnist_test_size",
    "circuit.n_qubits": "n_qubits", "circuit.n_layers": "n_layers",
    "optim.kind": "optimizer", "optim.wsbd": "wsbd", "optim.lr": "lr", "optim.beta1": "beta1",
    "optim.beta2": "beta2", "optim.eps": "adam_eps", "optim.amsgrad": "amsgrad",
    "optim.lambda_f": "lambda_f", "optim.tau": "tau", "optim.epsilon": "epsilon", "optim.variant": "variant",
    "optim.metric": "metric", "optim.ema_beta": "ema_beta", "optim.batch_size": "batch_size",
    "optim.spsa_a": "spsa_a", "optim.spsa_c": "spsa_c", "optim.spsa_A": "spsa_A",
    "optim.init_low": "init_low", "optim.init_high": "init_high",
    "run.shots": "shots", "run.seeds": "seeds", "run.seconds_per_fp": "seconds_per_fp", "run.out": "out",
    "noise.preset": "noise",
    "budget.max_fp": "max_fp", "budget.max_steps": "max_steps",
    "target.kind": "target_kind", "target.value": "target_value", "target.tol_e": "tol_e",
    "target.patience": "patience", "target.min_improvement": "min_improvement",
    "target.eval_every": "eval_every",
    "grid.lambda_f": "grid_lambda_f", "grid.tau": "grid_tau", "grid.mode": "grid_mode",
}
NOISE_FIELDS = ("t1", "t2", "gate_time_1q", "gate_time_2q", "depol_1q", "depol_2q", "idle_error",
                "readout_flip")


def flatten(tree: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in tree.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def _coerce(key: str, name: str, value):
    types = {f.name: f.type for f in fields(ExperimentConfig)}
    t = str(types[name])
    if name in ("seeds", "mnist_classes", "grid_tau"):
        if not isinstance(value, list) or not all(isinstance(v, int) and not isinstance(v, bool) for v in value):
            raise ConfigError(key, "must be a list of integers")
        return tuple(value)
    if name == "grid_lambda_f":
        if not isinstance(value, list) or not all(isinstance(v, (int, float)) for v in value):
            raise ConfigError(key, "must be a list of numbers")
        return tuple(float(v) for v in value)
    if t.startswith("bool"):
        if not isinstance(value, bool):
            raise ConfigError(key, f"must be true or false, got {value!r}")
        return value
    if t.startswith("int"):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(key, f"must be an integer, got {value!r}")
        return value
    if t.startswith("float | str"):
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ConfigError(key, f"must be a number or string, got {value!r}")
        return float(value) if not isinstance(value, str) else value
    if t.startswith("float"):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(key, f"must be a number, got {value!r}")
        return float(value)
    if t.startswith("str"):
        if not isinstance(value, str):
            raise ConfigError(key, f"must be a string, got {value!r}")
        return value
    return value


def config_from_mapping(values: dict) -> ExperimentConfig:
    flat = flatten(values)
    kwargs, noise = {}, {}
    for key, value in flat.items():
        if key.startswith("noise.") and key != "noise.preset":
            name = key.split(".", 1)[1]
            if name not in NOISE_FIELDS:
                raise ConfigError(key, f"unknown noise parameter; expected one of {NOISE_FIELDS}")
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                raise ConfigError(key, "must be a number")
            noise[name] = float(value)
            continue
        if key not in KEYS:
            raise ConfigError(key, "unknown configuration key")
        name = KEYS[key]
        if key == "run.shots" and value == "exact":
            kwargs[name] = None
            continue
        kwargs[name] = _coerce(key, name, value)
    if noise:
        kwargs["noise_overrides"] = noise
        kwargs.setdefault("noise", "default")
    cfg = ExperimentConfig(**kwargs)
    if noise:
        from ..noise import NoiseModel

        try:
            NoiseModel.from_mapping(noise)
        except (ValueError, KeyError) as exc:
            raise ConfigError("noise", str(exc)) from None
    return cfg


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            data = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError("--config", f"file not found: {path}") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError("--config", f"not valid TOML: {exc}") from None
    return config_from_mapping(data)

"""Reduced MNIST: IDX ingestion, PCA to one feature per qubit, angle encoding."""
from __future__ import annotations

import gzip
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..circuit import angle_encoding, build_hardware_efficient_ansatz
from ..errors import FormatError
from .classify import BinaryClassifier, prediction

IDX_IMAGES = 0x00000803
IDX_LABELS = 0x00000801


def load_idx(path) -> np.ndarray:
    """Parse an IDX file (unsigned-byte payload) into an array of its declared shape."""
    path = Path(path)
    opener = gzip.open if path.suffix == ".gz" else open
    with opener(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < 4:
        raise FormatError(f"{path}: file too short for a header (offset 0, {len(raw)} bytes)")
    magic = int.from_bytes(raw[:4], "big")
    if magic not in (IDX_IMAGES, IDX_LABELS):
        raise FormatError(f"{path}: bad magic 0x{magic:08x} at offset 0")
    ndim = magic & 0xFF
    header_end = 4 + 4 * ndim
    if len(raw) < header_end:
        raise FormatError(f"{path}: truncated header, expected {header_end} bytes, got {len(raw)}")
    dims = tuple(int.from_bytes(raw[4 + 4 * i: 8 + 4 * i], "big") for i in range(ndim))
    expected = int(np.prod(dims))
    payload = len(raw) - header_end
    if payload < expected:
        raise FormatError(f"{path}: truncated payload at offset {header_end}, "
                          f"expected {expected} bytes, got {payload}")
    return np.frombuffer(raw, dtype=np.uint8, count=expected, offset=header_end).reshape(dims)


def write_idx(path, array: np.ndarray):
    """Write a uint8 array as IDX (images for 3-D, labels for 1-D)."""
    array = np.asarray(array, dtype=np.uint8)
    magic = 0x00000800 | array.ndim
    with open(path, "wb") as fh:
        fh.write(magic.to_bytes(4, "big"))
        for d in array.shape:
            fh.write(int(d).to_bytes(4, "big"))
        fh.write(array.tobytes())


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k, d), orthonormal rows
    lower: np.ndarray
    upper: np.ndarray
    explained_variance: np.ndarray = field(default=None)

    @property
    def k(self) -> int:
        return len(self.components)

    def project(self, features: np.ndarray) -> np.ndarray:
        return (np.asarray(features, dtype=float) - self.mean) @ self.components.T

    def reconstruct(self, features: np.ndarray) -> np.ndarray:
        return self.mean + self.project(features) @ self.components

    def scale(self, coords: np.ndarray) -> np.ndarray:
        span = np.where(self.upper > self.lower, self.upper - self.lower, 1.0)
        return np.clip((coords - self.lower) / span, 0.0, 1.0) * np.pi

    def to_dict(self) -> dict:
        return {k: np.asarray(v).tolist() for k, v in
                (("mean", self.mean), ("components", self.components), ("lower", self.lower),
                 ("upper", self.upper), ("explained_variance", self.explained_variance))}


def pca_fit(features: np.ndarray, k: int) -> PcaModel:
    x = np.asarray(features, dtype=float)
    if x.ndim != 2:
        raise ValueError("features must be a 2-D (samples, dims) array")
    if not 1 <= k <= x.shape[1]:
        raise ValueError(f"k={k} must lie in [1, {x.shape[1]}]")
    mean = x.mean(axis=0)
    _, s, vt = np.linalg.svd(x - mean, full_matrices=False)
    comps = vt[:k]
    coords = (x - mean) @ comps.T
    var = s[:k] ** 2 / max(len(x) - 1, 1)
    return PcaModel(mean, comps, coords.min(axis=0), coords.max(axis=0), var)


def pca_apply(model: PcaModel, features: np.ndarray, scale: bool = True) -> np.ndarray:
    coords = model.project(features)
    return model.scale(coords) if scale else coords


def pca_fit_transform(features: np.ndarray, k: int) -> tuple[PcaModel, np.ndarray]:
    model = pca_fit(features, k)
    return model, pca_apply(model, features)


def binary_subset(images: np.ndarray, labels: np.ndarray, classes=(0, 1), size: int | None = None,
                  rng_seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Flattened images of two digits, relabelled 0/1, optionally subsampled."""
    keep = np.flatnonzero(np.isin(labels, classes))
    if size is not None and size < len(keep):
        keep = np.sort(np.random.default_rng(rng_seed).choice(keep, size=size, replace=False))
    x = images[keep].reshape(len(keep), -1).astype(float) / 255.0
    y = (labels[keep] == classes[1]).astype(int)
    return x, y


@dataclass
class MnistTask(BinaryClassifier):
    train_x: np.ndarray = None
    train_y: np.ndarray = None
    test_x: np.ndarray = None
    test_y: np.ndarray = None
    pca: PcaModel | None = None

    def __post_init__(self):
        super().__post_init__()
        n = self.circuit.n_qubits
        for name in ("train_x", "test_x"):
            x = getattr(self, name)
            if x.shape[1] != n:
                raise ValueError(f"{name} has {x.shape[1]} features for {n} qubits")
            if np.any(x < 0) or np.any(x > np.pi):
                raise ValueError(f"{name} features must lie in [0, pi]")
        self._train = [(tuple(r), int(y)) for r, y in zip(self.train_x, self.train_y)]
        self._test = [(tuple(r), int(y)) for r, y in zip(self.test_x, self.test_y)]

    @classmethod
    def from_raw(cls, n_qubits: int, n_layers: int, train: tuple, test: tuple, **kwargs) -> MnistTask:
        """``train``/``test`` are (flattened features, 0/1 labels) before PCA."""
        model, train_x = pca_fit_transform(train[0], n_qubits)
        test_x = pca_apply(model, test[0])
        return cls(build_hardware_efficient_ansatz(n_qubits, n_layers), train_x=train_x,
                   train_y=np.asarray(train[1]), test_x=test_x, test_y=np.asarray(test[1]),
                   pca=model, **kwargs)

    @classmethod
    def from_idx(cls, n_qubits: int, n_layers: int, paths: dict, classes=(0, 1), train_size: int = 512,
                 test_size: int = 512, rng_seed=0, **kwargs) -> MnistTask:
        """``paths`` holds train_images / train_labels / test_images / test_labels."""
        train = binary_subset(load_idx(paths["train_images"]), load_idx(paths["train_labels"]),
                              classes, train_size, rng_seed)
        test = binary_subset(load_idx(paths["test_images"]), load_idx(paths["test_labels"]),
                             classes, test_size, rng_seed)
        return cls.from_raw(n_qubits, n_layers, train, test, **kwargs)

    @property
    def kind(self) -> str:
        return "mnist"

    @property
    def train_set(self) -> list:
        return self._train

    @property
    def test_set(self) -> list:
        return self._test

    def encode(self, x):
        return angle_encoding(x, self.circuit.n_qubits)


def mnist_prediction(params, features, task: MnistTask, counter=None) -> float:
    return prediction(params, features, task, counter)

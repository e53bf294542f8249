"""Synthetic linear regression benchmark.

The dataset holds ``m`` points ``(z_k, y_k)``; each point is its own subset, so
subset ``k`` contributes the loss ``f_k(x) = 0.5 * (<x, z_k> - y_k)**2`` and the
overall objective is ``F(x) = sum_k f_k(x)``.  Subsets are indexed from 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from . import _rng

FEATURE_VARIANCE = 100.0
NOISE_VARIANCE = 1.0


class DataPoint(NamedTuple):
    features: np.ndarray
    target: float


@dataclass(frozen=True, eq=False)
class Dataset:
    """Features ``(m, D)``, targets ``(m,)`` and the generating parameters."""

    features: np.ndarray
    targets: np.ndarray
    ground_truth: np.ndarray
    sigma_h: float = 0.0
    seed: int = 0

    def __post_init__(self):
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        targets = np.ascontiguousarray(self.targets, dtype=np.float64)
        if features.ndim != 2 or targets.shape != (features.shape[0],):
            raise ValueError(
                f"features must be (m, D) and targets (m,), got {features.shape} and {targets.shape}"
            )
        truth = np.asarray(self.ground_truth, dtype=np.float64)
        if truth.shape != (features.shape[1],):
            raise ValueError("ground_truth length must equal the dimension")
        for arr in (features, targets, truth):
            arr.flags.writeable = False
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "targets", targets)
        object.__setattr__(self, "ground_truth", truth)

    @property
    def m(self) -> int:
        return self.features.shape[0]

    @property
    def dimension(self) -> int:
        return self.features.shape[1]

    @property
    def num_subsets(self) -> int:
        return self.m

    def __len__(self):
        return self.m

    def __getitem__(self, k) -> DataPoint:
        return DataPoint(self.features[k], float(self.targets[k]))

    @property
    def points(self) -> list[DataPoint]:
        return [self[k] for k in range(self.m)]

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (
            self.sigma_h == other.sigma_h
            and self.seed == other.seed
            and np.array_equal(self.features, other.features)
            and np.array_equal(self.targets, other.targets)
            and np.array_equal(self.ground_truth, other.ground_truth)
        )

    __hash__ = None


def generate_dataset(m: int, D: int, sigma_h: float = 0.0, seed: int = 0) -> Dataset:
    """Draw the synthetic regression problem.

    Features are i.i.d. N(0, 100), the ground truth has standard normal entries
    and ``y_k ~ N(<z_k, x_hat + x_tilde_k>, 1)`` with ``x_tilde_k ~ N(0, sigma_h^2 I)``.
    With ``sigma_h = 0`` no shift is drawn at all.
    """
    if int(m) != m or m < 1:
        raise ValueError(f"m must be a positive integer, got {m!r}")
    if int(D) != D or D < 1:
        raise ValueError(f"D must be a positive integer, got {D!r}")
    if not sigma_h >= 0:
        raise ValueError(f"sigma_h must be non-negative, got {sigma_h!r}")
    m, D = int(m), int(D)

    features = np.sqrt(FEATURE_VARIANCE) * _rng.stream(seed, _rng.FEATURES).standard_normal((m, D))
    truth = _rng.stream(seed, _rng.GROUND_TRUTH).standard_normal(D)
    models = np.broadcast_to(truth, (m, D))
    if sigma_h > 0:
        shift = sigma_h * _rng.stream(seed, _rng.HETEROGENEITY).standard_normal((m, D))
        models = models + shift
    noise = np.sqrt(NOISE_VARIANCE) * _rng.stream(seed, _rng.NOISE).standard_normal(m)
    targets = _rowdot(features, models) + noise
    return Dataset(features, targets, truth, float(sigma_h), int(seed))


def _rowdot(a, b):
    # Row-wise inner products.  A single row goes through the same reduction, so
    # per-subset and batched evaluations agree to the last bit.
    return np.multiply(a, b).sum(axis=-1)


def _check_x(x, dataset):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (dataset.dimension,):
        raise ValueError(f"model has shape {x.shape}, expected ({dataset.dimension},)")
    return x


def _check_k(k, dataset):
    if not 0 <= k < dataset.m:
        raise IndexError(f"subset index {k} out of range [0, {dataset.m})")
    return int(k)


def residuals(x, dataset: Dataset) -> np.ndarray:
    """``<x, z_k> - y_k`` for every subset."""
    x = _check_x(x, dataset)
    return _rowdot(dataset.features, x) - dataset.targets


def subset_loss(x, dataset: Dataset, k: int) -> float:
    x = _check_x(x, dataset)
    k = _check_k(k, dataset)
    res = _rowdot(dataset.features[k], x) - dataset.targets[k]
    return float(0.5 * res * res)


def subset_grad(x, dataset: Dataset, k: int) -> np.ndarray:
    x = _check_x(x, dataset)
    k = _check_k(k, dataset)
    z = dataset.features[k]
    return (_rowdot(z, x) - dataset.targets[k]) * z


def subset_losses(x, dataset: Dataset) -> np.ndarray:
    res = residuals(x, dataset)
    return 0.5 * res * res


def subset_grads(x, dataset: Dataset) -> np.ndarray:
    """All per-subset gradients as an ``(M, D)`` array; row ``k`` is ``grad f_k(x)``."""
    res = residuals(x, dataset)
    return res[:, None] * dataset.features


def ordered_sum(rows: np.ndarray) -> np.ndarray:
    """Sum along the first axis strictly in ascending index order.

    ``np.sum`` switches to pairwise summation whenever the reduced axis is
    contiguous (e.g. a single column), so the order would depend on the shape.
    A running sum has no such switch.
    """
    rows = np.asarray(rows, dtype=np.float64)
    if rows.shape[0] == 0:
        return np.zeros(rows.shape[1:])
    return np.cumsum(rows, axis=0)[-1]


def total_loss(x, dataset: Dataset) -> float:
    losses = subset_losses(x, dataset)
    return float(losses.sum())


def total_grad(x, dataset: Dataset) -> np.ndarray:
    return ordered_sum(subset_grads(x, dataset))


def optimum(dataset: Dataset) -> np.ndarray:
    """Least-squares minimiser of ``F`` (reference point for experiments)."""
    sol, *_ = np.linalg.lstsq(dataset.features, dataset.targets, rcond=None)
    return sol


def save_dataset(dataset: Dataset, path) -> None:
    """Write the line-oriented text format.

    Header ``m D sigma_h seed``, then one line per point: D features followed by
    the target, all with 17 significant digits.
    """
    with open(path, "w") as fh:
        fh.write(f"{dataset.m} {dataset.dimension} {dataset.sigma_h!r} {dataset.seed}\n")
        for z, y in zip(dataset.features, dataset.targets):
            fh.write(" ".join(f"{v:.17g}" for v in (*z, y)))
            fh.write("\n")


def load_dataset(path) -> Dataset:
    """Read a file written by :func:`save_dataset`.

    The format carries no ground truth; it is regenerated from the header
    (it only depends on ``seed`` and ``D``).
    """
    with open(path) as fh:
        header = fh.readline().split()
        if len(header) != 4:
            raise ValueError(f"{path}:1: expected header 'm D sigma_h seed'")
        m, D, sigma_h, seed = int(header[0]), int(header[1]), float(header[2]), int(header[3])
        rows = []
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            vals = line.split()
            if len(vals) != D + 1:
                raise ValueError(f"{path}:{lineno}: expected {D + 1} values, got {len(vals)}")
            rows.append([float(v) for v in vals])
    if len(rows) != m:
        raise ValueError(f"{path}: header declares {m} points, found {len(rows)}")
    data = np.array(rows, dtype=np.float64).reshape(m, D + 1)
    truth = _rng.stream(seed, _rng.GROUND_TRUTH).standard_normal(D)
    return Dataset(data[:, :D], data[:, D], truth, sigma_h, seed)

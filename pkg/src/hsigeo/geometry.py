"""Class-mean geometry, within-class spread and low-rank compression curves."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .errors import ComparisonError, ConfigError, DegenerateAngleError, DegenerateInputError
from .hsi_io import FeatureSet

CENTER_TOL = 1e-12

KINDS = ("distance", "angle_degrees", "margin", "delta")


@dataclass(frozen=True)
class ClassMeans:
    means: np.ndarray
    counts: np.ndarray
    center: np.ndarray
    class_ids: np.ndarray

    @property
    def m(self) -> int:
        return self.means.shape[0]

    @property
    def centered(self) -> np.ndarray:
        return self.means - self.center


@dataclass(frozen=True)
class SymMatrixReport:
    """Square class-by-class matrix. Absent entries (margins only) are NaN.

    For ``kind == "delta"``, ``base_kind`` records what was subtracted.
    """

    values: np.ndarray
    kind: str
    class_ids: np.ndarray
    base_kind: str | None = None

    def __post_init__(self):
        v = np.asarray(self.values, dtype=np.float64)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise ValueError(f"report matrix must be square, got {v.shape}")
        if self.kind not in KINDS:
            raise ValueError(f"unknown report kind {self.kind!r}")
        if len(self.class_ids) != v.shape[0]:
            raise ValueError("class id count does not match matrix size")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "class_ids", np.asarray(self.class_ids))

    @property
    def m(self) -> int:
        return self.values.shape[0]

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def off_diagonal(self) -> np.ndarray:
        """Present upper-triangle entries, in row-major pair order."""
        iu = np.triu_indices(self.m, k=1)
        vals = self.values[iu]
        return vals[~np.isnan(vals)]


@dataclass(frozen=True)
class VariabilitySummary:
    per_class: np.ndarray
    mean: float
    std: float


@dataclass(frozen=True)
class CompressionCurves:
    dims: np.ndarray
    fractions: np.ndarray
    per_class: np.ndarray  # m x len(dims)
    average: np.ndarray
    class_ids: np.ndarray
    weighted: bool = False


def class_means(fs: FeatureSet) -> ClassMeans:
    counts = np.bincount(fs.labels, minlength=fs.m)
    means = np.stack([fs.rows(j).mean(axis=0) for j in range(fs.m)])
    center = means.mean(axis=0)
    return ClassMeans(means, counts, center, fs.class_ids)


def _pairwise(values: np.ndarray) -> np.ndarray:
    out = np.array(values, dtype=np.float64)
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 0.0)
    return out


def mean_distance_matrix(cm: ClassMeans) -> SymMatrixReport:
    if cm.m < 2:
        raise DegenerateInputError("distance matrix needs at least two classes")
    diff = cm.means[:, None, :] - cm.means[None, :, :]
    d = np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))
    return SymMatrixReport(_pairwise(d), "distance", cm.class_ids)


def _unit_centered(cm: ClassMeans) -> np.ndarray:
    C = cm.centered
    norms = np.linalg.norm(C, axis=1)
    for j, nrm in enumerate(norms):
        if nrm <= CENTER_TOL:
            raise DegenerateAngleError(cm.class_ids[j], nrm)
    return C / norms[:, None]


def centered_cosines(cm: ClassMeans) -> np.ndarray:
    """Cosine matrix of class means after subtracting the center of means."""
    U = _unit_centered(cm)
    cos = np.clip(U @ U.T, -1.0, 1.0)
    cos = 0.5 * (cos + cos.T)
    np.fill_diagonal(cos, 1.0)
    return cos


def mean_angle_matrix(cm: ClassMeans) -> SymMatrixReport:
    """Pairwise angles in degrees between recentered class means."""
    if cm.m < 2:
        raise DegenerateInputError("angle matrix needs at least two classes")
    U = _unit_centered(cm)
    # 2 atan2(|u - v|, |u + v|) equals arccos(u.v) for unit vectors but keeps
    # full precision near 0 and 180 degrees, where arccos is ill-conditioned
    diff = np.linalg.norm(U[:, None, :] - U[None, :, :], axis=2)
    summ = np.linalg.norm(U[:, None, :] + U[None, :, :], axis=2)
    ang = np.degrees(2.0 * np.arctan2(diff, summ))
    return SymMatrixReport(_pairwise(ang), "angle_degrees", cm.class_ids)


def class_variability(fs: FeatureSet, cm: ClassMeans | None = None) -> VariabilitySummary:
    """Average distance of each class's members to its mean.

    The summary std is the population deviation over classes.
    """
    if cm is None:
        cm = class_means(fs)
    v = np.array(
        [
            np.linalg.norm(fs.rows(j) - cm.means[j], axis=1).mean()
            for j in range(fs.m)
        ]
    )
    return VariabilitySummary(v, float(v.mean()), float(v.std()))


def _tail_energy(X: np.ndarray) -> np.ndarray:
    """tail[k] = sum of squared singular values beyond the k-th, for k = 0..p."""
    p = X.shape[1]
    s = np.linalg.svd(X, compute_uv=False)
    s2 = np.zeros(p + 1)
    s2[: s.size] = s * s
    # reverse cumulative sum keeps the tail exactly non-increasing
    return np.cumsum(s2[::-1])[::-1]


def compression_curve(
    fs: FeatureSet, dims=None, weighted: bool = False, threads: int = 1
) -> CompressionCurves:
    """RMS residual of each class to its best k-dimensional affine fit.

    ``error_j(k) = sqrt(sum_{i>k} sigma_i^2 / n_j)`` where ``sigma`` are the
    singular values of the mean-centered class rows.
    """
    p = fs.p
    dims = np.arange(p + 1) if dims is None else np.asarray(dims, dtype=np.int64)
    if dims.ndim != 1 or dims.size == 0:
        raise ConfigError("dims must be a non-empty list of integers")
    if dims.min() < 0 or dims.max() > p:
        raise ConfigError(f"hyperplane dimensions must lie in [0, {p}]")

    def one(j):
        X = fs.rows(j)
        tail = _tail_energy(X - X.mean(axis=0))
        return np.sqrt(tail[dims] / X.shape[0])

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        per_class = np.stack(list(pool.map(one, range(fs.m))))

    if weighted:
        w = np.bincount(fs.labels, minlength=fs.m).astype(np.float64)
        average = (w[:, None] * per_class).sum(axis=0) / w.sum()
    else:
        average = per_class.mean(axis=0)
    return CompressionCurves(
        dims, dims / p, per_class, average, fs.class_ids, weighted=weighted
    )


def delta_matrix(a: SymMatrixReport, b: SymMatrixReport) -> SymMatrixReport:
    """Entrywise ``a - b``; absent entries stay absent."""
    if a.kind != b.kind:
        raise ComparisonError(f"cannot subtract a {b.kind} report from a {a.kind} report")
    if a.values.shape != b.values.shape:
        raise ComparisonError(f"shape mismatch {a.values.shape} vs {b.values.shape}")
    if not np.array_equal(a.class_ids, b.class_ids):
        raise ComparisonError(
            f"class ids differ: {list(a.class_ids)} vs {list(b.class_ids)}"
        )
    return SymMatrixReport(a.values - b.values, "delta", a.class_ids, base_kind=a.kind)

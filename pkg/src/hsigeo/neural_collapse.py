"""Simplex equiangular tight frames and collapse statistics of class means."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError
from .geometry import ClassMeans, centered_cosines, mean_angle_matrix, mean_distance_matrix

NC_FIELDS = (
    "m",
    "etf_angle",
    "distance_mean",
    "distance_std",
    "angle_mean",
    "angle_std",
    "ext_equinorm_cv",
    "ext_equiangular_dev",
)


def etf_angle_degrees(m: int) -> float:
    """Pairwise angle between vertices of a regular simplex with ``m`` vertices."""
    if m < 2:
        raise DomainError(f"simplex ETF needs at least 2 classes, got {m}")
    return math.degrees(math.acos(-1.0 / (m - 1)))


def make_simplex_etf(m: int, p: int, scale: float = 1.0) -> np.ndarray:
    """``m`` vectors in R^p of norm ``scale``, summing to zero, cosines -1/(m-1)."""
    if m < 2:
        raise DomainError(f"simplex ETF needs at least 2 classes, got {m}")
    if p < m - 1:
        raise DimensionError(f"simplex ETF with {m} vertices needs p >= {m - 1}, got {p}")
    if not scale > 0:
        raise DomainError("scale must be positive")
    E = np.eye(m) - 1.0 / m
    # orthonormal basis of the (m-1)-dim span of the centered basis vectors
    U, _, _ = np.linalg.svd(E)
    coords = E @ U[:, : m - 1]
    coords -= coords.mean(axis=0)
    coords /= np.linalg.norm(coords, axis=1, keepdims=True)
    out = np.zeros((m, p))
    out[:, : m - 1] = scale * coords
    return out


@dataclass(frozen=True)
class NcReport:
    """Distance/angle summary of recentered class means against a simplex ETF.

    ``equinorm_cv`` and ``equiangular_dev`` are extensions beyond the
    distance/angle rows; both are zero for an exact simplex ETF.
    """

    m: int
    etf_angle_degrees: float
    distance_mean: float
    distance_std: float
    angle_mean: float
    angle_std: float
    equinorm_cv: float
    equiangular_dev: float

    def row(self) -> list:
        return [
            self.m,
            self.etf_angle_degrees,
            self.distance_mean,
            self.distance_std,
            self.angle_mean,
            self.angle_std,
            self.equinorm_cv,
            self.equiangular_dev,
        ]


def nc_report(cm: ClassMeans) -> NcReport:
    iu = np.triu_indices(cm.m, k=1)
    dist = mean_distance_matrix(cm).values[iu]
    ang = mean_angle_matrix(cm).values[iu]
    cos = centered_cosines(cm)[iu]
    norms = np.linalg.norm(cm.centered, axis=1)
    return NcReport(
        m=cm.m,
        etf_angle_degrees=etf_angle_degrees(cm.m),
        distance_mean=float(dist.mean()),
        distance_std=float(dist.std()),
        angle_mean=float(ang.mean()),
        angle_std=float(ang.std()),
        equinorm_cv=float(norms.std() / norms.mean()),
        equiangular_dev=float(np.max(np.abs(cos - cos.mean()))),
    )

"""Synthetic labeled feature sets used as fixtures and sanity checks."""

from __future__ import annotations

import numpy as np

from .neural_collapse import make_simplex_etf

KINDS = ("etf", "isotropic", "ellipsoid")


def random_orthogonal(p: int, rng: np.random.Generator) -> np.ndarray:
    Q, R = np.linalg.qr(rng.standard_normal((p, p)))
    return Q * np.sign(np.diag(R))


def make_synthetic(kind, m, p, count, noise, seed=0):
    """Return ``(features, labels)`` with ``count`` points per class, labels ``1..m``.

    ``etf`` centers classes on simplex ETF vertices; ``isotropic`` and
    ``ellipsoid`` use Gaussian random centers. Noise is isotropic Gaussian
    with std ``noise`` except for ``ellipsoid``, whose axis scales decay
    geometrically from ``noise`` to ``noise / 100`` in a random orientation.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown kind {kind!r}; expected one of {KINDS}")
    if m < 2 or p < 1 or count < 1 or noise < 0:
        raise ValueError("need m >= 2, p >= 1, count >= 1, noise >= 0")
    rng = np.random.default_rng(seed)
    if kind == "etf":
        centers = make_simplex_etf(m, p, 1.0)
    else:
        centers = rng.standard_normal((m, p))
    labels = np.repeat(np.arange(1, m + 1, dtype=np.int32), count)
    X = np.repeat(centers, count, axis=0)
    if noise > 0:
        Z = rng.standard_normal((m * count, p))
        if kind == "ellipsoid":
            axes = noise * np.geomspace(1.0, 0.01, p)
            Z = (Z * axes) @ random_orthogonal(p, rng).T
        else:
            Z = noise * Z
        X = X + Z
    return X, labels

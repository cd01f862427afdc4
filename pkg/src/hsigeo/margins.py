"""Pairwise linear separability and hard maximum margins between classes.

The hard margin between two point sets is half the Euclidean distance
between their convex hulls. That distance is the norm of the minimum-norm
point of the Minkowski difference ``conv(A) - conv(B)``, which we find with
Wolfe's minimum-norm-point method. The difference set is never formed: its
linear minimization oracle splits into an argmin over ``A`` and an argmax
over ``B``, so each iteration costs one pass over the data.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .errors import ConfigError, ConvergenceError, DegenerateInputError, EmptyInputError
from .geometry import SymMatrixReport
from .hsi_io import FeatureSet

SEPARATION_GAP = 1e-9
ABS_GAP_FLOOR = 1e-14


@dataclass(frozen=True)
class MarginConfig:
    tol: float = 1e-10
    max_iter: int = 20000
    soft_C: float = 1000.0

    def __post_init__(self):
        if not 0 < self.tol <= 1e-4:
            raise ConfigError(f"solver tolerance must be in (0, 1e-4], got {self.tol}")
        if not self.soft_C > 0:
            raise ConfigError("soft_C must be positive")
        if self.max_iter < 1:
            raise ConfigError("max_iter must be at least 1")


@dataclass(frozen=True)
class MarginResult:
    """Outcome of the hard-margin problem for one class pair.

    When separable, ``normal`` is a unit vector and class ``i`` points satisfy
    ``normal @ x + offset >= margin`` while class ``j`` points satisfy
    ``normal @ x + offset <= -margin``. ``lower``/``upper`` bracket the hull
    distance (twice the margin) in input units.
    """

    separable: bool
    margin: float | None
    normal: np.ndarray | None
    offset: float | None
    support_i: np.ndarray
    support_j: np.ndarray
    iterations: int
    lower: float
    upper: float


def _prepare(Xi, Xj):
    A = np.asarray(Xi, dtype=np.float64)
    B = np.asarray(Xj, dtype=np.float64)
    if A.ndim == 1:
        A = A[None, :]
    if B.ndim == 1:
        B = B[None, :]
    if A.shape[0] == 0 or B.shape[0] == 0:
        raise EmptyInputError("both point sets must be non-empty")
    if A.shape[1] != B.shape[1]:
        raise DegenerateInputError(
            f"point sets live in different dimensions ({A.shape[1]} vs {B.shape[1]})"
        )
    # center then scale the pair to unit max-norm; distances scale back exactly
    shift = np.vstack([A, B]).mean(axis=0)
    A = A - shift
    B = B - shift
    scale = max(np.linalg.norm(A, axis=1).max(), np.linalg.norm(B, axis=1).max())
    if scale > 0:
        A = A / scale
        B = B / scale
    return A, B, shift, scale


def _affine_minimizer(P: np.ndarray) -> np.ndarray:
    """Weights ``a`` with ``sum(a) == 1`` minimizing ``||P.T @ a||``."""
    if P.shape[0] == 1:
        return np.ones(1)
    D = P[1:] - P[0]
    beta = np.linalg.lstsq(D.T, -P[0], rcond=None)[0]
    return np.concatenate([[1.0 - beta.sum()], beta])


def _hull_distance(A, B, tol, max_iter):
    """Wolfe's min-norm point over conv(A) - conv(B).

    Returns (lam, pairs, x, lower, upper, iterations) where ``pairs`` are the
    (i, j) index pairs spanning the final corral.
    """
    direction = A.mean(axis=0) - B.mean(axis=0)
    i0 = int(np.argmin(A @ direction))
    j0 = int(np.argmax(B @ direction))
    pairs = [(i0, j0)]
    lam = np.ones(1)
    x = A[i0] - B[j0]
    lower, upper = 0.0, float(np.linalg.norm(x))

    for it in range(1, max_iter + 1):
        xx = float(x @ x)
        upper = math.sqrt(xx)
        if upper <= SEPARATION_GAP:
            return lam, pairs, x, 0.0, upper, it
        i = int(np.argmin(A @ x))
        j = int(np.argmax(B @ x))
        q = A[i] - B[j]
        lower = max(0.0, float(x @ q) / upper)
        if upper - lower <= max(tol * upper, ABS_GAP_FLOOR):
            return lam, pairs, x, lower, upper, it
        if (i, j) in pairs:
            # corral already holds the oracle point: floating-point floor reached
            return lam, pairs, x, lower, upper, it

        pairs.append((i, j))
        lam = np.append(lam, 0.0)
        while True:
            P = A[[a for a, _ in pairs]] - B[[b for _, b in pairs]]
            alpha = _affine_minimizer(P)
            if np.all(alpha > 0):
                lam = alpha
                break
            neg = alpha <= 0
            ratios = np.full(alpha.shape, np.inf)
            ratios[neg] = lam[neg] / (lam[neg] - alpha[neg])
            k = int(np.argmin(ratios))
            theta = ratios[k]
            lam = theta * alpha + (1.0 - theta) * lam
            lam[k] = 0.0
            keep = lam > 0
            pairs = [pr for pr, kp in zip(pairs, keep) if kp]
            lam = lam[keep]
        lam = lam / lam.sum()
        P = A[[a for a, _ in pairs]] - B[[b for _, b in pairs]]
        x = lam @ P

    raise ConvergenceError(
        f"hull distance did not converge in {max_iter} iterations "
        f"(bracket [{lower:.6e}, {upper:.6e}] in normalized units)",
        lower=lower,
        upper=upper,
        iterations=max_iter,
    )


def max_margin(Xi, Xj, cfg: MarginConfig | None = None) -> MarginResult:
    """Hard maximum-margin hyperplane between two point sets.

    The margin is the distance from the optimal hyperplane to the nearest
    point, i.e. half the distance between the convex hulls.
    """
    cfg = cfg or MarginConfig()
    A, B, shift, scale = _prepare(Xi, Xj)
    if scale == 0:
        empty = np.zeros(0, dtype=np.int64)
        return MarginResult(False, None, None, None, empty, empty, 0, 0.0, 0.0)
    try:
        lam, pairs, x, lower, upper, iters = _hull_distance(A, B, cfg.tol, cfg.max_iter)
    except ConvergenceError as exc:
        raise ConvergenceError(
            str(exc),
            lower=exc.lower * scale,
            upper=exc.upper * scale,
            iterations=exc.iterations,
        ) from None

    idx_i = np.array([a for a, _ in pairs])
    idx_j = np.array([b for _, b in pairs])
    support_i = np.unique(idx_i)
    support_j = np.unique(idx_j)
    if upper <= SEPARATION_GAP:
        return MarginResult(
            False, None, None, None, support_i, support_j, iters, 0.0, float(upper * scale)
        )

    p_near = lam @ A[idx_i]
    q_near = lam @ B[idx_j]
    gap = p_near - q_near
    dist = float(np.linalg.norm(gap))
    normal = gap / dist
    midpoint = 0.5 * (p_near + q_near) * scale + shift
    return MarginResult(
        separable=True,
        margin=float(0.5 * dist * scale),
        normal=normal,
        offset=float(-normal @ midpoint),
        support_i=support_i,
        support_j=support_j,
        iterations=iters,
        lower=float(lower * scale),
        upper=float(upper * scale),
    )


def separability_check(Xi, Xj) -> bool:
    """Whether the convex hulls of two point sets are disjoint.

    Decided by a linear program independent of the margin solver: maximize
    ``t`` subject to ``w.x + b >= t`` on ``Xi``, ``w.x + b <= -t`` on ``Xj``
    and ``|w|_inf <= 1``. The optimum is half the L1 distance between the
    hulls, which is compared against the separation gap.
    """
    A, B, _, scale = _prepare(Xi, Xj)
    if scale == 0:
        return False
    p = A.shape[1]
    # variables: w (p), b, t
    ones_a = np.ones((A.shape[0], 1))
    ones_b = np.ones((B.shape[0], 1))
    A_ub = np.vstack(
        [
            np.hstack([-A, -ones_a, ones_a]),
            np.hstack([B, ones_b, ones_b]),
        ]
    )
    b_ub = np.zeros(A_ub.shape[0])
    c = np.zeros(p + 2)
    c[-1] = -1.0
    bounds = [(-1.0, 1.0)] * p + [(None, None), (None, 1.0)]
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=bounds, method="highs")
    if res.status != 0:
        raise ConvergenceError(f"separability LP failed: {res.message}")
    return bool(2.0 * -res.fun > SEPARATION_GAP)


def pairwise_margin_results(
    fs: FeatureSet, cfg: MarginConfig | None = None, threads: int = 1
) -> dict[tuple[int, int], MarginResult]:
    """Max-margin results for every unordered class pair ``(i, j)``, ``i < j``."""
    cfg = cfg or MarginConfig()
    if fs.m < 2:
        raise DegenerateInputError("pairwise margins need at least two classes")
    rows = [fs.rows(j) for j in range(fs.m)]
    pairs = [(i, j) for i in range(fs.m) for j in range(i + 1, fs.m)]

    def one(pair):
        i, j = pair
        try:
            return max_margin(rows[i], rows[j], cfg)
        except ConvergenceError as exc:
            raise ConvergenceError(
                f"classes {fs.class_ids[i]} vs {fs.class_ids[j]}: {exc}",
                lower=exc.lower,
                upper=exc.upper,
                iterations=exc.iterations,
            ) from None

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        results = list(pool.map(one, pairs))
    return dict(zip(pairs, results))


def margin_report(results: dict, class_ids) -> SymMatrixReport:
    m = len(class_ids)
    values = np.full((m, m), np.nan)
    for (i, j), res in results.items():
        if res.separable:
            values[i, j] = values[j, i] = res.margin
    return SymMatrixReport(values, "margin", class_ids)


def pairwise_margins(
    fs: FeatureSet, cfg: MarginConfig | None = None, threads: int = 1
) -> SymMatrixReport:
    """Margin matrix; non-separable pairs and the diagonal are absent (NaN)."""
    return margin_report(pairwise_margin_results(fs, cfg, threads), fs.class_ids)


def soft_margin_svm(Xi, Xj, C: float | None = None):
    """Auxiliary soft-margin linear SVM (default ``C = 1000``).

    Returns ``(normal, offset, geometric_margin, training_accuracy)`` with the
    normal scaled to unit length. Not used for hard-margin reports.
    """
    from sklearn.svm import SVC

    C = MarginConfig().soft_C if C is None else C
    A = np.asarray(Xi, dtype=np.float64)
    B = np.asarray(Xj, dtype=np.float64)
    X = np.vstack([A, B])
    y = np.concatenate([np.ones(len(A)), -np.ones(len(B))])
    clf = SVC(kernel="linear", C=C).fit(X, y)
    w = clf.coef_.ravel()
    nrm = float(np.linalg.norm(w))
    acc = float(np.mean(clf.predict(X) == y))
    return w / nrm, float(clf.intercept_[0]) / nrm, 1.0 / nrm, acc

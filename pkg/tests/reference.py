"""Independent reference computations for the tests.

Everything here is built from scipy/numpy primitives along different
code paths than the production package (pairwise distances via cdist,
log-dets via slogdet, the weighted allocation via bisection on the
division form), so agreement with the package is meaningful.
"""

import numpy as np
from scipy.spatial.distance import cdist


def fl_kernel(points, kind, gamma=None):
    """Similarity matrix under facility-location semantics."""
    points = np.asarray(points, dtype=np.float64)
    if kind == "euclidean":
        return -cdist(points, points, "sqeuclidean")
    if kind == "rbf":
        return np.exp(-gamma * cdist(points, points, "sqeuclidean"))
    if kind == "cosine":
        return 1.0 - cdist(points, points, "cosine")
    raise ValueError(kind)


def dpp_kernel(points, kind, gamma=None):
    """Similarity matrix under DPP semantics (euclidean = inner product)."""
    points = np.asarray(points, dtype=np.float64)
    if kind == "euclidean":
        return points @ points.T
    return fl_kernel(points, kind, gamma)


def fl_objective(kernel_matrix):
    """Coverage value of a subset: sum over points of best similarity."""

    def value(subset):
        return float(kernel_matrix[:, list(subset)].max(axis=1).sum())

    return value


def dpp_objective(kernel_matrix, jitter):
    """Jittered log-det of the subset's kernel block."""

    def value(subset):
        subset = list(subset)
        block = kernel_matrix[np.ix_(subset, subset)] + jitter * np.eye(len(subset))
        sign, logdet = np.linalg.slogdet(block)
        return float(logdet) if sign > 0 else -np.inf

    return value


def bisect_weighted_alpha(counts, conf, budget, base=5, iters=200):
    """Clamped inverse-confidence allocation solved by pure bisection.

    Uses the division form alpha = clip(c / conf, ...) rather than the
    package's multiply-by-inverse form.
    """
    counts = np.asarray(counts, dtype=np.float64)
    conf = np.asarray(conf, dtype=np.float64)
    lo = np.minimum(base, counts)
    hi = counts

    def spend(c):
        return np.clip(c / conf, lo, hi).sum()

    a, b = 0.0, float(conf.max() * counts.max()) + 1.0
    for _ in range(iters):
        mid = 0.5 * (a + b)
        if spend(mid) < budget:
            a = mid
        else:
            b = mid
    return np.clip(b / conf, lo, hi)

"""K-means and X-means clustering for the detector threshold.

The OOD detector's distance threshold is the diameter of the most-populated
cluster found by X-means on a training feature.  X-means grows the cluster
count from ``k_min`` by splitting clusters in two whenever the spherical
Gaussian BIC prefers the split, stopping at ``k_max``.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import pdist
from sklearn.base import BaseEstimator, ClusterMixin

from .rng import as_generator

EXACT_DIAMETER_LIMIT = 2000
_VAR_FLOOR = 1e-12


class DegenerateClusterWarning(UserWarning):
    """Raised when the largest cluster is a singleton and the diameter is 0."""


@dataclass
class Clustering:
    """Cluster centers plus the per-point assignment that produced them."""

    centers: np.ndarray  # (k, d)
    assignment: np.ndarray  # (m,) int
    k: int
    objective_history: list[float] = field(default_factory=list)

    def member_counts(self) -> np.ndarray:
        return np.bincount(self.assignment, minlength=self.k)


def _as_matrix(points) -> np.ndarray:
    pts = np.asarray(points, dtype=float)
    if pts.ndim == 1:
        pts = pts.reshape(-1, 1)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise ValueError("points must be a non-empty (m, d) matrix")
    return pts


def _sq_dists(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    diff = points[:, None, :] - centers[None, :, :]
    return np.einsum("mkd,mkd->mk", diff, diff)


def _kmeanspp_init(points: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    m = points.shape[0]
    centers = np.empty((k, points.shape[1]))
    centers[0] = points[rng.integers(m)]
    closest = np.einsum("md,md->m", points - centers[0], points - centers[0])
    for j in range(1, k):
        total = closest.sum()
        if total <= 0:
            idx = rng.integers(m)
        else:
            idx = rng.choice(m, p=closest / total)
        centers[j] = points[idx]
        d = np.einsum("md,md->m", points - centers[j], points - centers[j])
        np.minimum(closest, d, out=closest)
    return centers


def kmeans(
    points,
    k: int,
    rng,
    max_iter: int = 100,
    tol: float = 1e-6,
    init_centers: np.ndarray | None = None,
) -> Clustering:
    """Lloyd's algorithm from a k-means++ start.

    Empty clusters are re-seeded to the point farthest from its current
    center.  ``objective_history`` records the sum of squared distances to
    assigned centers after every assignment step; it is non-increasing.
    """
    points = _as_matrix(points)
    m = points.shape[0]
    if not 1 <= k <= m:
        raise ValueError(f"k must be in [1, {m}], got {k}")
    rng = as_generator(rng)
    if init_centers is None:
        centers = _kmeanspp_init(points, k, rng)
    else:
        centers = np.array(init_centers, dtype=float, copy=True)
        if centers.shape != (k, points.shape[1]):
            raise ValueError("init_centers shape does not match (k, d)")

    history: list[float] = []
    assignment = np.zeros(m, dtype=np.intp)
    for _ in range(max_iter):
        d2 = _sq_dists(points, centers)
        assignment = d2.argmin(axis=1)
        history.append(float(d2[np.arange(m), assignment].sum()))

        new_centers = centers.copy()
        for j in range(k):
            mask = assignment == j
            if mask.any():
                new_centers[j] = points[mask].mean(axis=0)
        # Re-seed empties to the current farthest points, one per empty slot.
        counts = np.bincount(assignment, minlength=k)
        if (counts == 0).any():
            dist_to_own = d2[np.arange(m), assignment]
            order = np.argsort(dist_to_own)[::-1]
            used = 0
            for j in np.flatnonzero(counts == 0):
                new_centers[j] = points[order[used]]
                used += 1
        shift = np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max()
        centers = new_centers
        if shift < tol:
            break

    d2 = _sq_dists(points, centers)
    assignment = d2.argmin(axis=1)
    history.append(float(d2[np.arange(m), assignment].sum()))
    return Clustering(centers, assignment, k, history)


def _spherical_bic(points: np.ndarray, centers: np.ndarray, assignment: np.ndarray) -> float:
    """BIC of a spherical Gaussian mixture with a shared pooled variance."""
    m, d = points.shape
    k = centers.shape[0]
    sse = float(((points - centers[assignment]) ** 2).sum())
    var = max(sse / (d * max(m - k, 1)), _VAR_FLOOR)
    counts = np.bincount(assignment, minlength=k).astype(float)
    nonzero = counts > 0
    loglik = (
        -0.5 * m * d * np.log(2.0 * np.pi * var)
        - sse / (2.0 * var)
        + float((counts[nonzero] * np.log(counts[nonzero] / m)).sum())
    )
    n_params = (k - 1) + k * d + 1
    return loglik - 0.5 * n_params * np.log(m)


def xmeans(points, k_min: int = 1, k_max: int | None = None, rng=None) -> Clustering:
    """Grow the cluster count by BIC-scored binary splits.

    Each round attempts a local 2-means split of every cluster and keeps the
    split iff the two-cluster BIC of the member points beats the one-cluster
    BIC.  After a round with accepted splits, all centers are refined
    globally.  Stops when no split is accepted or ``k_max`` is reached.
    """
    points = _as_matrix(points)
    m = points.shape[0]
    if k_max is None:
        k_max = min(20, int(np.sqrt(m)))
    k_max = max(k_min, min(k_max, m))
    if k_min < 1:
        raise ValueError("k_min must be >= 1")
    rng = as_generator(rng)

    clustering = kmeans(points, k_min, rng)
    while clustering.k < k_max:
        new_centers: list[np.ndarray] = []
        accepted = 0
        budget = k_max - clustering.k
        for j in range(clustering.k):
            members = points[clustering.assignment == j]
            if accepted >= budget or members.shape[0] < 3:
                new_centers.append(clustering.centers[j])
                continue
            split = kmeans(members, 2, rng)
            if split.member_counts().min() == 0:
                new_centers.append(clustering.centers[j])
                continue
            one = _spherical_bic(members, members.mean(axis=0, keepdims=True),
                                 np.zeros(members.shape[0], dtype=np.intp))
            two = _spherical_bic(members, split.centers, split.assignment)
            if two > one:
                new_centers.extend(split.centers)
                accepted += 1
            else:
                new_centers.append(clustering.centers[j])
        if accepted == 0:
            break
        clustering = kmeans(points, len(new_centers), rng,
                            init_centers=np.asarray(new_centers))
    return clustering


def largest_cluster_diameter(clustering: Clustering, points) -> float:
    """Diameter of the most-populated cluster.

    Exact maximum pairwise distance for clusters up to
    ``EXACT_DIAMETER_LIMIT`` members; beyond that, the diagonal of the
    member bounding box is used as an upper-bound surrogate.  A singleton
    largest cluster yields 0 with a DegenerateClusterWarning.
    """
    points = _as_matrix(points)
    counts = clustering.member_counts()
    members = points[clustering.assignment == int(counts.argmax())]
    if members.shape[0] <= 1:
        warnings.warn(
            "largest cluster is a singleton; diameter is 0",
            DegenerateClusterWarning,
            stacklevel=2,
        )
        return 0.0
    if members.shape[0] <= EXACT_DIAMETER_LIMIT:
        return float(pdist(members).max())
    extent = members.max(axis=0) - members.min(axis=0)
    return float(np.sqrt((extent**2).sum()))


class XMeans(BaseEstimator, ClusterMixin):
    """Estimator wrapper around :func:`xmeans`.

    Attributes after ``fit``: ``cluster_centers_``, ``labels_``,
    ``n_clusters_``.
    """

    def __init__(self, k_min: int = 1, k_max: int | None = None, random_state=None):
        self.k_min = k_min
        self.k_max = k_max
        self.random_state = random_state

    def fit(self, X, y=None):
        clustering = xmeans(X, self.k_min, self.k_max, as_generator(self.random_state))
        self.cluster_centers_ = clustering.centers
        self.labels_ = clustering.assignment
        self.n_clusters_ = clustering.k
        return self

    def predict(self, X):
        X = _as_matrix(X)
        return _sq_dists(X, self.cluster_centers_).argmin(axis=1)

"""Per-feature OOD detectors.

The workhorse is :class:`KnnDetector`: a query is out-of-distribution when
its mean distance to the ``k_neighbors`` nearest training values exceeds a
threshold set to the diameter of the most-populated X-means cluster of the
training column.  A query can therefore be flagged while still lying between
two clusters, which is exactly what interpolatory OOD detection needs.

Also provided are three conventional baselines that cannot make that
distinction: Z-score, Mahalanobis distance on the joint space, and a
histogram KL-divergence test for batches.
"""

from __future__ import annotations

import json

import numpy as np
from scipy import linalg, stats
from sklearn.base import BaseEstimator

from .cluster import largest_cluster_diameter, xmeans
from .errors import DimensionMismatch, EmptyColumn
from .rng import as_generator

KL_SMOOTHING = 1e-9
MAX_KL_BINS = 200


def _as_column(values, allow_empty: bool = False) -> np.ndarray:
    col = np.asarray(values, dtype=float).reshape(-1)
    if col.size == 0 and not allow_empty:
        raise EmptyColumn("feature column is empty")
    if not np.isfinite(col).all():
        raise ValueError("feature column contains non-finite values")
    return col


class KnnDetector(BaseEstimator):
    """Distance-to-neighbors OOD detector for a single feature.

    Parameters
    ----------
    k_neighbors : int
        Number of nearest training values averaged into the score.
    k_max_clusters : int or None
        Cap on the X-means cluster count used to derive the threshold;
        None means ``min(20, sqrt(column length))``.
    random_state : int, Generator or None
        Drives X-means initialization.

    Attributes
    ----------
    train_values_ : ndarray, sorted ascending.
    threshold_ : float, the OOD distance threshold (> 0).
    threshold_source_ : str, one of ``cluster_diameter``, ``iqr``, ``tiny``.
    """

    def __init__(self, k_neighbors: int = 5, k_max_clusters: int | None = None,
                 random_state=None):
        self.k_neighbors = k_neighbors
        self.k_max_clusters = k_max_clusters
        self.random_state = random_state

    def fit(self, X, y=None):
        col = _as_column(X)
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        if col.size < self.k_neighbors:
            raise ValueError(
                f"column has {col.size} values, fewer than k_neighbors={self.k_neighbors}"
            )
        rng = as_generator(self.random_state)
        clustering = xmeans(col.reshape(-1, 1), k_min=1,
                            k_max=self.k_max_clusters, rng=rng)
        diameter = largest_cluster_diameter(clustering, col.reshape(-1, 1))
        if diameter > 0:
            threshold, source = diameter, "cluster_diameter"
        else:
            q75, q25 = np.percentile(col, [75, 25])
            iqr = float(q75 - q25)
            if iqr > 0:
                threshold, source = iqr, "iqr"
            else:
                threshold = 1e-6 * (1.0 + abs(float(np.median(col))))
                source = "tiny"
        self.train_values_ = np.sort(col)
        self.threshold_ = float(threshold)
        self.threshold_source_ = source
        self.n_clusters_ = clustering.k
        return self

    @property
    def train_min_(self) -> float:
        return float(self.train_values_[0])

    @property
    def train_max_(self) -> float:
        return float(self.train_values_[-1])

    def score_samples(self, X) -> np.ndarray:
        """Mean absolute distance from each query to its nearest neighbors."""
        queries = np.asarray(X, dtype=float).reshape(-1)
        return knn_score(self.train_values_, queries, self.k_neighbors)

    def predict(self, X) -> np.ndarray:
        """Boolean array: True where the query is out-of-distribution."""
        return self.score_samples(X) > self.threshold_

    def is_ood(self, x: float) -> bool:
        return bool(self.predict([x])[0])

    def to_dict(self) -> dict:
        return {
            "variant": "knn",
            "k_neighbors": int(self.k_neighbors),
            "threshold": self.threshold_,
            "threshold_source": self.threshold_source_,
            "train_values": self.train_values_.tolist(),
        }


def knn_score(train_sorted: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """Mean distance to the k nearest values of a sorted training column."""
    m = train_sorted.size
    if m < k:
        raise ValueError("training column shorter than k")
    queries = np.atleast_1d(np.asarray(queries, dtype=float))
    window = min(2 * k, m)
    pos = np.searchsorted(train_sorted, queries)
    starts = np.clip(pos - k, 0, m - window)
    idx = starts[:, None] + np.arange(window)[None, :]
    dists = np.abs(train_sorted[idx] - queries[:, None])
    if window > k:
        dists = np.partition(dists, k - 1, axis=1)[:, :k]
    return dists.mean(axis=1)


def fit_knn(column, k_neighbors: int = 5, rng=None,
            k_max_clusters: int | None = None) -> KnnDetector:
    """Fit a :class:`KnnDetector` on one feature column."""
    return KnnDetector(k_neighbors=k_neighbors, k_max_clusters=k_max_clusters,
                       random_state=as_generator(rng)).fit(column)


class ZscoreDetector(BaseEstimator):
    """Flags values more than ``threshold`` standard deviations from the mean."""

    def __init__(self, threshold: float = 3.0):
        self.threshold = threshold

    def fit(self, X, y=None):
        col = _as_column(X)
        self.mean_ = float(col.mean())
        self.stddev_ = float(col.std())
        if self.stddev_ <= 0:
            raise ValueError("column has zero variance; Z-score undefined")
        return self

    @classmethod
    def from_stats(cls, mean: float, stddev: float,
                   threshold: float = 3.0) -> "ZscoreDetector":
        if stddev <= 0:
            raise ValueError("stddev must be > 0")
        det = cls(threshold=threshold)
        det.mean_ = float(mean)
        det.stddev_ = float(stddev)
        return det

    def score_samples(self, X) -> np.ndarray:
        x = np.atleast_1d(np.asarray(X, dtype=float))
        return np.abs(x - self.mean_) / self.stddev_

    def predict(self, X) -> np.ndarray:
        return self.score_samples(X) > self.threshold

    def is_ood(self, x: float) -> bool:
        return bool(self.predict([x])[0])

    def to_dict(self) -> dict:
        return {"variant": "zscore", "mean": self.mean_, "stddev": self.stddev_,
                "threshold": float(self.threshold)}


class MahalanobisDetector(BaseEstimator):
    """Covariance-scaled distance to the training mean, on the joint space.

    The default threshold is the square root of the chi-square quantile at
    0.997 for the fitted dimension.
    """

    def __init__(self, threshold: float | None = None):
        self.threshold = threshold

    def fit(self, X, y=None):
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1)
        if X.shape[0] < X.shape[1] + 1:
            raise ValueError("need more rows than dimensions to fit a covariance")
        self.mean_ = X.mean(axis=0)
        self.covariance_ = np.cov(X, rowvar=False, ddof=1).reshape(X.shape[1], X.shape[1])
        self._set_factor()
        self.threshold_ = (
            float(self.threshold)
            if self.threshold is not None
            else float(np.sqrt(stats.chi2.ppf(0.997, df=X.shape[1])))
        )
        return self

    @classmethod
    def from_stats(cls, mean, covariance,
                   threshold: float | None = None) -> "MahalanobisDetector":
        det = cls(threshold=threshold)
        det.mean_ = np.asarray(mean, dtype=float)
        det.covariance_ = np.asarray(covariance, dtype=float)
        det._set_factor()
        det.threshold_ = (
            float(threshold)
            if threshold is not None
            else float(np.sqrt(stats.chi2.ppf(0.997, df=det.mean_.size)))
        )
        return det

    def _set_factor(self):
        try:
            self._cho_factor = linalg.cho_factor(self.covariance_, lower=True)
        except linalg.LinAlgError as exc:
            raise ValueError("covariance matrix is not positive-definite") from exc

    def mahalanobis(self, x) -> float:
        """Distance sqrt((x - mean)^T S^-1 (x - mean)) via the Cholesky factor."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.mean_.size:
            raise DimensionMismatch(
                f"sample has dimension {x.size}, model has {self.mean_.size}"
            )
        delta = x - self.mean_
        solved = linalg.cho_solve(self._cho_factor, delta)
        return float(np.sqrt(max(delta @ solved, 0.0)))

    def is_ood(self, x) -> bool:
        return self.mahalanobis(x) > self.threshold_

    def to_dict(self) -> dict:
        return {"variant": "mahalanobis", "mean": self.mean_.tolist(),
                "covariance": self.covariance_.tolist(),
                "threshold": self.threshold_}


def mahalanobis_distance(model: MahalanobisDetector, x) -> float:
    return model.mahalanobis(x)


def _smoothed_probs(counts: np.ndarray) -> np.ndarray:
    probs = counts / counts.sum() + KL_SMOOTHING
    return probs / probs.sum()


def kl_divergence(train, batch, bins: int | None = None) -> float:
    """Discrete KL(batch || train) over shared equal-width bins.

    Bins span the union of both sample ranges; both histograms receive
    additive smoothing so the estimate is finite and non-negative.
    """
    train = _as_column(train)
    batch = _as_column(batch)
    if batch.size < 10:
        raise ValueError(f"batch needs at least 10 values, got {batch.size}")
    if bins is None:
        bins = min(MAX_KL_BINS, int(np.ceil(np.sqrt(batch.size))))
    lo = min(train.min(), batch.min())
    hi = max(train.max(), batch.max())
    if hi <= lo:
        hi = lo + 1e-9
    edges = np.linspace(lo, hi, bins + 1)
    p = _smoothed_probs(np.histogram(batch, bins=edges)[0].astype(float))
    q = _smoothed_probs(np.histogram(train, bins=edges)[0].astype(float))
    return float(np.sum(p * np.log(p / q)))


class KlHistogramDetector(BaseEstimator):
    """Batch-level OOD test comparing a batch histogram to the training one.

    Bin edges are fixed at fit time over the training range; batch values
    outside that range are clipped into the end bins.
    """

    def __init__(self, bins: int = 50, threshold: float = 0.5):
        self.bins = bins
        self.threshold = threshold

    def fit(self, X, y=None):
        col = _as_column(X)
        lo, hi = float(col.min()), float(col.max())
        if hi <= lo:
            hi = lo + 1e-9
        self.bin_edges_ = np.linspace(lo, hi, self.bins + 1)
        self.train_probs_ = _smoothed_probs(
            np.histogram(col, bins=self.bin_edges_)[0].astype(float)
        )
        return self

    def score_batch(self, batch) -> float:
        batch = _as_column(batch)
        if batch.size < 10:
            raise ValueError(f"batch needs at least 10 values, got {batch.size}")
        clipped = np.clip(batch, self.bin_edges_[0], self.bin_edges_[-1])
        p = _smoothed_probs(
            np.histogram(clipped, bins=self.bin_edges_)[0].astype(float)
        )
        return float(np.sum(p * np.log(p / self.train_probs_)))

    def is_ood_batch(self, batch) -> bool:
        return self.score_batch(batch) > self.threshold

    def to_dict(self) -> dict:
        return {"variant": "kl_histogram", "bin_edges": self.bin_edges_.tolist(),
                "train_probs": self.train_probs_.tolist(),
                "threshold": float(self.threshold)}


def random_feature_zscore_check(columns, x, threshold: float = 3.0,
                                iterations: int = 10, rng=None) -> bool:
    """Randomly probe one feature per iteration; True if any Z-score exceeds
    the threshold."""
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    X = np.asarray(columns, dtype=float)
    if X.ndim != 2:
        raise ValueError("columns must be a (rows, features) matrix")
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != X.shape[1]:
        raise DimensionMismatch(
            f"sample has {x.size} coordinates, data has {X.shape[1]} features"
        )
    rng = as_generator(rng)
    means = X.mean(axis=0)
    stds = X.std(axis=0)
    for _ in range(iterations):
        i = int(rng.integers(X.shape[1]))
        dev = abs(x[i] - means[i])
        if stds[i] > 0:
            z = dev / stds[i]
        else:
            z = 0.0 if dev == 0 else np.inf
        if z > threshold:
            return True
    return False


def is_ood(model, x) -> bool:
    """Dispatch the fitted model's OOD decision for one sample."""
    if isinstance(model, KlHistogramDetector):
        raise TypeError("KL detector decides per batch; use is_ood_batch")
    return model.is_ood(x)


def detector_to_json(model) -> str:
    return json.dumps(model.to_dict())


def detector_from_dict(data: dict):
    variant = data.get("variant")
    if variant == "knn":
        det = KnnDetector(k_neighbors=int(data["k_neighbors"]))
        det.train_values_ = np.asarray(data["train_values"], dtype=float)
        det.threshold_ = float(data["threshold"])
        det.threshold_source_ = data.get("threshold_source", "cluster_diameter")
        return det
    if variant == "zscore":
        return ZscoreDetector.from_stats(data["mean"], data["stddev"],
                                         data["threshold"])
    if variant == "mahalanobis":
        return MahalanobisDetector.from_stats(data["mean"], data["covariance"],
                                              data["threshold"])
    if variant == "kl_histogram":
        det = KlHistogramDetector(bins=len(data["train_probs"]),
                                  threshold=float(data["threshold"]))
        det.bin_edges_ = np.asarray(data["bin_edges"], dtype=float)
        det.train_probs_ = np.asarray(data["train_probs"], dtype=float)
        return det
    raise ValueError(f"unknown detector variant {variant!r}")


def detector_from_json(payload: str):
    return detector_from_dict(json.loads(payload))

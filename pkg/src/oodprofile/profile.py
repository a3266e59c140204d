"""Per-feature inside/outside OOD classification.

A coordinate that the detector flags as out-of-distribution is *inside* OOD
when two training values bracket it (it sits in an interpolatory gap) and
*outside* OOD otherwise (it extrapolates past the training extremes).  The
bracketing test reduces to strict comparison against the column minimum and
maximum, which is O(1) once those are cached.

The simple rule is sensitive to lone outliers in the training column: one
extreme value stretches the bracketing range over everything below it.  The
robust rule therefore re-fits the detector on the values to each side of the
query and requires both sides to (a) hold a minimum share of the column and
(b) independently flag the query, before calling it inside.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from sklearn.base import BaseEstimator

from .detect import KnnDetector, fit_knn
from .errors import DimensionMismatch, EmptyColumn
from .rng import KEY_DETECTOR, stream


class OodStatus(str, Enum):
    NO = "no"
    INSIDE = "inside"
    OUTSIDE = "outside"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


@dataclass(frozen=True)
class Profile:
    """Per-feature OOD statuses for one sample."""

    statuses: tuple[OodStatus, ...]

    def __post_init__(self):
        object.__setattr__(self, "statuses", tuple(OodStatus(s) for s in self.statuses))

    @property
    def counts(self) -> tuple[int, int, int]:
        """(n_no, n_inside, n_outside); the three always sum to n."""
        return (
            sum(s == OodStatus.NO for s in self.statuses),
            sum(s == OodStatus.INSIDE for s in self.statuses),
            sum(s == OodStatus.OUTSIDE for s in self.statuses),
        )

    def to_dict(self) -> dict:
        n_no, n_inside, n_outside = self.counts
        return {
            "statuses": [s.value for s in self.statuses],
            "counts": {"no": n_no, "inside": n_inside, "outside": n_outside},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_dict(cls, data: dict) -> "Profile":
        return cls(tuple(OodStatus(s) for s in data["statuses"]))


def classify_simple(column, x: float, detector,
                    column_min: float | None = None,
                    column_max: float | None = None) -> OodStatus:
    """Classify one coordinate with the bracketing rule.

    ``column_min``/``column_max`` may be passed to skip the O(N) scan when
    the extremes are already cached.
    """
    if column_min is None or column_max is None:
        col = np.asarray(column, dtype=float).reshape(-1)
        if col.size == 0:
            raise EmptyColumn("cannot classify against an empty column")
        column_min = float(col.min())
        column_max = float(col.max())
    if not detector.is_ood(x):
        return OodStatus.NO
    if column_min < x < column_max:
        return OodStatus.INSIDE
    return OodStatus.OUTSIDE


def default_detector_fitter(column) -> KnnDetector:
    """Deterministic KNN fitter used when no fitter is supplied."""
    return fit_knn(column, rng=stream(0, KEY_DETECTOR))


def classify_robust(column, x: float, detector_fitter=default_detector_fitter,
                    min_side: int | None = None) -> OodStatus:
    """Outlier-robust classification via the order split at x.

    The column is divided into the values strictly below and strictly above
    x.  The coordinate is inside OOD only when both sides hold at least
    ``min_side`` values (default: max(20, 2% of the column)) and the
    detectors fitted on each side both flag it.
    """
    col = np.asarray(column, dtype=float).reshape(-1)
    if col.size == 0:
        raise EmptyColumn("cannot classify against an empty column")
    if min_side is None:
        min_side = max(20, math.ceil(0.02 * col.size))
    full = detector_fitter(col)
    if not full.is_ood(x):
        return OodStatus.NO
    left = col[col < x]
    right = col[col > x]
    if left.size >= min_side and right.size >= min_side:
        if detector_fitter(left).is_ood(x) and detector_fitter(right).is_ood(x):
            return OodStatus.INSIDE
    return OodStatus.OUTSIDE


def _columns_of(dataset) -> np.ndarray:
    feats = getattr(dataset, "features", dataset)
    feats = np.asarray(feats, dtype=float)
    if feats.ndim == 1:
        feats = feats.reshape(-1, 1)
    return feats


def compute_profile(dataset, x, detectors, mode: str = "simple",
                    detector_fitter=default_detector_fitter,
                    min_side: int | None = None) -> Profile:
    """Assemble the per-feature status vector for one sample.

    ``detectors`` must hold one fitted per-feature detector per column.  In
    robust mode the per-feature detectors decide the OOD flag implicitly via
    re-fitting, so ``detector_fitter`` controls the detector family instead.
    """
    feats = _columns_of(dataset)
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.size != feats.shape[1]:
        raise DimensionMismatch(
            f"sample has {x.size} coordinates, dataset has {feats.shape[1]} features"
        )
    if mode not in ("simple", "robust"):
        raise ValueError(f"mode must be 'simple' or 'robust', got {mode!r}")
    if mode == "simple" and len(detectors) != feats.shape[1]:
        raise DimensionMismatch(
            f"{len(detectors)} detectors for {feats.shape[1]} features"
        )
    statuses = []
    for i in range(feats.shape[1]):
        if mode == "simple":
            statuses.append(classify_simple(feats[:, i], float(x[i]), detectors[i]))
        else:
            statuses.append(classify_robust(feats[:, i], float(x[i]),
                                            detector_fitter, min_side))
    return Profile(tuple(statuses))


class OodProfiler(BaseEstimator):
    """Fits one KNN detector per feature and profiles new samples.

    Attributes after ``fit``: ``detectors_`` (per-feature KnnDetector),
    ``column_min_``, ``column_max_`` (cached order statistics).
    """

    def __init__(self, k_neighbors: int = 5, mode: str = "simple",
                 min_side: int | None = None, random_state: int = 0):
        self.k_neighbors = k_neighbors
        self.mode = mode
        self.min_side = min_side
        self.random_state = random_state

    def fit(self, X, y=None):
        feats = _columns_of(X)
        if feats.shape[0] == 0:
            raise EmptyColumn("cannot fit on an empty matrix")
        self._columns = feats
        self.detectors_ = [
            fit_knn(feats[:, i], self.k_neighbors,
                    stream(int(self.random_state), KEY_DETECTOR, i))
            for i in range(feats.shape[1])
        ]
        self.column_min_ = feats.min(axis=0)
        self.column_max_ = feats.max(axis=0)
        return self

    def profile_one(self, x) -> Profile:
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != len(self.detectors_):
            raise DimensionMismatch(
                f"sample has {x.size} coordinates, profiler has {len(self.detectors_)}"
            )
        if self.mode == "robust":
            fitter = lambda col: fit_knn(  # noqa: E731
                col, self.k_neighbors, stream(int(self.random_state), KEY_DETECTOR)
            )
            return compute_profile(self._columns, x, self.detectors_,
                                   mode="robust", detector_fitter=fitter,
                                   min_side=self.min_side)
        statuses = tuple(
            classify_simple(None, float(x[i]), self.detectors_[i],
                            column_min=float(self.column_min_[i]),
                            column_max=float(self.column_max_[i]))
            for i in range(x.size)
        )
        return Profile(statuses)

    def predict(self, X) -> np.ndarray:
        """Status strings, shape (rows, features)."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        return np.array(
            [[s.value for s in self.profile_one(row).statuses] for row in X],
            dtype=object,
        )

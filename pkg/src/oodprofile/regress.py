"""Regression model zoo with holdout selection, plus the RMSE metrics.

Three standard model families are fitted on an 80% training split and the
one with the lowest RMSE on the held-out 20% is kept.  Holdout targets feed
nothing but that final comparison, so selection cannot leak into the fitted
parameters.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.ensemble import RandomForestRegressor
from sklearn.linear_model import Ridge
from sklearn.neighbors import KNeighborsRegressor

from .errors import DimensionMismatch, InsufficientData, LengthMismatch, ZeroBaseline
from .rng import as_generator

MIN_ROWS = 20
RIDGE_ALPHA = 1e-8
KNN_CHOICES = (3, 5, 9)
FOREST_TREES = 100
FOREST_MAX_DEPTH = 8


def rmse(predictions, truth) -> float:
    """Root mean squared error."""
    p = np.asarray(predictions, dtype=float).reshape(-1)
    t = np.asarray(truth, dtype=float).reshape(-1)
    if p.size != t.size:
        raise LengthMismatch(f"lengths differ: {p.size} vs {t.size}")
    if p.size == 0:
        raise LengthMismatch("rmse of empty vectors is undefined")
    return float(np.sqrt(np.mean((p - t) ** 2)))


def normalized_rmse(config_rmse: float, baseline_in_dist_rmse: float) -> float:
    """Ratio of a configuration's RMSE to the in-distribution baseline."""
    if baseline_in_dist_rmse <= 0:
        raise ZeroBaseline(
            "in-distribution baseline RMSE must be > 0 "
            f"(got {baseline_in_dist_rmse}); the dataset is degenerate"
        )
    return config_rmse / baseline_in_dist_rmse


class ModelZooRegressor(BaseEstimator, RegressorMixin):
    """Fits a ridge linear model, k-NN regressors, and a bounded-depth
    random forest; keeps the holdout-RMSE minimizer.

    Attributes after ``fit``: ``best_name_``, ``best_model_``,
    ``selection_report_`` (variant name -> holdout RMSE).
    """

    def __init__(self, random_state=None):
        self.random_state = random_state

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.ndim != 2 or X.shape[0] != y.size:
            raise ValueError("X must be (k, n) with matching y")
        k = X.shape[0]
        if k < MIN_ROWS:
            raise InsufficientData(f"need at least {MIN_ROWS} rows, got {k}")
        rng = as_generator(self.random_state)
        perm = rng.permutation(k)
        n_holdout = max(1, k // 5)
        train_idx, hold_idx = perm[: k - n_holdout], perm[k - n_holdout :]
        X_tr, y_tr = X[train_idx], y[train_idx]
        X_ho, y_ho = X[hold_idx], y[hold_idx]

        candidates: dict[str, BaseEstimator] = {
            "linear": Ridge(alpha=RIDGE_ALPHA),
        }
        for kk in KNN_CHOICES:
            if kk <= X_tr.shape[0]:
                candidates[f"knn{kk}"] = KNeighborsRegressor(n_neighbors=kk)
        candidates["forest"] = RandomForestRegressor(
            n_estimators=FOREST_TREES,
            max_depth=FOREST_MAX_DEPTH,
            bootstrap=True,
            random_state=int(rng.integers(2**31 - 1)),
            n_jobs=1,
        )

        self.selection_report_ = {}
        for name, model in candidates.items():
            model.fit(X_tr, y_tr)
            self.selection_report_[name] = rmse(model.predict(X_ho), y_ho)
        self.candidates_ = candidates
        self.best_name_ = min(self.selection_report_, key=self.selection_report_.get)
        self.best_model_ = candidates[self.best_name_]
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(1, -1)
        if X.shape[1] != self.n_features_in_:
            raise DimensionMismatch(
                f"samples have {X.shape[1]} features, model has {self.n_features_in_}"
            )
        return self.best_model_.predict(X)

    def summary(self) -> dict:
        """JSON-ready description of the selected variant."""
        params = {}
        if self.best_name_ == "linear":
            params = {
                "weights": self.best_model_.coef_.tolist(),
                "intercept": float(self.best_model_.intercept_),
            }
        elif self.best_name_.startswith("knn"):
            params = {"n_neighbors": self.best_model_.n_neighbors}
        else:
            params = {"n_estimators": FOREST_TREES, "max_depth": FOREST_MAX_DEPTH}
        return {
            "variant": self.best_name_,
            "params": params,
            "selection_report": {k: float(v) for k, v in self.selection_report_.items()},
        }


def fit_best(dataset, rng=None) -> ModelZooRegressor:
    """Fit the zoo on a dataset and return the selected model."""
    return ModelZooRegressor(random_state=as_generator(rng)).fit(
        dataset.features, dataset.target
    )


def predict(model: ModelZooRegressor, x) -> float:
    """Predict one sample; total on any finite input."""
    return float(model.predict(np.asarray(x, dtype=float).reshape(1, -1))[0])

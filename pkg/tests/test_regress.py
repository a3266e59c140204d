"""Tests for the model zoo, selection, and the RMSE metrics."""

import numpy as np
import pytest

from oodprofile.datagen import Dataset
from oodprofile.errors import (
    DimensionMismatch,
    InsufficientData,
    LengthMismatch,
    ZeroBaseline,
)
from oodprofile.regress import (
    ModelZooRegressor,
    fit_best,
    normalized_rmse,
    predict,
    rmse,
)
from oodprofile.rng import stream


def _linear_dataset(k=200, seed=130):
    rng = stream(seed)
    X = rng.uniform(-10, 10, size=(k, 1))
    y = 2.0 * X[:, 0] + 1.0
    return Dataset(X, y)


def test_rmse_examples():
    assert rmse([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert rmse([0.0, 0.0], [3.0, 4.0]) == pytest.approx(3.5355339059327378)
    assert rmse([1.0], [0.0]) == 1.0


def test_rmse_errors():
    with pytest.raises(LengthMismatch):
        rmse([1.0], [1.0, 2.0])
    with pytest.raises(LengthMismatch):
        rmse([], [])


def test_rmse_permutation_invariant():
    rng = stream(131)
    p = rng.normal(size=50)
    t = rng.normal(size=50)
    perm = rng.permutation(50)
    assert rmse(p, t) == pytest.approx(rmse(p[perm], t[perm]))


def test_normalized_rmse():
    assert normalized_rmse(3.0, 3.0) == 1.0
    assert normalized_rmse(6.0, 3.0) == 2.0
    with pytest.raises(ZeroBaseline):
        normalized_rmse(1.0, 0.0)


def test_exact_linear_recovery():
    model = fit_best(_linear_dataset(), stream(132))
    assert model.best_name_ == "linear"
    assert model.best_model_.coef_[0] == pytest.approx(2.0, abs=1e-6)
    assert model.best_model_.intercept_ == pytest.approx(1.0, abs=1e-6)
    assert predict(model, [3.0]) == pytest.approx(7.0, abs=1e-6)


def test_nonlinear_target_beats_linear():
    wins = 0
    for seed in range(10):
        rng = stream(133, seed)
        X = rng.uniform(-3, 3, size=(400, 2))
        y = np.sin(X[:, 0]) * X[:, 1]
        model = ModelZooRegressor(random_state=stream(134, seed)).fit(X, y)
        nonlinear_best = min(
            v for k, v in model.selection_report_.items() if k != "linear"
        )
        wins += nonlinear_best < model.selection_report_["linear"]
    assert wins >= 9


def test_constant_targets_predicted_exactly():
    rng = stream(135)
    X = rng.normal(size=(100, 2))
    y = np.full(100, 4.25)
    model = ModelZooRegressor(random_state=stream(136)).fit(X, y)
    preds = model.predict(rng.normal(size=(20, 2)) * 10)
    np.testing.assert_allclose(preds, 4.25, atol=1e-9)


def test_fit_determinism():
    ds = _linear_dataset(seed=137)
    a = fit_best(ds, stream(138))
    b = fit_best(ds, stream(138))
    assert a.best_name_ == b.best_name_
    assert a.selection_report_ == b.selection_report_
    rng = stream(139)
    probes = rng.uniform(-20, 20, size=(50, 1))
    np.testing.assert_array_equal(a.predict(probes), b.predict(probes))


def test_insufficient_data():
    rng = stream(140)
    with pytest.raises(InsufficientData):
        ModelZooRegressor(random_state=1).fit(rng.normal(size=(19, 2)),
                                              rng.normal(size=19))


def test_predict_dimension_mismatch():
    model = fit_best(_linear_dataset(), stream(141))
    with pytest.raises(DimensionMismatch):
        model.predict(np.zeros((3, 2)))


def test_predict_total_on_ood_inputs():
    rng = stream(142)
    X = rng.uniform(-1, 1, size=(300, 2))
    y = X[:, 0] * X[:, 1]
    model = ModelZooRegressor(random_state=stream(143)).fit(X, y)
    extreme = np.array([[1e6, -1e6], [0.0, 1e8]])
    assert np.isfinite(model.predict(extreme)).all()


def test_holdout_poisoning_changes_selection_not_parameters():
    """Holdout targets only feed the final comparison, never the fits."""
    rng = stream(144)
    X = rng.uniform(-5, 5, size=(200, 2))
    y = 3.0 * X[:, 0] - X[:, 1] + rng.normal(0, 0.1, 200)

    # Reproduce the zoo's split to poison exactly the holdout rows.
    perm = stream(145).permutation(200)
    holdout = perm[200 - 200 // 5 :]

    clean = ModelZooRegressor(random_state=stream(145)).fit(X, y)
    y_poisoned = y.copy()
    y_poisoned[holdout] += stream(146).normal(0, 100.0, size=holdout.size)
    poisoned = ModelZooRegressor(random_state=stream(145)).fit(X, y_poisoned)

    # Fitted parameters are untouched by the poisoning...
    np.testing.assert_array_equal(clean.candidates_["linear"].coef_,
                                  poisoned.candidates_["linear"].coef_)
    probes = stream(147).uniform(-5, 5, size=(50, 2))
    for name in clean.candidates_:
        np.testing.assert_array_equal(clean.candidates_[name].predict(probes),
                                      poisoned.candidates_[name].predict(probes))
    # ...while the holdout comparison itself changes.
    assert clean.selection_report_ != poisoned.selection_report_


def test_summary_shape():
    model = fit_best(_linear_dataset(), stream(147))
    summary = model.summary()
    assert summary["variant"] == "linear"
    assert "weights" in summary["params"]
    assert set(summary["selection_report"]) >= {"linear", "forest"}

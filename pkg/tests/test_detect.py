"""Tests for the KNN detector and the baseline OOD methods."""

import json

import numpy as np
import pytest

from oodprofile.detect import (
    KlHistogramDetector,
    KnnDetector,
    MahalanobisDetector,
    ZscoreDetector,
    detector_from_json,
    detector_to_json,
    fit_knn,
    is_ood,
    kl_divergence,
    knn_score,
    mahalanobis_distance,
    random_feature_zscore_check,
)
from oodprofile.errors import DimensionMismatch, EmptyColumn
from oodprofile.rng import stream


# -- KNN detector -----------------------------------------------------------


def test_fit_knn_uniform_column_threshold_spans_support():
    column = stream(50).random(1000)
    det = fit_knn(column, rng=stream(51))
    assert 0.9 <= det.threshold_ <= 1.0
    assert det.threshold_source_ == "cluster_diameter"


def test_fit_knn_two_blobs_threshold_is_intra_blob():
    rng = stream(52)
    column = np.concatenate(
        [rng.normal(0.0, 0.1, size=500), rng.normal(10.0, 0.1, size=500)]
    )
    det = fit_knn(column, rng=stream(53))
    assert 0.6 <= det.threshold_ <= 1.4


def test_fit_knn_constant_column_falls_back():
    det = fit_knn(np.zeros(100), rng=stream(54))
    assert det.threshold_ == pytest.approx(1e-6)
    assert det.threshold_source_ == "tiny"


def test_fit_knn_empty_column():
    with pytest.raises(EmptyColumn):
        fit_knn(np.array([]), rng=stream(55))


def test_knn_score_examples():
    assert knn_score(np.array([0.0, 0.5, 1.0]), np.array([0.5]), 1)[0] == 0.0
    assert knn_score(np.array([0.0, 1.0]), np.array([0.5]), 2)[0] == 0.5
    # Dense grid on [0, 1]: the 5 nearest values to 10 are 1.0, 0.999, ...
    grid = np.linspace(0.0, 1.0, 1001)
    assert knn_score(grid, np.array([10.0]), 5)[0] == pytest.approx(9.002, abs=0.1)


def test_knn_score_interior_and_edges_match_bruteforce():
    train = np.sort(stream(56).normal(size=200))
    queries = np.array([-10.0, train[0], 0.0, 0.37, train[-1], 10.0])
    for k in (1, 3, 5):
        got = knn_score(train, queries, k)
        for q, g in zip(queries, got):
            expected = np.sort(np.abs(train - q))[:k].mean()
            assert g == pytest.approx(expected)


def test_knn_training_median_not_ood():
    flagged = 0
    for seed in range(100):
        column = stream(57, seed).normal(5.0, 2.0, size=200)
        det = fit_knn(column, rng=stream(58, seed))
        flagged += det.is_ood(float(np.median(column)))
    assert flagged <= 1


def test_knn_affine_invariance():
    column = stream(59).normal(size=400)
    queries = np.array([-8.0, -1.0, 0.0, 0.5, 3.0, 12.0])
    det = fit_knn(column, rng=stream(60))
    base = det.predict(queries)
    for a, b in [(2.0, 0.0), (0.5, -3.0), (250.0, 1e4)]:
        det2 = fit_knn(a * column + b, rng=stream(60))
        np.testing.assert_array_equal(det2.predict(a * queries + b), base)


def test_knn_detector_params_roundtrip():
    det = KnnDetector(k_neighbors=7, random_state=1)
    assert det.get_params()["k_neighbors"] == 7


# -- Z-score ----------------------------------------------------------------


def test_zscore_height_example():
    det = ZscoreDetector.from_stats(178.4, 7.6, threshold=3.0)
    assert det.score_samples([163.0])[0] == pytest.approx(2.026315789473684)
    assert not det.is_ood(163.0)
    assert det.score_samples([210.0])[0] == pytest.approx(4.157894736842105)
    assert det.is_ood(210.0)


def test_zscore_fit_and_degenerate():
    column = stream(61).normal(2.0, 3.0, size=5000)
    det = ZscoreDetector().fit(column)
    assert det.mean_ == pytest.approx(2.0, abs=0.2)
    assert det.stddev_ == pytest.approx(3.0, abs=0.2)
    with pytest.raises(ValueError):
        ZscoreDetector().fit(np.ones(50))


# -- Mahalanobis ------------------------------------------------------------


def test_mahalanobis_closed_forms():
    det = MahalanobisDetector.from_stats([0.0, 0.0], np.eye(2))
    assert det.mahalanobis([0.0, 0.0]) == 0.0
    assert det.mahalanobis([3.0, 4.0]) == pytest.approx(5.0)
    diag = MahalanobisDetector.from_stats([0.0, 0.0], np.diag([4.0, 9.0]))
    assert diag.mahalanobis([2.0, 3.0]) == pytest.approx(np.sqrt(2.0))


def test_mahalanobis_dimension_mismatch():
    det = MahalanobisDetector.from_stats([0.0, 0.0], np.eye(2))
    with pytest.raises(DimensionMismatch):
        det.mahalanobis([1.0, 2.0, 3.0])


def test_mahalanobis_affine_invariance():
    rng = stream(62)
    X = rng.normal(size=(500, 3)) @ np.diag([1.0, 2.0, 0.5]) + [1.0, -2.0, 0.0]
    det = MahalanobisDetector().fit(X)
    A = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    b = rng.normal(size=3)
    Xt = X @ A.T + b
    det_t = MahalanobisDetector().fit(Xt)
    for _ in range(20):
        x = rng.normal(size=3) * 4
        d1 = det.mahalanobis(x)
        d2 = det_t.mahalanobis(A @ x + b)
        assert d2 == pytest.approx(d1, abs=1e-8, rel=1e-8)


def test_mahalanobis_default_threshold_and_fit():
    X = stream(63).normal(size=(1000, 4))
    det = MahalanobisDetector().fit(X)
    # Oracle: 0.997 chi-square quantile for 4 dof via the closed-form CDF
    # 1 - exp(-x/2)(1 + x/2), solved by bisection.
    assert det.threshold_ == pytest.approx(4.001790388681129, rel=1e-6)
    assert not det.is_ood(X.mean(axis=0))
    assert det.is_ood(X.mean(axis=0) + 50.0)


def test_mahalanobis_non_spd_covariance_rejected():
    with pytest.raises(ValueError):
        MahalanobisDetector.from_stats([0.0, 0.0], [[1.0, 2.0], [2.0, 1.0]])


# -- Random-feature Z-score --------------------------------------------------


def test_random_feature_zscore_at_means_is_false():
    X = stream(64).normal(size=(500, 6))
    x = X.mean(axis=0)
    assert not random_feature_zscore_check(X, x, threshold=0.5, iterations=100,
                                           rng=stream(65))


def test_random_feature_zscore_finds_shifted_feature():
    rng = stream(66)
    X = rng.normal(size=(500, 8))
    x = X.mean(axis=0).copy()
    x[3] += 10.0 * X[:, 3].std()
    hits = sum(
        random_feature_zscore_check(X, x, threshold=3.0, iterations=80,
                                    rng=stream(67, s))
        for s in range(20)
    )
    assert hits == 20


def test_random_feature_zscore_infinite_threshold():
    X = stream(68).normal(size=(100, 3))
    x = X.mean(axis=0) + 100.0
    assert not random_feature_zscore_check(X, x, threshold=np.inf, iterations=50,
                                           rng=stream(69))


# -- KL divergence -----------------------------------------------------------


def test_kl_same_distribution_small():
    rng = stream(70)
    train = rng.normal(size=10**4)
    batch = rng.normal(size=10**4)
    assert kl_divergence(train, batch, bins=50) < 0.05


def test_kl_gaussian_shift_matches_closed_form():
    # KL(N(1,1) || N(0,1)) = 0.5.
    rng = stream(71)
    train = rng.normal(0.0, 1.0, size=10**5)
    batch = rng.normal(1.0, 1.0, size=10**5)
    assert kl_divergence(train, batch, bins=100) == pytest.approx(0.5, abs=0.1)


def test_kl_identical_batch_is_zero():
    train = stream(72).normal(size=5000)
    assert kl_divergence(train, train, bins=60) <= 1e-6


def test_kl_non_negative():
    for seed in range(10):
        rng = stream(73, seed)
        train = rng.normal(rng.uniform(-2, 2), rng.uniform(0.5, 2), size=2000)
        batch = rng.normal(rng.uniform(-2, 2), rng.uniform(0.5, 2), size=2000)
        assert kl_divergence(train, batch) >= 0.0


def test_kl_detector_batches():
    rng = stream(74)
    det = KlHistogramDetector(bins=40, threshold=0.5).fit(rng.normal(size=5000))
    assert not det.is_ood_batch(rng.normal(size=2000))
    assert det.is_ood_batch(rng.normal(6.0, 1.0, size=2000))
    with pytest.raises(ValueError):
        det.score_batch(np.zeros(5))
    with pytest.raises(TypeError):
        is_ood(det, 0.0)


# -- Serialization -----------------------------------------------------------


def test_detector_json_roundtrip_bit_exact():
    rng = stream(75)
    column = rng.normal(size=300)

    knn = fit_knn(column, rng=stream(76))
    knn2 = detector_from_json(detector_to_json(knn))
    np.testing.assert_array_equal(knn2.train_values_, knn.train_values_)
    assert knn2.threshold_ == knn.threshold_
    queries = np.array([-5.0, 0.0, 5.0])
    np.testing.assert_array_equal(knn2.predict(queries), knn.predict(queries))

    z = ZscoreDetector.from_stats(178.4, 7.6)
    z2 = detector_from_json(detector_to_json(z))
    assert (z2.mean_, z2.stddev_, z2.threshold) == (z.mean_, z.stddev_, z.threshold)

    m = MahalanobisDetector().fit(rng.normal(size=(200, 2)))
    m2 = detector_from_json(detector_to_json(m))
    np.testing.assert_array_equal(m2.mean_, m.mean_)
    np.testing.assert_array_equal(m2.covariance_, m.covariance_)
    assert m2.mahalanobis([1.0, 1.0]) == m.mahalanobis([1.0, 1.0])

    kl = KlHistogramDetector(bins=30).fit(column)
    kl2 = detector_from_json(detector_to_json(kl))
    np.testing.assert_array_equal(kl2.bin_edges_, kl.bin_edges_)
    batch = rng.normal(size=100)
    assert kl2.score_batch(batch) == kl.score_batch(batch)


def test_detector_json_unknown_variant():
    with pytest.raises(ValueError):
        detector_from_json(json.dumps({"variant": "nope"}))


def test_generic_is_ood_dispatch():
    det = ZscoreDetector.from_stats(0.0, 1.0)
    assert is_ood(det, 5.0) and not is_ood(det, 0.5)
    m = MahalanobisDetector.from_stats([0.0], [[1.0]])
    assert is_ood(m, [9.0])
    assert mahalanobis_distance(m, [2.0]) == pytest.approx(2.0)


def test_fit_determinism():
    column = stream(77).normal(size=500)
    a = fit_knn(column, rng=stream(78))
    b = fit_knn(column, rng=stream(78))
    assert a.threshold_ == b.threshold_
    np.testing.assert_array_equal(a.train_values_, b.train_values_)

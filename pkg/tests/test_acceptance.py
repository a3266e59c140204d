"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines as they complete.  The trend criteria run the experiment harness at
the scales stated in their docstrings; the full suite takes a while on a
small machine.
"""

import time
from contextlib import contextmanager

import numpy as np
from scipy import stats

from oodprofile.cli import main as cli_main
from oodprofile.cluster import kmeans, xmeans
from oodprofile.detect import MahalanobisDetector, fit_knn, kl_divergence
from oodprofile.experiment import (
    ExperimentConfig,
    _certifiable_feature,
    run_profile_grid,
    run_sweep_complexity,
    run_sweep_dimensions,
    run_sweep_portion,
)
from oodprofile.profile import OodStatus, classify_robust, classify_simple, compute_profile
from oodprofile.datagen import sample_with_profile
from oodprofile.rng import stream

JOBS = 2


@contextmanager
def criterion(number: int, description: str):
    try:
        yield
    except BaseException:
        print(f"ACCEPTANCE {number:02d} FAIL  {description}")
        raise
    print(f"ACCEPTANCE {number:02d} PASS  {description}")


def test_criterion_1_normalization_identity():
    """(n,0,0) reports mean nrmse exactly 1.0 for n in {1,2,3}; < 1 min."""
    with criterion(1, "normalization identity at n in {1,2,3}"):
        started = time.monotonic()
        for n in (1, 2, 3):
            cfg = ExperimentConfig(n=n, k=500, repetitions=5,
                                   eval_samples_per_config=100, master_seed=301)
            result = run_profile_grid(cfg, jobs=JOBS)
            rows = {(r.n_no, r.n_inside, r.n_outside): r for r in result.rows}
            assert rows[(n, 0, 0)].mean_nrmse == 1.0
            assert rows[(n, 0, 0)].std_nrmse == 0.0
            assert len(result.rows) == (n + 1) * (n + 2) // 2
        elapsed = time.monotonic() - started
        assert elapsed < 60.0, f"took {elapsed:.1f}s"


def test_criterion_2_outside_dominates_grid():
    """n=3, k=2000, reps=20: outside > inside > baseline; >=80% adjacent
    pairs non-decreasing in n_outside; < 15 min."""
    with criterion(2, "profiling grid pattern at n=3, k=2000"):
        started = time.monotonic()
        cfg = ExperimentConfig(n=3, k=2000, repetitions=20,
                               eval_samples_per_config=100, master_seed=11)
        result = run_profile_grid(cfg, jobs=JOBS)
        means = {(r.n_no, r.n_inside, r.n_outside): r.mean_nrmse
                 for r in result.rows}
        assert means[(0, 0, 3)] > means[(0, 3, 0)] > means[(3, 0, 0)] == 1.0
        pairs = ok = 0
        for n_in in range(3):
            for n_out in range(3 - n_in):
                lower = means[(3 - n_in - n_out, n_in, n_out)]
                upper = means[(3 - n_in - n_out - 1, n_in, n_out + 1)]
                pairs += 1
                ok += upper >= lower
        assert ok / pairs >= 0.8, f"only {ok}/{pairs} adjacent pairs ordered"
        elapsed = time.monotonic() - started
        assert elapsed < 900.0, f"took {elapsed:.1f}s"


def test_criterion_3_dimension_trend():
    """Spearman rho > 0.8 between n in 1..10 and mean nrmse (reps=20, k=2000)."""
    with criterion(3, "dimension sweep trend rho > 0.8"):
        cfg = ExperimentConfig(n=1, k=2000, repetitions=20,
                               eval_samples_per_config=100, master_seed=21)
        result = run_sweep_dimensions(cfg, list(range(1, 11)), jobs=JOBS)
        rho = stats.spearmanr([r.sweep_x for r in result.rows],
                              [r.mean_nrmse for r in result.rows]).statistic
        assert rho > 0.8, f"rho={rho:.3f}"


def test_criterion_4_complexity_trend():
    """Spearman rho > 0.8 between z in {1,5,10,15,20} and mean nrmse (reps=20)."""
    with criterion(4, "complexity sweep trend rho > 0.8"):
        cfg = ExperimentConfig(n=4, k=1000, repetitions=20,
                               eval_samples_per_config=100, master_seed=22)
        result = run_sweep_complexity(cfg, [1, 5, 10, 15, 20], jobs=JOBS)
        rho = stats.spearmanr([r.sweep_x for r in result.rows],
                              [r.mean_nrmse for r in result.rows]).statistic
        assert rho > 0.8, f"rho={rho:.3f}"


def test_criterion_5_outside_beats_inside_portion():
    """All-outside cell exceeds all-inside cell in >=70% of 20 seeded runs, n=8."""
    with criterion(5, "portion sweep: outside exceeds inside in >=70% of runs"):
        wins = 0
        for seed in range(20):
            cfg = ExperimentConfig(n=8, k=800, repetitions=3,
                                   eval_samples_per_config=60,
                                   master_seed=100 + seed)
            result = run_sweep_portion(cfg, [0.0, 1.0], [0.0, 1.0], jobs=JOBS)
            cells = {(r.sweep_x, r.sweep_y): r.mean_nrmse for r in result.rows}
            wins += cells[(0.0, 1.0)] > cells[(1.0, 0.0)]
        assert wins >= 14, f"only {wins}/20 runs ordered"


def test_criterion_6_detector_oracles():
    """Mahalanobis closed forms to 1e-9; KL self-divergence and Gaussian shift."""
    with criterion(6, "detector oracles (Mahalanobis, KL)"):
        rng = stream(311)
        mu = rng.normal(size=5)
        det = MahalanobisDetector.from_stats(mu, np.eye(5))
        for _ in range(1000):
            x = rng.normal(size=5) * 3.0
            assert abs(det.mahalanobis(x) - np.linalg.norm(x - mu)) <= 1e-9
        assert det.mahalanobis(mu) == 0.0

        diag = MahalanobisDetector.from_stats([0.0, 0.0], np.diag([4.0, 9.0]))
        assert abs(diag.mahalanobis([2.0, 3.0]) - np.sqrt(2.0)) <= 1e-9

        sample = stream(312).normal(size=20_000)
        assert kl_divergence(sample, sample, bins=64) <= 1e-6

        train = stream(313).normal(0.0, 1.0, size=10**5)
        batch = stream(314).normal(1.0, 1.0, size=10**5)
        assert abs(kl_divergence(train, batch, bins=100) - 0.5) <= 0.1


def test_criterion_7_classification_oracle():
    """classify_simple == pairwise brute force on 10^4 fixtures; outlier fixture."""
    with criterion(7, "classification oracle and outlier fixture"):

        class AlwaysOod:
            def is_ood(self, x):
                return True

        rng = stream(321)
        detector = AlwaysOod()
        mismatches = 0
        for _ in range(10_000):
            size = int(rng.integers(1, 201))
            column = rng.normal(0.0, 5.0, size=size)
            x = float(rng.normal(0.0, 10.0))
            got = classify_simple(column, x, detector)
            bracketed = bool(((column[:, None] < x) & (x < column[None, :])).any())
            expected = OodStatus.INSIDE if bracketed else OodStatus.OUTSIDE
            mismatches += got != expected
        assert mismatches == 0

        outlier_column = np.concatenate([stream(322).random(999), [1000.0]])
        det = fit_knn(outlier_column, rng=stream(323))
        assert classify_simple(outlier_column, 10.0, det) == OodStatus.INSIDE
        fitter = lambda col: fit_knn(col, rng=stream(324))  # noqa: E731
        assert classify_robust(outlier_column, 10.0, fitter) == OodStatus.OUTSIDE


def test_criterion_8_clustering():
    """X-means blob counts over 100 seeds; k-means objective monotonicity."""
    with criterion(8, "x-means blob counts and k-means monotonicity"):
        two_ok = one_ok = 0
        for seed in range(100):
            rng = stream(331, seed)
            blob = rng.normal(0.0, 0.1, size=(500, 1))
            one_ok += xmeans(blob, 1, 10, stream(332, seed)).k == 1
            two = np.concatenate([
                rng.normal(-10.0, 0.5, size=250), rng.normal(10.0, 0.5, size=250)
            ]).reshape(-1, 1)
            two_ok += xmeans(two, 1, 10, stream(333, seed)).k == 2
        assert one_ok >= 95, f"single blob k=1 in {one_ok}/100"
        assert two_ok >= 95, f"two blobs k=2 in {two_ok}/100"

        fixtures = [
            stream(334).normal(size=(400, 2)),
            stream(335).random((300, 1)) * 10,
            np.concatenate([stream(336).normal(-5, 1, size=(150, 3)),
                            stream(337).normal(5, 1, size=(150, 3))]),
        ]
        for fi, points in enumerate(fixtures):
            for k in (1, 2, 4, 8):
                clustering = kmeans(points, k, stream(338, fi, k))
                diffs = np.diff(clustering.objective_history)
                assert (diffs <= 1e-9).all()


def test_criterion_9_schedule_independence(tmp_path):
    """Reruns at any --jobs produce byte-identical CSVs (3 configurations)."""
    with criterion(9, "byte-identical CSV across reruns and --jobs"):
        configurations = [
            ["experiment", "profile", "--n", "2", "--k", "150",
             "--repetitions", "2", "--eval-samples", "15", "--seed", "41"],
            ["experiment", "sens-dim", "--n-values", "1,2", "--k", "150",
             "--repetitions", "2", "--eval-samples", "15", "--seed", "42"],
            ["experiment", "sens-portion", "--n", "2", "--fracs", "0,1",
             "--k", "150", "--repetitions", "2", "--eval-samples", "15",
             "--seed", "43"],
        ]
        for idx, argv in enumerate(configurations):
            payloads = []
            for run, jobs in enumerate(("1", "2", "1")):
                out = tmp_path / f"cfg{idx}_run{run}"
                code = cli_main(argv + ["--jobs", jobs, "--out", str(out)])
                assert code == 0
                payloads.append((out / "results.csv").read_bytes())
            assert payloads[0] == payloads[1] == payloads[2]


def test_criterion_10_certified_sampling_soundness():
    """10^4 certified samples satisfy their statuses and the order-statistics
    invariant."""
    with criterion(10, "certified profile-conditioned sampling soundness"):
        cfg = ExperimentConfig(n=1, k=400, repetitions=1,
                               eval_samples_per_config=1, master_seed=351)
        total = 0
        spec_idx = 0
        while total < 10_000:
            feat = _certifiable_feature(cfg, (351, spec_idx), 0)
            eval_rng = stream(352, spec_idx)
            detectors = [feat.detector]
            column = feat.noisy.reshape(-1, 1)
            col_min, col_max = feat.noisy.min(), feat.noisy.max()
            w = feat.spec.window
            margin = 0.05 * w.gap_width
            for status in (OodStatus.NO, OodStatus.INSIDE, OodStatus.OUTSIDE):
                accepted = 0
                attempts = 0
                while accepted < 120 and attempts < 120 * 50:
                    attempts += 1
                    x = sample_with_profile([feat.spec], [status], eval_rng)
                    profile = compute_profile(column, x, detectors)
                    if profile.statuses != (status,):
                        continue
                    accepted += 1
                    total += 1
                    value = float(x[0])
                    if status == OodStatus.INSIDE:
                        assert col_min < value < col_max
                        assert w.hi1 + margin <= value <= w.lo2 - margin
                    elif status == OodStatus.OUTSIDE:
                        assert value < w.lo1 or value > w.hi2
                        assert not (col_min < value < col_max)
                    else:
                        assert w.contains(value)
                assert accepted >= 100, f"spec {spec_idx}: {status} starved"
            spec_idx += 1
        assert total >= 10_000

"""Experiment harness: profiling grid and sensitivity sweeps.

Each repetition draws a fresh dataset, fits per-feature detectors and a
regression model, and evaluates the model on profile-conditioned sample sets
normalized by an in-distribution baseline from the same repetition.  Every
random draw comes from a stream keyed by (master seed, sweep point,
repetition, attempt, purpose), so results are byte-identical no matter how
work is scheduled across workers.

Feature specs are screened at generation time: a spec enters a dataset only
when its fitted detector's threshold sits in a fixed band relative to the
gap and conditioned probe draws certify reliably for every status.
Unscreened specs would stall certification whenever the threshold swamps
the gap, and uneven threshold-to-gap ratios would make the certified sample
distributions incomparable across sweep points.  Target trees are screened
for bounded output over the evaluation domain so repetition means are not
dominated by a single exploding function.
"""

from __future__ import annotations

import csv
import json
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy import stats as scipy_stats

from . import __version__
from .datagen import (
    Dataset,
    FeatureSpec,
    HyperRanges,
    evaluate_tree,
    random_expression_tree,
    random_feature_spec,
    sample_feature_with_status,
    sample_truncated_batch,
)
from .detect import KnnDetector, fit_knn
from .errors import (
    EmptyInput,
    RejectionBudgetExceeded,
    RepetitionBudgetExceeded,
    SpecGenerationFailed,
    ZeroBaseline,
)
from .profile import OodStatus, classify_robust, classify_simple
from .regress import fit_best, normalized_rmse, rmse
from .rng import (
    KEY_DETECTOR,
    KEY_EVAL,
    KEY_FEATURE,
    KEY_LABEL,
    KEY_MODEL,
    KEY_PROBE,
    KEY_SPEC,
    KEY_TARGET_NOISE,
    KEY_TREE,
    stream,
)

RESULT_CSV_HEADER = (
    "experiment,config_json,n_no,n_inside,n_outside,"
    "sweep_x,sweep_y,mean_nrmse,std_nrmse,repetitions_used"
)
FORMAT_VERSION = 1

FEATURE_SCREEN_ATTEMPTS = 300
SCREEN_GAP_SIGMAS = 10.0
SCREEN_MIN_MASS = 0.05  # keeps rejection sampling cheap at experiment scale
SCREEN_INTERVAL_BALANCE = 0.08  # both intervals populated, so gaps interpolate
# Certification keeps an inside draw only when its distance to the data
# exceeds the detector threshold, so the threshold-to-gap ratio decides how
# deep into the gap certified points sit.  Constraining the ratio to one
# band for every accepted feature keeps that truncation comparable across
# sweep points; otherwise configurations whose features happen to have
# smaller thresholds would be evaluated on systematically easier samples.
SCREEN_THRESHOLD_GAP_BAND = (0.08, 0.25)
_SCREEN_SPREAD_K = 120
_SCREEN_NO_PROBES = 25
_SCREEN_NO_REQUIRED = 15
_SCREEN_OOD_PROBES = 12
_SCREEN_INSIDE_REQUIRED = 6
_SCREEN_OUTSIDE_REQUIRED = 8
_SCREEN_PROBE_K = 600

TREE_SCREEN_ATTEMPTS = 200
_TREE_PROBE_POINTS = 256
# Absolute output bounds: the normalized-RMSE denominator is floored by the
# target noise (>= 0.1), so bounding |y| over the evaluation domain bounds
# the worst-case ratio and keeps repetition means tail-stable.
_TREE_ABS_CAP = 50.0
_TREE_MIN_STD = 1.0


@dataclass(frozen=True)
class ExperimentConfig:
    """Knobs shared by all experiment kinds (desk-scale defaults)."""

    n: int = 3
    k: int = 500
    repetitions: int = 20
    eval_samples_per_config: int = 100
    ranges: HyperRanges = field(default_factory=HyperRanges)
    mode: str = "simple"
    master_seed: int = 0
    k_neighbors: int = 5
    redraw_limit: int = 50
    drop_rate_limit: float = 0.2
    repetition_attempt_limit: int = 10

    def __post_init__(self):
        if self.repetitions < 1 or self.eval_samples_per_config < 1:
            raise ValueError("repetitions and eval_samples_per_config must be >= 1")
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be >= 1")
        if self.mode not in ("simple", "robust"):
            raise ValueError("mode must be 'simple' or 'robust'")
        if self.master_seed < 0:
            raise ValueError("master_seed must be >= 0")

    def to_dict(self) -> dict:
        out = {
            "n": self.n,
            "k": self.k,
            "repetitions": self.repetitions,
            "eval_samples_per_config": self.eval_samples_per_config,
            "mode": self.mode,
            "master_seed": self.master_seed,
            "k_neighbors": self.k_neighbors,
            "redraw_limit": self.redraw_limit,
            "drop_rate_limit": self.drop_rate_limit,
            "repetition_attempt_limit": self.repetition_attempt_limit,
            "ranges": self.ranges.to_dict(),
        }
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        known = {
            "n", "k", "repetitions", "eval_samples_per_config", "mode",
            "master_seed", "k_neighbors", "redraw_limit", "drop_rate_limit",
            "repetition_attempt_limit", "ranges",
        }
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "ranges" in data:
            data["ranges"] = HyperRanges.from_dict(data["ranges"])
        return cls(**data)


Composition = tuple[int, int, int]  # (n_no, n_inside, n_outside)


def compositions(n: int) -> list[Composition]:
    """All (n_no, n_inside, n_outside) with the three summing to n."""
    out = []
    for total_ood in range(n + 1):
        for n_out in range(total_ood + 1):
            out.append((n - total_ood, total_ood - n_out, n_out))
    return out


def mixed_composition(n: int) -> Composition:
    """Half inside, half outside (each rounded down), remainder in-dist."""
    half = n // 2
    return (n - 2 * half, half, half)


def statuses_for(comp: Composition) -> tuple[OodStatus, ...]:
    """Features are exchangeable: the first block is inside, then outside."""
    n_no, n_inside, n_outside = comp
    return (
        (OodStatus.INSIDE,) * n_inside
        + (OodStatus.OUTSIDE,) * n_outside
        + (OodStatus.NO,) * n_no
    )


@dataclass
class GridRow:
    n_no: int
    n_inside: int
    n_outside: int
    mean_nrmse: float
    std_nrmse: float
    repetitions_used: int


@dataclass
class ProfileGridResult:
    config: ExperimentConfig
    rows: list[GridRow]
    experiment: str = "profile"


@dataclass
class SweepRow:
    sweep_x: float
    sweep_y: float | None
    composition: Composition
    mean_nrmse: float
    std_nrmse: float
    repetitions_used: int


@dataclass
class SweepResult:
    config: ExperimentConfig
    rows: list[SweepRow]
    experiment: str


def aggregate(records) -> tuple[float, float]:
    """Arithmetic mean and population standard deviation."""
    values = np.asarray(list(records), dtype=float)
    if values.size == 0:
        raise EmptyInput("cannot aggregate zero records")
    return float(values.mean()), float(values.std())


# ---------------------------------------------------------------------------
# Repetition machinery


class _RetryRepetition(Exception):
    """Internal: this repetition attempt is unusable; draw a fresh one."""


@dataclass
class _FittedFeature:
    spec: FeatureSpec
    clean: np.ndarray
    noisy: np.ndarray
    detector: KnnDetector


def _screen_feature(spec: FeatureSpec, noisy: np.ndarray, detector: KnnDetector,
                    probe_rng) -> bool:
    """Accept a fitted feature whose certification behaves uniformly.

    Requires the threshold-to-gap ratio to sit in the fixed band and checks,
    with conditioned probe draws, that every status certifies often enough
    for the per-coordinate redraw loop never to starve.
    """
    gap = spec.window.gap_width
    ratio = detector.threshold_ / gap
    if not SCREEN_THRESHOLD_GAP_BAND[0] <= ratio <= SCREEN_THRESHOLD_GAP_BAND[1]:
        return False
    lo = float(noisy.min())
    hi = float(noisy.max())
    for status, required in (
        (OodStatus.INSIDE, _SCREEN_INSIDE_REQUIRED),
        (OodStatus.OUTSIDE, _SCREEN_OUTSIDE_REQUIRED),
    ):
        hits = sum(
            classify_simple(
                None, sample_feature_with_status(spec, status, probe_rng),
                detector, lo, hi,
            ) == status
            for _ in range(_SCREEN_OOD_PROBES)
        )
        if hits < required:
            return False
    in_dist = sample_truncated_batch(spec.mixture, spec.window, probe_rng,
                                     _SCREEN_NO_PROBES)
    return int((~detector.predict(in_dist)).sum()) >= _SCREEN_NO_REQUIRED


def _gap_dominates_spread(spec: FeatureSpec, rng) -> bool:
    """Cheap geometry pre-check on a small draw.

    The detector threshold approximates the data spread of the most-populated
    cluster, which is at most the spread of the denser window interval; a gap
    far narrower than that can never reach the threshold band, so such
    windows are rejected before paying for a detector fit.
    """
    w = spec.window
    draws = sample_truncated_batch(spec.mixture, w, rng, _SCREEN_SPREAD_K)
    lower = draws[draws <= w.hi1]
    upper = draws[draws >= w.lo2]
    if lower.size < 5 or upper.size < 5:
        return False
    denser = lower if lower.size >= upper.size else upper
    spread = float(denser.max() - denser.min())
    return w.gap_width >= max(spread, 1e-12)


def _certifiable_feature(cfg: ExperimentConfig, base: tuple[int, ...],
                         i: int) -> _FittedFeature:
    """Search for a feature spec whose detector passes the screen.

    Candidates pass a data-spread geometry check, then a screen on a small
    probe column; only survivors pay for the full-size column and detector
    fit, which must pass the same screen to be accepted.
    """
    probe_k = min(cfg.k, _SCREEN_PROBE_K)
    for attempt in range(FEATURE_SCREEN_ATTEMPTS):
        try:
            spec = random_feature_spec(
                stream(*base, KEY_SPEC, i, attempt), cfg.ranges,
                min_gap_sigmas=SCREEN_GAP_SIGMAS, min_mass=SCREEN_MIN_MASS,
                min_interval_balance=SCREEN_INTERVAL_BALANCE,
            )
            spread_rng = stream(*base, KEY_PROBE, i, attempt, 0)
            if not _gap_dominates_spread(spec, spread_rng):
                continue
            col_rng = stream(*base, KEY_FEATURE, i, attempt)
            clean = sample_truncated_batch(spec.mixture, spec.window, col_rng,
                                           probe_k)
        except (SpecGenerationFailed, RejectionBudgetExceeded):
            continue
        noisy = clean + col_rng.normal(0.0, spec.noise_sigma, size=probe_k)
        detector = fit_knn(noisy, cfg.k_neighbors,
                           stream(*base, KEY_DETECTOR, i, attempt))
        if not _screen_feature(spec, noisy, detector,
                               stream(*base, KEY_PROBE, i, attempt)):
            continue
        if cfg.k <= probe_k:
            return _FittedFeature(spec, clean, noisy, detector)
        full_rng = stream(*base, KEY_FEATURE, i, attempt, 1)
        clean = sample_truncated_batch(spec.mixture, spec.window, full_rng, cfg.k)
        noisy = clean + full_rng.normal(0.0, spec.noise_sigma, size=cfg.k)
        detector = fit_knn(noisy, cfg.k_neighbors,
                           stream(*base, KEY_DETECTOR, i, attempt, 1))
        if _screen_feature(spec, noisy, detector,
                           stream(*base, KEY_PROBE, i, attempt, 1)):
            return _FittedFeature(spec, clean, noisy, detector)
    raise SpecGenerationFailed(
        f"feature {i}: no certifiable spec in {FEATURE_SCREEN_ATTEMPTS} attempts"
    )


@dataclass
class _Repetition:
    dataset: Dataset
    features: list[_FittedFeature]
    tree: object
    target_sigma: float
    model: object
    column_min: np.ndarray
    column_max: np.ndarray

    def certify_coordinate(self, i: int, value: float, status: OodStatus,
                           mode: str) -> bool:
        if mode == "simple":
            got = classify_simple(
                None, value, self.features[i].detector,
                float(self.column_min[i]), float(self.column_max[i]),
            )
        else:
            got = classify_robust(self.dataset.features[:, i], value)
        return got == status

    def certify(self, x, desired, mode: str) -> bool:
        return all(
            self.certify_coordinate(i, float(x[i]), desired[i], mode)
            for i in range(len(self.features))
        )


def _tame_tree(cfg: ExperimentConfig, base: tuple[int, ...],
               features: list[_FittedFeature], clean: np.ndarray):
    """Draw a target tree whose values stay bounded over the evaluation domain.

    Evaluation points reach one full window span beyond each window, where a
    clamped exponential or a protected division can push tree values dozens
    of orders of magnitude past the in-window scale; one such repetition
    would then dominate every mean.  Trees are redrawn until the whole
    evaluation domain maps into a fixed output range with real in-window
    variation.
    """
    lo = np.array([f.spec.window.lo1 - f.spec.window.span for f in features])
    hi = np.array([f.spec.window.hi2 + f.spec.window.span for f in features])
    probe_rows = clean[: min(clean.shape[0], _TREE_PROBE_POINTS)]
    for attempt in range(TREE_SCREEN_ATTEMPTS):
        tree = random_expression_tree(cfg.n, stream(*base, KEY_TREE, attempt))
        y_win = np.asarray(evaluate_tree(tree, probe_rows))
        if float(np.std(y_win)) < _TREE_MIN_STD:
            continue
        ext_rng = stream(*base, KEY_TREE, attempt, 1)
        extended = lo + (hi - lo) * ext_rng.random((_TREE_PROBE_POINTS, cfg.n))
        y_ext = np.asarray(evaluate_tree(tree, extended))
        if max(float(np.abs(y_ext).max()), float(np.abs(y_win).max())) > _TREE_ABS_CAP:
            continue
        return tree
    raise SpecGenerationFailed(
        f"no bounded target tree in {TREE_SCREEN_ATTEMPTS} attempts"
    )


def _build_repetition(cfg: ExperimentConfig, base: tuple[int, ...]) -> _Repetition:
    features = [_certifiable_feature(cfg, base, i) for i in range(cfg.n)]
    trng = stream(*base, KEY_TARGET_NOISE)
    target_sigma = float(trng.uniform(0.1, 1.0))
    while target_sigma <= 0.1:
        target_sigma = float(trng.uniform(0.1, 1.0))
    clean = np.column_stack([f.clean for f in features])
    noisy = np.column_stack([f.noisy for f in features])
    tree = _tame_tree(cfg, base, features, clean)
    y = evaluate_tree(tree, clean) + trng.normal(0.0, target_sigma, size=cfg.k)
    dataset = Dataset(noisy, y)
    model = fit_best(dataset, stream(*base, KEY_MODEL))
    return _Repetition(dataset, features, tree, target_sigma, model,
                       noisy.min(axis=0), noisy.max(axis=0))


def _certified_eval_set(cfg: ExperimentConfig, rep: _Repetition,
                        desired, eval_rng, label_rng):
    """Draw certified samples; returns (X, y_true, n_dropped).

    Coordinates are independent across features, so certification redraws
    one coordinate at a time; conditioning each coordinate on its own status
    is the same distribution as conditioning whole samples jointly, without
    the exponential cost in the feature count.
    """
    specs = [f.spec for f in rep.features]
    xs, ys = [], []
    dropped = 0
    for _ in range(cfg.eval_samples_per_config):
        coords = np.empty(cfg.n)
        starved = False
        for i, (spec, status) in enumerate(zip(specs, desired)):
            for _ in range(cfg.redraw_limit):
                value = sample_feature_with_status(spec, status, eval_rng)
                if rep.certify_coordinate(i, value, status, cfg.mode):
                    coords[i] = value
                    break
            else:
                starved = True
                break
        if starved:
            dropped += 1
            continue
        xs.append(coords)
        ys.append(evaluate_tree(rep.tree, coords)
                  + float(label_rng.normal(0.0, rep.target_sigma)))
    if xs:
        return np.vstack(xs), np.asarray(ys), dropped
    return np.empty((0, cfg.n)), np.empty(0), dropped


@dataclass
class RepOutcome:
    values: dict[Composition, float]
    attempts: int


def _attempt_repetition(cfg: ExperimentConfig, comps: list[Composition],
                        base: tuple[int, ...]) -> dict[Composition, float]:
    rep = _build_repetition(cfg, base)
    all_no = (OodStatus.NO,) * cfg.n

    X0, y0, dropped0 = _certified_eval_set(
        cfg, rep, all_no, stream(*base, KEY_EVAL, 0), stream(*base, KEY_LABEL, 0)
    )
    total_requested = cfg.eval_samples_per_config
    total_dropped = dropped0
    if X0.shape[0] == 0:
        raise _RetryRepetition("all in-distribution samples dropped")
    baseline = rmse(rep.model.predict(X0), y0)

    values: dict[Composition, float] = {}
    deferred: list[tuple[Composition, float]] = []
    for ci, comp in enumerate(comps):
        if comp == (cfg.n, 0, 0):
            # Same draw as the baseline, so the ratio is exactly 1.
            deferred.append((comp, baseline))
            continue
        desired = statuses_for(comp)
        X, y_true, dropped = _certified_eval_set(
            cfg, rep, desired,
            stream(*base, KEY_EVAL, ci + 1), stream(*base, KEY_LABEL, ci + 1),
        )
        total_requested += cfg.eval_samples_per_config
        total_dropped += dropped
        if X.shape[0] == 0:
            raise _RetryRepetition(f"composition {comp}: all samples dropped")
        deferred.append((comp, rmse(rep.model.predict(X), y_true)))

    if total_dropped / total_requested > cfg.drop_rate_limit:
        raise _RetryRepetition(
            f"certification drop rate {total_dropped / total_requested:.0%}"
        )
    try:
        for comp, raw in deferred:
            values[comp] = normalized_rmse(raw, baseline)
    except ZeroBaseline as exc:
        raise _RetryRepetition(str(exc)) from None
    return values


def _run_repetition(cfg: ExperimentConfig, comps: list[Composition],
                    point_index: int, rep_index: int) -> RepOutcome:
    for attempt in range(cfg.repetition_attempt_limit):
        base = (cfg.master_seed, point_index, rep_index, attempt)
        try:
            values = _attempt_repetition(cfg, comps, base)
        except (_RetryRepetition, SpecGenerationFailed) as exc:
            warnings.warn(
                f"repetition {rep_index} attempt {attempt} discarded: {exc}",
                stacklevel=2,
            )
            continue
        return RepOutcome(values, attempt + 1)
    raise RepetitionBudgetExceeded(
        f"repetition {rep_index} exhausted {cfg.repetition_attempt_limit} attempts"
    )


def _repetition_task(args) -> tuple[int, int, RepOutcome]:
    cfg, comps, point_index, rep_index = args
    return point_index, rep_index, _run_repetition(cfg, comps, point_index, rep_index)


def _run_points(points: list[tuple[ExperimentConfig, list[Composition]]],
                jobs: int = 1, progress=None) -> list[list[RepOutcome]]:
    """Run every (sweep point, repetition) pair; order-independent by design."""
    tasks = [
        (cfg, comps, pi, rep)
        for pi, (cfg, comps) in enumerate(points)
        for rep in range(cfg.repetitions)
    ]
    outcomes: dict[tuple[int, int], RepOutcome] = {}
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for pi, rep, outcome in pool.map(_repetition_task, tasks):
                outcomes[(pi, rep)] = outcome
                if progress is not None:
                    progress({"point": pi, "repetition": rep,
                              "attempts": outcome.attempts})
    else:
        for task in tasks:
            pi, rep, outcome = _repetition_task(task)
            outcomes[(pi, rep)] = outcome
            if progress is not None:
                progress({"point": pi, "repetition": rep,
                          "attempts": outcome.attempts})
    return [
        [outcomes[(pi, rep)] for rep in range(cfg.repetitions)]
        for pi, (cfg, comps) in enumerate(points)
    ]


# ---------------------------------------------------------------------------
# Experiment kinds


def run_profile_grid(cfg: ExperimentConfig, jobs: int = 1,
                     progress=None) -> ProfileGridResult:
    """Mean +- std normalized RMSE for every composition of n features."""
    comps = compositions(cfg.n)
    (per_rep,) = _run_points([(cfg, comps)], jobs=jobs, progress=progress)
    used = sum(o.attempts for o in per_rep)
    rows = []
    for comp in comps:
        mean, std = aggregate([o.values[comp] for o in per_rep])
        rows.append(GridRow(*comp, mean, std, used))
    return ProfileGridResult(cfg, rows)


def run_sweep_dimensions(cfg: ExperimentConfig, n_values,
                         jobs: int = 1, progress=None) -> SweepResult:
    points = []
    for n in n_values:
        cfg_n = replace(cfg, n=int(n))
        points.append((cfg_n, [mixed_composition(int(n))]))
    results = _run_points(points, jobs=jobs, progress=progress)
    rows = []
    for n, (cfg_n, comps), per_rep in zip(n_values, points, results):
        comp = comps[0]
        mean, std = aggregate([o.values[comp] for o in per_rep])
        rows.append(SweepRow(float(n), None, comp, mean, std,
                             sum(o.attempts for o in per_rep)))
    return SweepResult(cfg, rows, "sens-dim")


def run_sweep_complexity(cfg: ExperimentConfig, z_values,
                         jobs: int = 1, progress=None) -> SweepResult:
    points = []
    for z in z_values:
        ranges = replace(cfg.ranges, z_min=int(z), z_max=int(z))
        points.append((replace(cfg, ranges=ranges),
                       [mixed_composition(cfg.n)]))
    results = _run_points(points, jobs=jobs, progress=progress)
    rows = []
    for z, (cfg_z, comps), per_rep in zip(z_values, points, results):
        comp = comps[0]
        mean, std = aggregate([o.values[comp] for o in per_rep])
        rows.append(SweepRow(float(z), None, comp, mean, std,
                             sum(o.attempts for o in per_rep)))
    return SweepResult(cfg, rows, "sens-z")


def portion_cells(n: int, inside_fracs, outside_fracs) -> list[tuple[float, float, Composition]]:
    """Feasible (inside_frac, outside_frac, composition) cells of the grid."""
    cells = []
    for fi in inside_fracs:
        for fo in outside_fracs:
            n_in = int(np.floor(fi * n))
            n_out = int(np.floor(fo * n))
            if n_in + n_out <= n:
                cells.append((float(fi), float(fo), (n - n_in - n_out, n_in, n_out)))
    return cells


def run_sweep_portion(cfg: ExperimentConfig, inside_fracs, outside_fracs,
                      jobs: int = 1, progress=None) -> SweepResult:
    """2-D grid over feature-status fractions; infeasible cells are absent."""
    cells = portion_cells(cfg.n, inside_fracs, outside_fracs)
    points = [(cfg, [comp]) for _, _, comp in cells]
    results = _run_points(points, jobs=jobs, progress=progress)
    rows = []
    for (fi, fo, comp), per_rep in zip(cells, results):
        mean, std = aggregate([o.values[comp] for o in per_rep])
        rows.append(SweepRow(fi, fo, comp, mean, std,
                             sum(o.attempts for o in per_rep)))
    return SweepResult(cfg, rows, "sens-portion")


def run_sweep_size(cfg: ExperimentConfig, n_values, k_values,
                   jobs: int = 1, progress=None) -> SweepResult:
    """2-D grid over (n, k) at the mixed composition."""
    cells = []
    for n in n_values:
        for k in k_values:
            cells.append((int(n), int(k)))
    points = [
        (replace(cfg, n=n, k=k), [mixed_composition(n)]) for n, k in cells
    ]
    results = _run_points(points, jobs=jobs, progress=progress)
    rows = []
    for (n, k), (cfg_nk, comps), per_rep in zip(cells, points, results):
        comp = comps[0]
        mean, std = aggregate([o.values[comp] for o in per_rep])
        rows.append(SweepRow(float(n), float(k), comp, mean, std,
                             sum(o.attempts for o in per_rep)))
    return SweepResult(cfg, rows, "sens-size")


# ---------------------------------------------------------------------------
# Result files and headline statistics


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


def write_result_csv(result, path) -> None:
    path = Path(path)
    config_json = json.dumps(result.config.to_dict(), sort_keys=True,
                             separators=(",", ":"))
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(RESULT_CSV_HEADER.split(","))
        if isinstance(result, ProfileGridResult):
            for row in result.rows:
                writer.writerow([
                    result.experiment, config_json,
                    row.n_no, row.n_inside, row.n_outside, "", "",
                    _fmt(row.mean_nrmse), _fmt(row.std_nrmse),
                    row.repetitions_used,
                ])
        else:
            for row in result.rows:
                n_no, n_inside, n_outside = row.composition
                writer.writerow([
                    result.experiment, config_json,
                    n_no, n_inside, n_outside,
                    _fmt(row.sweep_x), _fmt(row.sweep_y),
                    _fmt(row.mean_nrmse), _fmt(row.std_nrmse),
                    row.repetitions_used,
                ])


def write_manifest(result, path, wall_time_seconds: float) -> None:
    payload = {
        "experiment": result.experiment,
        "master_seed": result.config.master_seed,
        "config": result.config.to_dict(),
        "artifact_version": __version__,
        "format_version": FORMAT_VERSION,
        "wall_time_seconds": wall_time_seconds,
    }
    Path(path).write_text(json.dumps(payload, indent=2) + "\n")


def headline_stats(result) -> dict:
    """Summary statistics printed by the CLI after each experiment."""
    if isinstance(result, ProfileGridResult):
        n = result.config.n
        by_comp = {(r.n_no, r.n_inside, r.n_outside): r.mean_nrmse
                   for r in result.rows}
        return {
            "experiment": result.experiment,
            "baseline_is_one": by_comp[(n, 0, 0)] == 1.0,
            "all_outside_mean": by_comp[(0, 0, n)],
            "all_inside_mean": by_comp[(0, n, 0)],
        }
    xs = [row.sweep_x for row in result.rows]
    means = [row.mean_nrmse for row in result.rows]
    out = {"experiment": result.experiment}
    if result.experiment in ("sens-dim", "sens-z") and len(set(xs)) > 1:
        rho = scipy_stats.spearmanr(xs, means).statistic
        out["spearman_rho"] = float(rho)
    elif result.experiment == "sens-portion":
        cells = {(row.sweep_x, row.sweep_y): row.mean_nrmse for row in result.rows}
        if (0.0, 1.0) in cells and (1.0, 0.0) in cells:
            out["all_outside_mean"] = cells[(0.0, 1.0)]
            out["all_inside_mean"] = cells[(1.0, 0.0)]
    elif result.experiment == "sens-size":
        per_k: dict[float, list[tuple[float, float]]] = {}
        for row in result.rows:
            per_k.setdefault(row.sweep_y, []).append((row.sweep_x, row.mean_nrmse))
        rhos = {}
        for kv, pairs in sorted(per_k.items()):
            if len(pairs) > 1:
                pairs.sort()
                rho = scipy_stats.spearmanr([p[0] for p in pairs],
                                            [p[1] for p in pairs]).statistic
                rhos[str(int(kv))] = float(rho)
        out["spearman_rho_vs_n_per_k"] = rhos
    return out

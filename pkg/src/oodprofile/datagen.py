"""Synthetic regression dataset generation.

A dataset is assembled in two steps: each source feature is rejection-sampled
from its own mixture distribution restricted to an observable window, and the
target is a random expression tree applied to the clean feature rows.
Gaussian noise is then added to every source feature and to the target so a
model cannot simply reconstruct the generating function.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .distributions import (
    Beta,
    Exponential,
    Gaussian,
    MixtureDistribution,
    ObservableWindow,
    Uniform,
    Weibull,
    sample_truncated,
    sample_truncated_batch,
)
from .errors import DatasetFormatError, DegenerateGap, DimensionMismatch, SpecGenerationFailed
from .profile import OodStatus
from .rng import KEY_FEATURE, KEY_SPEC, KEY_TARGET_NOISE, KEY_TREE, stream

MIN_WINDOW_MASS = 1e-4
# Floor used when a spec feeds bulk rejection sampling: at mass p the
# expected gap between acceptances is 1/p draws, so p must sit well above
# budget**-1 or the sampler will report a dead window.
DATASET_WINDOW_MASS = 5e-3
WINDOW_TIE_EPS = 1e-6
INSIDE_MARGIN_FRACTION = 0.05
OUTSIDE_MARGIN_FRACTION = 0.05
DEGENERATE_GAP_SIGMAS = 10.0
_CLAMP = 1e150


@dataclass(frozen=True)
class HyperRanges:
    """Bounds used when drawing feature specs at random."""

    z_min: int = 1
    z_max: int = 20
    window_lo: float = -100.0
    window_hi: float = 100.0
    noise_lo: float = 0.1
    noise_hi: float = 1.0

    def __post_init__(self):
        if not 1 <= self.z_min <= self.z_max:
            raise ValueError("need 1 <= z_min <= z_max")
        if not self.window_lo < self.window_hi:
            raise ValueError("need window_lo < window_hi")
        if not 0.1 <= self.noise_lo < self.noise_hi <= 1.0:
            raise ValueError("noise range must sit inside [0.1, 1]")

    def to_dict(self) -> dict:
        return {
            "z_min": self.z_min, "z_max": self.z_max,
            "window_lo": self.window_lo, "window_hi": self.window_hi,
            "noise_lo": self.noise_lo, "noise_hi": self.noise_hi,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "HyperRanges":
        return cls(**data)


@dataclass(frozen=True)
class FeatureSpec:
    """Generative recipe for one source feature."""

    mixture: MixtureDistribution
    window: ObservableWindow
    noise_sigma: float

    def __post_init__(self):
        if not 0.1 < self.noise_sigma < 1.0:
            raise ValueError(
                f"noise_sigma must lie in (0.1, 1), got {self.noise_sigma}"
            )

    def to_dict(self) -> dict:
        out = self.mixture.to_dict()
        out["window"] = self.window.as_list()
        out["noise_sigma"] = self.noise_sigma
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "FeatureSpec":
        return cls(
            MixtureDistribution.from_dict(data),
            ObservableWindow(*data["window"]),
            float(data["noise_sigma"]),
        )


def _open_scaled(rng: np.random.Generator, upper: float) -> float:
    # Draw from (0, upper]: 1 - U[0, 1) never hits 0.
    return upper * (1.0 - rng.random())


def random_component(rng: np.random.Generator):
    """One component with parameters drawn over the supported ranges."""
    family = int(rng.integers(5))
    if family == 0:
        return Gaussian(float(rng.uniform(-5, 5)), _open_scaled(rng, 10.0))
    if family == 1:
        lo, hi = sorted(rng.uniform(-10, 10, size=2))
        while hi <= lo:
            lo, hi = sorted(rng.uniform(-10, 10, size=2))
        return Uniform(float(lo), float(hi))
    if family == 2:
        return Exponential(_open_scaled(rng, 10.0))
    if family == 3:
        return Weibull(_open_scaled(rng, 5.0), float(rng.uniform(1, 5)))
    return Beta(_open_scaled(rng, 5.0), _open_scaled(rng, 5.0))


def random_window(rng: np.random.Generator, lo: float, hi: float) -> ObservableWindow:
    """Sorted quadruple of i.i.d. uniforms; redrawn while any two nearly tie."""
    while True:
        vals = np.sort(rng.uniform(lo, hi, size=4))
        if np.diff(vals).min() >= WINDOW_TIE_EPS:
            return ObservableWindow(*(float(v) for v in vals))


def random_feature_spec(
    rng: np.random.Generator,
    ranges: HyperRanges = HyperRanges(),
    min_gap_sigmas: float = 0.0,
    min_mass: float = MIN_WINDOW_MASS,
    min_interval_balance: float = 0.0,
) -> FeatureSpec:
    """Draw a feature spec with a usable window.

    The component count is drawn once; the mixture and window are
    regenerated (bounded attempts) until the window carries at least
    ``min_mass`` probability and, when ``min_gap_sigmas`` > 0, the gap is at
    least that many noise standard deviations wide.  Callers that go on to
    rejection-sample many values may pass a larger ``min_mass`` to bound the
    sampling cost.

    ``min_interval_balance`` > 0 additionally requires each of the two
    observable intervals to hold at least that fraction of the window mass,
    so the gap separates two actually-populated value regions.
    """
    z = int(rng.integers(ranges.z_min, ranges.z_max + 1))
    for _ in range(20):
        mixture = MixtureDistribution.equal_weights(
            [random_component(rng) for _ in range(z)]
        )
        noise_sigma = float(rng.uniform(ranges.noise_lo, ranges.noise_hi))
        while noise_sigma <= 0.1:
            noise_sigma = float(rng.uniform(ranges.noise_lo, ranges.noise_hi))
        # Candidate windows are drawn and filtered as one batch; a window
        # with near-tied bounds counts as regenerated, like every other
        # rejected candidate.
        windows = np.sort(
            rng.uniform(ranges.window_lo, ranges.window_hi, size=(100, 4)), axis=1
        )
        cum = np.zeros_like(windows)
        for weight, comp in zip(mixture.weights, mixture.components):
            if weight > 0:
                cum += weight * comp.cdf(windows)
        mass_lower = cum[:, 1] - cum[:, 0]
        mass_upper = cum[:, 3] - cum[:, 2]
        mass = mass_lower + mass_upper
        gaps = windows[:, 2] - windows[:, 1]
        viable = (
            (np.diff(windows, axis=1).min(axis=1) >= WINDOW_TIE_EPS)
            & (mass >= min_mass)
            & (np.minimum(mass_lower, mass_upper) >= min_interval_balance * mass)
            & (gaps >= min_gap_sigmas * noise_sigma)
        )
        hits = np.flatnonzero(viable)
        if hits.size:
            window = ObservableWindow(*(float(v) for v in windows[hits[0]]))
            return FeatureSpec(mixture, window, noise_sigma)
    raise SpecGenerationFailed(
        f"no viable (mixture, window) pair found for z={z}"
    )


# ---------------------------------------------------------------------------
# Expression trees


@dataclass(frozen=True)
class Const:
    value: float


@dataclass(frozen=True)
class Var:
    index: int


@dataclass(frozen=True)
class Unary:
    op: str
    child: "Node"


@dataclass(frozen=True)
class Binary:
    op: str
    left: "Node"
    right: "Node"


Node = Const | Var | Unary | Binary

BINARY_OPS = ("add", "sub", "mul", "div")
UNARY_OPS = ("sin", "cos", "exp", "log")


def _clamp(values: np.ndarray) -> np.ndarray:
    # Keeps evaluation total: no overflow to inf regardless of tree shape.
    return np.clip(values, -_CLAMP, _CLAMP)


def _eval(node: Node, X: np.ndarray) -> np.ndarray:
    if isinstance(node, Const):
        return np.full(X.shape[0], node.value)
    if isinstance(node, Var):
        return X[:, node.index]
    if isinstance(node, Unary):
        v = _eval(node.child, X)
        if node.op == "sin":
            return np.sin(v)
        if node.op == "cos":
            return np.cos(v)
        if node.op == "exp":
            return np.exp(np.clip(v, -50.0, 50.0))
        if node.op == "log":
            return np.log(np.abs(v) + 1e-9)
        raise ValueError(f"unknown unary op {node.op!r}")
    left = _eval(node.left, X)
    right = _eval(node.right, X)
    if node.op == "add":
        return _clamp(left + right)
    if node.op == "sub":
        return _clamp(left - right)
    if node.op == "mul":
        return _clamp(left * right)
    if node.op == "div":
        small = np.abs(right) < 1e-9
        safe = np.where(small, 1.0, right)
        return _clamp(np.where(small, 1.0, left / safe))
    raise ValueError(f"unknown binary op {node.op!r}")


def evaluate_tree(tree: Node, x) -> float | np.ndarray:
    """Evaluate on one sample vector (returns float) or an (m, n) matrix."""
    arr = np.asarray(x, dtype=float)
    if arr.ndim == 1:
        return float(_eval(tree, arr.reshape(1, -1))[0])
    return _eval(tree, arr)


def tree_features(tree: Node) -> set[int]:
    if isinstance(tree, Var):
        return {tree.index}
    if isinstance(tree, Unary):
        return tree_features(tree.child)
    if isinstance(tree, Binary):
        return tree_features(tree.left) | tree_features(tree.right)
    return set()


def tree_depth(tree: Node) -> int:
    if isinstance(tree, (Const, Var)):
        return 1
    if isinstance(tree, Unary):
        return 1 + tree_depth(tree.child)
    return 1 + max(tree_depth(tree.left), tree_depth(tree.right))


def random_expression_tree(n: int, rng: np.random.Generator,
                           max_depth: int = 6) -> Node:
    """Grow-method random tree over n features; references >= 1 feature."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")

    def build(depth: int) -> Node:
        if depth >= max_depth or rng.random() < (depth - 1) / max_depth:
            if rng.random() < 0.5:
                return Var(int(rng.integers(n)))
            return Const(float(rng.uniform(-5, 5)))
        choice = int(rng.integers(len(BINARY_OPS) + len(UNARY_OPS)))
        if choice < len(BINARY_OPS):
            return Binary(BINARY_OPS[choice], build(depth + 1), build(depth + 1))
        return Unary(UNARY_OPS[choice - len(BINARY_OPS)], build(depth + 1))

    for _ in range(1000):
        tree = build(1)
        if tree_features(tree):
            return tree
    return Var(0)


def tree_to_sexpr(tree: Node) -> str:
    if isinstance(tree, Const):
        return repr(tree.value)
    if isinstance(tree, Var):
        return f"(var {tree.index})"
    if isinstance(tree, Unary):
        return f"({tree.op} {tree_to_sexpr(tree.child)})"
    return f"({tree.op} {tree_to_sexpr(tree.left)} {tree_to_sexpr(tree.right)})"


def tree_from_sexpr(text: str) -> Node:
    tokens = text.replace("(", " ( ").replace(")", " ) ").split()
    if not tokens:
        raise DatasetFormatError("empty expression")
    pos = 0

    def parse() -> Node:
        nonlocal pos
        if pos >= len(tokens):
            raise DatasetFormatError("unexpected end of expression")
        tok = tokens[pos]
        pos += 1
        if tok != "(":
            try:
                return Const(float(tok))
            except ValueError:
                raise DatasetFormatError(f"bad token {tok!r}") from None
        head = tokens[pos]
        pos += 1
        if head == "var":
            idx = tokens[pos]
            pos += 1
            node: Node = Var(int(idx))
        elif head in UNARY_OPS:
            node = Unary(head, parse())
        elif head in BINARY_OPS:
            node = Binary(head, parse(), parse())
        else:
            raise DatasetFormatError(f"unknown operator {head!r}")
        if pos >= len(tokens) or tokens[pos] != ")":
            raise DatasetFormatError(f"missing ')' after {head!r}")
        pos += 1
        return node

    node = parse()
    if pos != len(tokens):
        raise DatasetFormatError("trailing tokens after expression")
    return node


# ---------------------------------------------------------------------------
# Dataset assembly


@dataclass(frozen=True)
class DatasetSpec:
    """Everything needed to regenerate a dataset deterministically."""

    n: int
    k: int
    feature_specs: tuple[FeatureSpec, ...]
    target_tree: Node
    target_noise_sigma: float
    seed: int

    def __post_init__(self):
        object.__setattr__(self, "feature_specs", tuple(self.feature_specs))
        if self.n < 1 or self.k < 1:
            raise ValueError("n and k must be >= 1")
        if len(self.feature_specs) != self.n:
            raise ValueError("feature_specs length must equal n")
        if not 0.1 < self.target_noise_sigma < 1.0:
            raise ValueError("target_noise_sigma must lie in (0.1, 1)")
        bad = [i for i in tree_features(self.target_tree) if i >= self.n]
        if bad:
            raise ValueError(f"target tree references invalid features {bad}")

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "k": self.k,
            "seed": self.seed,
            "target_noise_sigma": self.target_noise_sigma,
            "target_tree": tree_to_sexpr(self.target_tree),
            "features": [fs.to_dict() for fs in self.feature_specs],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DatasetSpec":
        return cls(
            n=int(data["n"]),
            k=int(data["k"]),
            feature_specs=tuple(FeatureSpec.from_dict(f) for f in data["features"]),
            target_tree=tree_from_sexpr(data["target_tree"]),
            target_noise_sigma=float(data["target_noise_sigma"]),
            seed=int(data["seed"]),
        )


@dataclass(frozen=True)
class Dataset:
    """Feature matrix plus target column; values are immutable."""

    features: np.ndarray  # (k, n)
    target: np.ndarray  # (k,)

    def __post_init__(self):
        feats = np.asarray(self.features, dtype=float)
        tgt = np.asarray(self.target, dtype=float)
        if feats.ndim != 2 or tgt.ndim != 1 or feats.shape[0] != tgt.shape[0]:
            raise ValueError("features must be (k, n) and target (k,)")
        if not (np.isfinite(feats).all() and np.isfinite(tgt).all()):
            raise ValueError("dataset contains non-finite values")
        feats.setflags(write=False)
        tgt.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "target", tgt)

    @property
    def n(self) -> int:
        return self.features.shape[1]

    @property
    def k(self) -> int:
        return self.features.shape[0]


def random_dataset_spec(seed: int, n: int, k: int,
                        ranges: HyperRanges = HyperRanges(),
                        min_gap_sigmas: float = 0.0,
                        max_tree_depth: int = 6,
                        min_mass: float = DATASET_WINDOW_MASS) -> DatasetSpec:
    """Draw a complete dataset spec from keyed streams under ``seed``."""
    feature_specs = tuple(
        random_feature_spec(stream(seed, KEY_SPEC, i), ranges, min_gap_sigmas,
                            min_mass=min_mass)
        for i in range(n)
    )
    tree = random_expression_tree(n, stream(seed, KEY_TREE), max_tree_depth)
    trng = stream(seed, KEY_SPEC, n)
    sigma = float(trng.uniform(0.1, 1.0))
    while sigma <= 0.1:
        sigma = float(trng.uniform(0.1, 1.0))
    return DatasetSpec(n, k, feature_specs, tree, sigma, seed)


def generate_feature(spec: FeatureSpec, k: int, rng: np.random.Generator) -> np.ndarray:
    """k accepted window draws plus element-wise Gaussian noise."""
    if k < 1:
        raise ValueError("k must be >= 1")
    clean = sample_truncated_batch(spec.mixture, spec.window, rng, k)
    return clean + rng.normal(0.0, spec.noise_sigma, size=k)


def generate_dataset_arrays(spec: DatasetSpec):
    """Return (clean_features, noisy_features, target) for a spec.

    The target is computed from the clean rows, so feature noise degrades the
    learner's view of the inputs without touching the generating function.
    """
    clean = np.empty((spec.k, spec.n))
    noisy = np.empty((spec.k, spec.n))
    for i, fs in enumerate(spec.feature_specs):
        rng = stream(spec.seed, KEY_FEATURE, i)
        col = sample_truncated_batch(fs.mixture, fs.window, rng, spec.k)
        clean[:, i] = col
        noisy[:, i] = col + rng.normal(0.0, fs.noise_sigma, size=spec.k)
    y = evaluate_tree(spec.target_tree, clean)
    y = y + stream(spec.seed, KEY_TARGET_NOISE).normal(
        0.0, spec.target_noise_sigma, size=spec.k
    )
    return clean, noisy, y


def generate_dataset(spec: DatasetSpec) -> Dataset:
    """Pure function of the spec (including its seed)."""
    _, noisy, y = generate_dataset_arrays(spec)
    return Dataset(noisy, y)


def sample_feature_with_status(spec: FeatureSpec, status: OodStatus,
                               rng: np.random.Generator) -> float:
    """Draw one coordinate targeting the requested OOD status.

    ``no`` coordinates are window draws; ``inside`` coordinates land in the
    gap with a margin of 5% of the gap width on each side; ``outside``
    coordinates land beyond the window on either side, between 5% and 100%
    of the full window span away from the nearer edge.
    """
    w = spec.window
    if status == OodStatus.NO:
        return sample_truncated(spec.mixture, w, rng)
    if status == OodStatus.INSIDE:
        gap = w.gap_width
        if gap < DEGENERATE_GAP_SIGMAS * spec.noise_sigma:
            raise DegenerateGap(
                f"gap {gap:.4g} < {DEGENERATE_GAP_SIGMAS}*noise_sigma "
                f"({spec.noise_sigma:.4g})"
            )
        margin = INSIDE_MARGIN_FRACTION * gap
        return float(rng.uniform(w.hi1 + margin, w.lo2 - margin))
    if status == OodStatus.OUTSIDE:
        span = w.span
        margin = OUTSIDE_MARGIN_FRACTION * span
        if rng.random() < 0.5:
            return float(rng.uniform(w.lo1 - span, w.lo1 - margin))
        return float(rng.uniform(w.hi2 + margin, w.hi2 + span))
    raise ValueError(f"unknown status {status!r}")


def sample_with_profile(feature_specs, desired, rng: np.random.Generator) -> np.ndarray:
    """Draw one sample whose coordinates target the requested OOD statuses.

    The caller is expected to certify the sample against fitted detectors;
    geometry alone does not guarantee the detector's verdict.  Coordinates
    are drawn independently per feature, so certification may equivalently
    redraw single coordinates.
    """
    feature_specs = tuple(feature_specs)
    desired = tuple(desired)
    if len(desired) != len(feature_specs):
        raise DimensionMismatch(
            f"desired has {len(desired)} statuses for {len(feature_specs)} features"
        )
    x = np.empty(len(feature_specs))
    for i, (fs, status) in enumerate(zip(feature_specs, desired)):
        try:
            x[i] = sample_feature_with_status(fs, status, rng)
        except DegenerateGap as exc:
            raise DegenerateGap(f"feature {i}: {exc}") from None
    return x


# ---------------------------------------------------------------------------
# File formats


def save_dataset(ds: Dataset, path) -> None:
    """CSV with header f_0,...,f_{n-1},y and 17-significant-digit reals."""
    path = Path(path)
    header = ",".join([f"f_{i}" for i in range(ds.n)] + ["y"])
    lines = [header]
    for row, y in zip(ds.features, ds.target):
        lines.append(",".join(format(v, ".17g") for v in (*row, y)))
    path.write_text("\n".join(lines) + "\n")


def load_dataset(path) -> Dataset:
    path = Path(path)
    text = path.read_text()
    lines = [ln for ln in text.splitlines() if ln.strip()]
    if not lines:
        raise DatasetFormatError(f"{path}: file is empty")
    header = lines[0].split(",")
    if len(header) < 2 or header[-1] != "y" or any(
        col != f"f_{i}" for i, col in enumerate(header[:-1])
    ):
        raise DatasetFormatError(f"{path}: row 1: bad header {lines[0]!r}")
    n = len(header) - 1
    features = np.empty((len(lines) - 1, n))
    target = np.empty(len(lines) - 1)
    for row_no, line in enumerate(lines[1:], start=2):
        parts = line.split(",")
        if len(parts) != n + 1:
            raise DatasetFormatError(
                f"{path}: row {row_no}: expected {n + 1} columns, found {len(parts)}"
            )
        try:
            values = [float(p) for p in parts]
        except ValueError:
            raise DatasetFormatError(
                f"{path}: row {row_no}: non-numeric value"
            ) from None
        features[row_no - 2] = values[:-1]
        target[row_no - 2] = values[-1]
    return Dataset(features, target)


def save_dataset_spec(spec: DatasetSpec, path) -> None:
    Path(path).write_text(json.dumps(spec.to_dict(), indent=2) + "\n")


def load_dataset_spec(path) -> DatasetSpec:
    path = Path(path)
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetFormatError(f"{path}: invalid JSON: {exc}") from None
    return DatasetSpec.from_dict(data)

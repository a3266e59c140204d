"""Mixture distributions and window-truncated sampling.

Each synthetic feature is driven by a finite mixture of parametric
components.  An observable window restricts the values that actually enter
the dataset to two disjoint intervals, leaving an interpolatory gap between
them; sampling against the window is done by rejection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import RejectionBudgetExceeded

DEFAULT_MAX_REJECTIONS = 10_000
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


@dataclass(frozen=True)
class Gaussian:
    mean: float
    stddev: float

    def __post_init__(self):
        if not self.stddev > 0:
            raise ValueError(f"Gaussian stddev must be > 0, got {self.stddev}")

    def sample(self, rng: np.random.Generator, size=None):
        return rng.normal(self.mean, self.stddev, size=size)

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.stddev
        return np.exp(-0.5 * z * z) / (self.stddev * _SQRT2PI)

    def cdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mean) / self.stddev
        return 0.5 * (1.0 + special.erf(z / _SQRT2))


@dataclass(frozen=True)
class Uniform:
    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"Uniform requires lo < hi, got ({self.lo}, {self.hi})")

    def sample(self, rng: np.random.Generator, size=None):
        return rng.uniform(self.lo, self.hi, size=size)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where((x >= self.lo) & (x <= self.hi), 1.0 / (self.hi - self.lo), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.clip((x - self.lo) / (self.hi - self.lo), 0.0, 1.0)


@dataclass(frozen=True)
class Exponential:
    rate: float

    def __post_init__(self):
        if not self.rate > 0:
            raise ValueError(f"Exponential rate must be > 0, got {self.rate}")

    def sample(self, rng: np.random.Generator, size=None):
        return rng.exponential(1.0 / self.rate, size=size)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)


@dataclass(frozen=True)
class Weibull:
    scale: float
    shape: float

    def __post_init__(self):
        if not self.scale > 0:
            raise ValueError(f"Weibull scale must be > 0, got {self.scale}")
        if not self.shape >= 1:
            raise ValueError(f"Weibull shape must be >= 1, got {self.shape}")

    def sample(self, rng: np.random.Generator, size=None):
        return self.scale * rng.weibull(self.shape, size=size)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        t = np.maximum(x, 0.0) / self.scale
        # shape >= 1, so t**(shape-1) is finite at t = 0.
        dens = (self.shape / self.scale) * t ** (self.shape - 1.0) * np.exp(-(t**self.shape))
        return np.where(x >= 0, dens, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        t = np.maximum(x, 0.0) / self.scale
        return np.where(x >= 0, -np.expm1(-(t**self.shape)), 0.0)


@dataclass(frozen=True)
class Beta:
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.alpha > 0 and self.beta > 0):
            raise ValueError(
                f"Beta parameters must be > 0, got ({self.alpha}, {self.beta})"
            )

    def sample(self, rng: np.random.Generator, size=None):
        return rng.beta(self.alpha, self.beta, size=size)

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        interior = (x > 0) & (x < 1)
        safe = np.where(interior, x, 0.5)
        log_dens = (
            (self.alpha - 1.0) * np.log(safe)
            + (self.beta - 1.0) * np.log1p(-safe)
            - special.betaln(self.alpha, self.beta)
        )
        return np.where(interior, np.exp(log_dens), 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return special.betainc(self.alpha, self.beta, np.clip(x, 0.0, 1.0))


Component = Gaussian | Uniform | Exponential | Weibull | Beta

_KIND_TO_CLASS = {
    "gaussian": Gaussian,
    "uniform": Uniform,
    "exponential": Exponential,
    "weibull": Weibull,
    "beta": Beta,
}
_CLASS_TO_KIND = {cls: kind for kind, cls in _KIND_TO_CLASS.items()}


def component_to_dict(dist: Component) -> dict:
    kind = _CLASS_TO_KIND[type(dist)]
    out = {"kind": kind}
    out.update({k: float(v) for k, v in dist.__dict__.items()})
    return out


def component_from_dict(data: dict) -> Component:
    data = dict(data)
    kind = data.pop("kind")
    try:
        cls = _KIND_TO_CLASS[kind]
    except KeyError:
        raise ValueError(f"unknown component kind {kind!r}") from None
    return cls(**data)


def sample_component(dist: Component, rng: np.random.Generator) -> float:
    """Draw one value from a single component distribution."""
    return float(dist.sample(rng))


@dataclass(frozen=True)
class MixtureDistribution:
    """Finite mixture of component distributions with normalized weights."""

    components: tuple[Component, ...]
    weights: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "components", tuple(self.components))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))
        if len(self.components) < 1:
            raise ValueError("mixture needs at least one component")
        if len(self.components) != len(self.weights):
            raise ValueError("components and weights must have equal length")
        if any(w < 0 for w in self.weights):
            raise ValueError("mixture weights must be >= 0")
        total = math.fsum(self.weights)
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"mixture weights must sum to 1, got {total}")

    @classmethod
    def equal_weights(cls, components) -> "MixtureDistribution":
        components = tuple(components)
        z = len(components)
        return cls(components, tuple([1.0 / z] * z))

    def sample(self, rng: np.random.Generator) -> float:
        idx = rng.choice(len(self.components), p=self.weights)
        return float(self.components[idx].sample(rng))

    def sample_batch(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Vectorized draw: pick components by weight, then sample each group."""
        idx = rng.choice(len(self.components), size=size, p=self.weights)
        out = np.empty(size)
        for j, comp in enumerate(self.components):
            mask = idx == j
            m = int(mask.sum())
            if m:
                out[mask] = comp.sample(rng, size=m)
        return out

    def pdf(self, x) -> np.ndarray | float:
        x = np.asarray(x, dtype=float)
        total = np.zeros_like(x)
        for w, comp in zip(self.weights, self.components):
            if w > 0:
                total = total + w * comp.pdf(x)
        return total if total.ndim else float(total)

    def cdf(self, x) -> float:
        return math.fsum(
            w * float(comp.cdf(x))
            for w, comp in zip(self.weights, self.components)
            if w > 0
        )

    def to_dict(self) -> dict:
        return {
            "components": [component_to_dict(c) for c in self.components],
            "weights": list(self.weights),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MixtureDistribution":
        return cls(
            tuple(component_from_dict(c) for c in data["components"]),
            tuple(data["weights"]),
        )


@dataclass(frozen=True)
class ObservableWindow:
    """Two disjoint observable intervals [lo1, hi1] and [lo2, hi2].

    Values between hi1 and lo2 are never observed during data generation;
    that gap is the interpolatory out-of-distribution region of the feature.
    """

    lo1: float
    hi1: float
    lo2: float
    hi2: float

    def __post_init__(self):
        if not (self.lo1 < self.hi1 < self.lo2 < self.hi2):
            raise ValueError(
                "window bounds must satisfy lo1 < hi1 < lo2 < hi2, got "
                f"({self.lo1}, {self.hi1}, {self.lo2}, {self.hi2})"
            )

    def contains(self, x) -> np.ndarray | bool:
        x = np.asarray(x)
        inside = ((x >= self.lo1) & (x <= self.hi1)) | (
            (x >= self.lo2) & (x <= self.hi2)
        )
        return inside if inside.ndim else bool(inside)

    @property
    def gap_width(self) -> float:
        return self.lo2 - self.hi1

    @property
    def span(self) -> float:
        return self.hi2 - self.lo1

    def as_list(self) -> list[float]:
        return [self.lo1, self.hi1, self.lo2, self.hi2]


def sample_mixture(mix: MixtureDistribution, rng: np.random.Generator) -> float:
    """Draw one value from the mixture."""
    return mix.sample(rng)


def mixture_pdf(mix: MixtureDistribution, x) -> np.ndarray | float:
    """Density of the mixture at x (weighted sum of component densities)."""
    return mix.pdf(x)


def sample_truncated(
    mix,
    win: ObservableWindow,
    rng: np.random.Generator,
    max_rejections: int = DEFAULT_MAX_REJECTIONS,
) -> float:
    """Rejection-sample the mixture until a draw lands inside the window.

    Raises RejectionBudgetExceeded after ``max_rejections`` consecutive
    rejected draws, which signals that the window carries negligible
    probability mass under the mixture.
    """
    for _ in range(max_rejections):
        c = mix.sample(rng)
        if win.contains(c):
            return float(c)
    raise RejectionBudgetExceeded(
        f"no draw accepted by window {win.as_list()} in {max_rejections} attempts"
    )


def sample_truncated_batch(
    mix: MixtureDistribution,
    win: ObservableWindow,
    rng: np.random.Generator,
    size: int,
    max_rejections: int = DEFAULT_MAX_REJECTIONS,
) -> np.ndarray:
    """Collect ``size`` accepted draws using batched rejection sampling."""
    out = np.empty(size)
    filled = 0
    consecutive_rejects = 0
    while filled < size:
        want = size - filled
        batch = mix.sample_batch(rng, max(64, min(4 * want, 65536)))
        accepted = batch[win.contains(batch)]
        if accepted.size == 0:
            consecutive_rejects += batch.size
            if consecutive_rejects >= max_rejections:
                raise RejectionBudgetExceeded(
                    f"no draw accepted by window {win.as_list()} in "
                    f"{consecutive_rejects} attempts"
                )
            continue
        consecutive_rejects = 0
        take = min(want, accepted.size)
        out[filled : filled + take] = accepted[:take]
        filled += take
    return out


def window_mass(mix: MixtureDistribution, win: ObservableWindow) -> float:
    """Probability that a mixture draw lands inside the window (exact, via CDFs)."""
    return (
        mix.cdf(win.hi1)
        - mix.cdf(win.lo1)
        + mix.cdf(win.hi2)
        - mix.cdf(win.lo2)
    )

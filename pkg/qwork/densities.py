import math
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np
from scipy.stats import norm

MAX_CLOSED_FORM_MOMENT = 4


def _check_order(k: int, limit: Optional[int] = None):
    if isinstance(k, bool) or not isinstance(k, (int, np.integer)) or k < 1:
        raise ValueError(f"moment order must be a positive integer, got {k!r}")
    if limit is not None and k > limit:
        raise ValueError(f"closed-form moments stop at order {limit}, got {k}")


@dataclass(frozen=True)
class GaussianDensity:
    center: float
    width: float

    def __post_init__(self):
        if not math.isfinite(self.center):
            raise ValueError(f"center must be finite, got {self.center}")
        if not self.width > 0 or not math.isfinite(self.width):
            raise ValueError(f"width must be positive and finite, got {self.width}")

    @property
    def mean(self) -> float:
        return self.center

    @property
    def std(self) -> float:
        return self.width

    def pdf(self, x):
        return norm.pdf(x, loc=self.center, scale=self.width)

    def cdf(self, x):
        return norm.cdf(x, loc=self.center, scale=self.width)

    def moment(self, k: int) -> float:
        _check_order(k, MAX_CLOSED_FORM_MOMENT)
        mu, s2 = self.center, self.width ** 2
        return [
            mu,
            mu ** 2 + s2,
            mu ** 3 + 3 * mu * s2,
            mu ** 4 + 6 * mu ** 2 * s2 + 3 * s2 ** 2,
        ][k - 1]


@dataclass(frozen=True)
class PointMass:
    """Zero-width limit of a Gaussian; every draw equals center."""
    center: float

    @property
    def width(self) -> float:
        return 0.0

    @property
    def mean(self) -> float:
        return self.center

    @property
    def std(self) -> float:
        return 0.0

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x == self.center, np.inf, 0.0)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.where(x >= self.center, 1.0, 0.0)

    def moment(self, k: int) -> float:
        _check_order(k)
        return self.center ** k


@dataclass(frozen=True, eq=False)
class DiscreteDistribution:
    values: np.ndarray
    probabilities: np.ndarray

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).ravel()
        p = np.asarray(self.probabilities, dtype=float).ravel()
        if v.shape != p.shape:
            raise ValueError(f"{len(v)} values but {len(p)} probabilities")
        if np.any(p < 0):
            raise ValueError("probabilities must be non-negative")
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "probabilities", p)

    @property
    def total(self) -> float:
        return float(np.sum(self.probabilities))

    @property
    def mean(self) -> float:
        return self.moment(1)

    @property
    def std(self) -> float:
        return float(np.sqrt(max(self.moment(2) - self.mean ** 2, 0.0)))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return np.sum(self.probabilities * (self.values <= x[..., None]), axis=-1)

    def moment(self, k: int) -> float:
        _check_order(k)
        return float(np.sum(self.probabilities * self.values ** k))


Density = Union[GaussianDensity, PointMass, DiscreteDistribution]


def gaussian_or_point(center: float, width: float) -> Union[GaussianDensity, PointMass]:
    if width == 0.0:
        return PointMass(float(center))
    return GaussianDensity(float(center), float(width))

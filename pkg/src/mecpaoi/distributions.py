"""Positive random variables used for transmission and computation times."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple, Sequence, Union

import numpy as np

from .numerics import DEFAULT_REL_TOL, integrate


class TransformPair(NamedTuple):
    """``laplace = E[exp(-mu X)]`` and ``weighted_laplace = E[X exp(-mu X)]``."""

    laplace: float
    weighted_laplace: float


def rng_stream(seed: int, stream_id: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by ``(seed, stream_id)``.

    Distinct stream ids never overlap, so sweep cells and per-variable
    substreams stay independent and reproducible.
    """
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(stream_id),))
    return np.random.Generator(np.random.Philox(ss))


def _out(x, arr):
    return float(arr) if np.ndim(x) == 0 else arr


class _Base:
    kind = ""

    # overridden: pdf, cdf, mean, quantile, excess_mean, partial_mean,
    # support_lo, breakpoints, to_json, scaled

    def expected_min(self, s: float) -> float:
        """``E[min(s, X)]``; ``s`` may be ``inf``."""
        if math.isinf(s):
            return self.mean
        if s <= 0:
            return 0.0
        return self.mean - self.excess_mean(s)

    def sample(self, rng: np.random.Generator) -> float:
        return float(self.sample_array(rng, 1)[0])

    def sample_array(self, rng: np.random.Generator, n: int) -> np.ndarray:
        # 1 - U lies in (0, 1], keeps log/power transforms finite
        return self._from_uniform(1.0 - rng.random(n))

    def expect(
        self,
        fn: Callable[[float], float],
        rel_tol: float = DEFAULT_REL_TOL,
        points: Sequence[float] = (),
    ) -> float:
        """``E[fn(X)]`` by quadrature against the density."""
        lo = self.support_lo
        pts = [p for p in (*points, *self.breakpoints()) if p > lo]
        dens = self._pdf1
        return integrate(lambda x: fn(x) * dens(x), lo, math.inf, rel_tol, pts)

    def transforms(self, mu: float, rel_tol: float = 1e-10) -> TransformPair:
        if mu <= 0:
            raise ValueError("mu must be positive")
        lap = self.expect(lambda x: math.exp(-mu * x), rel_tol)
        wl = self.expect(lambda x: x * math.exp(-mu * x), rel_tol)
        return TransformPair(lap, wl)


@dataclass(frozen=True)
class Exponential(_Base):
    rate: float
    kind = "exponential"

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValueError(f"exponential rate must be positive, got {self.rate}")

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def support_lo(self):
        return 0.0

    def breakpoints(self):
        return ()

    def _pdf1(self, x):
        return self.rate * math.exp(-self.rate * x) if x > 0 else 0.0

    def _cdf1(self, x):
        return -math.expm1(-self.rate * x) if x > 0 else 0.0

    def pdf(self, x):
        if np.ndim(x) == 0:
            return self._pdf1(float(x))
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            v = np.where(x > 0, self.rate * np.exp(-self.rate * np.maximum(x, 0.0)), 0.0)
        return _out(x, v)

    def cdf(self, x):
        if np.ndim(x) == 0:
            return self._cdf1(float(x))
        x = np.asarray(x, dtype=float)
        v = np.where(x > 0, -np.expm1(-self.rate * np.maximum(x, 0.0)), 0.0)
        return _out(x, v)

    def quantile(self, p):
        return -math.log1p(-p) / self.rate

    def _from_uniform(self, u):
        return -np.log(u) / self.rate

    def excess_mean(self, s):
        if s <= 0:
            return self.mean - s
        return math.exp(-self.rate * s) / self.rate

    def partial_mean(self, u):
        """``E[X 1{X <= u}]``."""
        if u <= 0:
            return 0.0
        if math.isinf(u):
            return self.mean
        return (-math.expm1(-self.rate * u) - self.rate * u * math.exp(-self.rate * u)) / self.rate

    def transforms(self, mu, rel_tol=1e-10):
        if mu <= 0:
            raise ValueError("mu must be positive")
        r = self.rate / (self.rate + mu)
        return TransformPair(r, r / (self.rate + mu))

    def scaled(self, s):
        return Exponential(self.rate / s)

    def to_json(self):
        return {"kind": self.kind, "rate": self.rate}


@dataclass(frozen=True)
class Pareto(_Base):
    xm: float
    alpha: float
    kind = "pareto"

    def __post_init__(self):
        if not (self.xm > 0 and math.isfinite(self.xm)):
            raise ValueError(f"pareto scale must be positive, got {self.xm}")
        if not (self.alpha > 1 and math.isfinite(self.alpha)):
            raise ValueError(f"pareto shape must exceed 1 for a finite mean, got {self.alpha}")

    @classmethod
    def from_mean(cls, mean, alpha=2.0):
        return cls(mean * (alpha - 1.0) / alpha, alpha)

    @property
    def mean(self):
        return self.alpha * self.xm / (self.alpha - 1.0)

    @property
    def support_lo(self):
        return self.xm

    def breakpoints(self):
        return (self.xm,)

    def _pdf1(self, x):
        return self.alpha * self.xm**self.alpha / x ** (self.alpha + 1) if x >= self.xm else 0.0

    def _cdf1(self, x):
        return 1.0 - (self.xm / x) ** self.alpha if x >= self.xm else 0.0

    def pdf(self, x):
        if np.ndim(x) == 0:
            return self._pdf1(float(x))
        x = np.asarray(x, dtype=float)
        safe = np.maximum(x, self.xm)
        v = np.where(x >= self.xm, self.alpha * self.xm**self.alpha / safe ** (self.alpha + 1), 0.0)
        return _out(x, v)

    def cdf(self, x):
        if np.ndim(x) == 0:
            return self._cdf1(float(x))
        x = np.asarray(x, dtype=float)
        safe = np.maximum(x, self.xm)
        v = np.where(x >= self.xm, -np.expm1(self.alpha * np.log(self.xm / safe)), 0.0)
        return _out(x, v)

    def quantile(self, p):
        return self.xm * (1.0 - p) ** (-1.0 / self.alpha)

    def _from_uniform(self, u):
        return self.xm * u ** (-1.0 / self.alpha)

    def excess_mean(self, s):
        if s <= self.xm:
            return self.mean - s
        return self.xm**self.alpha * s ** (1.0 - self.alpha) / (self.alpha - 1.0)

    def partial_mean(self, u):
        if u < self.xm:
            return 0.0
        if math.isinf(u):
            return self.mean
        return self.mean * (1.0 - (self.xm / u) ** (self.alpha - 1.0))

    def scaled(self, s):
        return Pareto(self.xm * s, self.alpha)

    def to_json(self):
        return {"kind": self.kind, "xm": self.xm, "alpha": self.alpha}


@dataclass(frozen=True)
class Deterministic(_Base):
    value: float
    kind = "deterministic"

    def __post_init__(self):
        if not (self.value > 0 and math.isfinite(self.value)):
            raise ValueError(f"deterministic value must be positive, got {self.value}")

    @property
    def mean(self):
        return self.value

    @property
    def support_lo(self):
        return self.value

    def breakpoints(self):
        return (self.value,)

    def _pdf1(self, x):
        return 0.0

    def _cdf1(self, x):
        return 1.0 if x >= self.value else 0.0

    def pdf(self, x):
        # a point mass has no density; expectations go through ``expect``
        x = np.asarray(x, dtype=float)
        return _out(x, np.zeros_like(x))

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        return _out(x, np.where(x >= self.value, 1.0, 0.0))

    def quantile(self, p):
        return self.value

    def _from_uniform(self, u):
        return np.full(np.shape(u), self.value)

    def excess_mean(self, s):
        return max(self.value - s, 0.0)

    def partial_mean(self, u):
        return self.value if self.value <= u else 0.0

    def expect(self, fn, rel_tol=DEFAULT_REL_TOL, points=()):
        return float(fn(self.value))

    def transforms(self, mu, rel_tol=1e-10):
        if mu <= 0:
            raise ValueError("mu must be positive")
        e = math.exp(-mu * self.value)
        return TransformPair(e, self.value * e)

    def scaled(self, s):
        return Deterministic(self.value * s)

    def to_json(self):
        return {"kind": self.kind, "value": self.value}


DistributionSpec = Union[Exponential, Pareto, Deterministic]


def from_json(obj: dict) -> DistributionSpec:
    """Build a distribution from its JSON encoding.

    >>> from_json({"kind": "pareto", "xm": 0.25, "alpha": 2.0}).mean
    0.5
    """
    kind = obj.get("kind")
    try:
        if kind == "exponential":
            return Exponential(float(obj["rate"]))
        if kind == "pareto":
            return Pareto(float(obj["xm"]), float(obj["alpha"]))
        if kind == "deterministic":
            return Deterministic(float(obj["value"]))
    except KeyError as exc:
        raise ValueError(f"{kind} distribution is missing field {exc}") from None
    raise ValueError(f"unknown distribution kind {kind!r}")


def with_mean(kind: str, mean: float, alpha: float = 2.0) -> DistributionSpec:
    """Distribution of the given kind whose mean is ``mean``."""
    if kind == "exponential":
        return Exponential(1.0 / mean)
    if kind == "pareto":
        return Pareto.from_mean(mean, alpha)
    if kind == "deterministic":
        return Deterministic(mean)
    raise ValueError(f"unknown distribution kind {kind!r}")

"""Nonnegative loss distributions.

Every model exposes the same small surface: ``cdf``, ``sf``, the lower
quantile ``quantile``, its upper-tail twin ``isf`` (quantile at ``1 - x``
without the cancellation), the integrated quantile
``integrated_quantile(t) = int_0^t quantile(s) ds`` and ``support``.
All methods accept scalars or numpy arrays.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from .errors import DomainError, ValidationError

#: Default tail probability beyond which loss-axis grids are cut.
TAIL_EPS = 1e-10

MERGE_TOL = 1e-12
WEIGHT_TOL = 1e-12


def _apply(x, func):
    arr = np.asarray(x, dtype=float)
    out = func(np.atleast_1d(arr))
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def _check_levels(p):
    if isinstance(p, float):
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"probability level outside [0, 1]: {p!r}")
        return
    arr = np.asarray(p, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
        raise DomainError(f"probability level outside [0, 1]: {p!r}")


class LossDistribution:
    """Base class for the law of a nonnegative loss ``X0``."""

    def cdf(self, x):
        raise NotImplementedError

    def sf(self, x):
        """Survival ``1 - cdf``; exact complement of :meth:`cdf`."""
        return _apply(x, lambda a: 1.0 - np.asarray(self.cdf(a)))

    def upper_tail(self, x):
        """``P(X > x)`` computed without cancellation in the far tail."""
        return self.sf(x)

    def quantile(self, p):
        """Lower quantile ``inf{x : F(x) >= p}``; ``quantile(1)`` is the essential sup."""
        _check_levels(p)
        return _apply(p, self._quantile)

    def isf(self, x):
        """Lower quantile at level ``1 - x``, accurate for tiny ``x``."""
        _check_levels(x)
        return _apply(x, self._isf)

    def integrated_quantile(self, t):
        _check_levels(t)
        return _apply(t, self._integrated_quantile)

    def mean(self) -> float:
        return float(self.integrated_quantile(1.0))

    def support(self) -> tuple[float, float]:
        raise NotImplementedError

    def kink_levels(self) -> tuple[float, ...]:
        """Probability levels in (0, 1) where the quantile is not smooth."""
        return ()

    def tail_point(self, tail_eps: float = TAIL_EPS) -> float:
        """Right end of the loss axis used by grids: the support end if finite."""
        hi = self.support()[1]
        if math.isfinite(hi):
            return hi
        return float(self.isf(tail_eps))

    # subclasses implement these on 1-d arrays
    def _quantile(self, p):
        raise NotImplementedError

    def _isf(self, x):
        return self._quantile(1.0 - x)

    def _integrated_quantile(self, t):
        raise NotImplementedError


@dataclass(frozen=True)
class Exponential(LossDistribution):
    rate: float = 1.0

    def __post_init__(self):
        if not (self.rate > 0 and math.isfinite(self.rate)):
            raise ValidationError(f"exponential rate must be positive, got {self.rate}")

    def cdf(self, x):
        return _apply(x, lambda a: np.where(a > 0, -np.expm1(-self.rate * np.maximum(a, 0.0)), 0.0))

    def upper_tail(self, x):
        return _apply(x, lambda a: np.where(a > 0, np.exp(-self.rate * np.maximum(a, 0.0)), 1.0))

    def _quantile(self, p):
        with np.errstate(divide="ignore"):
            return -np.log1p(-p) / self.rate

    def _isf(self, x):
        with np.errstate(divide="ignore"):
            return -np.log(x) / self.rate

    def _integrated_quantile(self, t):
        with np.errstate(divide="ignore", invalid="ignore"):
            tail = np.where(t < 1.0, (1.0 - t) * np.log1p(-t), 0.0)
        return (t + tail) / self.rate

    def support(self):
        return (0.0, math.inf)


@dataclass(frozen=True)
class Lognormal(LossDistribution):
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not (self.sigma > 0 and math.isfinite(self.sigma)):
            raise ValidationError(f"lognormal scale must be positive, got {self.sigma}")

    def cdf(self, x):
        def f(a):
            with np.errstate(divide="ignore"):
                z = (np.log(np.maximum(a, 0.0)) - self.mu) / self.sigma
            return np.where(a > 0, ndtr(z), 0.0)

        return _apply(x, f)

    def upper_tail(self, x):
        def f(a):
            with np.errstate(divide="ignore"):
                z = (np.log(np.maximum(a, 0.0)) - self.mu) / self.sigma
            return np.where(a > 0, ndtr(-z), 1.0)

        return _apply(x, f)

    def _quantile(self, p):
        with np.errstate(over="ignore"):
            return np.exp(self.mu + self.sigma * ndtri(p))

    def _isf(self, x):
        with np.errstate(over="ignore"):
            return np.exp(self.mu - self.sigma * ndtri(x))

    def _integrated_quantile(self, t):
        return math.exp(self.mu + 0.5 * self.sigma**2) * ndtr(ndtri(t) - self.sigma)

    def support(self):
        return (0.0, math.inf)


@dataclass(frozen=True)
class Uniform(LossDistribution):
    lo: float = 0.0
    hi: float = 1.0

    def __post_init__(self):
        if not (0.0 <= self.lo < self.hi and math.isfinite(self.hi)):
            raise ValidationError(f"uniform needs 0 <= lo < hi, got ({self.lo}, {self.hi})")

    def cdf(self, x):
        return _apply(x, lambda a: np.clip((a - self.lo) / (self.hi - self.lo), 0.0, 1.0))

    def upper_tail(self, x):
        return _apply(x, lambda a: np.clip((self.hi - a) / (self.hi - self.lo), 0.0, 1.0))

    def _quantile(self, p):
        return self.lo + (self.hi - self.lo) * p

    def _isf(self, x):
        return self.hi - (self.hi - self.lo) * x

    def _integrated_quantile(self, t):
        return self.lo * t + 0.5 * (self.hi - self.lo) * t * t

    def support(self):
        return (self.lo, self.hi)


class Empirical(LossDistribution):
    """Finitely many atoms ``(value, weight)``; atoms closer than 1e-12 are merged."""

    def __init__(self, points):
        pts = sorted((float(v), float(w)) for v, w in points)
        if not pts:
            raise ValidationError("empirical distribution needs at least one atom")
        values: list[float] = []
        weights: list[float] = []
        for v, w in pts:
            if not math.isfinite(v) or v < 0:
                raise ValidationError(f"atoms must be finite and nonnegative, got {v}")
            if not (w >= 0 and math.isfinite(w)):
                raise ValidationError(f"atom weights must be nonnegative, got {w}")
            if w == 0:
                continue
            if values and v - values[-1] <= MERGE_TOL:
                weights[-1] += w
            else:
                values.append(v)
                weights.append(w)
        total = math.fsum(weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise ValidationError(f"atom weights sum to {total!r}, expected 1")
        self.values = np.array(values)
        self.weights = np.array(weights)
        cum = np.cumsum(self.weights)
        cum[-1] = 1.0
        self.cum = np.minimum(cum, 1.0)
        # partial first moments: sum_{k<j} x_k w_k
        self._partial = np.concatenate([[0.0], np.cumsum(self.values * self.weights)])
        for a in (self.values, self.weights, self.cum, self._partial):
            a.setflags(write=False)

    @property
    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.values.tolist(), self.weights.tolist()))

    def __len__(self):
        return len(self.values)

    def __repr__(self):
        return f"Empirical({self.points!r})"

    def __eq__(self, other):
        return (
            isinstance(other, Empirical)
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.weights, other.weights)
        )

    def __hash__(self):
        return hash((self.values.tobytes(), self.weights.tobytes()))

    def cdf(self, x):
        def f(a):
            idx = np.searchsorted(self.values, a, side="right") - 1
            return np.where(idx >= 0, self.cum[np.maximum(idx, 0)], 0.0)

        return _apply(x, f)

    def _index(self, p):
        return np.minimum(np.searchsorted(self.cum, p, side="left"), len(self.values) - 1)

    def _quantile(self, p):
        return self.values[self._index(p)]

    def _integrated_quantile(self, t):
        j = self._index(t)
        prev = np.where(j > 0, self.cum[np.maximum(j - 1, 0)], 0.0)
        return self._partial[j] + self.values[j] * (t - prev)

    def mean(self):
        return math.fsum((self.values * self.weights).tolist())

    def support(self):
        return (float(self.values[0]), float(self.values[-1]))

    def kink_levels(self):
        return tuple(self.cum[:-1].tolist())


@dataclass(frozen=True)
class Truncated(LossDistribution):
    """Law of ``min(X, cap)``."""

    inner: LossDistribution
    cap: float

    def __post_init__(self):
        if not self.cap > 0:
            raise DomainError(f"truncation cap must be positive, got {self.cap}")

    @property
    def _cap_level(self) -> float:
        return float(self.inner.cdf(self.cap))

    def cdf(self, x):
        return _apply(x, lambda a: np.where(a < self.cap, self.inner.cdf(a), 1.0))

    def upper_tail(self, x):
        return _apply(x, lambda a: np.where(a < self.cap, self.inner.upper_tail(a), 0.0))

    def _quantile(self, p):
        return np.minimum(self.inner.quantile(p), self.cap)

    def _isf(self, x):
        return np.minimum(self.inner.isf(x), self.cap)

    def _integrated_quantile(self, t):
        fn = self._cap_level
        return self.inner.integrated_quantile(np.minimum(t, fn)) + self.cap * np.maximum(t - fn, 0.0)

    def support(self):
        lo, hi = self.inner.support()
        return (min(lo, self.cap), min(hi, self.cap))

    def kink_levels(self):
        fn = self._cap_level
        levels = [t for t in self.inner.kink_levels() if t < fn]
        if 0.0 < fn < 1.0:
            levels.append(fn)
        return tuple(levels)


def truncate(d: LossDistribution, n: float) -> LossDistribution:
    """Distribution of ``min(X, n)``."""
    if not n > 0:
        raise DomainError(f"truncation cap must be positive, got {n}")
    if isinstance(d, Empirical):
        return Empirical([(min(v, n), w) for v, w in d.points])
    return Truncated(d, float(n))


def discretize(d: LossDistribution, n_points: int, p_max: float = 1.0) -> Empirical:
    """Midpoint-quantile discretization on ``n_points`` levels below ``p_max``.

    The residual tail mass ``1 - p_max`` sits on a terminal atom at
    ``quantile(p_max)``.
    """
    if n_points < 2:
        raise DomainError("discretize needs at least two points")
    if not 0.0 < p_max <= 1.0:
        raise DomainError(f"p_max must lie in (0, 1], got {p_max}")
    levels = (np.arange(n_points) + 0.5) / n_points * p_max
    atoms = np.asarray(d.quantile(levels))
    weights = np.full(n_points, p_max / n_points)
    points = list(zip(atoms.tolist(), weights.tolist()))
    if p_max < 1.0:
        points.append((float(d.quantile(p_max)), 1.0 - p_max))
    total = math.fsum(w for _, w in points)
    return Empirical([(v, w / total) for v, w in points])


def point_mass(value: float = 0.0) -> Empirical:
    return Empirical([(value, 1.0)])


def from_spec(spec: dict) -> LossDistribution:
    """Build a distribution from a tagged config record."""
    try:
        kind = spec["kind"].lower()
        if kind == "exponential":
            return Exponential(float(spec.get("rate", 1.0)))
        if kind == "lognormal":
            return Lognormal(float(spec.get("mu", 0.0)), float(spec.get("sigma", 1.0)))
        if kind == "uniform":
            return Uniform(float(spec.get("lo", 0.0)), float(spec.get("hi", 1.0)))
        if kind == "empirical":
            return Empirical([(float(v), float(w)) for v, w in spec["points"]])
        if kind in ("truncated", "capped"):
            return truncate(from_spec(spec["inner"]), float(spec["cap"]))
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValidationError(f"malformed loss spec {spec!r}: {exc}") from exc
    raise ValidationError(f"unknown loss kind {spec.get('kind')!r}")


def to_spec(d: LossDistribution) -> dict:
    if isinstance(d, Exponential):
        return {"kind": "exponential", "rate": d.rate}
    if isinstance(d, Lognormal):
        return {"kind": "lognormal", "mu": d.mu, "sigma": d.sigma}
    if isinstance(d, Uniform):
        return {"kind": "uniform", "lo": d.lo, "hi": d.hi}
    if isinstance(d, Empirical):
        return {"kind": "empirical", "points": [list(p) for p in d.points]}
    if isinstance(d, Truncated):
        return {"kind": "truncated", "inner": to_spec(d.inner), "cap": d.cap}
    return {"kind": type(d).__name__.lower()}

"""Distortion functions and the risk functionals they induce.

A distortion ``Pi`` is treated as a probability distribution function on
``[0, 1]``: right-continuous, ``Pi(0) = 0``, ``Pi(1) = 1``.  Its Stieltjes
measure splits into point masses, piecewise-constant density segments and
(for Wang and proportional-hazard distortions) a smooth density.  The dual
form ``g(x) = 1 - Pi(1 - x)`` acts on survival probabilities.
"""
from __future__ import annotations

import dataclasses
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import ndtr, ndtri

from .dist_model import Empirical, LossDistribution, _apply, _check_levels, truncate
from .errors import DivergenceError, DomainError, ValidationError

QUAD_EPSREL = 1e-11
_QUAD_LIMIT = 200
# decades of tail probability scanned before a tail is declared divergent
_MAX_DECADES = 300


class Distortion:
    """Base class.  Subclasses provide ``_pi`` on numpy arrays."""

    #: name of the parameter a sweep axis overrides
    parameter: str | None = None

    def pi(self, t):
        """``Pi(t)``, right-continuous at atoms."""
        _check_levels(t)
        return _apply(t, self._pi)

    __call__ = pi

    def g(self, x):
        """Dual distortion ``g(x) = 1 - Pi(1 - x)`` on survival probabilities."""
        _check_levels(x)
        return _apply(x, self._g)

    def _pi(self, t):
        raise NotImplementedError

    def _g(self, x):
        return 1.0 - self._pi(1.0 - x)

    def atoms(self) -> list[tuple[float, float]]:
        """Point masses ``(location, mass)`` of ``dPi``."""
        return []

    def segments(self) -> list[tuple[float, float, float]]:
        """Constant-density pieces ``(a, b, density)`` of ``dPi``."""
        return []

    def smooth_density(self, t: float, x: float) -> float:
        """Density of the smooth part at level ``t`` (``x = 1 - t`` passed for accuracy)."""
        return 0.0

    has_smooth_part = False

    def kinks(self) -> tuple[float, ...]:
        """Levels in (0, 1) where ``Pi`` is not smooth."""
        return tuple(sorted({t for t, _ in self.atoms()} | {
            e for a, b, _ in self.segments() for e in (a, b) if 0.0 < e < 1.0
        }))

    def total_mass(self) -> float:
        """Mass of the decomposition; equals 1 for a valid distortion."""
        mass = math.fsum(m for _, m in self.atoms())
        mass += math.fsum((b - a) * dens for a, b, dens in self.segments())
        if self.has_smooth_part:
            mass += _smooth_integral(lambda t: 1.0, lambda x: 1.0, self, ())
        return mass

    @property
    def strictly_increasing(self) -> bool:
        return False


@dataclass(frozen=True)
class ExpectedValue(Distortion):
    def _pi(self, t):
        return np.asarray(t, dtype=float)

    def _g(self, x):
        return np.asarray(x, dtype=float)

    def segments(self):
        return [(0.0, 1.0, 1.0)]

    @property
    def strictly_increasing(self):
        return True


@dataclass(frozen=True)
class VaRStep(Distortion):
    """``Pi = 1_[alpha, 1]``: the risk value is the lower ``alpha``-quantile."""

    alpha: float
    parameter = "alpha"

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"VaR level must lie in (0, 1), got {self.alpha}")

    def _pi(self, t):
        return np.where(t >= self.alpha, 1.0, 0.0)

    def _g(self, x):
        return np.where(x > 1.0 - self.alpha, 1.0, 0.0)

    def atoms(self):
        return [(self.alpha, 1.0)]


@dataclass(frozen=True)
class CVaRRamp(Distortion):
    """``Pi(t) = (t - alpha)^+ / (1 - alpha)``."""

    alpha: float
    parameter = "alpha"

    def __post_init__(self):
        if not 0.0 <= self.alpha < 1.0:
            raise ValidationError(f"CVaR level must lie in [0, 1), got {self.alpha}")

    def _pi(self, t):
        return np.maximum(t - self.alpha, 0.0) / (1.0 - self.alpha)

    def _g(self, x):
        return np.minimum(x / (1.0 - self.alpha), 1.0)

    def segments(self):
        return [(self.alpha, 1.0, 1.0 / (1.0 - self.alpha))]

    @property
    def strictly_increasing(self):
        return self.alpha == 0.0


def _probit_pair(t: float, x: float) -> float:
    """``Phi^{-1}(t)`` evaluated from whichever of ``t`` or ``x = 1 - t`` is smaller."""
    return -float(ndtri(x)) if x < 0.5 else float(ndtri(t))


@dataclass(frozen=True)
class Wang(Distortion):
    """Wang transform ``g(x) = Phi(Phi^{-1}(x) + beta)``; ``Pi(t) = Phi(Phi^{-1}(t) - beta)``."""

    beta: float
    parameter = "beta"
    has_smooth_part = True

    def _pi(self, t):
        return ndtr(ndtri(t) - self.beta)

    def _g(self, x):
        return ndtr(ndtri(x) + self.beta)

    def smooth_density(self, t, x):
        z = _probit_pair(t, x)
        return math.exp(self.beta * z - 0.5 * self.beta**2)

    @property
    def strictly_increasing(self):
        return True


@dataclass(frozen=True)
class ProportionalHazard(Distortion):
    """``g(x) = x**c`` with ``0 < c <= 1``."""

    c: float
    parameter = "c"
    has_smooth_part = True

    def __post_init__(self):
        if not 0.0 < self.c <= 1.0:
            raise ValidationError(f"proportional-hazard exponent must lie in (0, 1], got {self.c}")

    def _pi(self, t):
        return 1.0 - np.power(1.0 - t, self.c)

    def _g(self, x):
        return np.power(x, self.c)

    def smooth_density(self, t, x):
        if x <= 0.0:
            return math.inf if self.c < 1 else 1.0
        return self.c * x ** (self.c - 1.0)

    @property
    def strictly_increasing(self):
        return True


@dataclass(frozen=True)
class PiecewiseLinear(Distortion):
    """Linear interpolation of ``(t, Pi(t))`` knots from ``(0, 0)`` to ``(1, 1)``."""

    knots: tuple[tuple[float, float], ...]

    def __post_init__(self):
        knots = tuple((float(t), float(v)) for t, v in self.knots)
        object.__setattr__(self, "knots", knots)
        if len(knots) < 2 or knots[0] != (0.0, 0.0) or knots[-1] != (1.0, 1.0):
            raise ValidationError("piecewise distortion must run from (0, 0) to (1, 1)")
        for (t0, v0), (t1, v1) in zip(knots, knots[1:]):
            if not t1 > t0:
                raise ValidationError("piecewise knots must have strictly increasing t")
            if v1 < v0:
                raise ValidationError("piecewise distortion must be nondecreasing")

    def _pi(self, t):
        ts, vs = zip(*self.knots)
        return np.interp(t, ts, vs)

    def segments(self):
        return [
            (t0, t1, (v1 - v0) / (t1 - t0))
            for (t0, v0), (t1, v1) in zip(self.knots, self.knots[1:])
            if v1 > v0
        ]

    @property
    def strictly_increasing(self):
        return all(v1 > v0 for (_, v0), (_, v1) in zip(self.knots, self.knots[1:]))


class FromG(Distortion):
    """Distortion given only through its dual ``g``.

    No decomposition is known, so continuous risk values go through the
    survival-form integral.
    """

    def __init__(self, g: Callable[[float], float]):
        self._gfunc = g

    def _g(self, x):
        return np.array([float(self._gfunc(float(v))) for v in np.atleast_1d(x)])

    def _pi(self, t):
        return 1.0 - self._g(1.0 - t)

    def kinks(self):
        return ()

    def total_mass(self):
        return float(self.pi(1.0) - self.pi(0.0))

    @property
    def strictly_increasing(self):
        grid = np.linspace(0.0, 1.0, 1001)
        return bool(np.all(np.diff(self.pi(grid)) > 0))


def to_g(distortion: Distortion) -> Callable[[float], float]:
    """The dual distortion as a plain function ``g(x) = 1 - Pi(1 - x)``."""
    if isinstance(distortion, FromG):
        return distortion._gfunc
    return distortion.g


def from_g(g: Callable[[float], float]) -> Distortion:
    if abs(float(g(0.0))) > 1e-12 or abs(float(g(1.0)) - 1.0) > 1e-12:
        raise ValidationError("g must satisfy g(0) = 0 and g(1) = 1")
    return FromG(g)


def is_convex(distortion: Distortion, n_grid: int = 2001, tol: float = 1e-10) -> bool:
    """Grid check of convexity of ``Pi`` via second differences."""
    t = np.linspace(0.0, 1.0, n_grid)
    second = np.diff(np.asarray(distortion.pi(t)), 2)
    return bool(np.all(second >= -tol))


@dataclass(frozen=True)
class RiskFunctional:
    """A distortion tagged as a risk measure or a premium; the tag is metadata."""

    distortion: Distortion
    role: str = "measure"

    def __post_init__(self):
        if self.role not in ("measure", "premium"):
            raise ValidationError(f"role must be 'measure' or 'premium', got {self.role!r}")

    def __call__(self, d: LossDistribution) -> float:
        return risk_value(self, d)


def _distortion_of(functional) -> Distortion:
    if isinstance(functional, RiskFunctional):
        return functional.distortion
    if isinstance(functional, Distortion):
        return functional
    raise TypeError(f"expected a RiskFunctional or Distortion, got {type(functional).__name__}")


def _quad(func, a, b, points=()):
    pts = [p for p in points if a < p < b]
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            val, _ = integrate.quad(
                func, a, b, points=pts or None, epsabs=0.0, epsrel=QUAD_EPSREL, limit=_QUAD_LIMIT
            )
        except integrate.IntegrationWarning:
            # roundoff-limited panels still return the best estimate
            warnings.simplefilter("ignore", integrate.IntegrationWarning)
            val, _ = integrate.quad(
                func, a, b, points=pts or None, epsabs=1e-15, epsrel=1e-9, limit=4 * _QUAD_LIMIT
            )
    return val


def _smooth_integral(qfun, tailfun, distortion, levels) -> float:
    """``int_0^1 q(t) phi(t) dt`` over decade panels at both ends of ``[0, 1]``.

    ``qfun(t)`` is used on the lower half and ``tailfun(x) = q(1 - x)`` on the
    upper half so that neither end loses precision.
    """
    dens = distortion.smooth_density

    def lower(t):
        return qfun(t) * dens(t, 1.0 - t)

    def upper(x):
        return tailfun(x) * dens(1.0 - x, x)

    lower_pts = [t for t in levels if t <= 0.5]
    upper_pts = [1.0 - t for t in levels if t > 0.5]
    total = _quad(lower, 0.1, 0.5, lower_pts) + _quad(upper, 0.1, 0.5, upper_pts)
    for panel_fn, pts in ((lower, lower_pts), (upper, upper_pts)):
        small = 0
        hi = 0.1
        for _ in range(_MAX_DECADES):
            lo = hi / 10.0
            part = _quad(panel_fn, lo, hi, pts)
            if not math.isfinite(part):
                raise DivergenceError("risk integral is not finite: quantile tail too heavy for the distortion")
            total += part
            small = small + 1 if abs(part) <= 1e-17 * max(abs(total), 1e-300) else 0
            if small >= 3:
                break
            hi = lo
        else:
            raise DivergenceError(
                "risk integral does not converge in the upper tail of the loss "
                f"(last decade contributed {part:.3e})"
            )
    return total


def _empirical_value(distortion: Distortion, d: Empirical) -> float:
    pis = np.asarray(distortion.pi(d.cum))
    jumps = np.diff(np.concatenate([[0.0], pis]))
    return math.fsum((d.values * jumps).tolist())


def risk_value(functional, d: LossDistribution) -> float:
    """Quantile-form risk value ``int_0^1 quantile(t) dPi(t)``.

    Exact on empirical laws; otherwise atoms and constant-density pieces use
    the integrated quantile and the smooth part is integrated numerically.
    """
    distortion = _distortion_of(functional)
    if isinstance(d, Empirical):
        return _empirical_value(distortion, d)
    if isinstance(distortion, FromG):
        return risk_value_survival_form(distortion, d)
    parts = [m * float(d.quantile(t)) for t, m in distortion.atoms()]
    for a, b, dens in distortion.segments():
        parts.append(dens * (float(d.integrated_quantile(b)) - float(d.integrated_quantile(a))))
    if distortion.has_smooth_part:
        parts.append(_smooth_integral(d.quantile, d.isf, distortion, d.kink_levels()))
    value = math.fsum(parts)
    if not math.isfinite(value):
        raise DivergenceError("risk value is infinite: the upper tail of the loss is too heavy")
    return value


def risk_value_survival_form(functional, d: LossDistribution) -> float:
    """Survival-form risk value ``int_0^inf g(P(X > s)) ds`` for nonnegative losses."""
    distortion = _distortion_of(functional)
    if isinstance(d, Empirical):
        surv = 1.0 - d.cum[:-1]
        widths = np.diff(d.values)
        gs = np.asarray(distortion.g(surv)) if len(surv) else np.zeros(0)
        return math.fsum([float(d.values[0])] + (widths * gs).tolist())

    lo, hi = d.support()

    def integrand(s):
        return float(distortion.g(min(max(float(d.upper_tail(s)), 0.0), 1.0)))

    levels = set(d.kink_levels()) | set(distortion.kinks())
    breaks = sorted({float(d.quantile(t)) for t in levels if 0.0 < t < 1.0})

    edges = [lo]
    for k in range(6, 0, -1):
        edges.append(float(d.quantile(10.0**-k)))
    edges.append(float(d.quantile(0.5)))
    total = lo
    edges = sorted({e for e in edges if lo <= e <= hi})
    for a, b in zip(edges, edges[1:]):
        total += _quad(integrand, a, b, breaks)
    a = edges[-1]
    if math.isfinite(hi) and a >= hi:
        return total
    small = 0
    for k in range(1, _MAX_DECADES + 1):
        with np.errstate(over="ignore"):
            b = min(float(d.isf(10.0**-k)), hi)
        if not math.isfinite(b):
            raise DivergenceError("survival integral is not finite: tail quantiles overflow")
        if b <= a:
            if b >= hi:
                break
            continue
        part = _quad(integrand, a, b, breaks)
        if not math.isfinite(part):
            raise DivergenceError("survival integral is not finite in the upper tail")
        total += part
        a = b
        if b >= hi:
            break
        small = small + 1 if abs(part) <= 1e-17 * max(abs(total), 1e-300) else 0
        if small >= 3:
            break
    else:
        raise DivergenceError("survival integral does not converge in the upper tail of the loss")
    return total


@dataclass
class RegularityReport:
    caps: list[float]
    values: list[float]
    limit_estimate: float
    converged: bool


def check_regularity(functional, d: LossDistribution, caps) -> RegularityReport:
    """Evaluate ``Lambda(min(X, n))`` along increasing caps ``n``."""
    caps = [float(c) for c in caps]
    if any(c <= 0 for c in caps) or any(b <= a for a, b in zip(caps, caps[1:])):
        raise DomainError("caps must be positive and strictly increasing")
    values = [risk_value(functional, truncate(d, c)) for c in caps]
    converged = True
    if len(values) >= 2:
        a, b = values[-2], values[-1]
        converged = abs(b - a) <= 1e-6 * max(abs(b), 1e-300)
    return RegularityReport(caps, values, values[-1], converged)


def mean(d: LossDistribution) -> float:
    return risk_value(ExpectedValue(), d)


_KINDS = {
    "expectation": lambda s: ExpectedValue(),
    "expected_value": lambda s: ExpectedValue(),
    "mean": lambda s: ExpectedValue(),
    "var": lambda s: VaRStep(float(s["alpha"])),
    "cvar": lambda s: CVaRRamp(float(s["alpha"])),
    "wang": lambda s: Wang(float(s["beta"])),
    "ph": lambda s: ProportionalHazard(float(s["c"])),
    "proportional_hazard": lambda s: ProportionalHazard(float(s["c"])),
    "piecewise": lambda s: PiecewiseLinear(tuple(tuple(k) for k in s["knots"])),
}


def from_spec(spec: dict) -> Distortion:
    """Parse a tagged record such as ``{"kind": "cvar", "alpha": 0.9}``."""
    try:
        kind = spec["kind"].lower()
        builder = _KINDS[kind]
    except (KeyError, AttributeError, TypeError):
        raise ValidationError(f"unknown distortion spec {spec!r}") from None
    try:
        return builder(spec)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ValidationError):
            raise
        raise ValidationError(f"malformed distortion spec {spec!r}: {exc}") from exc


def to_spec(distortion: Distortion) -> dict:
    if isinstance(distortion, ExpectedValue):
        return {"kind": "expectation"}
    if isinstance(distortion, VaRStep):
        return {"kind": "var", "alpha": distortion.alpha}
    if isinstance(distortion, CVaRRamp):
        return {"kind": "cvar", "alpha": distortion.alpha}
    if isinstance(distortion, Wang):
        return {"kind": "wang", "beta": distortion.beta}
    if isinstance(distortion, ProportionalHazard):
        return {"kind": "ph", "c": distortion.c}
    if isinstance(distortion, PiecewiseLinear):
        return {"kind": "piecewise", "knots": [list(k) for k in distortion.knots]}
    return {"kind": "custom"}


def with_parameter(distortion: Distortion, value: float) -> Distortion:
    """Copy of ``distortion`` with its sweep parameter replaced."""
    if distortion.parameter is None:
        raise ValidationError(f"{type(distortion).__name__} has no sweepable parameter")
    return dataclasses.replace(distortion, **{distortion.parameter: float(value)})

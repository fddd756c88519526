"""Indemnification functions (ceded-loss contracts) and their marginals.

Contracts are exact continuous piecewise-linear maps ``f`` on ``[0, inf)``:
a strictly increasing list of breakpoints starting at 0, the value of ``f``
at each breakpoint, and the slope on ``[b_i, b_{i+1})`` (the last slope runs
to infinity).  Admissible contracts have ``f(0) = 0`` and all slopes in
``[0, 1]``, so both ``f`` and ``x - f(x)`` are nondecreasing.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dist_model import Empirical, LossDistribution, _apply, point_mass
from .errors import ValidationError

SLOPE_TOL = 1e-12
CONTINUITY_TOL = 1e-9


def _accumulate(breakpoints, slopes) -> tuple[float, ...]:
    widths = np.diff(breakpoints)
    terms = (widths * np.asarray(slopes[:-1])).tolist()
    out = [0.0]
    for k in range(len(terms)):
        out.append(math.fsum(terms[: k + 1]))
    return tuple(out)


def _check_breakpoints(breakpoints):
    if not breakpoints or breakpoints[0] != 0.0:
        raise ValidationError("breakpoints must start at 0")
    if any(b <= a for a, b in zip(breakpoints, breakpoints[1:])):
        raise ValidationError("breakpoints must be strictly increasing")
    if not all(math.isfinite(b) for b in breakpoints):
        raise ValidationError("breakpoints must be finite")


@dataclass(frozen=True)
class MarginalIndemnification:
    """Step function ``h`` with value ``values[i]`` on ``[breakpoints[i], breakpoints[i+1])``."""

    breakpoints: tuple[float, ...]
    values: tuple[float, ...]

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        vals = tuple(float(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "values", vals)
        _check_breakpoints(bp)
        if len(vals) != len(bp):
            raise ValidationError("need one marginal value per interval")
        if any(not -SLOPE_TOL <= v <= 1.0 + SLOPE_TOL for v in vals):
            raise ValidationError("marginal indemnification values must lie in [0, 1]")

    @classmethod
    def constant(cls, value: float) -> "MarginalIndemnification":
        return cls((0.0,), (value,))

    def __call__(self, s):
        bp = np.asarray(self.breakpoints)
        vals = np.asarray(self.values)
        return _apply(s, lambda a: vals[np.maximum(np.searchsorted(bp, a, side="right") - 1, 0)])

    def simplify(self) -> "MarginalIndemnification":
        bp, vals = [self.breakpoints[0]], [self.values[0]]
        for b, v in zip(self.breakpoints[1:], self.values[1:]):
            if v != vals[-1]:
                bp.append(b)
                vals.append(v)
        return MarginalIndemnification(tuple(bp), tuple(vals))


@dataclass(frozen=True)
class IndemnificationFunction:
    """Continuous piecewise-linear contract; see the module docstring."""

    breakpoints: tuple[float, ...]
    slopes: tuple[float, ...]
    values: tuple[float, ...] = field(default=None)

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        slopes = tuple(float(s) for s in self.slopes)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "slopes", slopes)
        _check_breakpoints(bp)
        if len(slopes) != len(bp):
            raise ValidationError("need one slope per segment")
        if self.values is None:
            object.__setattr__(self, "values", _accumulate(bp, slopes))
        else:
            vals = tuple(float(v) for v in self.values)
            if len(vals) != len(bp):
                raise ValidationError("need one value per breakpoint")
            object.__setattr__(self, "values", vals)

    def __call__(self, x):
        bp = np.asarray(self.breakpoints)
        vals = np.asarray(self.values)
        sl = np.asarray(self.slopes)

        def f(a):
            idx = np.maximum(np.searchsorted(bp, a, side="right") - 1, 0)
            with np.errstate(invalid="ignore"):
                out = vals[idx] + sl[idx] * (a - bp[idx])
            # f(inf) for a flat terminal piece
            return np.where(np.isinf(a) & (sl[idx] == 0), vals[idx], out)

        return _apply(x, f)

    @property
    def sup(self) -> float:
        """``lim_{x -> inf} f(x)``."""
        return math.inf if self.slopes[-1] > 0 else self.values[-1]

    def upper_inverse(self, y):
        """``sup{x >= 0 : f(x) <= y}`` (``inf`` if unbounded, ``-inf`` if empty)."""
        bp = np.asarray(self.breakpoints)
        vals = np.asarray(self.values)
        sl = np.asarray(self.slopes)

        def inv(a):
            j = np.searchsorted(vals, a, side="right") - 1
            jj = np.maximum(j, 0)
            s = sl[jj]
            with np.errstate(divide="ignore", invalid="ignore"):
                x = bp[jj] + (a - vals[jj]) / s
            last = jj == len(bp) - 1
            x = np.where(last & (s == 0), np.inf, x)
            return np.where(j < 0, -np.inf, x)

        return _apply(y, inv)

    def simplify(self) -> "IndemnificationFunction":
        """Drop breakpoints where the slope does not change."""
        bp, sl, vals = [self.breakpoints[0]], [self.slopes[0]], [self.values[0]]
        for b, s, v in zip(self.breakpoints[1:], self.slopes[1:], self.values[1:]):
            if s != sl[-1]:
                bp.append(b)
                sl.append(s)
                vals.append(v)
        return IndemnificationFunction(tuple(bp), tuple(sl), tuple(vals))

    def classify(self) -> tuple[str, dict]:
        """Shape tag: zero, identity, quota-share, stop-loss or general."""
        f = self.simplify()
        sl = f.slopes
        if sl == (0.0,):
            return "zero", {}
        if sl == (1.0,):
            return "identity", {}
        if len(sl) == 1:
            return "quota-share", {"share": sl[0]}
        if sl == (0.0, 1.0):
            return "stop-loss", {"attachment": f.breakpoints[1], "limit": math.inf}
        if sl == (1.0, 0.0):
            return "stop-loss", {"attachment": 0.0, "limit": f.breakpoints[1]}
        if sl == (0.0, 1.0, 0.0):
            a, b = f.breakpoints[1], f.breakpoints[2]
            return "stop-loss", {"attachment": a, "limit": b - a}
        return "general", {}

    def to_dict(self) -> dict:
        f = self.simplify()
        tag, params = f.classify()
        out = {"breakpoints": list(f.breakpoints), "slopes": list(f.slopes), "classification": tag}
        if params:
            out["parameters"] = params
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "IndemnificationFunction":
        return cls(tuple(data["breakpoints"]), tuple(data["slopes"]))


def zero() -> IndemnificationFunction:
    return IndemnificationFunction((0.0,), (0.0,))


def identity() -> IndemnificationFunction:
    return IndemnificationFunction((0.0,), (1.0,))


def quota_share(share: float) -> IndemnificationFunction:
    return IndemnificationFunction((0.0,), (share,))


def stop_loss(attachment: float, limit: float = math.inf) -> IndemnificationFunction:
    """``f(x) = min(max(x - attachment, 0), limit)``."""
    if attachment < 0 or not limit > 0:
        raise ValidationError("stop-loss needs attachment >= 0 and limit > 0")
    bp, sl = [0.0], [0.0]
    if attachment > 0:
        bp.append(attachment)
        sl.append(1.0)
    else:
        sl = [1.0]
    if math.isfinite(limit):
        bp.append(attachment + limit)
        sl.append(0.0)
    return IndemnificationFunction(tuple(bp), tuple(sl))


@dataclass(frozen=True)
class ValidationReport:
    ok: bool
    violation: str | None = None

    def __bool__(self):
        return self.ok


def validate(f: IndemnificationFunction) -> ValidationReport:
    """Check membership in the admissible set; report the first violated clause."""
    if abs(f.values[0]) > CONTINUITY_TOL:
        return ValidationReport(False, "f(0)≠0")
    for b, s in zip(f.breakpoints, f.slopes):
        if s < -SLOPE_TOL:
            return ValidationReport(False, f"f decreasing on segment starting at {b}")
        if s > 1.0 + SLOPE_TOL:
            return ValidationReport(False, "x−f(x) decreasing" + f" on segment starting at {b}")
    for i in range(len(f.breakpoints) - 1):
        expected = f.values[i] + f.slopes[i] * (f.breakpoints[i + 1] - f.breakpoints[i])
        if abs(expected - f.values[i + 1]) > CONTINUITY_TOL * max(1.0, abs(expected)):
            return ValidationReport(False, f"f discontinuous at {f.breakpoints[i + 1]}")
    return ValidationReport(True)


def _require_valid(f: IndemnificationFunction):
    report = validate(f)
    if not report:
        raise ValidationError(f"contract is not admissible: {report.violation}")


def integrate_marginal(h: MarginalIndemnification) -> IndemnificationFunction:
    """``f(x) = int_0^x h(t) dt``."""
    return IndemnificationFunction(h.breakpoints, h.values)


def differentiate(f: IndemnificationFunction) -> MarginalIndemnification:
    """Per-segment slopes of an admissible contract."""
    _require_valid(f)
    return MarginalIndemnification(f.breakpoints, tuple(min(max(s, 0.0), 1.0) for s in f.slopes))


def retained(f: IndemnificationFunction) -> IndemnificationFunction:
    """The retained-loss map ``x -> x - f(x)``."""
    return IndemnificationFunction(
        f.breakpoints,
        tuple(1.0 - s for s in f.slopes),
        tuple(b - v for b, v in zip(f.breakpoints, f.values)),
    )


def convex_combination(contracts, weights) -> IndemnificationFunction:
    """``sum_i w_i f_i`` on the union of breakpoints."""
    contracts = list(contracts)
    weights = [float(w) for w in weights]
    if len(contracts) != len(weights) or not contracts:
        raise ValidationError("need one weight per contract")
    bp = sorted({b for f in contracts for b in f.breakpoints})
    slopes = []
    for b in bp:
        parts = []
        for f, w in zip(contracts, weights):
            idx = int(np.searchsorted(f.breakpoints, b, side="right")) - 1
            parts.append(w * f.slopes[idx])
        slopes.append(math.fsum(parts))
    return IndemnificationFunction(tuple(bp), tuple(slopes))


class PushForward(LossDistribution):
    """Law of ``f(X)`` for an admissible contract ``f``.

    Quantiles commute with ``f``, and the integrated quantile is assembled
    segment by segment from the inner integrated quantile, so risk values of
    ceded and retained losses stay exact wherever the inner law is.
    """

    def __init__(self, inner: LossDistribution, f: IndemnificationFunction):
        self.inner = inner
        self.f = f.simplify()
        levels = [float(inner.cdf(b)) for b in self.f.breakpoints[1:]]
        self._levels = [float(inner.cdf(0.0))] + levels + [1.0]

    def __repr__(self):
        return f"PushForward({self.inner!r}, {self.f.to_dict()!r})"

    def cdf(self, y):
        def c(a):
            x = np.asarray(self.f.upper_inverse(a))
            out = np.asarray(self.inner.cdf(np.where(np.isfinite(x), x, 0.0)))
            return np.where(np.isposinf(x), 1.0, np.where(np.isneginf(x), 0.0, out))

        return _apply(y, c)

    def upper_tail(self, y):
        def s(a):
            x = np.asarray(self.f.upper_inverse(a))
            out = np.asarray(self.inner.upper_tail(np.where(np.isfinite(x), x, 0.0)))
            return np.where(np.isposinf(x), 0.0, np.where(np.isneginf(x), 1.0, out))

        return _apply(y, s)

    def _quantile(self, p):
        return np.asarray(self.f(self.inner.quantile(p)))

    def _isf(self, x):
        return np.asarray(self.f(self.inner.isf(x)))

    def _integrated_quantile(self, t):
        f = self.f
        lv = self._levels
        total = np.zeros_like(t)
        for j, (b, v, s) in enumerate(zip(f.breakpoints, f.values, f.slopes)):
            lo, hi = lv[j], lv[j + 1]
            top = np.clip(t, lo, hi)
            width = top - lo
            if not np.any(width > 0):
                continue
            part = (v - s * b) * width
            if s != 0:
                q_top = np.asarray(self.inner.integrated_quantile(top))
                part = part + s * (q_top - float(self.inner.integrated_quantile(lo)))
            total = total + np.where(width > 0, part, 0.0)
        return total

    def support(self):
        lo, hi = self.inner.support()
        top = self.f.sup if math.isinf(hi) else float(self.f(hi))
        return (float(self.f(lo)), top)

    def kink_levels(self):
        levels = set(self.inner.kink_levels())
        levels.update(t for t in self._levels[1:-1] if 0.0 < t < 1.0)
        return tuple(sorted(levels))


def push_forward(f: IndemnificationFunction, d: LossDistribution) -> LossDistribution:
    """Law of ``f(X0)``; exact on empirical laws."""
    g = f.simplify()
    if g.slopes == (1.0,) and g.values[0] == 0.0:
        return d
    if g.slopes == (0.0,) and g.values[0] == 0.0:
        return point_mass(0.0)
    if isinstance(d, Empirical):
        mapped = np.asarray(g(d.values))
        return Empirical(list(zip(mapped.tolist(), d.weights.tolist())))
    return PushForward(d, g)

"""Unified reinsurance problem and its solution by the marginal sign rule.

Every problem is put in the form::

    minimise  a1 * L1(X0 - f(X0)) + a2 * L2(f(X0)) + offset   over admissible f

and for any admissible ``f`` with marginal ``h`` the objective equals
``a1 * L1(X0) + offset + int_0^inf psi(F(s)) h(s) ds`` with
``psi(t) = (a2 - a1) - (a2 * Pi2(t) - a1 * Pi1(t))``.  The optimal marginal
is therefore 1 where ``psi(F(s)) < 0`` and 0 elsewhere.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import contract as ct
from .dist_model import TAIL_EPS, Empirical, LossDistribution
from .distortion import Distortion, RiskFunctional, _quad, risk_value
from .errors import DivergenceError, SolverError, ValidationError

TOL_SIGN = 1e-12
LOSS_TOL = 1e-10
MAX_SIGN_CHANGES = 64
SCAN_POINTS = 4096


def _functional(obj, role: str) -> RiskFunctional:
    if isinstance(obj, RiskFunctional):
        return obj
    if isinstance(obj, Distortion):
        return RiskFunctional(obj, role)
    raise TypeError(f"expected a distortion or risk functional, got {type(obj).__name__}")


@dataclass(frozen=True)
class ReinsuranceProblem:
    a1: float
    lambda1: RiskFunctional
    a2: float
    lambda2: RiskFunctional
    loss: LossDistribution
    constant_offset: float = 0.0
    solve_for: str = "ceded"
    kind: str = "general"
    rho: float | None = None

    def __post_init__(self):
        if not (self.a1 > 0 and self.a2 > 0):
            raise ValidationError("weights a1 and a2 must be positive")
        if self.solve_for not in ("ceded", "retained"):
            raise ValidationError("solve_for must be 'ceded' or 'retained'")
        for lam in (self.lambda1, self.lambda2):
            d = lam.distortion
            if abs(float(d.pi(0.0))) > 1e-12 or abs(float(d.pi(1.0)) - 1.0) > 1e-12:
                raise ValidationError("distortions must satisfy Pi(0) = 0 and Pi(1) = 1")

    def psi(self, t):
        return psi(self, t)

    def to_dict(self) -> dict:
        from .distortion import to_spec
        from .dist_model import to_spec as loss_spec

        return {
            "kind": self.kind,
            "rho": self.rho,
            "a1": self.a1,
            "a2": self.a2,
            "lambda1": to_spec(self.lambda1.distortion),
            "lambda2": to_spec(self.lambda2.distortion),
            "loss": loss_spec(self.loss),
            "constant_offset": self.constant_offset,
            "solve_for": self.solve_for,
        }


def build_ceding(rho: float, rho_measure, premium, d: LossDistribution) -> ReinsuranceProblem:
    """Ceding company: own measure on the retained loss, loaded premium on the ceded loss."""
    if rho < 0:
        raise ValidationError(f"safety loading must be nonnegative, got {rho}")
    return ReinsuranceProblem(
        1.0, _functional(rho_measure, "measure"), 1.0 + rho, _functional(premium, "premium"), d,
        0.0, "ceded", "ceding", rho,
    )


def build_reinsurer(rho: float, rho_measure, premium, d: LossDistribution) -> ReinsuranceProblem:
    """Reinsurer, rewritten over the retained function ``k`` with a constant offset."""
    if rho < 0:
        raise ValidationError(f"safety loading must be nonnegative, got {rho}")
    prem = _functional(premium, "premium")
    offset = -(1.0 + rho) * risk_value(prem, d)
    if not math.isfinite(offset):
        raise DivergenceError("premium of the total loss is not finite")
    return ReinsuranceProblem(
        1.0, _functional(rho_measure, "measure"), 1.0 + rho, prem, d,
        offset, "retained", "reinsurer", rho,
    )


def build_social(rho_insurer, rho_reinsurer, d: LossDistribution) -> ReinsuranceProblem:
    """Social planner: sum of both companies' risk measures."""
    return ReinsuranceProblem(
        1.0, _functional(rho_insurer, "measure"), 1.0, _functional(rho_reinsurer, "measure"), d,
        0.0, "ceded", "social",
    )


def psi(p: ReinsuranceProblem, t):
    """``(a2 - a1) - (a2 * Pi2(t) - a1 * Pi1(t))``."""
    pi1 = np.asarray(p.lambda1.distortion.pi(t))
    pi2 = np.asarray(p.lambda2.distortion.pi(t))
    out = (p.a2 - p.a1) - (p.a2 * pi2 - p.a1 * pi1)
    return float(out) if np.ndim(out) == 0 else out


def psi_tail(p: ReinsuranceProblem, x):
    """``psi(1 - x)`` written with the dual distortions, accurate as ``x -> 0``."""
    g1 = np.asarray(p.lambda1.distortion.g(x))
    g2 = np.asarray(p.lambda2.distortion.g(x))
    out = p.a2 * g2 - p.a1 * g1
    return float(out) if np.ndim(out) == 0 else out


def psi_on_loss(p: ReinsuranceProblem, s):
    """``psi(F(s))``, switching to the tail form where ``F(s) > 1/2``."""
    d = p.loss
    arr = np.atleast_1d(np.asarray(s, dtype=float))
    F = np.asarray(d.cdf(arr))
    out = np.asarray(psi(p, F), dtype=float).copy()
    upper = F > 0.5
    if np.any(upper):
        out[upper] = psi_tail(p, np.asarray(d.upper_tail(arr[upper])))
    return float(out[0]) if np.ndim(s) == 0 else out


def _classify(values, tol=TOL_SIGN):
    v = np.asarray(values)
    return np.where(v > tol, 1, np.where(v < -tol, -1, 0))


@dataclass
class SignStructure:
    """Partition of the loss axis into intervals of constant sign of ``psi(F(s))``."""

    starts: list[float]
    signs: list[int]
    levels: list[float]  # F at each start

    @property
    def intervals(self):
        ends = self.starts[1:] + [math.inf]
        return list(zip(self.starts, ends, self.signs))


def _merge(starts, signs):
    out_s, out_c = [starts[0]], [signs[0]]
    for s, c in zip(starts[1:], signs[1:]):
        if c != out_c[-1]:
            out_s.append(s)
            out_c.append(c)
    return out_s, out_c


def _empirical_structure(p: ReinsuranceProblem, d: Empirical, tol_sign):
    starts = [0.0] + d.values[:-1].tolist()
    levels = [0.0] + d.cum[:-1].tolist()
    if d.values[0] == 0.0:
        # [0, x0) is empty
        starts, levels = starts[1:], levels[1:]
        if starts:
            starts[0] = 0.0
    if not starts:
        # a point mass at zero: nothing to cede
        starts, levels = [0.0], [1.0]
    signs = _classify(psi(p, np.array(levels)), tol_sign).tolist()
    return starts, signs


def _scan_grid(d: LossDistribution, distortions, tail_eps: float):
    lo, hi = d.support()
    top = d.tail_point(tail_eps)
    n = SCAN_POINTS
    levels = (np.arange(n) + 0.5) / n * (1.0 - tail_eps)
    kinks = set(d.kink_levels())
    for dist in distortions:
        kinks.update(dist.kinks())
    pts = [np.linspace(0.0, top, n), np.asarray(d.quantile(levels)), [lo]]
    for t in kinks:
        if 0.0 < t < 1.0:
            q = float(d.quantile(t))
            pts.append([q, q * (1 - 1e-9), q * (1 + 1e-9)])
    grid = np.unique(np.concatenate([np.atleast_1d(np.asarray(a, dtype=float)) for a in pts]))
    grid = grid[(grid >= 0.0) & np.isfinite(grid)]
    if math.isfinite(hi):
        grid = grid[grid < hi]
    else:
        grid = grid[grid <= top]
    if grid.size == 0 or grid[0] > 0.0:
        grid = np.concatenate([[0.0], grid])
    return grid


def _continuous_structure(p: ReinsuranceProblem, d: LossDistribution, tail_eps, tol_sign, loss_tol):
    grid = _scan_grid(d, (p.lambda1.distortion, p.lambda2.distortion), tail_eps)

    def cls(s):
        return int(_classify(psi_on_loss(p, s), tol_sign))

    signs = _classify(psi_on_loss(p, grid), tol_sign)

    def refine(a, ca, b, cb, depth=0):
        # a direct -/+ crossing is located at the zero of psi itself, so the
        # tie band around a transversal root does not shift the breakpoint
        strict = ca * cb == -1
        while b - a > loss_tol:
            m = 0.5 * (a + b)
            if m <= a or m >= b:
                break
            if strict:
                v = psi_on_loss(p, m)
                cm = ca if (v < 0) == (ca < 0) and v != 0 else cb
            else:
                cm = cls(m)
            if cm == ca:
                a = m
            elif cm == cb:
                b = m
            else:
                if depth > MAX_SIGN_CHANGES:
                    raise SolverError("sign of psi oscillates; refine the scan grid")
                return refine(a, ca, m, cm, depth + 1) + refine(m, cm, b, cb, depth + 1)
        return [(0.5 * (a + b), cb)]

    starts, out_signs = [0.0], [int(signs[0])]
    changes = np.nonzero(np.diff(signs))[0]
    if len(changes) > MAX_SIGN_CHANGES:
        raise SolverError(
            f"psi changes sign {len(changes)} times (limit {MAX_SIGN_CHANGES}); refine the grid"
        )
    for i in changes:
        for loc, c in refine(float(grid[i]), int(signs[i]), float(grid[i + 1]), int(signs[i + 1])):
            starts.append(loc)
            out_signs.append(c)
    # collapse tie slivers produced by continuous crossings of zero
    keep_s, keep_c = [starts[0]], [out_signs[0]]
    for k in range(1, len(starts)):
        nxt = starts[k + 1] if k + 1 < len(starts) else math.inf
        if out_signs[k] == 0 and nxt - starts[k] < 2 * loss_tol and k + 1 < len(starts):
            starts[k + 1] = 0.5 * (starts[k] + nxt)
            continue
        keep_s.append(starts[k])
        keep_c.append(out_signs[k])
    if len(keep_s) > 1 and keep_c[0] == 0 and keep_s[1] < 2 * loss_tol:
        # psi(F(0)) can vanish at the single point s = 0 only
        keep_s, keep_c = [0.0] + keep_s[2:], keep_c[1:]
    return keep_s, keep_c


def sign_structure(p: ReinsuranceProblem, tail_eps=TAIL_EPS, tol_sign=TOL_SIGN, loss_tol=LOSS_TOL):
    d = p.loss
    if isinstance(d, Empirical):
        starts, signs = _empirical_structure(p, d, tol_sign)
    else:
        starts, signs = _continuous_structure(p, d, tail_eps, tol_sign, loss_tol)
    starts, signs = _merge(starts, signs)
    if len(starts) - 1 > MAX_SIGN_CHANGES:
        raise SolverError(f"more than {MAX_SIGN_CHANGES} sign changes; refine the grid")
    levels = [float(d.cdf(s)) for s in starts]
    return SignStructure(starts, signs, levels)


def _marginal_from(structure: SignStructure) -> ct.MarginalIndemnification:
    vals = tuple(1.0 if c < 0 else 0.0 for c in structure.signs)
    return ct.MarginalIndemnification(tuple(structure.starts), vals).simplify()


def optimal_marginal(p: ReinsuranceProblem, tail_eps=TAIL_EPS) -> ct.MarginalIndemnification:
    """Bang-bang marginal: 1 where ``psi(F(s)) < 0``, 0 where positive or tied."""
    return _marginal_from(sign_structure(p, tail_eps))


def _negative_part_integral(p: ReinsuranceProblem, structure: SignStructure, tail_eps) -> float:
    """``int_0^inf max(-psi(F(s)), 0) ds``."""
    d = p.loss
    if isinstance(d, Empirical):
        starts = [0.0] + d.values[:-1].tolist()
        ends = d.values.tolist()
        levels = np.array([0.0] + d.cum[:-1].tolist())
        neg = np.maximum(-np.asarray(psi(p, levels)), 0.0)
        return math.fsum((neg * (np.array(ends) - np.array(starts))).tolist())

    kinks = set(d.kink_levels()) | set(p.lambda1.distortion.kinks()) | set(p.lambda2.distortion.kinks())
    breaks = sorted({float(d.quantile(t)) for t in kinks if 0.0 < t < 1.0})

    def integrand(s):
        return max(-psi_on_loss(p, s), 0.0)

    def tail_integrand(s):
        # psi(F) near F = 1 is rebuilt from the tail probability to avoid cancellation
        return max(-psi_tail(p, float(d.upper_tail(s))), 0.0)

    total = 0.0
    hi = d.support()[1]
    for a, b, c in structure.intervals:
        if c >= 0:
            continue
        b = min(b, hi)
        if math.isfinite(b):
            if b > a:
                total += _quad(integrand, a, b, breaks)
            continue
        # unbounded interval: decade panels in the tail probability
        edge = max(a, float(d.quantile(0.5)))
        if edge > a:
            total += _quad(integrand, a, edge, breaks)
        small = 0
        for k in range(1, 301):
            nxt = float(d.isf(10.0**-k))
            if nxt <= edge:
                continue
            part = _quad(tail_integrand, edge, nxt, breaks)
            if not math.isfinite(part):
                raise DivergenceError("minimum-value integral diverges in the upper tail")
            total += part
            edge = nxt
            small = small + 1 if abs(part) <= 1e-17 * max(abs(total), 1e-300) else 0
            if small >= 3:
                break
        else:
            raise DivergenceError("minimum-value integral does not converge in the upper tail")
    return total


def objective(p: ReinsuranceProblem, f: ct.IndemnificationFunction) -> float:
    """``a1 * L1(X0 - f(X0)) + a2 * L2(f(X0)) + offset`` evaluated directly.

    ``f`` is the optimisation variable of the unified form, i.e. the retained
    function for reinsurer problems.
    """
    report = ct.validate(f)
    if not report:
        raise ValidationError(f"contract is not admissible: {report.violation}")
    d = p.loss
    kept = ct.push_forward(ct.retained(f), d)
    ceded = ct.push_forward(f, d)
    return (
        p.a1 * risk_value(p.lambda1, kept) + p.a2 * risk_value(p.lambda2, ceded) + p.constant_offset
    )


@dataclass
class Solution:
    problem: ReinsuranceProblem
    marginal: ct.MarginalIndemnification
    kernel_contract: ct.IndemnificationFunction
    contract: ct.IndemnificationFunction
    minimum_value: float
    objective_at_optimum: float
    tie_regions: list[tuple[float, float]] = field(default_factory=list)
    sign_changes: list[tuple[float, float]] = field(default_factory=list)

    @property
    def classification(self) -> str:
        lo, hi = self.problem.loss.support()
        for a, b in self.tie_regions:
            if a <= 0.0 and b >= hi:
                return "any contract optimal (tie)"
        tag = self.contract.classify()[0]
        return {"zero": "zero contract", "identity": "full transfer"}.get(tag, tag)

    def to_dict(self) -> dict:
        return {
            "problem": self.problem.to_dict(),
            "classification": self.classification,
            "contract": self.contract.to_dict(),
            "marginal": {
                "breakpoints": list(self.marginal.breakpoints),
                "values": list(self.marginal.values),
            },
            "minimum_value": self.minimum_value,
            "objective_at_optimum": self.objective_at_optimum,
            "tie_regions": [list(r) for r in self.tie_regions],
            "sign_changes": [{"loss": s, "probability": t} for s, t in self.sign_changes],
        }


def solve(p: ReinsuranceProblem, tail_eps=TAIL_EPS) -> Solution:
    structure = sign_structure(p, tail_eps)
    marginal = _marginal_from(structure)
    kernel = ct.integrate_marginal(marginal)
    minimum = (
        p.a1 * risk_value(p.lambda1, p.loss)
        - _negative_part_integral(p, structure, tail_eps)
        + p.constant_offset
    )
    if not math.isfinite(minimum):
        raise DivergenceError("minimum value is not finite")
    value = objective(p, kernel)
    reported = ct.retained(kernel) if p.solve_for == "retained" else kernel
    ties = []
    for a, b, c in structure.intervals:
        if c == 0:
            ties.append((a, b))
    changes = list(zip(structure.starts[1:], structure.levels[1:]))
    return Solution(p, marginal, kernel, reported, minimum, value, ties, changes)

"""Brute-force certification of the sign rule on discrete losses.

On an empirical loss with atoms ``x_0 < ... < x_{n-1}`` every admissible
contract is determined, at the atoms, by its average slope on the ``n``
intervals ``[0, x_0), [x_0, x_1), ..., [x_{n-2}, x_{n-1})``.  The objective
is linear in those slopes, so exhaustive enumeration of 0/1 slopes and the
per-interval sign choice must give the same minimum.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import contract as ct
from .dist_model import Empirical
from .distortion import (
    CVaRRamp,
    ExpectedValue,
    PiecewiseLinear,
    VaRStep,
    Wang,
    risk_value,
)
from .errors import DomainError, ValidationError
from .solver import ReinsuranceProblem, build_ceding, build_reinsurer, build_social, psi, solve

MAX_EXHAUSTIVE = 20
AGREE_TOL = 1e-10
_CHUNK = 1 << 15


@dataclass(frozen=True)
class DiscreteProblem:
    """A reinsurance problem whose loss is an ``Empirical`` with ``n`` atoms."""

    problem: ReinsuranceProblem

    def __post_init__(self):
        if not isinstance(self.problem.loss, Empirical):
            raise ValidationError("the oracle needs an empirical loss")

    @property
    def loss(self) -> Empirical:
        return self.problem.loss

    @property
    def n(self) -> int:
        return len(self.loss)

    @property
    def starts(self) -> np.ndarray:
        return np.concatenate([[0.0], self.loss.values[:-1]])

    @property
    def lengths(self) -> np.ndarray:
        return self.loss.values - self.starts

    @property
    def levels(self) -> np.ndarray:
        """F on each interval (right-continuous, so the left endpoint's value)."""
        return np.concatenate([[0.0], self.loss.cum[:-1]])

    def psi_values(self) -> np.ndarray:
        return np.asarray(psi(self.problem, self.levels), dtype=float)

    def base_value(self) -> float:
        p = self.problem
        return p.a1 * risk_value(p.lambda1, self.loss) + p.constant_offset

    def contract(self, h) -> ct.IndemnificationFunction:
        """Piecewise-linear contract with slope ``h[k]`` on interval ``k`` and 0 beyond."""
        h = np.asarray(h, dtype=float)
        bps = self.starts.tolist() + [float(self.loss.values[-1])]
        slopes = h.tolist() + [0.0]
        if self.lengths[0] == 0.0:
            # atom at zero: the first interval is empty
            bps, slopes = bps[1:], slopes[1:]
        return ct.IndemnificationFunction(tuple(bps), tuple(slopes)).simplify()


def _check_h(p: DiscreteProblem, h) -> np.ndarray:
    h = np.asarray(h, dtype=float)
    if h.shape[-1] != p.n:
        raise ValidationError(f"expected {p.n} interval values, got {h.shape[-1]}")
    if np.any(h < 0.0) or np.any(h > 1.0):
        raise ValidationError("marginal values must lie in [0, 1]")
    return h


def exact_objective(p: DiscreteProblem, h) -> float:
    """Base value plus ``sum_k psi(F_k) * h_k * length_k``, summed exactly."""
    h = _check_h(p, h)
    terms = p.psi_values() * h * p.lengths
    return p.base_value() + math.fsum(terms.tolist())


def direct_objectives(p: DiscreteProblem, H) -> np.ndarray:
    """Objective evaluated from the definition for each row of ``H``.

    The ceded amount at atom ``k`` is the running sum of ``h * length``; both
    ceded and retained losses stay comonotone with the loss, so each risk
    value is a weighted sum over the atoms.
    """
    H = _check_h(p, np.atleast_2d(H))
    q = p.problem
    cum = p.loss.cum
    prev = np.concatenate([[0.0], cum[:-1]])
    w1 = np.asarray(q.lambda1.distortion.pi(cum)) - np.asarray(q.lambda1.distortion.pi(prev))
    w2 = np.asarray(q.lambda2.distortion.pi(cum)) - np.asarray(q.lambda2.distortion.pi(prev))
    ceded = np.cumsum(H * p.lengths, axis=1)
    kept = p.loss.values - ceded
    return q.a1 * (kept @ w1) + q.a2 * (ceded @ w2) + q.constant_offset


def _bits(masks: np.ndarray, n: int) -> np.ndarray:
    return ((masks[:, None] >> np.arange(n)) & 1).astype(float)


def brute_force(p: DiscreteProblem, mode: str = "exhaustive"):
    """Minimise over 0/1 marginals. Returns ``(h, value)``.

    ``exhaustive`` scores all ``2**n`` candidates from the definition and
    keeps the lowest bitmask among ties; ``sign-greedy`` sets each interval
    by the sign of the sign function.
    """
    if mode == "sign-greedy":
        h = (p.psi_values() < 0.0).astype(float)
        return h, exact_objective(p, h)
    if mode != "exhaustive":
        raise ValidationError(f"unknown mode {mode!r}")
    if p.n > MAX_EXHAUSTIVE:
        raise DomainError(
            f"exhaustive search is limited to {MAX_EXHAUSTIVE} atoms (got {p.n}); use mode='sign-greedy'"
        )
    best_val, best_mask = math.inf, 0
    total = 1 << p.n
    for lo in range(0, total, _CHUNK):
        masks = np.arange(lo, min(lo + _CHUNK, total), dtype=np.int64)
        vals = direct_objectives(p, _bits(masks, p.n))
        i = int(np.argmin(vals))
        if vals[i] < best_val:
            best_val, best_mask = float(vals[i]), int(masks[i])
    return _bits(np.array([best_mask]), p.n)[0], best_val


def bitmask(h) -> int:
    return int(sum(1 << k for k, v in enumerate(np.asarray(h)) if v > 0.5))


def _random_distortion(rng: np.random.Generator):
    kind = int(rng.integers(5))
    if kind == 0:
        return ExpectedValue()
    if kind == 1:
        return VaRStep(float(rng.uniform(0.05, 0.95)))
    if kind == 2:
        return CVaRRamp(float(rng.uniform(0.0, 0.95)))
    if kind == 3:
        return Wang(float(rng.uniform(-1.0, 3.0)))
    m = int(rng.integers(3, 6))
    ts = np.sort(rng.uniform(0.0, 1.0, m - 2))
    vs = np.sort(rng.uniform(0.0, 1.0, m - 2))
    knots = [(0.0, 0.0)] + list(zip(ts.tolist(), vs.tolist())) + [(1.0, 1.0)]
    return PiecewiseLinear(tuple(knots))


def random_instance(seed: int, n_atoms: int) -> DiscreteProblem:
    """Seeded random problem on an ``n_atoms``-point loss."""
    if n_atoms < 1:
        raise DomainError("need at least one atom")
    rng = np.random.default_rng(seed)
    grid = np.arange(1, 20 * n_atoms + 1) * 0.25
    values = np.sort(rng.choice(grid, size=n_atoms, replace=False))
    weights = rng.gamma(1.0, size=n_atoms) + 1e-3
    weights = weights / weights.sum()
    weights[-1] = 1.0 - math.fsum(weights[:-1].tolist())
    loss = Empirical(list(zip(values.tolist(), weights.tolist())))
    d1, d2 = _random_distortion(rng), _random_distortion(rng)
    rho = float(rng.uniform(0.0, 1.0))
    kind = int(rng.integers(3))
    if kind == 0:
        problem = build_ceding(rho, d1, d2, loss)
    elif kind == 1:
        problem = build_reinsurer(rho, d1, d2, loss)
    else:
        problem = build_social(d1, d2, loss)
    return DiscreteProblem(problem)


@dataclass
class InstanceReport:
    seed: int
    n: int
    exhaustive_min: float
    greedy_min: float
    argmin_bitmask: int
    solver_min: float
    solver_delta: float
    interior_gap: float
    error: str | None = None

    @property
    def passed(self) -> bool:
        return (
            self.error is None
            and abs(self.exhaustive_min - self.greedy_min) <= AGREE_TOL
            and self.solver_delta <= AGREE_TOL
            and self.interior_gap >= -AGREE_TOL
        )


def interior_gap(p: DiscreteProblem, best: float, rng: np.random.Generator, count: int = 1000) -> float:
    """Smallest ``objective(h) - best`` over random ``h`` with entries strictly inside (0, 1)."""
    H = rng.uniform(0.0, 1.0, size=(count, p.n))
    H = np.clip(H, 1e-9, 1.0 - 1e-9)
    return float(np.min(direct_objectives(p, H)) - best)


def certify_instance(seed: int, n_atoms: int, interior: int = 1000) -> InstanceReport:
    p = random_instance(seed, n_atoms)
    h_ex, v_ex = brute_force(p, "exhaustive")
    _, v_gr = brute_force(p, "sign-greedy")
    sol = solve(p.problem)
    deltas = [abs(sol.minimum_value - v_ex), abs(sol.objective_at_optimum - v_ex)]
    gap = interior_gap(p, v_ex, np.random.default_rng([seed, 1]), interior)
    return InstanceReport(seed, p.n, v_ex, v_gr, bitmask(h_ex), sol.minimum_value, max(deltas), gap)


@dataclass
class OracleReport:
    seed: int
    count: int
    n_atoms: int
    instances: list[InstanceReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.instances)

    @property
    def max_solver_delta(self) -> float:
        return max((r.solver_delta for r in self.instances), default=0.0)

    @property
    def max_mode_delta(self) -> float:
        return max((abs(r.exhaustive_min - r.greedy_min) for r in self.instances), default=0.0)

    def failures(self) -> list[InstanceReport]:
        return [r for r in self.instances if not r.passed]


def instance_seeds(seed: int, count: int) -> list[int]:
    ss = np.random.SeedSequence(seed)
    return [int(s.generate_state(1, np.uint64)[0]) for s in ss.spawn(count)]


def certify(seed: int, count: int, n_atoms: int, interior: int = 1000) -> OracleReport:
    """Run ``count`` seeded instances through the solver and both oracle modes."""
    if n_atoms > MAX_EXHAUSTIVE:
        raise DomainError(
            f"exhaustive search is limited to {MAX_EXHAUSTIVE} atoms (got {n_atoms}); use mode='sign-greedy'"
        )
    report = OracleReport(seed, count, n_atoms)
    for s in instance_seeds(seed, count):
        report.instances.append(certify_instance(s, n_atoms, interior))
    return report

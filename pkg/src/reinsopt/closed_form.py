"""Closed-form stop-loss solutions for VaR and CVaR ceding measures.

Both solvers assume a continuous, strictly increasing loss CDF and a
strictly increasing premium distortion, with ``rho / (1 + rho) < Pi2(alpha)``.
The attachment ``a*`` solves ``Pi2(F(a*)) = rho / (1 + rho)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import contract as ct
from .dist_model import Empirical, LossDistribution
from .distortion import Distortion, ExpectedValue, RiskFunctional, VaRStep, is_convex
from .errors import DomainError, PreconditionError
from .solver import Solution, build_ceding, build_reinsurer, solve

PROB_TOL = 1e-12


@dataclass(frozen=True)
class StopLossParams:
    a_star: float
    d_star: float
    limit: float
    alpha: float
    rho: float
    b_star: float | None = None
    b_level: float | None = None

    @property
    def contract(self) -> ct.IndemnificationFunction:
        return ct.stop_loss(self.a_star, self.limit)

    @property
    def upper_break(self) -> float:
        return self.a_star + self.limit

    def to_dict(self) -> dict:
        out = {
            "a_star": self.a_star,
            "d_star": self.d_star,
            "limit": self.limit,
            "alpha": self.alpha,
            "rho": self.rho,
        }
        if self.b_star is not None:
            out["b_star"] = self.b_star
            out["b_level"] = self.b_level
        return out


def bisect(fn, lo: float, hi: float, tol: float = PROB_TOL, max_iter: int = 200) -> float:
    """Boundary of ``{fn <= 0}`` inside ``[lo, hi]``, given ``fn(lo) <= 0 < fn(hi)``."""
    for _ in range(max_iter):
        if hi - lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        if fn(mid) > 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def _premium(premium) -> Distortion:
    return premium.distortion if isinstance(premium, RiskFunctional) else premium


def _check_inputs(alpha, rho, pi2: Distortion, d: LossDistribution):
    if isinstance(d, Empirical):
        raise PreconditionError(
            "closed-form stop-loss needs a strictly increasing loss CDF; "
            "use the general solver for empirical losses"
        )
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    if rho < 0:
        raise DomainError(f"rho must be nonnegative, got {rho}")
    if not pi2.strictly_increasing:
        raise PreconditionError("premium distortion must be strictly increasing")
    target = rho / (1.0 + rho)
    if not target < float(pi2.pi(alpha)):
        raise PreconditionError(
            f"assumption rho/(1+rho) < Pi2(alpha) fails: {target:.6g} >= {float(pi2.pi(alpha)):.6g}"
        )
    return target


def _attachment_level(pi2: Distortion, target: float, alpha: float) -> float:
    if target <= 0.0:
        return 0.0
    if isinstance(pi2, ExpectedValue):
        return target
    return bisect(lambda u: float(pi2.pi(u)) - target, 0.0, alpha)


def stoploss_var(alpha: float, rho: float, premium, d: LossDistribution) -> StopLossParams:
    """Optimal ceded stop-loss when the ceding company uses ``VaR_alpha``."""
    pi2 = _premium(premium)
    target = _check_inputs(alpha, rho, pi2, d)
    u = _attachment_level(pi2, target, alpha)
    a_star = float(d.quantile(u))
    limit = float(d.quantile(alpha)) - a_star
    return StopLossParams(a_star, float(d.quantile(target)), limit, alpha, rho)


def _upper_level_gap(alpha: float, rho: float, pi2: Distortion) -> float | None:
    """Largest ``x = 1 - u`` in ``(0, 1 - alpha)`` where coverage stops, or None.

    In ``x`` the boundary equation reads ``(1 + rho) * g2(x) - x / (1 - alpha) = 0``.
    """

    def gap(x):
        return (1.0 + rho) * float(pi2.g(x)) - x / (1.0 - alpha)

    top = 1.0 - alpha
    xs = np.concatenate([
        np.linspace(top, 0.0, 4097)[:-1],
        np.geomspace(top / 4096.0, 1e-300, 2000),
    ])
    xs = np.unique(xs)[::-1]
    prev = top
    for x in xs[1:]:
        if gap(x) > 0:
            # gap(prev) <= 0 < gap(x); bisect in log space when the bracket is wide
            lo, hi = float(x), float(prev)
            for _ in range(400):
                mid = math.sqrt(lo * hi) if hi > 4 * lo else 0.5 * (lo + hi)
                if mid <= lo or mid >= hi:
                    break
                if gap(mid) > 0:
                    lo = mid
                else:
                    hi = mid
            return 0.5 * (lo + hi)
        prev = float(x)
    return None


def stoploss_cvar(alpha: float, rho: float, premium, d: LossDistribution) -> StopLossParams:
    """Optimal ceded stop-loss when the ceding company uses ``CVaR_alpha``.

    The upper break is the smallest level above ``alpha`` where the second
    branch of the sign function turns nonnegative; if none exists the cover
    runs to the essential supremum.
    """
    pi2 = _premium(premium)
    target = _check_inputs(alpha, rho, pi2, d)
    if not is_convex(pi2):
        raise PreconditionError("premium distortion must be convex")
    u = _attachment_level(pi2, target, alpha)
    a_star = float(d.quantile(u))
    x_star = _upper_level_gap(alpha, rho, pi2)
    if x_star is None:
        b_level = 1.0
        upper = d.support()[1]
    else:
        b_level = 1.0 - x_star
        upper = float(d.isf(x_star))
    limit = upper - a_star
    var_limit = float(d.quantile(alpha)) - a_star
    if b_level < alpha or limit < var_limit:
        raise PreconditionError("upper break fell below the VaR level; hypotheses violated")
    return StopLossParams(a_star, float(d.quantile(target)), limit, alpha, rho, upper, b_level)


def var_vs_var(alpha: float, beta: float, rho: float, d: LossDistribution) -> Solution:
    """Ceding company on ``VaR_alpha`` against a ``VaR_beta`` premium.

    For ``alpha <= beta`` the ceding problem is solved (no cession is optimal).
    For ``alpha > beta`` the roles swap: the reinsurer, measuring with
    ``VaR_beta`` and priced at ``VaR_alpha``, is solved and accepts the whole loss.
    """
    if not (0.0 < alpha < 1.0 and 0.0 < beta < 1.0):
        raise DomainError("alpha and beta must lie in (0, 1)")
    if alpha <= beta:
        return solve(build_ceding(rho, VaRStep(alpha), VaRStep(beta), d))
    return solve(build_reinsurer(rho, VaRStep(beta), VaRStep(alpha), d))


__all__ = [
    "StopLossParams",
    "bisect",
    "stoploss_var",
    "stoploss_cvar",
    "var_vs_var",
]

import math

import numpy as np
import pytest

from reinsopt.closed_form import StopLossParams, bisect, stoploss_cvar, stoploss_var, var_vs_var
from reinsopt.dist_model import Empirical, Exponential, Lognormal, Uniform
from reinsopt.distortion import CVaRRamp, ExpectedValue, PiecewiseLinear, VaRStep, Wang
from reinsopt.errors import DomainError, PreconditionError
from reinsopt.solver import build_ceding, objective, solve

LN10, LN12 = math.log(10.0), math.log(1.2)

# (alpha, rho, premium, loss) cells satisfying rho/(1+rho) < Pi2(alpha)
ELIGIBLE = [
    (0.9, 0.2, ExpectedValue(), Exponential(1.0)),
    (0.95, 0.1, ExpectedValue(), Lognormal(0.0, 0.5)),
    (0.9, 0.01, Wang(3.6), Exponential(1.0)),
    (0.95, 0.01, Wang(3.6), Exponential(2.0)),
    (0.99, 0.01, Wang(3.6), Exponential(1.0)),
    (0.9, 0.3, Wang(0.5), Lognormal(0.0, 1.0)),
    (0.9, 0.05, Wang(1.5), Uniform(0.0, 3.0)),
]


def test_var_example():
    sl = stoploss_var(0.9, 0.2, ExpectedValue(), Exponential(1.0))
    assert sl.a_star == pytest.approx(LN12, abs=1e-11)
    assert sl.limit == pytest.approx(LN10 - LN12, abs=1e-11)
    assert sl.a_star == sl.d_star


def test_zero_loading():
    sl = stoploss_var(0.9, 0.0, Wang(1.0), Exponential(1.0))
    assert sl.a_star == 0.0
    assert sl.limit == pytest.approx(LN10)


def test_cvar_identity_premium_covers_whole_tail():
    sl = stoploss_cvar(0.9, 0.2, ExpectedValue(), Exponential(1.0))
    assert sl.b_level == 1.0 and sl.limit == math.inf
    sl = stoploss_cvar(0.9, 0.2, ExpectedValue(), Uniform(0.0, 2.0))
    assert sl.b_star == 2.0


def test_cvar_shares_attachment():
    for alpha, rho, prem, d in ELIGIBLE:
        if prem.strictly_increasing:
            assert stoploss_cvar(alpha, rho, prem, d).a_star == stoploss_var(alpha, rho, prem, d).a_star


@pytest.mark.parametrize("alpha,rho,prem,d", ELIGIBLE)
def test_var_agrees_with_solver(alpha, rho, prem, d):
    sl = stoploss_var(alpha, rho, prem, d)
    sol = solve(build_ceding(rho, VaRStep(alpha), prem, d))
    assert sol.contract.breakpoints == pytest.approx(sl.contract.breakpoints, abs=1e-8)
    assert sol.contract.slopes == sl.contract.slopes
    p = sol.problem
    assert objective(p, sl.contract) == pytest.approx(sol.minimum_value, rel=1e-9)


@pytest.mark.parametrize("alpha,rho,prem,d", ELIGIBLE)
def test_cvar_agrees_with_solver(alpha, rho, prem, d):
    sl = stoploss_cvar(alpha, rho, prem, d)
    sol = solve(build_ceding(rho, CVaRRamp(alpha), prem, d))
    assert sol.contract.breakpoints == pytest.approx(sl.contract.breakpoints, abs=1e-8)
    assert sol.contract.slopes == sl.contract.slopes
    assert objective(sol.problem, sl.contract) == pytest.approx(sol.minimum_value, rel=1e-9)


@pytest.mark.parametrize("alpha,rho,prem,d", ELIGIBLE)
def test_cvar_limit_dominates_var_limit(alpha, rho, prem, d):
    assert stoploss_cvar(alpha, rho, prem, d).limit >= stoploss_var(alpha, rho, prem, d).limit


def test_precondition_refusal_and_sharpness():
    d = Exponential(1.0)
    # Pi2(0.9) for Wang(3.6) is about 0.0102, far below 0.5 / 1.5
    with pytest.raises(PreconditionError, match="rho/\\(1\\+rho\\) < Pi2"):
        stoploss_var(0.9, 0.5, Wang(3.6), d)
    with pytest.raises(PreconditionError):
        stoploss_cvar(0.9, 0.5, Wang(3.6), d)
    # the general solver then finds no interior stop-loss below the VaR level
    sol = solve(build_ceding(0.5, VaRStep(0.9), Wang(3.6), d))
    assert sol.classification == "zero contract"


def test_rejects_empirical_and_flat_premium():
    with pytest.raises(PreconditionError, match="empirical"):
        stoploss_var(0.9, 0.1, ExpectedValue(), Empirical([(1.0, 0.5), (2.0, 0.5)]))
    with pytest.raises(PreconditionError):
        stoploss_var(0.9, 0.1, CVaRRamp(0.5), Exponential(1.0))
    with pytest.raises(PreconditionError, match="convex"):
        stoploss_cvar(0.9, 0.01, Wang(-0.5), Exponential(1.0))
    with pytest.raises(DomainError):
        stoploss_var(1.0, 0.1, ExpectedValue(), Exponential(1.0))


class TestVarVsVar:
    def test_alpha_below_beta(self):
        assert var_vs_var(0.9, 0.95, 0.2, Exponential(1.0)).classification == "zero contract"

    def test_equal_levels_tie_convention(self):
        assert var_vs_var(0.95, 0.95, 0.2, Exponential(1.0)).contract.classify()[0] == "zero"

    def test_alpha_above_beta(self):
        sol = var_vs_var(0.95, 0.9, 0.2, Exponential(1.0))
        assert sol.classification == "full transfer"

    def test_domain(self):
        with pytest.raises(DomainError):
            var_vs_var(0.0, 0.9, 0.2, Exponential(1.0))


def test_bisect():
    root = bisect(lambda u: u * u - 0.5, 0.0, 1.0)
    assert root == pytest.approx(math.sqrt(0.5), abs=1e-12)


def test_serialization():
    data = stoploss_var(0.9, 0.2, ExpectedValue(), Exponential(1.0)).to_dict()
    assert set(data) == {"a_star", "d_star", "limit", "alpha", "rho"}
    data = stoploss_cvar(0.9, 0.01, Wang(3.6), Exponential(1.0)).to_dict()
    assert {"b_star", "b_level"} <= set(data)

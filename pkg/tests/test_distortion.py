import math

import numpy as np
import pytest
from scipy.special import ndtr, ndtri

from reinsopt.dist_model import Empirical, Exponential, Lognormal, Uniform, truncate
from reinsopt.distortion import (
    CVaRRamp,
    ExpectedValue,
    PiecewiseLinear,
    ProportionalHazard,
    RiskFunctional,
    VaRStep,
    Wang,
    check_regularity,
    from_g,
    from_spec,
    is_convex,
    mean,
    risk_value,
    risk_value_survival_form,
    to_g,
    to_spec,
    with_parameter,
)
from reinsopt.errors import DivergenceError, DomainError, ValidationError

LN10 = math.log(10.0)

DISTORTIONS = [
    ExpectedValue(),
    VaRStep(0.9),
    CVaRRamp(0.9),
    CVaRRamp(0.0),
    Wang(1.0),
    Wang(-1.0),
    Wang(3.6),
    ProportionalHazard(0.5),
    PiecewiseLinear(((0, 0), (0.5, 0.2), (1, 1))),
    PiecewiseLinear(((0, 0), (0.3, 0.3), (0.6, 0.3), (1, 1))),
]


class TestEvalPi:
    def test_examples(self):
        assert ExpectedValue().pi(0.3) == 0.3
        assert VaRStep(0.9).pi(0.9) == 1.0
        assert VaRStep(0.9).pi(0.8999999) == 0.0
        assert CVaRRamp(0.9).pi(0.95) == pytest.approx(0.5, abs=1e-15)

    @pytest.mark.parametrize("dist", DISTORTIONS, ids=repr)
    def test_endpoints_and_monotone(self, dist):
        assert dist.pi(0.0) == 0.0
        assert dist.pi(1.0) == 1.0
        vals = dist.pi(np.linspace(0, 1, 1001))
        assert np.all(np.diff(vals) >= 0)

    @pytest.mark.parametrize("t", [-0.01, 1.01, float("nan")])
    def test_domain(self, t):
        with pytest.raises(DomainError):
            CVaRRamp(0.5).pi(t)

    @pytest.mark.parametrize("dist", DISTORTIONS, ids=repr)
    def test_mass_decomposition(self, dist):
        assert dist.total_mass() == pytest.approx(1.0, abs=1e-12)

    def test_atoms(self):
        assert VaRStep(0.9).atoms() == [(0.9, 1.0)]
        assert CVaRRamp(0.9).atoms() == []

    def test_parameter_validation(self):
        for bad in (lambda: VaRStep(0.0), lambda: VaRStep(1.0), lambda: CVaRRamp(1.0),
                    lambda: ProportionalHazard(0.0), lambda: ProportionalHazard(1.5),
                    lambda: PiecewiseLinear(((0, 0), (0.5, 0.7), (0.6, 0.5), (1, 1))),
                    lambda: PiecewiseLinear(((0, 0.1), (1, 1)))):
            with pytest.raises(ValidationError):
                bad()


class TestDual:
    def test_examples(self):
        xs = np.linspace(0, 1, 11)
        assert np.allclose(to_g(ExpectedValue())(xs), xs, atol=0)
        assert np.allclose(to_g(Wang(0.0))(xs), xs, atol=1e-15)
        g = to_g(VaRStep(0.9))
        assert g(0.0999) == 0.0 and g(0.1001) == 1.0

    @pytest.mark.parametrize("dist", DISTORTIONS, ids=repr)
    def test_round_trip(self, dist):
        back = from_g(to_g(dist))
        ts = np.linspace(0, 1, 2001)
        ts = ts[~np.isin(ts, dist.kinks())]
        assert np.max(np.abs(back.pi(ts) - dist.pi(ts))) <= 1e-12

    def test_from_g_validates_endpoints(self):
        with pytest.raises(ValidationError):
            from_g(lambda x: 0.5 + 0.5 * x)

    def test_from_g_evaluates(self):
        d = from_g(lambda x: x**0.5)
        assert risk_value(d, Uniform(0, 1)) == pytest.approx(2.0 / 3.0, rel=1e-9)


class TestNormal:
    """The Wang transform leans on the normal CDF and its inverse."""

    def test_cdf_reference_values(self):
        assert ndtr(0.0) == 0.5
        assert ndtr(1.959963984540054) == pytest.approx(0.975, rel=1e-15)
        assert ndtr(-8.0) == pytest.approx(6.220960574271785e-16, rel=1e-14)

    def test_round_trip(self):
        ps = np.concatenate([np.geomspace(1e-300, 0.5, 400), 1 - np.geomspace(1e-16, 0.5, 200)])
        back = ndtr(ndtri(ps))
        assert np.max(np.abs(back - ps) / ps) < 1e-9

    def test_wang_pi_g_duality(self):
        w = Wang(2.0)
        xs = np.geomspace(1e-12, 1 - 1e-12, 500)
        assert np.allclose(w.pi(1 - xs), 1 - w.g(xs), atol=1e-15)


class TestRiskValue:
    def test_examples(self, expo, two_atoms):
        assert risk_value(VaRStep(0.9), expo) == pytest.approx(LN10, rel=1e-15)
        assert risk_value(CVaRRamp(0.9), expo) == pytest.approx(1 + LN10, rel=1e-12)
        for d in (expo, two_atoms, Lognormal(0, 1), Uniform(0, 2)):
            assert risk_value(ExpectedValue(), d) == pytest.approx(d.mean(), rel=1e-12)

    def test_wang_lognormal_closed_form(self):
        assert risk_value(Wang(3.6), Lognormal(0, 1)) == pytest.approx(math.exp(4.1), rel=1e-9)

    def test_ph_exponential_closed_form(self):
        # g(x) = x**c on exp(-s) integrates to 1/c
        assert risk_value(ProportionalHazard(0.5), Exponential(1.0)) == pytest.approx(2.0, rel=1e-9)

    def test_var_exact_on_empirical(self, ten_atoms):
        for a in (0.05, 0.15, 0.27, 0.5, 0.9, 0.94, 0.99):
            assert risk_value(VaRStep(a), ten_atoms) == ten_atoms.quantile(a)

    def test_role_does_not_matter(self, expo):
        m = RiskFunctional(Wang(0.7), "measure")
        p = RiskFunctional(Wang(0.7), "premium")
        assert risk_value(m, expo) == risk_value(p, expo)
        with pytest.raises(ValidationError):
            RiskFunctional(Wang(0.7), "price")

    def test_divergence(self):
        # the true value exp(600) is not representable
        d = Lognormal(0.0, 30.0)
        with pytest.raises(DivergenceError):
            risk_value(Wang(5.0), d)
        with pytest.raises(DivergenceError):
            risk_value_survival_form(Wang(5.0), d)

    def test_wang_monotone_in_beta(self, ten_atoms):
        for d in (ten_atoms, Exponential(1.0), Lognormal(0.0, 0.5)):
            for b in (0.0, 0.3, 1.0, 2.0):
                assert risk_value(Wang(b), d) >= mean(d) - 1e-12

    @pytest.mark.parametrize("dist", DISTORTIONS, ids=repr)
    def test_homogeneity_translation(self, dist, ten_atoms):
        base = risk_value(dist, ten_atoms)
        for c, m in ((2.0, 0.0), (0.5, 3.0), (1.0, 1.25)):
            moved = Empirical([(c * v + m, w) for v, w in ten_atoms.points])
            assert risk_value(dist, moved) == pytest.approx(c * base + m, abs=1e-9)


class TestSurvivalForm:
    def test_examples(self):
        assert risk_value_survival_form(ExpectedValue(), Uniform(0, 1)) == pytest.approx(0.5, rel=1e-12)
        for d in (Exponential(1.0), Lognormal(0, 1), Uniform(0, 2)):
            assert risk_value_survival_form(Wang(0.0), d) == pytest.approx(d.mean(), rel=1e-9)
        d = Exponential(1.0)
        a = risk_value(Wang(3.6), d)
        b = risk_value_survival_form(Wang(3.6), d)
        assert abs(a - b) <= 1e-7 * abs(a)

    def test_exact_on_empirical(self, ten_atoms):
        for dist in DISTORTIONS:
            a = risk_value(dist, ten_atoms)
            b = risk_value_survival_form(dist, ten_atoms)
            assert abs(a - b) <= 1e-12 * (1 + abs(a))


class TestRegularity:
    def test_bounded_constant(self):
        rep = check_regularity(CVaRRamp(0.5), Uniform(0, 1), [2.0, 3.0, 4.0])
        assert rep.values[0] == rep.values[1] == rep.values[2]
        assert rep.converged

    def test_cvar_ladder(self, expo):
        rep = check_regularity(CVaRRamp(0.9), expo, [10, 20, 40])
        assert rep.values == sorted(rep.values)
        assert rep.limit_estimate == pytest.approx(1 + LN10, rel=1e-6)

    def test_var_constant_above_quantile(self, expo):
        rep = check_regularity(VaRStep(0.9), expo, [3, 5, 9])
        assert all(v == pytest.approx(LN10, rel=1e-15) for v in rep.values)

    def test_flags_slow_convergence(self):
        rep = check_regularity(ExpectedValue(), Lognormal(0, 2), [5, 10])
        assert not rep.converged

    def test_bad_caps(self, expo):
        with pytest.raises(DomainError):
            check_regularity(VaRStep(0.9), expo, [5, 3])


class TestSpecs:
    @pytest.mark.parametrize("dist", DISTORTIONS, ids=repr)
    def test_round_trip(self, dist):
        assert from_spec(to_spec(dist)) == dist

    def test_examples(self):
        assert from_spec({"kind": "cvar", "alpha": 0.9}) == CVaRRamp(0.9)
        assert from_spec({"kind": "wang", "beta": 3.6}) == Wang(3.6)
        assert from_spec({"kind": "piecewise", "knots": [[0, 0], [0.5, 0.2], [1, 1]]}).pi(0.75) == pytest.approx(0.6)

    def test_errors(self):
        with pytest.raises(ValidationError):
            from_spec({"kind": "entropic"})
        with pytest.raises(ValidationError):
            from_spec({"kind": "cvar"})

    def test_with_parameter(self):
        assert with_parameter(CVaRRamp(0.9), 0.95) == CVaRRamp(0.95)
        assert with_parameter(Wang(1.0), 3.6) == Wang(3.6)
        with pytest.raises(ValidationError):
            with_parameter(ExpectedValue(), 0.5)


def test_convexity_check():
    assert is_convex(Wang(3.6))
    assert is_convex(ExpectedValue())
    assert is_convex(CVaRRamp(0.9))
    assert not is_convex(Wang(-1.0))
    assert not is_convex(VaRStep(0.5))

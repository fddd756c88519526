import math

import numpy as np
import pytest

from reinsopt import contract as ct
from reinsopt.dist_model import Empirical, Exponential, Lognormal, Uniform
from reinsopt.distortion import CVaRRamp, ExpectedValue, VaRStep, Wang, risk_value
from reinsopt.errors import ValidationError

LN10, LN12 = math.log(10.0), math.log(1.2)


def same(f, g, xs=np.linspace(0, 20, 401)):
    return np.allclose(f(xs), g(xs), atol=1e-12, rtol=0)


class TestIntegrate:
    def test_examples(self):
        assert same(ct.integrate_marginal(ct.MarginalIndemnification.constant(1.0)), lambda x: x)
        assert same(ct.integrate_marginal(ct.MarginalIndemnification.constant(0.0)), lambda x: 0 * x)
        a, L = 1.5, 2.0
        h = ct.MarginalIndemnification((0.0, a, a + L), (0.0, 1.0, 0.0))
        f = ct.integrate_marginal(h)
        assert same(f, lambda x: np.minimum(np.maximum(x - a, 0), L))
        assert f.classify() == ("stop-loss", {"attachment": a, "limit": L})

    def test_marginal_validation(self):
        with pytest.raises(ValidationError):
            ct.MarginalIndemnification((0.0, 1.0), (0.5, 1.5))
        with pytest.raises(ValidationError):
            ct.MarginalIndemnification((0.5, 1.0), (0.5, 0.5))
        with pytest.raises(ValidationError):
            ct.MarginalIndemnification((0.0, 2.0, 1.0), (0.5, 0.5, 0.5))

    def test_marginal_right_continuous(self):
        h = ct.MarginalIndemnification((0.0, 1.0), (0.0, 1.0))
        assert h(1.0) == 1.0 and h(0.999) == 0.0


class TestDifferentiate:
    def test_examples(self):
        assert ct.differentiate(ct.identity()).values == (1.0,)
        h = ct.differentiate(ct.stop_loss(1.0, 2.0))
        assert h.breakpoints == (0.0, 1.0, 3.0) and h.values == (0.0, 1.0, 0.0)
        assert ct.differentiate(ct.quota_share(0.5)).values == (0.5,)

    def test_round_trip(self):
        for f in (ct.stop_loss(0.7, 3.1), ct.quota_share(0.3), ct.zero(),
                  ct.IndemnificationFunction((0.0, 1.0, 2.5, 4.0), (0.2, 0.9, 0.0, 0.4))):
            assert ct.integrate_marginal(ct.differentiate(f)) == f

    def test_rejects_invalid(self):
        with pytest.raises(ValidationError):
            ct.differentiate(ct.IndemnificationFunction((0.0,), (1.2,)))


class TestValidate:
    def test_examples(self):
        assert ct.validate(ct.stop_loss(1.0, 2.0))
        rep = ct.validate(ct.IndemnificationFunction((0.0, 1.0), (0.5, 1.2)))
        assert not rep and rep.violation.startswith("x−f(x) decreasing")
        rep = ct.validate(ct.IndemnificationFunction((0.0,), (0.5,), (0.1,)))
        assert not rep and rep.violation == "f(0)≠0"

    def test_other_violations(self):
        rep = ct.validate(ct.IndemnificationFunction((0.0, 1.0), (0.5, -0.1)))
        assert rep.violation.startswith("f decreasing")
        rep = ct.validate(ct.IndemnificationFunction((0.0, 1.0), (0.5, 0.5), (0.0, 0.9)))
        assert rep.violation.startswith("f discontinuous")

    def test_lipschitz_and_bounds(self):
        rng = np.random.default_rng(3)
        f = ct.IndemnificationFunction((0.0, 0.5, 1.7, 3.0), (0.3, 1.0, 0.0, 0.6))
        x, y = rng.uniform(0, 10, 500), rng.uniform(0, 10, 500)
        assert np.all(np.abs(f(x) - f(y)) <= np.abs(x - y) + 1e-12)
        assert np.all((f(x) >= 0) & (f(x) <= x + 1e-12))


class TestRetained:
    def test_examples(self):
        assert same(ct.retained(ct.zero()), lambda x: x)
        a, L = 1.0, 2.0
        assert same(ct.retained(ct.stop_loss(a, L)), lambda x: np.minimum(x, a) + np.maximum(x - a - L, 0))
        assert ct.retained(ct.quota_share(0.3)).slopes == pytest.approx((0.7,))

    def test_involution_and_admissible(self):
        f = ct.IndemnificationFunction((0.0, 0.5, 1.7), (0.3, 1.0, 0.0))
        assert ct.validate(ct.retained(f))
        assert same(ct.retained(ct.retained(f)), f)


def test_convex_combination_closure():
    rng = np.random.default_rng(0)
    for _ in range(20):
        f = ct.stop_loss(rng.uniform(0, 3), rng.uniform(0.1, 4))
        g = ct.IndemnificationFunction((0.0, rng.uniform(0.1, 2)), tuple(rng.uniform(0, 1, 2)))
        gam = rng.uniform()
        c = ct.convex_combination([f, g], [gam, 1 - gam])
        assert ct.validate(c)
        xs = np.linspace(0, 10, 101)
        assert np.allclose(c(xs), gam * f(xs) + (1 - gam) * g(xs), atol=1e-12)


def test_stop_loss_constructor():
    f = ct.stop_loss(0.0)
    assert f.classify()[0] == "identity"
    assert ct.stop_loss(1.0).classify() == ("stop-loss", {"attachment": 1.0, "limit": math.inf})
    with pytest.raises(ValidationError):
        ct.stop_loss(1.0, 0.0)


def test_upper_inverse():
    f = ct.stop_loss(1.0, 2.0)
    assert f.upper_inverse(0.0) == 1.0
    assert f.upper_inverse(1.0) == 2.0
    assert f.upper_inverse(2.0) == math.inf
    assert f.upper_inverse(-0.5) == -math.inf


def test_serialization():
    f = ct.stop_loss(math.log(1.2), LN10 - LN12)
    data = f.to_dict()
    assert data["slopes"] == [0.0, 1.0, 0.0]
    assert data["classification"] == "stop-loss"
    assert ct.IndemnificationFunction.from_dict(data) == f


class TestPushForward:
    def test_identity_and_zero(self):
        d = Exponential(1.0)
        assert ct.push_forward(ct.identity(), d) is d
        z = ct.push_forward(ct.zero(), d)
        assert z.quantile(0.99) == 0.0 and z.cdf(0.0) == 1.0

    def test_stop_loss_quantile(self):
        f = ct.stop_loss(LN12, LN10 - LN12)
        y = ct.push_forward(f, Exponential(1.0))
        assert y.quantile(0.9) == pytest.approx(LN10 - LN12, rel=1e-14)

    @pytest.mark.parametrize("d", [Exponential(1.0), Lognormal(0.0, 0.8), Uniform(0.5, 4.0),
                                   Empirical([(0.5, 0.2), (1.0, 0.3), (4.0, 0.5)])], ids=repr)
    def test_commutation(self, d):
        f = ct.IndemnificationFunction((0.0, 0.8, 1.5, 3.0), (0.4, 1.0, 0.0, 0.7))
        y = ct.push_forward(f, d)
        ts = np.linspace(0.001, 0.999, 300)
        exact = isinstance(d, Empirical)
        for t in ts:
            want = float(f(d.quantile(t)))
            got = float(y.quantile(t))
            if exact:
                assert got == want
            else:
                assert got == pytest.approx(want, abs=1e-9)

    def test_comonotone_additivity_continuous(self):
        d = Exponential(1.0)
        f = ct.stop_loss(0.5, 2.0)
        for dist in (ExpectedValue(), CVaRRamp(0.9), Wang(1.2), VaRStep(0.95)):
            total = risk_value(dist, ct.push_forward(f, d)) + risk_value(dist, ct.push_forward(ct.retained(f), d))
            assert total == pytest.approx(risk_value(dist, d), rel=1e-9)

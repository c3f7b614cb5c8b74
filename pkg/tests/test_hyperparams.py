import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, optimize, stats

from replica_portfolio.errors import DomainError, ParameterError
from replica_portfolio.hyperparams import (
    BoundedPareto,
    Discrete,
    HyperModel,
    HyperParams,
    MomentSet,
    PointMass,
    distribution_from_dict,
    empirical_moments,
    population_moments,
    sample_bounded_pareto,
    sample_hyperparams,
)

PARETO = BoundedPareto(1.0, 2.0, 2.0)
MODEL = HyperModel(PARETO, PARETO, "product")


def pareto_122_moment(power: int) -> Fraction:
    """E[x^power] for density 2 x^-2 on [1, 2], exact."""
    k = power - 1  # integrand 2 x^(power-2)
    if k == 0:
        raise ValueError("E[x] = 2 ln 2 is not rational")
    return Fraction(2, k) * (Fraction(2) ** k - 1)


def exact_122_raw():
    # v = h r^2, so E[v^-a r^k] = E[h^-a] E[r^(k-2a)]
    e = pareto_122_moment
    raw = []
    for a, k in ((1, 0), (1, 1), (1, 2), (2, 0), (2, 1), (2, 2)):
        p = k - 2 * a
        raw.append(e(-a) * (Fraction(1) if p == 0 else e(p)))
    return raw


class TestBoundedPareto:
    def test_endpoints(self):
        assert sample_bounded_pareto(PARETO, 0.0) == 1.0
        assert sample_bounded_pareto(PARETO, 1.0) == 2.0

    def test_midpoint_matches_cdf_bisection(self):
        def cdf(x):
            val, _ = integrate.quad(lambda t: 2.0 / t**2, 1.0, x, epsabs=1e-13, epsrel=1e-13)
            return val

        oracle = optimize.bisect(lambda x: cdf(x) - 0.5, 1.0, 2.0, xtol=1e-12)
        assert sample_bounded_pareto(PARETO, 0.5) == pytest.approx(oracle, abs=1e-10)
        assert 1.0 < oracle < 2.0

    def test_log_branch(self):
        d = BoundedPareto(1.0, 4.0, 1.0)
        np.testing.assert_allclose(d.ppf([0.0, 0.5, 1.0]), [1.0, 2.0, 4.0], rtol=1e-15)
        assert d.expect(lambda x: 1.0) == pytest.approx(1.0, abs=1e-10)

    def test_ks_million_samples(self):
        x = PARETO.sample(np.random.default_rng(2024), 1_000_000)
        res = stats.kstest(x, PARETO.cdf)
        assert res.statistic < 0.01

    @pytest.mark.parametrize(
        "args", [(0.0, 2.0, 2.0), (2.0, 1.0, 2.0), (1.0, 1.0, 2.0), (1.0, 2.0, 0.0), (1.0, math.inf, 2.0)]
    )
    def test_invalid(self, args):
        with pytest.raises(ParameterError):
            BoundedPareto(*args)

    def test_uniform_draw_out_of_range(self):
        with pytest.raises(ParameterError):
            sample_bounded_pareto(PARETO, 1.5)

    @given(
        lo=st.floats(0.1, 5.0),
        width=st.floats(0.01, 5.0),
        c=st.floats(0.2, 5.0),
        u=st.floats(0.0, 1.0),
    )
    def test_ppf_inverts_cdf(self, lo, width, c, u):
        d = BoundedPareto(lo, lo + width, c)
        x = float(d.ppf(u))
        assert d.lower <= x <= d.upper
        assert float(d.cdf(x)) == pytest.approx(u, abs=1e-9)

    def test_normalised(self):
        assert PARETO.expect(lambda x: 1.0) == pytest.approx(1.0, abs=1e-12)
        assert PARETO.expect(lambda x: x) == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_roundtrip_dict(self):
        assert distribution_from_dict(PARETO.to_dict()) == PARETO
        assert distribution_from_dict({"kind": "point_mass", "value": 3}) == PointMass(3.0)
        with pytest.raises(ParameterError):
            distribution_from_dict({"kind": "lognormal"})
        with pytest.raises(ParameterError):
            distribution_from_dict({"kind": "bounded_pareto", "lower": 1})


class TestSampleHyperparams:
    def test_point_mass_limit(self):
        model = HyperModel(PointMass(1.0), PointMass(1.0))
        p = sample_hyperparams(model, 7, 3)
        np.testing.assert_array_equal(p.means, np.ones(7))
        np.testing.assert_array_equal(p.variances, np.ones(7))

    def test_large_sample_means(self):
        p = sample_hyperparams(MODEL, 100_000, 11)
        r = p.means
        assert abs(r.mean() - 2 * math.log(2)) < 3 * r.std(ddof=1) / math.sqrt(r.size)
        iv = 1.0 / p.variances
        target = PARETO.expect(lambda x: 1 / x) * PARETO.expect(lambda x: x**-2)
        assert abs(iv.mean() - target) < 3 * iv.std(ddof=1) / math.sqrt(iv.size)

    def test_deterministic(self):
        a = sample_hyperparams(MODEL, 50, 9)
        b = sample_hyperparams(MODEL, 50, 9)
        np.testing.assert_array_equal(a.means, b.means)
        np.testing.assert_array_equal(a.variances, b.variances)

    def test_independent_coupling(self):
        model = HyperModel(PARETO, PointMass(2.5), "independent")
        p = sample_hyperparams(model, 20, 1)
        np.testing.assert_array_equal(p.variances, np.full(20, 2.5))

    def test_point_mass_keeps_stream_aligned(self):
        # Swapping the second law must not change the drawn means.
        a = sample_hyperparams(HyperModel(PARETO, PointMass(1.0)), 30, 5)
        b = sample_hyperparams(HyperModel(PARETO, PARETO), 30, 5)
        np.testing.assert_array_equal(a.means, b.means)

    def test_invalid_models(self):
        with pytest.raises(ParameterError):
            HyperModel(PointMass(0.0), PARETO, "product")
        with pytest.raises(ParameterError):
            HyperModel(PARETO, PointMass(-1.0), "independent")
        with pytest.raises(ParameterError):
            HyperModel(PARETO, PARETO, "sum")
        with pytest.raises(ParameterError):
            sample_hyperparams(MODEL, 0, 1)


class TestHyperParams:
    def test_validation(self):
        with pytest.raises(ParameterError):
            HyperParams(np.ones(3), np.ones(2))
        with pytest.raises(DomainError):
            HyperParams(np.ones(2), np.array([1.0, 0.0]))
        with pytest.raises(ParameterError):
            HyperParams(np.array([np.nan]), np.ones(1))


class TestMoments:
    def test_population_122_exact(self):
        m = population_moments(MODEL)
        raw = exact_122_raw()
        got = [m.m_v1, m.m_v1r, m.m_v1r2, m.m_v2, m.m_v2r, m.m_v2r2]
        np.testing.assert_allclose(got, [float(x) for x in raw], rtol=1e-10)
        assert m.m_v1 == pytest.approx(0.4375, rel=1e-10)
        assert m.R1 == pytest.approx(9 / 7, rel=1e-10)
        assert m.V1 == pytest.approx(3 / 49, rel=1e-9)
        assert m.V1 > 0

    def test_point_mass(self):
        m = population_moments(HyperModel(PointMass(1.5), PointMass(0.25), "independent"))
        assert m.R1 == m.R2 == 1.5
        assert m.V1 == 0.0 and m.V2 == 0.0
        assert m.m_v1 == 4.0

    def test_discrete_law(self):
        model = HyperModel(Discrete((1.0, 3.0)), PointMass(1.0), "independent")
        m = population_moments(model)
        assert m.R1 == 2.0 and m.V1 == 1.0

    def test_empirical_single_asset(self):
        m = empirical_moments(HyperParams(np.array([2.0]), np.array([4.0])))
        assert m.m_v1 == 0.25 and m.R1 == 2.0 and m.V1 == 0.0

    def test_empirical_two_assets(self):
        m = empirical_moments(HyperParams(np.array([1.0, 3.0]), np.array([1.0, 1.0])))
        assert m.R1 == 2.0 and m.V1 == 1.0

    def test_empirical_converges_to_population(self):
        p = sample_hyperparams(MODEL, 100_000, 4)
        emp = empirical_moments(p)
        pop = population_moments(MODEL)
        r, iv = p.means, 1.0 / p.variances
        for values, target in ((iv, pop.m_v1), (iv * r, pop.m_v1r), (iv * r * r, pop.m_v1r2)):
            se = values.std(ddof=1) / math.sqrt(values.size)
            assert abs(values.mean() - target) < 3 * se
        assert emp.m_v1 == pytest.approx(iv.mean(), rel=1e-12)

    def test_negative_variance_rejected(self):
        with pytest.raises(DomainError):
            MomentSet.from_raw(1.0, 2.0, 1.0, 1.0, 1.0, 1.0)
        with pytest.raises(DomainError):
            MomentSet.from_raw(-1.0, 1.0, 1.0, 1.0, 1.0, 1.0)

    @settings(max_examples=50)
    @given(c=st.floats(0.01, 100.0), d=st.floats(-3.0, 3.0))
    def test_scale_and_shift_match_direct_recomputation(self, c, d):
        rng = np.random.default_rng(0)
        r, v = rng.uniform(0.5, 2.0, 12), rng.uniform(0.5, 3.0, 12)
        base = empirical_moments(HyperParams(r, v))
        scaled = empirical_moments(HyperParams(r, c * v))
        shifted = empirical_moments(HyperParams(r + d, v))
        for a, b in ((base.scaled_variances(c), scaled), (base.shifted_means(d), shifted)):
            np.testing.assert_allclose(
                [a.m_v1, a.m_v1r, a.m_v1r2, a.m_v2, a.R1, a.V1],
                [b.m_v1, b.m_v1r, b.m_v1r2, b.m_v2, b.R1, b.V1],
                rtol=1e-9,
                atol=1e-12,
            )

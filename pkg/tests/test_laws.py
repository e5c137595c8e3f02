import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, stats

from mapexp.laws import (
    BivariateAtoms,
    CurveLaw,
    DiscreteLaw,
    ExponentialLaw,
    LogParetoLaw,
    NormalLaw,
    ParetoLaw,
    PointMass,
    ProductLaw,
    bivariate_atom,
)


# ---------------------------------------------------------------------------
# marginals against quadrature oracles
# ---------------------------------------------------------------------------


def test_point_mass_basics():
    pm = PointMass(1.5)
    assert pm.mean().value == 1.5
    assert pm.sf(1.0) == 1.0 and pm.sf(1.5) == 0.0
    assert pm.integrated_sf(0.0, 3.0) == pytest.approx(1.5)
    rng = np.random.default_rng(0)
    assert np.all(pm.sample(rng, 5) == 1.5)


def test_discrete_law_moments():
    law = DiscreteLaw(xs=(-1.0, 2.0), ps=(0.25, 0.75))
    assert law.mean().value == pytest.approx(-0.25 + 1.5)
    assert law.mean_pos() == pytest.approx(1.5)
    assert law.mean_neg() == pytest.approx(0.25)
    assert law.abs_mean() == pytest.approx(1.75)
    assert law.prob_abs_ge(1.0) == pytest.approx(1.0)
    assert law.prob_abs_ge(1.5) == pytest.approx(0.75)


def test_normal_law_against_scipy():
    law = NormalLaw(0.3, 1.7)
    ref = stats.norm(0.3, 1.7)
    for x in (-2.0, 0.0, 1.4):
        assert law.sf(x) == pytest.approx(ref.sf(x), rel=1e-12)
        assert law.pdf(x) == pytest.approx(ref.pdf(x), rel=1e-12)
    assert law.mean().value == pytest.approx(0.3, abs=1e-9)
    # integrated survival over [a, b] against direct quadrature
    oracle, _ = integrate.quad(ref.sf, -1.0, 4.0)
    assert law.integrated_sf(-1.0, 4.0) == pytest.approx(oracle, rel=1e-8)


def test_exponential_law_against_scipy():
    law = ExponentialLaw(rate=1.4)
    ref = stats.expon(scale=1.0 / 1.4)
    assert law.sf(0.9) == pytest.approx(ref.sf(0.9), rel=1e-12)
    assert law.mean().value == pytest.approx(1.0 / 1.4, rel=1e-9)
    oracle, _ = integrate.quad(ref.sf, 0.5, math.inf)
    assert law.integrated_sf(0.5, math.inf) == pytest.approx(oracle, rel=1e-8)
    # E[e^-X] = rate / (rate + 1)
    assert law.exp_neg_mean() == pytest.approx(1.4 / 2.4, rel=1e-9)


def test_pareto_law_against_scipy():
    law = ParetoLaw(alpha=2.5, xm=1.5)
    ref = stats.pareto(b=2.5, scale=1.5)
    for x in (1.6, 3.0, 10.0):
        assert law.sf(x) == pytest.approx(ref.sf(x), rel=1e-12)
    assert law.mean().value == pytest.approx(ref.mean(), rel=1e-9)
    heavy = ParetoLaw(alpha=0.8, xm=1.0)
    assert heavy.mean_pos() == math.inf


def test_log_pareto_tail_and_log_moment():
    # P(log X > u) = (xm/u)^alpha for u > xm
    law = LogParetoLaw(alpha=2.0, xm=1.0)
    assert law.sf(math.exp(2.0)) == pytest.approx(0.25, rel=1e-12)
    assert law.sf(math.exp(0.5)) == 1.0
    # E[log+ X] = 1 + int_1^inf u^-2 du = 2, the closed-form tail oracle
    oracle = 1.0 + integrate.quad(lambda u: u ** -2.0, 1.0, math.inf)[0]
    assert law.log_mean() == pytest.approx(oracle, rel=1e-9)
    assert oracle == pytest.approx(2.0)
    # alpha = 1 tail is not log-integrable
    assert LogParetoLaw(alpha=1.0, xm=1.0).log_mean() == math.inf


def test_log_pareto_sampling_matches_sf():
    law = LogParetoLaw(alpha=1.5, xm=1.0)
    rng = np.random.default_rng(42)
    vals = law.sample(rng, 20_000)
    # empirical tail at a few thresholds
    for u in (1.5, 2.5, 4.0):
        emp = np.mean(np.log(vals) > u)
        assert emp == pytest.approx(u ** -1.5, abs=4 * math.sqrt(0.25 / 20_000) + 0.01)


def test_curve_law_support():
    # (x, ci - cj e^-x) pairs: exactly the degeneracy curve
    law = CurveLaw(1.0, 2.0, DiscreteLaw(xs=(-0.3, 0.4), ps=(0.5, 0.5)))
    rng = np.random.default_rng(7)
    xs, ys = law.sample(rng, 256)
    assert np.allclose(ys, 1.0 - 2.0 * np.exp(-xs), rtol=0, atol=1e-15)
    assert set(np.round(xs, 6)) <= {-0.3, 0.4}


def test_product_law_marginals():
    law = ProductLaw(PointMass(0.0), ExponentialLaw(rate=2.0))
    rng = np.random.default_rng(3)
    xs, ys = law.sample(rng, 1000)
    assert np.all(xs == 0.0)
    assert law.marginal_x().is_zero()
    assert law.marginal_y().mean().value == pytest.approx(0.5)
    assert np.mean(ys) == pytest.approx(0.5, abs=0.06)


def test_bivariate_atoms():
    law = BivariateAtoms(ps=(0.5, 0.5), xs=(0.2, -0.1), ys=(0.3, -0.2))
    mx, my = law.marginal_x(), law.marginal_y()
    assert mx.mean().value == pytest.approx(0.05)
    assert my.mean().value == pytest.approx(0.05)
    single = bivariate_atom(1.0, -1.0)
    assert single.marginal_x().atoms() == [(1.0, 1.0)]
    assert single.marginal_y().atoms() == [(1.0, -1.0)]


# ---------------------------------------------------------------------------
# interface properties
# ---------------------------------------------------------------------------


@given(x=st.floats(-50, 50), y=st.floats(-50, 50))
@settings(max_examples=60, deadline=None)
def test_sf_monotone_normal(x, y):
    law = NormalLaw(0.0, 2.0)
    lo, hi = min(x, y), max(x, y)
    assert law.sf(lo) >= law.sf(hi)


@given(rate=st.floats(0.1, 5.0), a=st.floats(0.0, 3.0), w=st.floats(0.1, 3.0))
@settings(max_examples=40, deadline=None)
def test_integrated_sf_additive_exponential(rate, a, w):
    law = ExponentialLaw(rate=rate)
    b = a + w
    mid = a + w / 2
    total = law.integrated_sf(a, b)
    split = law.integrated_sf(a, mid) + law.integrated_sf(mid, b)
    assert total == pytest.approx(split, rel=1e-9, abs=1e-12)


@given(alpha=st.floats(1.2, 4.0), xm=st.floats(0.3, 2.0))
@settings(max_examples=30, deadline=None)
def test_log_pareto_log_mean_decreases_in_alpha(alpha, xm):
    law = LogParetoLaw(alpha=alpha, xm=xm)
    heavier = LogParetoLaw(alpha=alpha * 0.9, xm=xm)
    assert heavier.log_mean() >= law.log_mean() - 1e-12

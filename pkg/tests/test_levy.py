import math

import numpy as np
import pytest
from scipy import integrate

from mapexp.laws import (
    ExponentialLaw,
    LogParetoLaw,
    PointMass,
    bivariate_atom,
)
from mapexp.levy import (
    DIVERGENT,
    FINITE,
    INDETERMINATE,
    MassMeasure,
    NotEventuallyPositive,
    NotFiniteState,
    PreconditionFailed,
    XiData,
    a_bar_fn,
    a_fn,
    a_root,
    choose_a,
    erickson_maller_test,
    ladder_integral,
    log_moment_test,
)
from mapexp.model import DenseFiniteChain, JumpComponent, LevyTripletBiv, MapSpec
from mapexp.scenarios import build_scenario


def pure_drift(mu):
    return LevyTripletBiv(drift_xi=mu, drift_eta=0.0)


def xi_with_atom(drift, rate, x):
    jumps = JumpComponent(rate=rate, law=bivariate_atom(x, 0.0))
    return LevyTripletBiv(drift_xi=drift, drift_eta=0.0, jumps=jumps)


# ---------------------------------------------------------------------------
# the A function and its root
# ---------------------------------------------------------------------------


def test_a_fn_atom_closed_form():
    # jumps of size 2 at rate 0.7: nu-bar-plus(y) = 0.7 for y < 2, so
    # A(x) = 0.3 + 0.7 * min(x, 2)
    t = xi_with_atom(0.3, 0.7, 2.0)
    assert a_fn(t, 1.0) == pytest.approx(1.0, rel=1e-12)
    assert a_fn(t, 1.5) == pytest.approx(1.35, rel=1e-12)
    assert a_fn(t, 3.0) == pytest.approx(1.7, rel=1e-12)
    assert a_fn(t, 50.0) == pytest.approx(1.7, rel=1e-12)


def test_a_fn_matches_quadrature_for_exponential_jumps():
    lam, beta, b = 1.3, 0.8, -0.2
    law = ExponentialLaw(beta)
    t = LevyTripletBiv(drift_xi=b, drift_eta=0.0,
                       jumps=JumpComponent(rate=lam, law=bivariate_atom(0.0, 0.0)))
    # build the triplet with an xi-marginal exponential by hand
    t = LevyTripletBiv(
        drift_xi=b, drift_eta=0.0,
        jumps=JumpComponent(rate=lam, law=__import__("mapexp.laws", fromlist=["ProductLaw"]).ProductLaw(law, PointMass(0.0))))

    def oracle(x):
        small, _ = integrate.quad(lambda y: y * law.pdf(y), 0.0, 1.0)
        tail, _ = integrate.quad(lambda y: float(law.sf(y)), 1.0, x)
        return b + lam * small + lam * float(law.sf(1.0)) + lam * tail

    for x in (1.0, 2.0, 7.5, 40.0):
        assert a_fn(t, x) == pytest.approx(oracle(x), rel=1e-8)


def test_a_fn_rejects_domain_below_one():
    with pytest.raises(ValueError):
        a_fn(pure_drift(1.0), 0.5)


def test_a_root_is_one_when_positive_at_one():
    assert a_root(pure_drift(2.0)) == 1.0
    assert choose_a(pure_drift(2.0)) == pytest.approx(1.01)


def test_a_root_bisection():
    # A(x) = -1.5 + min(x, 2) crosses zero at x = 1.5
    t = xi_with_atom(-1.5, 1.0, 2.0)
    assert a_root(t) == pytest.approx(1.5, abs=1e-6)
    assert choose_a(t) == pytest.approx(1.51, abs=1e-6)


def test_a_root_not_eventually_positive():
    t = xi_with_atom(-3.0, 1.0, 2.0)  # sup A = -1
    with pytest.raises(NotEventuallyPositive):
        a_root(t)


def test_a_root_zero_drift_negative_jumps():
    t = xi_with_atom(0.0, 1.0, -1.0)  # nu-bar-plus = 0, A = 0 everywhere
    with pytest.raises(NotEventuallyPositive):
        a_root(t)


def test_with_excursions_shifts_a():
    base = XiData.from_triplet(xi_with_atom(0.3, 0.7, 2.0))
    mixed = base.with_excursions(np.array([0.5, 2.0]), weight=2.0)
    # gamma gains 2 * mean(small) = 0.5; tail gains mass 1 above 1 up to 2
    dx = a_fn(mixed, 3.0) - a_fn(base, 3.0)
    assert dx == pytest.approx(0.5 + 1.0 + 1.0, rel=1e-12)


# ---------------------------------------------------------------------------
# the stationary-averaged A function
# ---------------------------------------------------------------------------


def two_state_switch_spec(d0=0.2, d1=0.4):
    q = np.array([[-0.5, 0.5], [0.8, -0.8]])
    return MapSpec(
        chain=DenseFiniteChain(q),
        triplets={0: LevyTripletBiv(drift_xi=d0, drift_eta=1.0),
                  1: LevyTripletBiv(drift_xi=d1, drift_eta=1.0)},
        switch_laws={(0, 1): bivariate_atom(1.0, 0.0),
                     (1, 0): bivariate_atom(1.0, 0.0)})


def test_a_bar_two_state_constant_switch():
    # pi = (0.8, 0.5) / 1.3; unit switch jumps contribute pi_j q_jk
    spec = two_state_switch_spec()
    want = (0.8 * (0.2 + 0.5) + 0.5 * (0.4 + 0.8)) / 1.3
    for x in (1.0, 5.0, 100.0):
        assert a_bar_fn(spec, x) == pytest.approx(want, rel=1e-12)


def test_a_bar_limit_is_kappa_for_positive_jumps():
    from mapexp.model import long_term_mean

    spec = two_state_switch_spec()
    kappa = long_term_mean(spec, "xi").value.value
    assert a_bar_fn(spec, 1e6) == pytest.approx(kappa, rel=1e-9)


def test_a_bar_needs_finite_chain():
    spec = build_scenario("ex43").spec
    with pytest.raises(NotFiniteState):
        a_bar_fn(spec, 2.0)


# ---------------------------------------------------------------------------
# the integral test against a target measure
# ---------------------------------------------------------------------------


def test_em_atom_exact():
    # I = rate * log(y) / mu for one atom beyond e^a
    xi = pure_drift(1.5)
    measure = MassMeasure.from_jump_abs(0.6, PointMass(math.exp(2.0)))
    res = erickson_maller_test(xi, measure)
    assert res.verdict == FINITE
    assert res.value == pytest.approx(0.8, rel=1e-12)
    assert any("exact" in f for f in res.flags)


def test_em_boundary_atom_included():
    xi = pure_drift(1.5)
    y0 = math.exp(2.0)
    measure = MassMeasure.from_jump_abs(0.6, PointMass(y0))
    # place the cutoff exactly on the atom's log position (the float
    # round trip log(exp(2)) need not give 2.0 back)
    u0 = float(np.log(np.array([y0]))[0])
    at_boundary = erickson_maller_test(xi, measure, a=u0)
    assert at_boundary.value == pytest.approx(0.6 * u0 / 1.5, rel=1e-12)
    beyond = erickson_maller_test(xi, measure, a=float(np.nextafter(u0, np.inf)))
    assert beyond.value == 0.0


def test_em_continuous_matches_quadrature():
    # log-jump tail u^-3 against constant A = mu
    lam, mu, a = 0.6, 1.5, 1.25
    xi = pure_drift(mu)
    measure = MassMeasure.from_jump_abs(lam, LogParetoLaw(alpha=3.0, xm=1.0))

    def integrand(u):
        return (u / mu) * lam * 3.0 * u ** -4.0

    want, _ = integrate.quad(integrand, a, np.inf)
    assert want == pytest.approx(0.6 * a ** -2.0, rel=1e-9)

    res = erickson_maller_test(xi, measure, a=a)
    assert res.verdict == FINITE
    assert res.value == pytest.approx(want, rel=0.02)


def test_em_cutoff_choice_does_not_change_verdict():
    xi = pure_drift(1.5)
    measure = MassMeasure.from_jump_abs(0.6, LogParetoLaw(alpha=3.0, xm=1.0))
    r1 = erickson_maller_test(xi, measure, a=1.25)
    r2 = erickson_maller_test(xi, measure, a=2.5)
    assert r1.verdict == r2.verdict == FINITE
    assert r2.value == pytest.approx(0.6 * 2.5 ** -2.0, rel=0.02)


def test_em_divergent_log_tail():
    # nu-bar_eta(y) = 1 / log y makes the integrand ~ 1/(mu u): diverges
    xi = pure_drift(1.5)
    measure = MassMeasure.from_jump_abs(0.5, LogParetoLaw(alpha=1.0, xm=2.0))
    res = erickson_maller_test(xi, measure)
    assert res.verdict == DIVERGENT


def test_em_precondition_failure():
    xi = xi_with_atom(-3.0, 1.0, 2.0)
    measure = MassMeasure.from_jump_abs(1.0, PointMass(10.0))
    with pytest.raises(PreconditionFailed):
        erickson_maller_test(xi, measure)
    with pytest.raises(PreconditionFailed):
        erickson_maller_test(pure_drift(-1.0), measure, a=1.5)


def test_em_empty_measure_finite():
    res = erickson_maller_test(pure_drift(1.0), MassMeasure())
    assert res.verdict == FINITE and res.value == 0.0


# ---------------------------------------------------------------------------
# ladder verdicts on sample-based measures
# ---------------------------------------------------------------------------


def g_over(mu):
    return lambda u: u / mu


def test_ladder_sample_insufficient_tail():
    # one point per octave: looks divergent, but too thin to judge
    values = np.exp(2.0 ** np.arange(10))
    measure = MassMeasure.from_sample_abs(values, 1.0)
    res = ladder_integral(measure, g_over(1.5), u_start=1.01)
    assert res.verdict == INDETERMINATE
    assert any("InsufficientTail" in f for f in res.flags)


def test_ladder_sample_narrow_support_is_finite():
    values = np.exp(np.linspace(1.2, 3.0, 200))
    measure = MassMeasure.from_sample_abs(values, 1.0)
    res = ladder_integral(measure, g_over(1.5), u_start=1.01)
    assert res.verdict == FINITE
    assert any("octaves" in f for f in res.flags)


def test_ladder_sample_light_tail_is_finite():
    # dominant mass low plus a sparse, light tail over six octaves
    tail_u = np.linspace(70.0, 96.0, 30)
    measure = MassMeasure(
        atom_y=np.exp(np.concatenate([[1.5], tail_u])),
        atom_m=np.concatenate([[1.0], np.full(30, 1e-9)]),
        sample_based=True)
    res = ladder_integral(measure, g_over(1.5), u_start=1.01)
    assert res.verdict == FINITE


def test_ladder_saturated_sample_diverges():
    values = np.array([3.0, 8.0, np.inf])
    measure = MassMeasure.from_sample_abs(values, 1.0)
    res = ladder_integral(measure, g_over(1.0), u_start=1.01)
    assert res.verdict == DIVERGENT
    assert res.value == math.inf
    assert any("infinity" in f for f in res.flags)


def test_ladder_trace_is_log_argument():
    measure = MassMeasure.from_jump_abs(0.6, PointMass(math.exp(2.0)))
    res = ladder_integral(measure, g_over(1.0), u_start=1.01)
    rungs = [u for u, _ in res.trace]
    assert rungs[0] == pytest.approx(1.01)
    for a, b in zip(rungs, rungs[1:]):
        assert b == pytest.approx(2 * a)


# ---------------------------------------------------------------------------
# log-moment tests
# ---------------------------------------------------------------------------


def test_log_moment_pareto_log_tail():
    # P(log q > u) = u^-2 above 1: E[log q] = 2
    res = log_moment_test(LogParetoLaw(alpha=2.0, xm=1.0))
    assert res.verdict == FINITE
    assert res.value == pytest.approx(2.0, rel=1e-3)


def test_log_moment_divergent_log_tail():
    res = log_moment_test(LogParetoLaw(alpha=1.0, xm=1.0))
    assert res.verdict == DIVERGENT


def test_log_moment_sample_value_is_mean_log():
    rng = np.random.default_rng(1234)
    q = LogParetoLaw(alpha=2.0, xm=1.0).sample(rng, 40_000)
    res = log_moment_test(q)
    # a u^-2 log tail keeps per-octave relative changes ~ 1/u, above the
    # window tolerance at any sample max this size reaches, so a finite
    # sample honestly cannot certify integrability here
    assert res.verdict in (DIVERGENT, INDETERMINATE)
    assert res.value == pytest.approx(np.mean(np.log(q)), rel=1e-9)


def test_log_moment_a_bar_denominator():
    spec = two_state_switch_spec()
    abar = a_bar_fn(spec, 5.0)
    res = log_moment_test(LogParetoLaw(alpha=3.0, xm=1.0),
                          denominator="a_bar", spec=spec)
    assert res.verdict == FINITE
    assert res.value == pytest.approx(1.5 / abar, rel=2e-3)


def test_log_moment_empirical_denominator_needs_positive_mass():
    res = log_moment_test(np.array([2.0, 3.0]),
                          denominator="empirical_xi_tail",
                          xi_sample=np.array([-1.0, -2.0]))
    assert res.verdict == INDETERMINATE
    assert any("denominator" in f for f in res.flags)


def test_log_moment_empirical_denominator_linear_tail():
    # xi sample all equal to 1: E[min(xi^+, x)] = min(1, x), so the
    # denominator equals 1 beyond u = 1 and the value matches D = 1
    law = LogParetoLaw(alpha=2.0, xm=1.0)
    res_c = log_moment_test(law)
    res_e = log_moment_test(law, denominator="empirical_xi_tail",
                            xi_sample=np.ones(100))
    assert res_e.value == pytest.approx(res_c.value, rel=1e-9)


def test_log_moment_rejects_unknown_mode():
    with pytest.raises(ValueError):
        log_moment_test(np.array([2.0]), denominator="bogus")

import dataclasses
import math

import numpy as np
import pytest
from scipy import integrate

from mapexp.classify import (
    CriterionConfig,
    as_criterion,
    classify,
    decompose_e1_e2,
    prob_criterion,
    sufficient_suite,
    xi_divergence_diagnostic,
)
from mapexp.engine import RngPolicy, exp_integral, simulate_path
from mapexp.laws import (
    BivariateAtoms,
    LogParetoLaw,
    ParetoLaw,
    PointMass,
    ProductLaw,
    bivariate_atom,
)
from mapexp.levy import DIVERGENT, FINITE, a_bar_fn, log_moment_test
from mapexp.model import (
    HUB,
    DenseFiniteChain,
    JumpComponent,
    LevyTripletBiv,
    MapSpec,
    long_term_mean,
)
from mapexp.scenarios import build_scenario

from conftest import random_single_state_spec


def light_two_state():
    q = np.array([[-1.0, 1.0], [1.0, -1.0]])
    return MapSpec(
        chain=DenseFiniteChain(q),
        triplets={0: LevyTripletBiv(drift_xi=1.0, drift_eta=1.0),
                  1: LevyTripletBiv(drift_xi=0.8, drift_eta=-0.5)},
        switch_laws={(0, 1): bivariate_atom(0.1, 0.2),
                     (1, 0): bivariate_atom(-0.05, 0.1)})


def small_cfg(**kw):
    base = dict(n_paths=100, horizon=30.0, mesh=0.25,
                ladder=(7.5, 15.0, 30.0), seed=17)
    base.update(kw)
    return CriterionConfig(**base)


def infinite_kappa_spec():
    # xi jumps with infinite mean push kappa to +inf while the chain
    # stays finite, the regime where the stationary-averaged denominator
    # still certifies integrability
    q = np.array([[-1.0, 1.0], [1.0, -1.0]])
    jumps = JumpComponent(rate=1.0,
                          law=ProductLaw(ParetoLaw(alpha=0.5, xm=1.0),
                                         PointMass(0.0)))
    trip = LevyTripletBiv(drift_xi=0.5, drift_eta=1.0, jumps=jumps)
    return MapSpec(chain=DenseFiniteChain(q),
                   triplets={0: trip, 1: dataclasses.replace(trip)},
                   switch_laws={(0, 1): bivariate_atom(0.0, 2.5),
                                (1, 0): bivariate_atom(0.0, 0.5)})


# ---------------------------------------------------------------------------
# configuration plumbing
# ---------------------------------------------------------------------------


def test_config_requires_enough_paths():
    with pytest.raises(ValueError):
        CriterionConfig(n_paths=50)


def test_config_json_omits_threads():
    cfg = small_cfg(threads=8)
    js = cfg.as_json()
    assert "threads" not in js
    assert js["seed"] == 17 and js["ladder"] == [7.5, 15.0, 30.0]


def test_start_state_defaults():
    cfg = small_cfg()
    assert cfg.start_state(light_two_state()) == 0
    assert cfg.start_state(build_scenario("ex43").spec) == HUB
    assert small_cfg(start=1).start_state(light_two_state()) == 1


# ---------------------------------------------------------------------------
# single-state reduction: the three tests agree
# ---------------------------------------------------------------------------


def test_single_state_cross_oracle_agreement():
    rng = np.random.default_rng(404)
    cfg = small_cfg()
    for _ in range(5):
        spec = random_single_state_spec(rng, heavy=False)
        a = as_criterion(spec, cfg)
        p = prob_criterion(spec, cfg)
        (sa,) = a.values()
        (sp,) = p.values()
        assert sa.verdict == sp.verdict == FINITE


def test_single_state_divergent_agreement():
    spec = build_scenario("em_divergent").spec
    cfg = small_cfg()
    (sa,) = as_criterion(spec, cfg).values()
    (sp,) = prob_criterion(spec, cfg).values()
    assert sa.verdict == sp.verdict == DIVERGENT


# ---------------------------------------------------------------------------
# xi divergence gate
# ---------------------------------------------------------------------------


def test_xi_divergence_analytic_modes():
    cfg = small_cfg()
    up, detail = xi_divergence_diagnostic(light_two_state(), cfg)
    assert set(up.values()) == {"PassesToInfinity"}
    assert all(d["mode"] == "analytic" for d in detail.values())

    down_spec = MapSpec(
        chain=DenseFiniteChain(np.array([[-1.0, 1.0], [1.0, -1.0]])),
        triplets={0: LevyTripletBiv(drift_xi=-1.0, drift_eta=1.0),
                  1: LevyTripletBiv(drift_xi=-0.5, drift_eta=1.0)},
        switch_laws={})
    down, _ = xi_divergence_diagnostic(down_spec, cfg)
    assert set(down.values()) == {"Fails"}


def test_xi_divergence_infinite_kappa_passes():
    verdicts, detail = xi_divergence_diagnostic(infinite_kappa_spec(), small_cfg())
    assert set(verdicts.values()) == {"PassesToInfinity"}
    assert all(d["kappa"] == "+inf" for d in detail.values())


# ---------------------------------------------------------------------------
# decomposition
# ---------------------------------------------------------------------------


def mixed_spec():
    q = np.array([[-0.8, 0.8], [1.2, -1.2]])
    atoms = BivariateAtoms(ps=(0.5, 0.5), xs=(0.2, -0.1), ys=(3.0, -0.4))
    t0 = LevyTripletBiv(drift_xi=0.7, drift_eta=0.5, var_eta=0.09,
                        jumps=JumpComponent(rate=0.8, law=atoms))
    t1 = LevyTripletBiv(drift_xi=0.9, drift_eta=-0.3)
    return MapSpec(chain=DenseFiniteChain(q), triplets={0: t0, 1: t1},
                   switch_laws={(0, 1): bivariate_atom(0.1, 2.5),
                                (1, 0): bivariate_atom(-0.05, 0.3)})


def test_decomposition_sums_path_by_path():
    spec = mixed_spec()
    e1, e2 = decompose_e1_e2(spec)
    policy = RngPolicy(808)
    for k in range(8):
        full = exp_integral(simulate_path(spec, 20.0, 0.2, policy.rng_for(k)))
        one = exp_integral(simulate_path(e1, 20.0, 0.2, policy.rng_for(k)))
        two = exp_integral(simulate_path(e2, 20.0, 0.2, policy.rng_for(k)))
        got = one.values[-1] + two.values[-1]
        want = full.values[-1]
        assert abs(got - want) <= 1e-9 * (1.0 + abs(want))


def test_decomposition_pure_drift_has_empty_big_part():
    spec = light_two_state()
    _, e2 = decompose_e1_e2(spec)
    path = simulate_path(e2, 20.0, 0.2, RngPolicy(1).rng_for(0))
    # switch laws still act on eta in the big part; drop them too
    spec_plain = MapSpec(chain=spec.chain, triplets=spec.triplets, switch_laws={})
    _, e2_plain = decompose_e1_e2(spec_plain)
    path = simulate_path(e2_plain, 20.0, 0.2, RngPolicy(1).rng_for(0))
    assert np.all(path.eta == 0.0)


# ---------------------------------------------------------------------------
# sufficient-condition suite
# ---------------------------------------------------------------------------


def record(rep, name):
    (r,) = [x for x in rep.records if x["check"] == name]
    return r


def test_suite_concludes_on_light_spec():
    rep = sufficient_suite(light_two_state(), small_cfg())
    assert rep.conclusion == "ConvergesAS"
    for name in ("kappa_positive_finite", "eta_coefficient_sup",
                 "log_moment_big_component", "big_component_nondegenerate"):
        assert record(rep, name)["passed"] is True
    assert record(rep, "log_moment_stationary_a_bar")["passed"] is True


def test_suite_single_state_reads_law_directly():
    rng = np.random.default_rng(11)
    spec = random_single_state_spec(rng, heavy=False)
    rep = sufficient_suite(spec, small_cfg())
    assert rep.conclusion == "ConvergesAS"
    assert record(rep, "log_moment_big_component")["mode"] == "analytic"


def test_suite_flags_unbounded_eta_coefficients():
    spec = build_scenario("ex54").spec
    rep = sufficient_suite(spec, small_cfg())
    rec = record(rep, "eta_coefficient_sup")
    assert rec["passed"] is False
    assert rec["sup_eta"] == math.inf
    assert "sup_j gamma_eta = inf" in rec["note"]
    assert rep.conclusion is None


def test_suite_infinite_kappa_keeps_a_bar_record():
    # kappa = +inf fails the finite-mean gate, yet the stationary-average
    # record is still produced for the finite chain
    rep = sufficient_suite(infinite_kappa_spec(), small_cfg())
    rec_a = record(rep, "kappa_positive_finite")
    assert rec_a["passed"] is False
    assert rec_a["kappa"] == "+inf"
    assert record(rep, "log_moment_stationary_a_bar") is not None
    assert rep.conclusion is None


def test_suite_refuses_a_bar_on_countable_chain():
    spec = build_scenario("ex43").spec
    rep = sufficient_suite(spec, small_cfg(mesh=0.5))
    rec = record(rep, "log_moment_stationary_a_bar")
    assert rec["passed"] is None
    assert "finite modulator" in rec["note"]


# ---------------------------------------------------------------------------
# the stationary-averaged denominator separates what the plain log
# moment cannot certify
# ---------------------------------------------------------------------------


def test_a_bar_certifies_where_constant_denominator_diverges():
    spec = infinite_kappa_spec()
    # A-bar(x) = 0.5 + sf(1) + int_1^x y^-0.5 dy = 2 sqrt(x) - 0.5
    assert a_bar_fn(spec, 4.0) == pytest.approx(3.5, rel=1e-12)
    assert long_term_mean(spec, "xi").value.is_pos_inf

    law = LogParetoLaw(alpha=0.8, xm=1.0)
    plain = log_moment_test(law)
    assert plain.verdict == DIVERGENT

    routed = log_moment_test(law, denominator="a_bar", spec=spec)
    assert routed.verdict == FINITE

    def integrand(u):
        return u / (2.0 * math.sqrt(u) - 0.5) * 0.8 * u ** -1.8

    want, _ = integrate.quad(integrand, 1.0, np.inf)
    assert routed.value == pytest.approx(want, rel=5e-3)


# ---------------------------------------------------------------------------
# the cascade
# ---------------------------------------------------------------------------


def test_classify_light_spec_converges():
    rep = classify(light_two_state(), small_cfg())
    assert rep.verdict == "ConvergesAS"
    assert rep.seed == 17
    kinds = {e["criterion"] for e in rep.evidence}
    assert "degeneracy_probe" in kinds and "xi_divergence" in kinds
    assert "ladder" in rep.corroboration
    assert rep.config["n_paths"] == 100


def test_classify_detects_degenerate():
    spec = build_scenario("degenerate_const").spec
    cfg = CriterionConfig(n_paths=100, horizon=120.0, mesh=1.0,
                          ladder=(15.0, 30.0, 60.0), seed=3)
    rep = classify(spec, cfg)
    assert rep.verdict == "Degenerate"
    assert rep.degeneracy is not None
    consts = rep.degeneracy["constants"]
    assert consts[0] == pytest.approx(1.0, abs=1e-6)
    assert consts[1] == pytest.approx(1.0, abs=1e-6)


def test_classify_never_contradicts_suite():
    spec = light_two_state()
    cfg = small_cfg()
    suite = sufficient_suite(spec, cfg)
    rep = classify(spec, cfg)
    if suite.conclusion == "ConvergesAS":
        assert rep.verdict != "DivergesInProbability"


def test_classify_report_round_trips_to_json():
    rep = classify(light_two_state(), small_cfg())
    js = rep.as_json()
    assert js["verdict"] == rep.verdict
    assert set(js) == {"verdict", "evidence", "assumptions", "degeneracy",
                       "corroboration", "config", "seed"}

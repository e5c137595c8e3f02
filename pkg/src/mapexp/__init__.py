"""Exponential functionals of Markov-modulated additive pairs.

A model couples a modulating Markov chain with a bivariate additive pair
(xi, eta): each chain state carries a Levy triplet, and chain switches may
carry their own bivariate jumps.  The central object is the pathwise
integral E(t) = integral of exp(-xi(s-)) d eta(s), whose long-horizon
behaviour this package simulates, tests, and classifies.

Layout:

- :mod:`mapexp.model` / :mod:`mapexp.laws`: model specs and jump laws
- :mod:`mapexp.modelio`: JSON (de)serialization of specs
- :mod:`mapexp.levy`: tail integrals and the log-moment machinery
- :mod:`mapexp.engine`: path simulation, excursions, conflation
- :mod:`mapexp.perpetuity`: discrete perpetuity view and degeneracy
- :mod:`mapexp.classify`: the convergence cascade
- :mod:`mapexp.scenarios`: pinned worked examples with self-checks
- :mod:`mapexp.reports`: deterministic JSON/CSV/SVG artifact writers
- :mod:`mapexp.cli`: the ``mapexp`` command
"""

from ._version import __version__
from .classify import ClassificationReport, CriterionConfig, classify, sufficient_suite
from .engine import (
    ConflatedPath,
    ExcursionBatch,
    ExpIntegralTrace,
    MapPath,
    RngPolicy,
    conflate,
    excursion_stats,
    exp_integral,
    richardson_levels,
    simulate_additive,
    simulate_chain,
    single_state_terminal,
)
from .extreal import ExtReal
from .laws import (
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
from .levy import (
    DIVERGENT,
    FINITE,
    INDETERMINATE,
    MassMeasure,
    QuadratureResult,
    XiData,
    erickson_maller_test,
    log_moment_test,
)
from .model import (
    DenseFiniteChain,
    GeometricWeights,
    JumpComponent,
    LevyTripletBiv,
    MapSpec,
    NonErgodicError,
    PetalFlowerChain,
    PetalModel,
    drift_trichotomy,
    long_term_mean,
    stationary_law,
    validate,
)
from .modelio import ModelFileError, dump_model, load_model
from .perpetuity import (
    DegeneracySolution,
    degeneracy_solve,
    discretize_at_jumps,
    perpetuity_iterate,
    verify_degenerate_identity,
)
from .scenarios import SCENARIO_IDS, build_scenario, run_scenario
from .schemas import artifact_errors, load_schema

__all__ = [
    "__version__",
    "ExtReal",
    # laws
    "PointMass", "DiscreteLaw", "NormalLaw", "ExponentialLaw", "ParetoLaw",
    "LogParetoLaw", "ProductLaw", "CurveLaw", "bivariate_atom",
    # model
    "JumpComponent", "LevyTripletBiv", "DenseFiniteChain", "GeometricWeights",
    "PetalFlowerChain", "PetalModel", "MapSpec", "NonErgodicError",
    "validate", "stationary_law", "long_term_mean", "drift_trichotomy",
    # io
    "load_model", "dump_model", "ModelFileError",
    # levy
    "FINITE", "DIVERGENT", "INDETERMINATE", "XiData", "MassMeasure",
    "QuadratureResult", "erickson_maller_test", "log_moment_test",
    # engine
    "RngPolicy", "simulate_chain", "simulate_additive", "MapPath",
    "ExpIntegralTrace", "exp_integral", "conflate", "ConflatedPath",
    "excursion_stats", "ExcursionBatch", "single_state_terminal",
    "richardson_levels",
    # perpetuity
    "discretize_at_jumps", "perpetuity_iterate", "degeneracy_solve",
    "DegeneracySolution", "verify_degenerate_identity",
    # classify / scenarios
    "CriterionConfig", "classify", "ClassificationReport", "sufficient_suite",
    "SCENARIO_IDS", "build_scenario", "run_scenario",
    # schemas
    "load_schema", "artifact_errors",
]

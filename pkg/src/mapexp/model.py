"""Model types for Markov-modulated bivariate additive processes.

A model couples a continuous-time Markov chain (the modulator) with one
bivariate Levy triplet per state and one bivariate switch-jump law per
ordered state pair.  While the chain sits in state j the pair (xi, eta)
evolves as the state-j Levy process; at a transition i -> j the pair
receives an extra jump drawn from the (i, j) switch law.

Two chain families are supported:

* ``DenseFiniteChain``: an explicit generator matrix over finitely many
  states.
* ``PetalFlowerChain``: the countable hub-and-petals chain.  The hub
  (state 1) jumps to petal j >= 2 with rate q * p_j and each petal jumps
  straight back, every holding time being Exp(q).  Petal weights are
  either an exact geometric family (infinite support, sampled lazily
  without truncation) or an explicit renormalized list.  An optional
  side state 0 attaches to petal 2 and is the only place the side
  triplet acts.

Drift convention: triplet drifts are the natural finite-activity drifts
b (the process is b*t + Gaussian + sum of jumps).  The truncated drift
gamma = b + E[x; |x| < 1] * rate used by tail functions is derived, not
stored.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .extreal import ExtReal
from .laws import (
    ZERO_ATOM,
    BivariateAtoms,
    BivariateLaw,
    bivariate_atom,
    Marginal,
)

__all__ = [
    "JumpComponent",
    "SmallJumpApprox",
    "LevyTripletBiv",
    "DenseFiniteChain",
    "GeometricWeights",
    "ExplicitWeights",
    "PetalFlowerChain",
    "PetalModel",
    "MapSpec",
    "ValidationReport",
    "Stationary",
    "LongTermMean",
    "NonErgodicError",
    "validate",
    "stationary_law",
    "long_term_mean",
    "drift_trichotomy",
    "HUB",
    "SIDE",
]

HUB = 1
SIDE = 0


class NonErgodicError(Exception):
    """The chain has no strictly positive stationary law."""


@dataclass(frozen=True)
class JumpComponent:
    """Compound-Poisson jump part: intensity ``rate`` and a joint size law."""

    rate: float
    law: BivariateLaw


@dataclass(frozen=True)
class SmallJumpApprox:
    """Moment-matched Gaussian surrogate for a compensated small-jump part.

    The surrogate adds ``(drift_xi, drift_eta)`` to the drift and the
    given covariance rate to the Gaussian part.  Its use is flagged by
    validation and echoed in classification reports: results computed
    from it are approximations below the stated truncation level.
    """

    truncation: float
    var_xi: float = 0.0
    var_eta: float = 0.0
    cov: float = 0.0
    drift_xi: float = 0.0
    drift_eta: float = 0.0


@dataclass(frozen=True)
class LevyTripletBiv:
    """Per-state bivariate Levy data (natural drift convention)."""

    drift_xi: float = 0.0
    drift_eta: float = 0.0
    var_xi: float = 0.0
    var_eta: float = 0.0
    cov: float = 0.0
    jumps: JumpComponent | None = None
    small_jumps: SmallJumpApprox | None = None

    def __post_init__(self):
        if self.var_xi < 0 or self.var_eta < 0:
            raise ValueError("variances must be non-negative")
        if self.jumps is not None and self.jumps.rate < 0:
            raise ValueError("jump rate must be non-negative")

    # effective Gaussian covariance including any small-jump surrogate
    def gauss_cov(self) -> tuple[float, float, float]:
        sj = self.small_jumps
        if sj is None:
            return (self.var_xi, self.cov, self.var_eta)
        return (self.var_xi + sj.var_xi, self.cov + sj.cov, self.var_eta + sj.var_eta)

    def eff_drift(self) -> tuple[float, float]:
        sj = self.small_jumps
        if sj is None:
            return (self.drift_xi, self.drift_eta)
        return (self.drift_xi + sj.drift_xi, self.drift_eta + sj.drift_eta)

    def has_gaussian(self) -> bool:
        vx, c, vy = self.gauss_cov()
        return vx > 0 or vy > 0 or c != 0

    def jump_rate(self) -> float:
        return 0.0 if self.jumps is None else self.jumps.rate

    def marginal(self, component: str) -> Marginal | None:
        if self.jumps is None:
            return None
        return self.jumps.law.marginal_x() if component == "xi" else self.jumps.law.marginal_y()

    def mean_rate(self, component: str) -> ExtReal:
        """E[increment per unit time] of one component, as an extended real."""
        b = self.eff_drift()[0 if component == "xi" else 1]
        out = ExtReal.of(b)
        m = self.marginal(component)
        if m is not None and self.jumps.rate > 0:
            pos, neg = m.mean_pos(), m.mean_neg()
            out = out + ExtReal.of(pos).scale(self.jumps.rate) + ExtReal.of(neg).scale(-self.jumps.rate)
        return out

    def gamma(self, component: str) -> float:
        """Truncated drift: natural drift plus the small-jump mean rate."""
        b = self.eff_drift()[0 if component == "xi" else 1]
        m = self.marginal(component)
        if m is None or self.jumps.rate == 0:
            return b
        return b + self.jumps.rate * m.mean_small()

    def is_zero(self, component: str) -> bool:
        i = 0 if component == "xi" else 1
        if self.eff_drift()[i] != 0:
            return False
        vx, c, vy = self.gauss_cov()
        if (vx if i == 0 else vy) > 0:
            return False
        m = self.marginal(component)
        return m is None or self.jumps.rate == 0 or m.is_zero()


ZERO_TRIPLET = LevyTripletBiv()


# ---------------------------------------------------------------------------
# chains
# ---------------------------------------------------------------------------


@dataclass
class DenseFiniteChain:
    generator: np.ndarray

    def __post_init__(self):
        self.generator = np.asarray(self.generator, dtype=float)

    @property
    def n_states(self) -> int:
        return self.generator.shape[0]

    def states(self) -> list[int]:
        return list(range(self.n_states))

    def exit_rate(self, i: int) -> float:
        return -float(self.generator[i, i])

    def transition_probs(self, i: int) -> np.ndarray:
        row = self.generator[i].copy()
        row[i] = 0.0
        tot = row.sum()
        return row / tot if tot > 0 else row

    def rate(self, i: int, j: int) -> float:
        return float(self.generator[i, j])


@dataclass(frozen=True)
class GeometricWeights:
    """Exact geometric petal weights p_j = (1 - r) r^(j-2), j = 2, 3, ...

    Infinite support; petals are sampled lazily and exactly, so no
    truncation enters the path law.
    """

    ratio: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.ratio < 1.0:
            raise ValueError("ratio must lie in (0, 1)")

    def weight(self, j: int) -> float:
        return (1.0 - self.ratio) * self.ratio ** (j - 2)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.geometric(1.0 - self.ratio, size=n) + 1

    def infinite(self) -> bool:
        return True

    def petals(self, k: int) -> list[int]:
        return list(range(2, 2 + k))

    def tail_mass_above_inverse(self, x: float) -> float:
        """Total weight of petals with 1/p_j > x."""
        r, c = self.ratio, 1.0 - self.ratio
        j = 2
        while c * r ** (j - 2) * x >= 1.0:
            j += 1
        return r ** (j - 2)


@dataclass(frozen=True)
class ExplicitWeights:
    """Finitely many petals 2..J with renormalized positive weights."""

    weights: tuple[float, ...]

    def __post_init__(self):
        if not self.weights or min(self.weights) <= 0:
            raise ValueError("weights must be positive and non-empty")

    def _norm(self) -> np.ndarray:
        w = np.asarray(self.weights, dtype=float)
        return w / w.sum()

    def weight(self, j: int) -> float:
        return float(self._norm()[j - 2])

    def sample(self, rng, n):
        return rng.choice(len(self.weights), size=n, p=self._norm()) + 2

    def infinite(self) -> bool:
        return False

    def petals(self, k: int | None = None) -> list[int]:
        J = len(self.weights)
        if k is not None:
            J = min(J, k)
        return list(range(2, 2 + J))


@dataclass
class PetalFlowerChain:
    q: float
    weights: GeometricWeights | ExplicitWeights = field(default_factory=GeometricWeights)
    side_state: bool = False

    def exit_rate(self, i: int) -> float:
        return self.q

    def p2(self) -> float:
        return self.weights.weight(2)


# ---------------------------------------------------------------------------
# petal triplet / switch rules
# ---------------------------------------------------------------------------

PETAL_KINDS = ("zero", "eta_exp_drift")
SWITCH_KINDS = ("none", "xi_ladder", "eta_spike", "xi_return_step")


@dataclass
class PetalModel:
    """Declarative per-petal data for the hub-and-petals chain.

    petal_kind
        "zero": petals carry the zero triplet.
        "eta_exp_drift": petal j has eta drift exp(1/p_j) and nothing else.
    switch_kind
        "none": all switch jumps vanish.
        "xi_ladder": xi jumps -1/p_j on hub -> j and 2 + 1/p_j on j -> hub.
        "eta_spike": eta jumps +exp(1/p_j) on hub -> j and the exact
            negative on j -> hub.
        "xi_return_step": xi jumps +2 on every j -> hub transition.
    The side state (when present) exchanges zero switch jumps with petal 2.
    """

    hub: LevyTripletBiv = ZERO_TRIPLET
    petal_kind: str = "zero"
    switch_kind: str = "none"
    side: LevyTripletBiv | None = None

    def __post_init__(self):
        if self.petal_kind not in PETAL_KINDS:
            raise ValueError(f"unknown petal_kind {self.petal_kind!r}")
        if self.switch_kind not in SWITCH_KINDS:
            raise ValueError(f"unknown switch_kind {self.switch_kind!r}")


def _exp_clamped(x: float) -> float:
    """exp saturating at exp(700), kept finite so paired +/- spikes still
    cancel exactly in float arithmetic; the engine flags paths that hit
    the cap as saturated."""
    return math.exp(min(x, 700.0))


# ---------------------------------------------------------------------------
# the assembled model
# ---------------------------------------------------------------------------


@dataclass
class MapSpec:
    chain: DenseFiniteChain | PetalFlowerChain
    triplets: dict[int, LevyTripletBiv] | None = None
    switch_laws: dict[tuple[int, int], BivariateLaw] | None = None
    petal_model: PetalModel | None = None
    # eta-component filters used by the E1/E2 decomposition
    eta_cont_keep: bool = True
    eta_jump_keep: str = "all"  # "all" | "small" | "big"
    eta_switch_keep: bool = True

    # -- structure -------------------------------------------------------

    @property
    def finite_state(self) -> bool:
        return isinstance(self.chain, DenseFiniteChain)

    def states(self) -> list[int]:
        if self.finite_state:
            return self.chain.states()
        raise NonErgodicError("countable chain has no finite state list")

    def analysis_states(self, n_petals: int = 4) -> list[int]:
        """States used by per-state diagnostics; heaviest petals for flowers."""
        if self.finite_state:
            return self.chain.states()
        out = [HUB] + self.chain.weights.petals(n_petals)
        if self.chain.side_state:
            out = [SIDE] + out
        return out

    def triplet(self, state: int) -> LevyTripletBiv:
        if self.finite_state:
            return self.triplets[state]
        pm = self.petal_model
        if state == HUB:
            return pm.hub
        if state == SIDE:
            if not self.chain.side_state:
                raise KeyError(state)
            return pm.side if pm.side is not None else ZERO_TRIPLET
        if pm.petal_kind == "eta_exp_drift":
            p = self.chain.weights.weight(state)
            return LevyTripletBiv(drift_eta=_exp_clamped(1.0 / p))
        return ZERO_TRIPLET

    def switch_law(self, i: int, j: int) -> BivariateLaw:
        if self.finite_state:
            return self.switch_laws.get((i, j), ZERO_ATOM) if self.switch_laws else ZERO_ATOM
        pm = self.petal_model
        kind = pm.switch_kind
        if kind == "none" or SIDE in (i, j):
            return ZERO_ATOM
        if kind == "xi_ladder":
            if i == HUB:
                return bivariate_atom(-1.0 / self.chain.weights.weight(j), 0.0)
            return bivariate_atom(2.0 + 1.0 / self.chain.weights.weight(i), 0.0)
        if kind == "eta_spike":
            if i == HUB:
                return bivariate_atom(0.0, _exp_clamped(1.0 / self.chain.weights.weight(j)))
            return bivariate_atom(0.0, -_exp_clamped(1.0 / self.chain.weights.weight(i)))
        if kind == "xi_return_step":
            return bivariate_atom(2.0, 0.0) if j == HUB else ZERO_ATOM
        raise AssertionError(kind)

    def exit_rate(self, state: int) -> float:
        return self.chain.exit_rate(state)

    def next_state(self, rng: np.random.Generator, state: int) -> int:
        ch = self.chain
        if self.finite_state:
            return int(rng.choice(ch.n_states, p=ch.transition_probs(state)))
        if state == HUB:
            return int(ch.weights.sample(rng, 1)[0])
        if state == SIDE:
            return 2
        if state == 2 and ch.side_state:
            return SIDE if rng.random() < 0.5 else HUB
        return HUB

    def with_eta_filter(self, cont: bool, jumps: str, switch: bool) -> "MapSpec":
        return replace(self, eta_cont_keep=cont, eta_jump_keep=jumps, eta_switch_keep=switch)


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass
class ValidationReport:
    ok: bool
    errors: list[str]
    warnings: list[str]

    def raise_if_failed(self):
        if not self.ok:
            raise ValueError("invalid model: " + "; ".join(self.errors))


def _strongly_connected(Q: np.ndarray) -> bool:
    from scipy.sparse.csgraph import connected_components

    adj = (Q > 0).astype(int)
    np.fill_diagonal(adj, 0)
    n, _ = connected_components(adj, directed=True, connection="strong")
    return n == 1


def validate(spec: MapSpec) -> ValidationReport:
    errors: list[str] = []
    warnings: list[str] = []

    if spec.finite_state:
        Q = spec.chain.generator
        if Q.ndim != 2 or Q.shape[0] != Q.shape[1] or Q.shape[0] < 1:
            return ValidationReport(False, ["generator must be a square matrix"], [])
        n = Q.shape[0]
        off = Q.copy()
        np.fill_diagonal(off, 0.0)
        if (off < 0).any():
            errors.append("off-diagonal generator rates must be non-negative")
        scale = max(1.0, float(np.abs(Q).max()))
        bad = np.abs(Q.sum(axis=1)) > 1e-9 * scale
        for i in np.nonzero(bad)[0]:
            errors.append(f"generator row sum nonzero at row {i} (sum={Q[i].sum():g})")
        if n > 1 and not _strongly_connected(Q):
            errors.append("NonErgodic: generator is not irreducible")
        if spec.triplets is None or set(spec.triplets) != set(range(n)):
            errors.append("each state needs exactly one Levy triplet")
        states = range(n)
        for i in states:
            for j in states:
                if i != j and Q[i, j] > 0:
                    law = (spec.switch_laws or {}).get((i, j))
                    if law is not None and not isinstance(law, BivariateLaw):
                        errors.append(f"switch law for ({i},{j}) is not a bivariate law")
        triplets = [spec.triplets[i] for i in range(n)] if not errors else []
    else:
        ch = spec.chain
        if ch.q <= 0:
            errors.append("petal flower rate q must be positive")
        if spec.petal_model is None:
            errors.append("petal flower models need a petal_model")
        if ch.side_state and spec.petal_model is not None and spec.petal_model.side is None:
            warnings.append("side state present but side triplet omitted; using zero triplet")
        triplets = []
        if spec.petal_model is not None:
            triplets = [spec.petal_model.hub]
            if spec.petal_model.side is not None:
                triplets.append(spec.petal_model.side)

    for t in triplets:
        vx, c, vy = t.gauss_cov()
        if vx * vy - c * c < -1e-12 * max(1.0, vx * vy):
            errors.append("Gaussian covariance matrix is not positive semi-definite")
        if t.small_jumps is not None:
            warnings.append(
                "small-jump approximation block in use (truncation "
                f"{t.small_jumps.truncation:g}); results below that scale are approximate")

    if not errors:
        if _component_inactive(spec, "xi"):
            errors.append("xi is identically zero; the exponential integrand degenerates")
        if _component_inactive(spec, "eta"):
            errors.append("eta is identically zero; the integral is trivially zero")

    return ValidationReport(not errors, errors, warnings)


def _component_inactive(spec: MapSpec, component: str) -> bool:
    if spec.finite_state:
        if any(not t.is_zero(component) for t in spec.triplets.values()):
            return False
        for law in (spec.switch_laws or {}).values():
            m = law.marginal_x() if component == "xi" else law.marginal_y()
            if not m.is_zero():
                return False
        return True
    pm = spec.petal_model
    trip = [pm.hub] + ([pm.side] if pm.side is not None else [])
    if any(not t.is_zero(component) for t in trip):
        return False
    if component == "eta":
        return pm.petal_kind != "eta_exp_drift" and pm.switch_kind != "eta_spike"
    return pm.switch_kind not in ("xi_ladder", "xi_return_step")


# ---------------------------------------------------------------------------
# stationary law
# ---------------------------------------------------------------------------


@dataclass
class Stationary:
    """Stationary law of the modulating chain.

    For flowers the law is stored in closed form: pi_hub at the hub,
    pi_side at the side state, and pi_hub * p_j at petal j (times a
    correction for petal 2 when the side state is present).
    """

    kind: str
    probs: np.ndarray | None = None
    pi_hub: float = 0.0
    pi_side: float = 0.0
    chain: PetalFlowerChain | None = None

    def prob(self, state: int) -> float:
        if self.kind == "dense":
            return float(self.probs[state])
        if state == HUB:
            return self.pi_hub
        if state == SIDE:
            return self.pi_side
        w = self.chain.weights.weight(state)
        if self.chain.side_state and state == 2:
            return 2.0 * self.pi_hub * w
        return self.pi_hub * w


def stationary_law(spec: MapSpec) -> Stationary:
    if spec.finite_state:
        Q = spec.chain.generator
        n = Q.shape[0]
        if n == 1:
            return Stationary("dense", probs=np.array([1.0]))
        A = np.vstack([Q.T, np.ones((1, n))])
        b = np.zeros(n + 1)
        b[-1] = 1.0
        pi, *_ = np.linalg.lstsq(A, b, rcond=None)
        if (pi <= 1e-12).any() or np.abs(pi @ Q).max() > 1e-10 * max(1.0, np.abs(Q).max()):
            raise NonErgodicError("no strictly positive stationary law found")
        return Stationary("dense", probs=pi)
    ch = spec.chain
    if ch.side_state:
        p2 = ch.p2()
        pi_hub = 1.0 / (2.0 + 2.0 * p2)
        return Stationary("flower", pi_hub=pi_hub, pi_side=pi_hub * p2, chain=ch)
    return Stationary("flower", pi_hub=0.5, chain=ch)


# ---------------------------------------------------------------------------
# long-term mean and the drift trichotomy
# ---------------------------------------------------------------------------


@dataclass
class LongTermMean:
    """kappa for one component, with the formal telescoped value when the
    rigorous positive/negative part bookkeeping says 'undefined'."""

    value: ExtReal
    formal_value: float | None = None
    note: str = ""


def long_term_mean(spec: MapSpec, component: str = "xi") -> LongTermMean:
    if component not in ("xi", "eta"):
        raise ValueError("component must be 'xi' or 'eta'")
    pi = stationary_law(spec)

    if spec.finite_state:
        total = ExtReal.of(0.0)
        Q = spec.chain.generator
        for j in spec.states():
            total = total + spec.triplet(j).mean_rate(component).scale(pi.prob(j))
        for i in spec.states():
            for j in spec.states():
                if i == j or Q[i, j] <= 0:
                    continue
                law = spec.switch_law(i, j)
                m = law.marginal_x() if component == "xi" else law.marginal_y()
                total = total + m.mean().scale(pi.prob(i) * Q[i, j])
        return LongTermMean(total)

    return _flower_long_term_mean(spec, component, pi)


def _flower_long_term_mean(spec: MapSpec, component: str, pi: Stationary) -> LongTermMean:
    ch, pm = spec.chain, spec.petal_model
    q = ch.q
    total = ExtReal.of(0.0)
    note = ""

    # Levy parts: hub, side, and the petal family
    total = total + pm.hub.mean_rate(component).scale(pi.prob(HUB))
    if ch.side_state and pm.side is not None:
        total = total + pm.side.mean_rate(component).scale(pi.prob(SIDE))
    if component == "eta" and pm.petal_kind == "eta_exp_drift":
        if ch.weights.infinite():
            # sum_j pi_j exp(1/p_j) diverges: p exp(1/p) -> inf
            total = total + ExtReal.pos_inf()
            note = "petal eta drifts sum to +inf across the family"
        else:
            s = sum(pi.prob(j) * _exp_clamped(1.0 / ch.weights.weight(j))
                    for j in ch.weights.petals())
            total = total + ExtReal.of(s)

    # switch parts; petal j feeds the hub at rate q except that petal 2
    # splits its exits between hub and side state when the latter exists
    def rate_to_hub(j: int) -> float:
        return q / 2.0 if (ch.side_state and j == 2) else q

    def paired_series() -> float:
        s = 0.0
        for j in ch.weights.petals():
            p = ch.weights.weight(j)
            if pm.switch_kind == "xi_ladder":
                s += pi.prob(HUB) * q * p * (-1.0 / p)
                s += pi.prob(j) * rate_to_hub(j) * (2.0 + 1.0 / p)
            else:  # eta_spike
                s += pi.prob(HUB) * q * p * _exp_clamped(1.0 / p)
                s -= pi.prob(j) * rate_to_hub(j) * _exp_clamped(1.0 / p)
        return s

    kind = pm.switch_kind
    formal = None
    if kind == "xi_ladder" and component == "xi":
        if ch.weights.infinite():
            # entering jumps sum to -inf, returning jumps to +inf;
            # pairing them per petal telescopes to a finite formal value
            total = total + ExtReal.undefined()
            formal = q if not ch.side_state else None
            note = "per-petal switch means are not absolutely summable; paired series telescopes"
        else:
            total = total + ExtReal.of(paired_series())
    elif kind == "eta_spike" and component == "eta":
        if ch.weights.infinite():
            total = total + ExtReal.undefined()
            formal = 0.0
            note = "spike means are not absolutely summable; paired series telescopes to 0"
        else:
            total = total + ExtReal.of(paired_series())
    elif kind == "xi_return_step" and component == "xi":
        # sum_j pi_j * rate_to_hub(j) * 2 = 2 * pi_hub * q for any weights
        total = total + ExtReal.of(2.0 * pi.prob(HUB) * q)

    if formal is not None and not total.is_undefined:
        formal = None
    return LongTermMean(total, formal_value=formal, note=note)


TRICHOTOMY = ("ToPlusInf", "ToMinusInf", "Oscillates", "Unknown")


@dataclass
class DriftVerdict:
    verdict: str
    kappa: ExtReal
    note: str = ""


def drift_trichotomy(spec: MapSpec) -> DriftVerdict:
    """Long-run behaviour of xi from the sign of kappa.

    Finite chains give the full trichotomy; countable chains and
    undefined kappa defer to the empirical diagnostics in classify.
    """
    ltm = long_term_mean(spec, "xi")
    k = ltm.value
    if not spec.finite_state:
        return DriftVerdict("Unknown", k, "countable chain: deferred to empirical diagnosis")
    if k.is_undefined:
        return DriftVerdict("Unknown", k, "kappa is undefined")
    if k.is_pos_inf or (k.is_finite and k.value > 0):
        return DriftVerdict("ToPlusInf", k)
    if k.is_neg_inf or (k.is_finite and k.value < 0):
        return DriftVerdict("ToMinusInf", k)
    return DriftVerdict("Oscillates", k, "kappa = 0 with non-degenerate xi")

"""Perpetuity view of the exponential integral and degeneracy analysis.

Between consecutive chain switches T_{n-1} < T_n the integral satisfies
E(T_n) = E(T_{n-1}) + P_{n-1} B_n with P_n = exp(-xi_{T_n}) and

    B_n = int_(T_{n-1}, T_n] exp(-(xi_{s-} - xi_{T_{n-1}})) d eta_s,

an iid-within-regime random recurrence ("perpetuity") whose steps carry
the environment pair (J_{T_{n-1}}, J_{T_n}).  A model is degenerate when
E(t) = c_{J_0} - c_{J_t} exp(-xi_t) for constants c; on steps this reads
c_from = A c_to + B with A = exp(-(xi_{T_n} - xi_{T_{n-1}})), a linear
system the solver below attacks directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .engine import MapPath, ExpIntegralTrace, _cumsum, normalized_window_integrals
from .model import MapSpec

__all__ = [
    "PerpetuitySteps",
    "DegeneracySolution",
    "InsufficientSamples",
    "discretize_at_jumps",
    "perpetuity_iterate",
    "degeneracy_solve",
    "verify_degenerate_identity",
    "stochastic_logarithm",
    "reconstruct_exp_xi",
    "degenerate_eta_residual",
]


class InsufficientSamples(Exception):
    """The step system is underdetermined (some constant unreachable)."""


@dataclass
class PerpetuitySteps:
    """Batch of perpetuity steps; log_a = -(xi increment), exact in floats."""

    log_a: np.ndarray
    b: np.ndarray
    env_from: np.ndarray
    env_to: np.ndarray

    @property
    def a(self) -> np.ndarray:
        with np.errstate(over="ignore"):
            return np.exp(self.log_a)

    @property
    def n_steps(self) -> int:
        return self.b.size

    def extend(self, other: "PerpetuitySteps") -> "PerpetuitySteps":
        return PerpetuitySteps(
            np.concatenate([self.log_a, other.log_a]),
            np.concatenate([self.b, other.b]),
            np.concatenate([self.env_from, other.env_from]),
            np.concatenate([self.env_to, other.env_to]))


def steps_from_arrays(a, b, env_from, env_to) -> PerpetuitySteps:
    a = np.asarray(a, dtype=float)
    return PerpetuitySteps(np.log(a), np.asarray(b, dtype=float),
                           np.asarray(env_from, dtype=np.int64),
                           np.asarray(env_to, dtype=np.int64))


def discretize_at_jumps(path: MapPath) -> PerpetuitySteps:
    """One step per inter-switch interval, including the trailing partial one.

    B is re-integrated per window (not read off as a trace difference),
    so each step is exact relative to its own normalization.
    """
    sw = path.switch_points()
    bounds = np.concatenate([[0], sw, [path.n_cells]])
    starts = bounds[:-1].astype(np.int64)
    stops = bounds[1:].astype(np.int64)
    refs = path.xi[starts]
    b = normalized_window_integrals(path, starts, stops, refs)
    log_a = -(path.xi[stops] - path.xi[starts])
    env_from = path.state[starts]
    env_to = path.state_at_points()[stops]
    return PerpetuitySteps(log_a, b, env_from, env_to)


def perpetuity_iterate(steps: PerpetuitySteps, n: int | None = None) -> np.ndarray:
    """Forward recursion Z_k = Z_{k-1} + P_{k-1} B_k, P_k = P_{k-1} A_k.

    The prefactor is carried in log space (sums of exact -dxi terms), so
    ladders whose A overflow float64 stay finite wherever B vanishes.
    """
    if n is None:
        n = steps.n_steps
    log_p = np.concatenate([[0.0], np.cumsum(steps.log_a[:n])])
    b = steps.b[:n]
    terms = np.zeros(n)
    nz = b != 0.0
    if np.any(nz):
        with np.errstate(over="ignore"):
            terms[nz] = np.exp(log_p[:-1][nz]) * b[nz]
    return np.concatenate([[0.0], _cumsum(terms)])


@dataclass
class DegeneracySolution:
    constants: dict[int, float]
    max_residual: float
    n_samples: int

    def as_vector(self, n_states: int) -> np.ndarray:
        out = np.full(n_states, np.nan)
        for k, v in self.constants.items():
            out[k] = v
        return out


def degeneracy_solve(steps: PerpetuitySteps, tol: float = 1e-8):
    """Solve c_from = A c_to + B over all steps, or rule it out.

    Returns a DegeneracySolution when a constant vector satisfies every
    sample to within tol * (1 + |c|_inf); returns None when the samples
    are inconsistent; raises InsufficientSamples when the system is
    underdetermined (no pair exhibits two distinct A values and the pair
    graph cannot reach every state).
    """
    n = steps.n_steps
    if n == 0:
        raise InsufficientSamples("no steps supplied")
    a = steps.a
    b = steps.b
    groups: dict[tuple[int, int], np.ndarray] = {}
    for key in sorted(set(zip(steps.env_from.tolist(), steps.env_to.tolist()))):
        mask = (steps.env_from == key[0]) & (steps.env_to == key[1])
        groups[key] = np.nonzero(mask)[0]

    # a pair with one A value but several B values is already inconsistent
    for (i, j), idx in groups.items():
        av, bv = a[idx], b[idx]
        flat = np.all(av == av[0]) or (
            np.isfinite(av).all() and np.ptp(av) <= 1e-9 * (1.0 + np.abs(av).max()))
        bfin = bv[np.isfinite(bv)]
        if flat and bfin.size >= 2 and np.ptp(bfin) > tol * (1.0 + np.abs(bfin).max()):
            return None

    known: dict[int, float] = {}
    for (i, j), idx in groups.items():
        av, bv = a[idx], b[idx]
        ok = np.isfinite(av) & np.isfinite(bv)
        if ok.sum() < 2:
            continue
        sub_a, sub_b = av[ok], bv[ok]
        k1, k2 = int(np.argmin(sub_a)), int(np.argmax(sub_a))
        if sub_a[k2] - sub_a[k1] > 1e-9 * (1.0 + abs(sub_a[k2])):
            cand = (sub_b[k1] - sub_b[k2]) / (sub_a[k2] - sub_a[k1])
            known.setdefault(int(j), float(cand))

    # propagate over the pair graph
    changed = True
    while changed:
        changed = False
        for (i, j), idx in groups.items():
            rep = idx[0]
            ar, br = float(a[rep]), float(b[rep])
            if not (math.isfinite(ar) and math.isfinite(br)):
                continue
            if j in known and i not in known:
                known[i] = ar * known[j] + br
                changed = True
            elif i in known and j not in known and ar != 0.0:
                known[j] = (known[i] - br) / ar
                changed = True

    states = set(steps.env_from.tolist()) | set(steps.env_to.tolist())
    missing = states - set(known)
    if missing:
        raise InsufficientSamples(
            f"constants for states {sorted(missing)} unreachable: "
            "no pair shows two distinct A values")

    c_from = np.array([known[int(s)] for s in steps.env_from])
    c_to = np.array([known[int(s)] for s in steps.env_to])
    with np.errstate(over="ignore", invalid="ignore"):
        resid = np.abs(a * c_to + b - c_from)
    resid = resid[np.isfinite(c_from)]
    max_resid = float(np.nanmax(resid)) if resid.size else 0.0
    scale = 1.0 + max(abs(v) for v in known.values())
    if not math.isfinite(max_resid) or max_resid > tol * scale:
        return None
    return DegeneracySolution(constants=known, max_residual=max_resid, n_samples=n)


def verify_degenerate_identity(path: MapPath, trace: ExpIntegralTrace,
                               constants: dict[int, float],
                               tol: float = 1e-8) -> tuple[bool, float]:
    """Check E(t) = c_{J_0} - c_{J_t} exp(-xi_t) along the whole grid."""
    lut = np.full(max(constants) + 1, np.nan)
    for k, v in constants.items():
        lut[k] = v
    c_here = lut[path.state_at_points()]
    c0 = c_here[0]
    with np.errstate(over="ignore"):
        pred = c0 - c_here * np.exp(-path.xi)
    dev = np.abs(trace.values - pred)
    max_dev = float(np.max(dev)) if dev.size else 0.0
    scale = 1.0 + max(abs(v) for v in constants.values())
    return (math.isfinite(max_dev) and max_dev <= tol * scale), max_dev


# ---------------------------------------------------------------------------
# stochastic logarithm of exp(-xi)
# ---------------------------------------------------------------------------


def _cell_var_xi(spec: MapSpec, path: MapPath) -> np.ndarray:
    cell_len = np.diff(path.t)
    var = np.zeros(path.n_cells)
    for s in sorted(set(path.state.tolist())):
        vx, _, _ = spec.triplet(int(s)).gauss_cov()
        if vx:
            var[path.state == s] = vx
    return var * cell_len


def stochastic_logarithm(spec: MapSpec, path: MapPath):
    """U with exp(-xi) = DoleansDade(U): dU = -dxi^c + (var/2)dt, jumps e^{-dxi}-1.

    Returns (values at grid points, cont cell increments, jumps at points).
    """
    var = _cell_var_xi(spec, path)
    du_cont = -path.cont_dxi + 0.5 * var
    du_jump = np.zeros(path.t.size)
    nz = path.jump_dxi != 0.0
    du_jump[nz] = np.expm1(-path.jump_dxi[nz])
    u = np.concatenate([[0.0], _cumsum(np.stack([du_cont, du_jump[1:]], axis=1).ravel())[1::2]])
    return u, du_cont, du_jump


def reconstruct_exp_xi(spec: MapSpec, path: MapPath) -> np.ndarray:
    """Doleans-Dade exponential of the stochastic logarithm, from U alone.

    log E = (U^c - <U^c>/2) + sum log(1 + dU); agreement with exp(-xi)
    validates the Ito-term and jump bookkeeping end to end.
    """
    _, du_cont, du_jump = stochastic_logarithm(spec, path)
    var = _cell_var_xi(spec, path)
    log_cont = du_cont - 0.5 * var
    log_jump = np.log1p(du_jump)
    log_e = np.concatenate([[0.0], _cumsum(np.stack([log_cont, log_jump[1:]], axis=1).ravel())[1::2]])
    with np.errstate(over="ignore"):
        return np.exp(log_e)


def degenerate_eta_residual(spec: MapSpec, path: MapPath,
                            constants: dict[int, float]) -> np.ndarray:
    """Residual of eta_t + int c_{J_{s-}} dU_s + sum_{s<=t} dc_s e^{-dxi_s}.

    Here U is the stochastic logarithm of e^{-xi} and dc_s = c_{J_s} -
    c_{J_{s-}}; the switch term carries the jump factor because the state
    and xi move at the same instant.  Identically zero (to float noise) iff
    eta is the degenerate functional built from the constants; an extra
    independent eta component makes it drift away at that component's rate.
    """
    lut = np.full(max(constants) + 1, np.nan)
    for k, v in constants.items():
        lut[k] = v
    _, du_cont, du_jump = stochastic_logarithm(spec, path)
    states_pts = path.state_at_points()
    c_cell = lut[path.state]
    cont_terms = c_cell * du_cont
    # at a jump point m the integrand uses the pre-jump environment
    c_before = lut[np.concatenate([[states_pts[0]], path.state])]
    jump_terms = c_before * du_jump
    sw = path.switch_points()
    dc = np.zeros(path.t.size)
    dc[sw] = (lut[path.state[np.minimum(sw, path.n_cells - 1)]]
              - lut[path.state[sw - 1]]) * np.exp(-path.jump_dxi[sw])
    inc = np.stack([cont_terms, jump_terms[1:] + dc[1:]], axis=1).ravel()
    acc = np.concatenate([[0.0], _cumsum(inc)[1::2]])
    return path.eta + acc

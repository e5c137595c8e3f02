"""Path engine: chain trajectories, additive components, exponential integrals.

Representation.  A simulated path is a refined event grid t_0 = 0 < ...
< t_N = horizon whose interior points are chain switches, jump epochs of
the active state's compound-Poisson part, and a regular sub-grid (mesh
``h``) inside segments whose state carries a Gaussian part.  Values xi,
eta at grid points are right-continuous; the jump applied AT a grid
point is stored separately so left limits are recoverable.

Integration.  The trace of E(t) = int_(0,t] exp(-xi_{s-}) d eta_s is
assembled from two kinds of terms per cell [t_k, t_{k+1}):

* continuous part: exp(-xi_k) * deta_cont * phi(dxi_cont), where
  phi(d) = (1 - e^(-d))/d.  For cells with no eta-Gaussian this is the
  exact integral of the linear interpolant (and exact, full stop, for
  drift-only specs); for eta-Gaussian cells phi is dropped (strict
  left-point rule, the Ito convention).
* jump at t_{k+1}: exp(-(xi left limit)) * deta_jump.

Numerical safety rules used throughout:

* zero eta-increments never evaluate exp(-xi) (xi may be astronomically
  negative exactly where eta is flat, e.g. ladder-type switch models);
* cumulative sums switch to Neumaier compensation when terms exceed
  1e15 in magnitude, so a pair of cancelling spikes cannot erase the
  running baseline;
* switch laws cap exp at exp(700); paths that hit the cap are flagged
  ``saturated`` (their true values exceed float64 range).
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .model import (
    HUB,
    DenseFiniteChain,
    MapSpec,
    PetalFlowerChain,
)

__all__ = [
    "RngPolicy",
    "ChainPath",
    "MapPath",
    "ExpIntegralTrace",
    "ExcursionBatch",
    "ConflatedPath",
    "AnchorMismatch",
    "NoCompleteCycle",
    "simulate_chain",
    "simulate_additive",
    "simulate_path",
    "exp_integral",
    "conflate",
    "excursion_stats",
    "neumaier_cumsum",
    "map_over_paths",
    "single_state_terminal",
    "richardson_levels",
    "normalized_window_integrals",
    "normalized_window_sups",
    "excursion_stats_one",
    "SATURATION",
]

SATURATION = math.exp(700.0)
MARK_GRID, MARK_LEVY, MARK_SWITCH = 0, 1, 2
MARK_NAMES = {MARK_GRID: "grid", MARK_LEVY: "levy", MARK_SWITCH: "switch"}
# terms this large trigger compensated summation (baseline-erasure guard)
_SPIKE = 1e15


class AnchorMismatch(Exception):
    """The path does not start in the requested anchor state."""


class NoCompleteCycle(Exception):
    """No return cycle completed within the horizon."""


@dataclass(frozen=True)
class RngPolicy:
    """Derives one independent, scheduling-invariant stream per path."""

    master_seed: int

    def rng_for(self, index: int) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=self.master_seed, spawn_key=(index,))
        return np.random.default_rng(ss)


# ---------------------------------------------------------------------------
# summation helpers
# ---------------------------------------------------------------------------


def neumaier_cumsum(terms: np.ndarray) -> np.ndarray:
    """Compensated running sums; exact through cancelling spike pairs.

    Nonfinite terms freeze the compensation: once the running sum is inf it
    stays inf under finite additions instead of decaying to nan through an
    inf - inf in the correction.
    """
    out = np.empty(terms.size)
    s = 0.0
    c = 0.0
    for i, x in enumerate(terms):
        x = float(x)
        t = s + x
        if not math.isfinite(t):
            s = t
            c = 0.0
            out[i] = s
            continue
        if abs(s) >= abs(x):
            c += (s - t) + x
        else:
            c += (x - t) + s
        s = t
        out[i] = s + c
    return out


def _cumsum(terms: np.ndarray) -> np.ndarray:
    finite = terms[np.isfinite(terms)]
    if finite.size and np.abs(finite).max() > _SPIKE:
        return neumaier_cumsum(terms)
    return np.cumsum(terms)


# ---------------------------------------------------------------------------
# chain paths
# ---------------------------------------------------------------------------


@dataclass
class ChainPath:
    horizon: float
    jump_times: np.ndarray  # strictly increasing, inside (0, horizon)
    states: np.ndarray  # len(jump_times) + 1 segment states

    @property
    def start_state(self) -> int:
        return int(self.states[0])

    def segments(self):
        """(state, t_from, t_to) triples covering [0, horizon]."""
        bounds = np.concatenate([[0.0], self.jump_times, [self.horizon]])
        return [(int(self.states[i]), float(bounds[i]), float(bounds[i + 1]))
                for i in range(len(self.states))]

    def occupation(self) -> dict[int, float]:
        occ: dict[int, float] = {}
        for s, a, b in self.segments():
            occ[s] = occ.get(s, 0.0) + (b - a)
        return occ


def simulate_chain(spec: MapSpec, horizon: float, rng: np.random.Generator,
                   start: int | None = None) -> ChainPath:
    if horizon <= 0:
        raise ValueError("horizon must be positive")
    ch = spec.chain
    if isinstance(ch, PetalFlowerChain) and not ch.side_state:
        return _simulate_flower_fast(spec, horizon, rng, start)
    if start is None:
        start = 0 if isinstance(ch, DenseFiniteChain) else HUB
    times = []
    states = [int(start)]
    t = 0.0
    s = int(start)
    while True:
        rate = spec.exit_rate(s)
        if rate <= 0:
            break
        t += rng.exponential(1.0 / rate)
        if t >= horizon:
            break
        s = spec.next_state(rng, s)
        times.append(t)
        states.append(s)
    return ChainPath(horizon, np.asarray(times), np.asarray(states, dtype=np.int64))


def _simulate_flower_fast(spec: MapSpec, horizon: float, rng, start):
    """Hub-petal alternation: all holding times are Exp(q)."""
    ch = spec.chain
    if start is None:
        start = HUB
    start = int(start)
    mean_n = ch.q * horizon
    times_list = []
    total = 0.0
    while True:
        block = rng.exponential(1.0 / ch.q, size=max(16, int(mean_n + 6 * math.sqrt(mean_n + 1)) + 4))
        block = total + np.cumsum(block)
        times_list.append(block)
        total = block[-1]
        if total >= horizon:
            break
    times = np.concatenate(times_list)
    times = times[times < horizon]
    n = times.size
    states = np.empty(n + 1, dtype=np.int64)
    if start == HUB:
        states[0::2] = HUB
        n_petals = states[1::2].size
        states[1::2] = ch.weights.sample(rng, n_petals) if n_petals else []
    else:
        states[0] = start
        states[1::2] = HUB
        n_petals = states[2::2].size
        states[2::2] = ch.weights.sample(rng, n_petals) if n_petals else []
    return ChainPath(horizon, times, states)


# ---------------------------------------------------------------------------
# additive paths
# ---------------------------------------------------------------------------


@dataclass
class MapPath:
    """Refined event grid with values, jumps, and per-cell increments."""

    t: np.ndarray  # (N+1,) grid points, t[0] = 0, t[-1] = horizon
    state: np.ndarray  # (N,) active state per cell
    xi: np.ndarray  # (N+1,) right-continuous values at grid points
    eta: np.ndarray
    jump_dxi: np.ndarray  # (N+1,) jump applied AT t[m]
    jump_deta: np.ndarray
    cont_dxi: np.ndarray  # (N,) continuous increment across cell
    cont_deta: np.ndarray
    cont_piece: np.ndarray  # (N,) eta cont increment already phi-weighted
    mark: np.ndarray  # (N+1,) int8 mark at t[m]
    horizon: float
    saturated: bool = False

    @property
    def n_cells(self) -> int:
        return self.state.size

    def xi_left(self) -> np.ndarray:
        """Left limits of xi at grid points."""
        return self.xi - self.jump_dxi

    def state_at_points(self) -> np.ndarray:
        return np.append(self.state, self.state[-1])

    def switch_points(self) -> np.ndarray:
        """Grid indices m where a chain switch happens at t[m]."""
        return np.nonzero(self.mark == MARK_SWITCH)[0]


def _phi(d: np.ndarray) -> np.ndarray:
    """(1 - e^(-d))/d with phi(0) = 1, the exact linear-cell weight."""
    out = np.ones_like(d)
    nz = d != 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        out[nz] = -np.expm1(-d[nz]) / d[nz]
    return out


def simulate_additive(spec: MapSpec, chain_path: ChainPath, mesh: float,
                      rng: np.random.Generator,
                      mesh_everywhere: bool = False) -> MapPath:
    """Refine the chain path into an event grid and draw (xi, eta) on it.

    The mesh sub-grid is inserted only inside Gaussian segments, where it
    controls accuracy; drift and jump cells integrate exactly at any
    resolution.  ``mesh_everywhere`` forces the sub-grid into every
    segment, for consumers that want the trace at a fixed resolution.
    """
    if mesh <= 0:
        raise ValueError("mesh must be positive")
    segs = chain_path.segments()
    n_seg = len(segs)
    seg_state = np.array([s for s, _, _ in segs], dtype=np.int64)
    seg_a = np.array([a for _, a, _ in segs])
    seg_b = np.array([b for _, _, b in segs])
    seg_len = seg_b - seg_a

    uniq_states = sorted(set(int(s) for s in seg_state))
    triplets = {s: spec.triplet(s) for s in uniq_states}
    rates = np.array([triplets[int(s)].jump_rate() for s in seg_state])
    gaussy = {s: triplets[s].has_gaussian() for s in uniq_states}

    # (a) Poisson jump counts per segment, one vectorized draw
    counts = rng.poisson(rates * seg_len) if n_seg else np.empty(0, dtype=int)
    total_jumps = int(counts.sum())
    # (b) jump epochs, uniform within their segment
    u = rng.random(total_jumps)
    seg_of_jump = np.repeat(np.arange(n_seg), counts)
    epochs = seg_a[seg_of_jump] + u * seg_len[seg_of_jump]

    # assemble cell boundaries per segment: epochs + regular sub-grid
    bounds_per_seg: list[np.ndarray] = []
    jump_flags_per_seg: list[np.ndarray] = []
    pos = 0
    for i, (s, a, b) in enumerate(segs):
        k = counts[i]
        ep = np.sort(epochs[pos:pos + k])
        pos += k
        if gaussy[s] or mesh_everywhere:
            n_sub = max(1, math.ceil((b - a) / mesh))
            grid = a + (b - a) * np.arange(1, n_sub) / n_sub
        else:
            grid = np.empty(0)
        inner = np.concatenate([ep, grid])
        flags = np.concatenate([np.ones(ep.size, bool), np.zeros(grid.size, bool)])
        order = np.argsort(inner, kind="stable")
        inner, flags = inner[order], flags[order]
        keep = np.ones(inner.size, bool)  # drop exact collisions, keep the jump
        if inner.size > 1:
            keep[1:] = np.diff(inner) > 0
        bounds_per_seg.append(inner[keep])
        jump_flags_per_seg.append(flags[keep])

    # global grid
    t_parts = [np.array([0.0])]
    mark_parts = [np.array([MARK_GRID], dtype=np.int8)]
    cell_state_parts = []
    for i, (s, a, b) in enumerate(segs):
        inner = bounds_per_seg[i]
        flags = jump_flags_per_seg[i]
        pts = np.concatenate([inner, [b]])
        mk = np.concatenate([np.where(flags, MARK_LEVY, MARK_GRID).astype(np.int8),
                             [MARK_SWITCH if i < n_seg - 1 else MARK_GRID]])
        t_parts.append(pts)
        mark_parts.append(mk)
        cell_state_parts.append(np.full(inner.size + 1, s, dtype=np.int64))
    t = np.concatenate(t_parts)
    mark = np.concatenate(mark_parts)
    state = np.concatenate(cell_state_parts)
    n_cells = state.size

    jump_dxi = np.zeros(n_cells + 1)
    jump_deta = np.zeros(n_cells + 1)

    # (c) Levy jump marks, batched per state in sorted order
    levy_idx = np.nonzero(mark == MARK_LEVY)[0]
    if levy_idx.size:
        levy_states = state[levy_idx - 1]
        for s in uniq_states:
            jc = triplets[s].jumps
            sel = levy_idx[levy_states == s]
            if sel.size == 0 or jc is None:
                continue
            jx, jy = jc.law.sample(rng, sel.size)
            jump_dxi[sel] = jx
            jump_deta[sel] = _filter_eta_jumps(spec, np.asarray(jy, dtype=float))

    # (d) switch jump marks, batched per ordered pair in sorted order
    sw_idx = np.nonzero(mark == MARK_SWITCH)[0]
    if sw_idx.size:
        pair_from = state[sw_idx - 1]
        pair_to = state[sw_idx]
        pairs = sorted(set(zip(pair_from.tolist(), pair_to.tolist())))
        for (i, j) in pairs:
            sel = sw_idx[(pair_from == i) & (pair_to == j)]
            zx, zy = spec.switch_law(int(i), int(j)).sample(rng, sel.size)
            jump_dxi[sel] = zx
            if spec.eta_switch_keep:
                jump_deta[sel] = zy

    # (e) Gaussian + drift continuous increments per cell
    cell_len = np.diff(t)
    cont_dxi = np.zeros(n_cells)
    cont_deta = np.zeros(n_cells)
    eta_gauss_cell = np.zeros(n_cells, dtype=bool)
    for s in uniq_states:
        trip = triplets[s]
        sel = np.nonzero(state == s)[0]
        if sel.size == 0:
            continue
        bx, by = trip.eff_drift()
        dl = cell_len[sel]
        dx = bx * dl
        dy = by * dl
        vx, cxy, vy = trip.gauss_cov()
        if gaussy[s]:
            # correlated increments via the covariance square root
            a11 = math.sqrt(vx)
            a21 = cxy / a11 if a11 > 0 else 0.0
            a22 = math.sqrt(max(vy - a21 * a21, 0.0))
            z = rng.standard_normal((2, sel.size))
            sq = np.sqrt(dl)
            dx = dx + a11 * sq * z[0]
            dy = dy + (a21 * z[0] + a22 * z[1]) * sq
            eta_gauss_cell[sel] = (vy > 0) or (cxy != 0)
        cont_dxi[sel] = dx
        cont_deta[sel] = dy if spec.eta_cont_keep else 0.0

    # values at grid points: interleave (cont across cell m, jump at t[m+1])
    xi = np.concatenate([[0.0], _cumsum(np.stack([cont_dxi, jump_dxi[1:]], axis=1).ravel())[1::2]])
    eta = np.concatenate([[0.0], _cumsum(np.stack([cont_deta, jump_deta[1:]], axis=1).ravel())[1::2]])

    cont_piece = np.where(eta_gauss_cell, cont_deta, cont_deta * _phi(cont_dxi))

    sat = bool(np.any(np.abs(jump_deta) >= 0.99 * SATURATION) or
               np.any(np.abs(cont_deta[np.isfinite(cont_deta)]) >= 0.99 * SATURATION) or
               not np.all(np.isfinite(eta)))
    return MapPath(t=t, state=state, xi=xi, eta=eta,
                   jump_dxi=jump_dxi, jump_deta=jump_deta,
                   cont_dxi=cont_dxi, cont_deta=cont_deta, cont_piece=cont_piece,
                   mark=mark, horizon=chain_path.horizon, saturated=sat)


def _filter_eta_jumps(spec: MapSpec, jy: np.ndarray) -> np.ndarray:
    if spec.eta_jump_keep == "all":
        return jy
    big = np.abs(jy) >= 1.0
    if spec.eta_jump_keep == "big":
        return np.where(big, jy, 0.0)
    return np.where(big, 0.0, jy)


def simulate_path(spec: MapSpec, horizon: float, mesh: float,
                  rng: np.random.Generator, start: int | None = None) -> MapPath:
    """Chain plus additive components in one call (one rng stream)."""
    return simulate_additive(spec, simulate_chain(spec, horizon, rng, start), mesh, rng)


# ---------------------------------------------------------------------------
# the exponential integral
# ---------------------------------------------------------------------------


@dataclass
class ExpIntegralTrace:
    values: np.ndarray  # (N+1,) E(t_m), right-continuous
    cont_terms: np.ndarray  # (N,) contribution of cell m's continuous part
    jump_terms: np.ndarray  # (N+1,) contribution of the jump AT t[m]

    def left_limits(self) -> np.ndarray:
        return self.values - self.jump_terms

    def at_time(self, path: MapPath, when: float) -> float:
        m = int(np.searchsorted(path.t, when, side="right") - 1)
        return float(self.values[max(m, 0)])


def _safe_exp_prod(exponent: np.ndarray, factor: np.ndarray) -> np.ndarray:
    """exp(exponent) * factor with the zero-factor shortcut.

    Zero eta-increments must not evaluate exp: the exponent can overflow
    precisely at those events (deep-ladder xi excursions carry no eta).
    Huge factors (heavy-tail jumps near or past float range) fold their
    magnitude into the exponent, which keeps exp(-745) * 1e307 honest
    instead of 0 * inf.
    """
    out = np.zeros_like(factor)
    nz = factor != 0.0
    if np.any(nz):
        # invalid = 0 * inf; every such entry has a big factor and is
        # rewritten in log space below
        with np.errstate(over="ignore", invalid="ignore"):
            out[nz] = np.exp(exponent[nz]) * factor[nz]
        big = nz & (np.abs(factor) > 1e300)
        if np.any(big):
            with np.errstate(over="ignore", invalid="ignore"):
                out[big] = (np.sign(factor[big])
                            * np.exp(exponent[big] + np.log(np.abs(factor[big]))))
    return out


def exp_integral(path: MapPath) -> ExpIntegralTrace:
    n = path.n_cells
    xi_l = path.xi[:n]  # value at left endpoint of cell
    xi_pre_jump = xi_l + path.cont_dxi  # left limit at t[m+1]
    cont = _safe_exp_prod(-xi_l, path.cont_piece)
    jump_at_next = _safe_exp_prod(-xi_pre_jump, path.jump_deta[1:])
    terms = np.stack([cont, jump_at_next], axis=1).ravel()
    run = _cumsum(terms)
    values = np.concatenate([[0.0], run[1::2]])
    jump_terms = np.concatenate([[0.0], jump_at_next])
    return ExpIntegralTrace(values=values, cont_terms=cont, jump_terms=jump_terms)


def normalized_window_integrals(path: MapPath, starts: np.ndarray,
                                stops: np.ndarray, refs: np.ndarray,
                                include_start_jump: bool = False) -> np.ndarray:
    """Per-window integrals int exp(-(xi_{s-} - ref)) d eta over (t_a, t_b].

    Windows are given by grid-index pairs (a, b]; refs is the xi value
    each window renormalizes against.  When ``include_start_jump`` is
    set the jump AT t_a is included (used for excursions, whose windows
    open at the exit instant with its switch jump).
    """
    n = path.n_cells
    out = np.zeros(len(starts))
    xi_l = path.xi[:n]
    xi_pre = xi_l + path.cont_dxi
    for i, (a, b) in enumerate(zip(starts, stops)):
        r = refs[i]
        cells = slice(a, b)
        cont = _safe_exp_prod(r - xi_l[cells], path.cont_piece[cells])
        jumps = _safe_exp_prod(r - xi_pre[cells], path.jump_deta[a + 1:b + 1])
        terms = np.stack([cont, jumps], axis=1).ravel()
        if include_start_jump and path.jump_deta[a] != 0.0:
            lead = _safe_exp_prod(np.array([r - path.xi_left()[a]]),
                                  np.array([path.jump_deta[a]]))
            terms = np.concatenate([lead, terms])
        finite = terms[np.isfinite(terms)]
        if finite.size and np.abs(finite).max() > _SPIKE:
            out[i] = neumaier_cumsum(terms)[-1] if terms.size else 0.0
        else:
            out[i] = terms.sum()
    return out


def normalized_window_sups(path: MapPath, starts, stops, refs) -> np.ndarray:
    """Per-window running sup of |int exp(-(xi-ref)) d eta| from the window start."""
    n = path.n_cells
    out = np.zeros(len(starts))
    xi_l = path.xi[:n]
    xi_pre = xi_l + path.cont_dxi
    for i, (a, b) in enumerate(zip(starts, stops)):
        r = refs[i]
        cells = slice(a, b)
        cont = _safe_exp_prod(r - xi_l[cells], path.cont_piece[cells])
        jumps = _safe_exp_prod(r - xi_pre[cells], path.jump_deta[a + 1:b + 1])
        terms = np.stack([cont, jumps], axis=1).ravel()
        if terms.size == 0:
            out[i] = 0.0
            continue
        if not np.all(np.isfinite(terms)):
            out[i] = math.inf
            continue
        if np.abs(terms).max() > _SPIKE:
            run = neumaier_cumsum(terms)
        else:
            run = np.cumsum(terms)
        out[i] = float(np.max(np.abs(run)))
    return out


# ---------------------------------------------------------------------------
# cycles, excursions, conflation
# ---------------------------------------------------------------------------


def _entries_exits(path: MapPath, j: int):
    """Grid indices of switches into / out of state j."""
    sw = path.switch_points()
    if sw.size == 0:
        return np.empty(0, int), np.empty(0, int)
    before = path.state[sw - 1]
    after = path.state[np.minimum(sw, path.n_cells - 1)]
    entries = sw[(after == j) & (before != j)]
    exits = sw[(before == j) & (after != j)]
    return entries, exits


@dataclass
class ExcursionBatch:
    """Per-cycle regeneration statistics for one anchor state."""

    anchor: int
    xi_return: np.ndarray  # xi increment over the full cycle
    conflation_jump: np.ndarray  # xi_{tau} - xi_{tau^- -}
    eta_increment: np.ndarray  # eta_{tau} - eta_{tau^- -}
    excursion_integral: np.ndarray  # normalized at the exit left limit
    running_sup: np.ndarray  # W per cycle, normalized at cycle start
    duration: np.ndarray
    n_discarded: int = 0
    n_paths: int = 0

    @property
    def n_cycles(self) -> int:
        return self.xi_return.size

    def extend(self, other: "ExcursionBatch") -> "ExcursionBatch":
        return ExcursionBatch(
            anchor=self.anchor,
            xi_return=np.concatenate([self.xi_return, other.xi_return]),
            conflation_jump=np.concatenate([self.conflation_jump, other.conflation_jump]),
            eta_increment=np.concatenate([self.eta_increment, other.eta_increment]),
            excursion_integral=np.concatenate([self.excursion_integral, other.excursion_integral]),
            running_sup=np.concatenate([self.running_sup, other.running_sup]),
            duration=np.concatenate([self.duration, other.duration]),
            n_discarded=self.n_discarded + other.n_discarded,
            n_paths=self.n_paths + other.n_paths)


def _empty_batch(j: int) -> ExcursionBatch:
    z = np.empty(0)
    return ExcursionBatch(j, z, z, z, z, z, z, 0, 0)


def excursion_stats_one(path: MapPath, j: int) -> ExcursionBatch:
    """Cycle statistics of one path for anchor j.

    Cycles run between consecutive returns to j (the path's start counts
    as a return when it starts in j); the trailing incomplete cycle is
    discarded and counted.
    """
    entries, exits = _entries_exits(path, j)
    starts_in_j = path.state[0] == j
    cycle_starts = entries
    if starts_in_j:
        cycle_starts = np.concatenate([[0], entries])
    if cycle_starts.size < 2:
        b = _empty_batch(j)
        b.n_discarded = 1 if cycle_starts.size else 0
        b.n_paths = 1
        return b

    n_cyc = cycle_starts.size - 1
    c_start = cycle_starts[:-1]
    c_end = cycle_starts[1:]
    # the exit inside each cycle: first exit index > cycle start
    ex_pos = np.searchsorted(exits, c_start, side="right")
    ex_idx = exits[ex_pos]

    xi = path.xi
    xi_left = path.xi_left()
    eta_left = path.eta - path.jump_deta

    xi_return = xi[c_end] - xi[c_start]
    conflation = xi[c_end] - xi_left[ex_idx]
    eta_inc = path.eta[c_end] - eta_left[ex_idx]
    refs_exit = xi_left[ex_idx]
    excur = normalized_window_integrals(path, ex_idx, c_end, refs_exit,
                                        include_start_jump=True)
    sups = normalized_window_sups(path, c_start, c_end, xi[c_start])
    durations = path.t[c_end] - path.t[c_start]
    return ExcursionBatch(j, xi_return, conflation, eta_inc, excur, sups,
                          durations, n_discarded=1, n_paths=1)


def excursion_stats(paths, j: int) -> ExcursionBatch:
    """Pooled cycle statistics across a batch of paths."""
    total = _empty_batch(j)
    for path in paths:
        total = total.extend(excursion_stats_one(path, j))
    if total.n_cycles == 0:
        raise NoCompleteCycle(f"no complete return cycle to state {j}")
    return total


@dataclass
class ConflatedPath:
    """Path restricted to the sojourn set of the anchor, time-compressed."""

    t: np.ndarray
    xi: np.ndarray
    e_trace: np.ndarray
    is_conflation_jump: np.ndarray
    total_time: float
    anchor: int


def conflate(path: MapPath, trace: ExpIntegralTrace, j: int) -> ConflatedPath:
    if path.state[0] != j:
        raise AnchorMismatch(f"path starts in {int(path.state[0])}, not {j}")
    entries, exits = _entries_exits(path, j)
    n_pts = path.t.size
    keep = np.zeros(n_pts, dtype=bool)
    # points belonging to j-sojourns: cell state == j marks [t_m, t_{m+1});
    # the horizon endpoint inherits the last cell
    keep[:-1] = path.state == j
    keep[-1] = path.state[-1] == j
    keep[entries] = True  # re-entry points carry the conflation jump
    keep[0] = True
    # excised time before each point: cumulative completed-excursion lengths
    sw_exit_t = path.t[exits]
    sw_entry_t = path.t[entries]
    n_exc = min(sw_exit_t.size, sw_entry_t.size)
    cum_removed = np.concatenate([[0.0], np.cumsum(sw_entry_t[:n_exc] - sw_exit_t[:n_exc])])
    removed_before = cum_removed[np.searchsorted(sw_entry_t[:n_exc], path.t, side="right")]
    # trailing incomplete excursion is dropped entirely
    if exits.size > entries.size:
        keep[exits[-1]:] = False
        keep[0] = True
    idx = np.nonzero(keep)[0]
    that = path.t[idx] - removed_before[idx]
    is_jump = np.isin(idx, entries)
    total = float(that[-1]) if that.size else 0.0
    return ConflatedPath(t=that, xi=path.xi[idx], e_trace=trace.values[idx],
                         is_conflation_jump=is_jump, total_time=total, anchor=j)


# ---------------------------------------------------------------------------
# batch driver
# ---------------------------------------------------------------------------


def single_state_terminal(spec: MapSpec, horizon: float, mesh: float,
                          n_paths: int, policy: RngPolicy,
                          chunk: int = 128) -> np.ndarray:
    """Terminal E(horizon) for a jump-free single-state model, vectorized.

    Paths are generated in fixed chunks of ``chunk`` with one stream per
    chunk index, so results are deterministic for a given policy and
    independent of how the chunks are scheduled.
    """
    (s,) = spec.states()
    trip = spec.triplet(s)
    if trip.jumps is not None and trip.jump_rate() > 0:
        raise ValueError("fast path supports jump-free triplets only")
    n_cells = max(1, math.ceil(horizon / mesh))
    dt = horizon / n_cells
    bx, by = trip.eff_drift()
    vx, cxy, vy = trip.gauss_cov()
    a11 = math.sqrt(vx)
    a21 = cxy / a11 if a11 > 0 else 0.0
    a22 = math.sqrt(max(vy - a21 * a21, 0.0))
    eta_gauss = (vy > 0) or (cxy != 0)
    out = np.empty(n_paths)
    done = 0
    k = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        rng = policy.rng_for(k)
        if a11 > 0 or a22 > 0:
            z = rng.standard_normal((2, m, n_cells))
        else:
            z = np.zeros((2, m, n_cells))
        sq = math.sqrt(dt)
        dxi = bx * dt + a11 * sq * z[0]
        deta = by * dt + (a21 * z[0] + a22 * z[1]) * sq
        xi_left = np.cumsum(dxi, axis=1) - dxi  # xi at cell left endpoints
        weight = deta if eta_gauss else deta * _phi(dxi)
        out[done:done + m] = np.sum(np.exp(-xi_left) * weight, axis=1)
        done += m
        k += 1
    return out


def richardson_levels(spec: MapSpec, horizon: float, mesh0: float,
                      n_levels: int, rng: np.random.Generator) -> list[float]:
    """E(horizon) under nested dyadic mesh refinement with shared noise.

    One chain and one set of switch jumps serve every level; Brownian
    increments are drawn once at the finest partition and pair-summed
    upward, so consecutive levels differ only by sub-cell reallocation.
    Supports jump-free triplets (diffusion + drift + switches).
    """
    for s in ({HUB} if not spec.finite_state else set(spec.states())):
        if spec.triplet(s).jump_rate() > 0:
            raise ValueError("richardson study supports jump-free triplets only")
    chain = simulate_chain(spec, horizon, rng)
    segs = chain.segments()
    factor_max = 2 ** (n_levels - 1)
    # shared draws: per segment, finest-level Brownian increments
    seg_data = []
    for s, a, b in segs:
        n0 = max(1, math.ceil((b - a) / mesh0))
        nf = n0 * factor_max
        trip = spec.triplet(s)
        vx, cxy, vy = trip.gauss_cov()
        a11 = math.sqrt(vx)
        a21 = cxy / a11 if a11 > 0 else 0.0
        a22 = math.sqrt(max(vy - a21 * a21, 0.0))
        dt = (b - a) / nf
        z = rng.standard_normal((2, nf)) if trip.has_gaussian() else np.zeros((2, nf))
        bx, by = trip.eff_drift()
        sq = math.sqrt(dt)
        fine_dxi = bx * dt + a11 * sq * z[0]
        fine_deta = by * dt + (a21 * z[0] + a22 * z[1]) * sq
        seg_data.append((s, a, b, n0, fine_dxi, fine_deta,
                         (vy > 0) or (cxy != 0)))
    # shared switch jumps
    sw_jumps = []
    for i in range(len(segs) - 1):
        zx, zy = spec.switch_law(segs[i][0], segs[i + 1][0]).sample(rng, 1)
        sw_jumps.append((float(zx[0]), float(zy[0])))

    out = []
    for level in range(n_levels):
        take = 2 ** (n_levels - 1 - level)
        xi = 0.0
        total = 0.0
        for k, (s, a, b, n0, fdxi, fdeta, eta_gauss) in enumerate(seg_data):
            dxi = fdxi.reshape(-1, take).sum(axis=1)
            deta = fdeta.reshape(-1, take).sum(axis=1)
            xi_left = xi + np.cumsum(dxi) - dxi
            weight = deta if eta_gauss else deta * _phi(dxi)
            total += float(np.sum(np.exp(-xi_left) * weight))
            xi = float(xi_left[-1] + dxi[-1])
            if k < len(sw_jumps):
                zx, zy = sw_jumps[k]
                if zy != 0.0:
                    total += math.exp(-xi) * zy
                xi += zx
        out.append(total)
    return out


_WORK_FN = None


def _pool_init(fn):
    global _WORK_FN
    _WORK_FN = fn


def _pool_call(arg):
    return _WORK_FN(arg)


def map_over_paths(fn, args_list, threads: int = 1):
    """Apply fn to each arg, optionally across processes; order preserved.

    ``fn`` must be a module-level callable (picklable).  Results land in
    pre-assigned slots, so the output is identical for any worker count.
    """
    if threads <= 1 or len(args_list) <= 1:
        return [fn(a) for a in args_list]
    out = [None] * len(args_list)
    with ProcessPoolExecutor(max_workers=threads, initializer=_pool_init,
                             initargs=(fn,)) as pool:
        for i, res in enumerate(pool.map(_pool_call, args_list, chunksize=8)):
            out[i] = res
    return out

"""Discretized delay-distortion control.

Finite MDP over (available energy, queue, observation state, channel state)
with per-slot cost gamma*distortion + (1-gamma)*queue, built from the same
rate models the continuous tools use. Quantities are discretized the way the
buffers are counted: the source rate is converted to whole queue units by
rounding up (f/M, ceiling), the channel service by rounding down (g/N,
floor). A production burst that does not fit in the finite queue is
truncated and the slot accrues the worst-case distortion d_max.

The decision-time energy state is the whole buffer content, carried energy
plus the current arrival; the carried component alone is what the battery
hardware stores, so level sets are declared for the carried part and the
solver works on the induced lattice of available values.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from .errors import DomainError, SpecError, InvariantViolation
from .models import (
    DiscretePmf,
    SlotGeometry,
    channel_rate_awgn,
    effective_source_output,
)

_KEY_DECIMALS = 9


def _key(v: float) -> float:
    """Canonical float key for lattice values (stable dict lookups)."""
    return round(float(v), _KEY_DECIMALS)


def _produced_units(source, geom, d, ts, q) -> tuple:
    """(queue units added, accrued distortion, skipped) for one slot."""
    bits, dist, skipped = effective_source_output(source, geom, d, ts, q)
    units = int(math.ceil(bits / geom.source_samples - 1e-9))
    return max(units, 0), dist, skipped


def _served_units(geom, h, tt) -> int:
    g = channel_rate_awgn(geom, h, tt)
    return max(int(math.floor(g / geom.channel_uses + 1e-9)), 0)


# ---------------------------------------------------------------------------
# problem statement


@dataclass(frozen=True)
class DiscreteSpec:
    """Finite delay-distortion problem.

    queue_levels must be the consecutive integers 0..n: the queue is counted
    in whole codeword units and every intermediate fill level is reachable.
    battery_levels list the storable (carried) energy values; the current
    arrival rides on top of them. ts_levels and tt_levels are the discrete
    per-slot energy actions. gamma weighs distortion against queue length in
    the cost; discount is the value-iteration discount factor.
    """

    queue_levels: tuple
    battery_levels: tuple
    energy_arrivals: DiscretePmf
    q_support: tuple
    q_pmf: tuple
    h_support: tuple
    h_pmf: tuple
    d_levels: tuple
    ts_levels: tuple
    tt_levels: tuple
    gamma: float
    discount: float
    d_max: float

    def __post_init__(self):
        for name in ("queue_levels", "battery_levels", "d_levels",
                     "ts_levels", "tt_levels", "q_support", "q_pmf",
                     "h_support", "h_pmf"):
            object.__setattr__(self, name,
                               tuple(float(v) for v in getattr(self, name)))
        for name in ("queue_levels", "battery_levels", "d_levels",
                     "ts_levels", "tt_levels"):
            vals = getattr(self, name)
            if not vals:
                raise SpecError(f"{name} must be nonempty")
            if any(v < 0.0 for v in vals):
                raise SpecError(f"{name} must be nonnegative")
            if list(vals) != sorted(vals):
                raise SpecError(f"{name} must be sorted ascending")
            if len(set(vals)) != len(vals):
                raise SpecError(f"{name} must not repeat values")
        if [int(x) for x in self.queue_levels] != list(range(len(self.queue_levels))) \
                or any(x != int(x) for x in self.queue_levels):
            raise SpecError("queue_levels must be the consecutive integers 0..n")
        for sup, pmf, label in ((self.q_support, self.q_pmf, "q"),
                                (self.h_support, self.h_pmf, "h")):
            if len(sup) != len(pmf) or not sup:
                raise SpecError(f"{label} support/pmf must be equal-length, nonempty")
            if any(p < 0.0 for p in pmf):
                raise SpecError(f"{label} pmf must be nonnegative")
            if abs(math.fsum(pmf) - 1.0) > 1e-12:
                raise SpecError(f"{label} pmf must sum to 1")
        if not isinstance(self.energy_arrivals, DiscretePmf):
            raise SpecError("energy_arrivals must be a DiscretePmf")
        if not 0.0 <= self.gamma <= 1.0:
            raise SpecError("gamma must lie in [0, 1]")
        if not 0.0 <= self.discount < 1.0:
            raise SpecError("discount must lie in [0, 1)")
        if self.d_max <= 0.0:
            raise SpecError("d_max must be positive")
        if 0.0 not in self.ts_levels or 0.0 not in self.tt_levels:
            raise SpecError("the idle action needs ts=0 and tt=0 levels; "
                            "without it some states have no admissible action")


@dataclass(frozen=True)
class SolvedPolicy:
    """Deterministic stationary policy from value iteration."""

    value: dict
    action: dict
    iterations: int
    residual: float
    residual_history: tuple = ()


@dataclass(frozen=True)
class MdpTables:
    """Dense tables of one finite control problem.

    states are (available energy, queue, q, h) tuples; actions are (d, ts,
    tt) sorted ascending so ties in the Bellman argmin resolve to the
    lexicographically lowest action. cost is +inf at inadmissible pairs and
    their kernel rows are all zero.
    """

    spec: DiscreteSpec
    states: tuple
    reported_states: tuple
    actions: tuple
    admissible: np.ndarray       # (n_s, n_a) bool
    cost: np.ndarray             # (n_s, n_a), inf where inadmissible
    d_eff: np.ndarray            # (n_s, n_a)
    queue_value: np.ndarray      # (n_s,)
    trans: np.ndarray            # (n_s, n_a, n_s)
    gamma: float

    def with_gamma(self, gamma: float) -> "MdpTables":
        """Same dynamics, different cost weight (arrays shared)."""
        if not 0.0 <= gamma <= 1.0:
            raise SpecError("gamma must lie in [0, 1]")
        cost = np.where(self.admissible,
                        gamma * self.d_eff + (1.0 - gamma) * self.queue_value[:, None],
                        np.inf)
        return replace(self, cost=cost, gamma=gamma)


def build_mdp(spec: DiscreteSpec, source, geometry: SlotGeometry) -> MdpTables:
    """Materialize the kernel, cost, and admissibility tables.

    Raises SpecError when the energy lattice is not closed under the
    declared actions and arrivals, or when some state ends up with no
    admissible action.
    """
    arr = spec.energy_arrivals
    b_max = spec.battery_levels[-1]
    avail_levels = sorted({_key(b + e)
                           for b in spec.battery_levels for e in arr.values})
    avail_set = set(avail_levels)
    x_max = spec.queue_levels[-1]

    states = tuple(itertools.product(avail_levels, spec.queue_levels,
                                     spec.q_support, spec.h_support))
    index = {s: i for i, s in enumerate(states)}
    actions = tuple(sorted(itertools.product(spec.d_levels, spec.ts_levels,
                                             spec.tt_levels)))
    n_s, n_a = len(states), len(actions)

    # environment branch list (e', q', h') with product probabilities
    branches = [(e, q, h, pe * pq * ph)
                for e, pe in zip(arr.values, arr.probs)
                for q, pq in zip(spec.q_support, spec.q_pmf)
                for h, ph in zip(spec.h_support, spec.h_pmf)]

    prod_cache = {}
    for d in spec.d_levels:
        for ts in spec.ts_levels:
            for q in spec.q_support:
                prod_cache[(d, ts, q)] = _produced_units(source, geometry, d, ts, q)
    serve_cache = {(h, tt): _served_units(geometry, h, tt)
                   for h in spec.h_support for tt in spec.tt_levels}

    admissible = np.zeros((n_s, n_a), dtype=bool)
    cost = np.full((n_s, n_a), np.inf)
    d_eff = np.full((n_s, n_a), np.nan)
    queue_value = np.array([s[1] for s in states])
    trans = np.zeros((n_s, n_a, n_s))

    for si, (av, x, q, h) in enumerate(states):
        for ai, (d, ts, tt) in enumerate(actions):
            spend = ts + tt
            if spend > av + 1e-9:
                continue
            carried = _key(min(av - spend, b_max))
            produced, dist, skipped = prod_cache[(d, ts, q)]
            served = serve_cache[(h, tt)]
            x_after = max(int(x) - served, 0)
            overflow = x_after + produced > x_max
            x_next = min(x_after + produced, int(x_max))
            de = spec.d_max if (overflow or skipped) else dist
            admissible[si, ai] = True
            d_eff[si, ai] = de
            cost[si, ai] = spec.gamma * de + (1.0 - spec.gamma) * x
            for e2, q2, h2, p in branches:
                nxt = _key(carried + e2)
                if nxt not in avail_set:
                    raise SpecError(
                        f"energy lattice not closed: carried {carried} plus "
                        f"arrival {e2} leaves the declared levels")
                trans[si, ai, index[(nxt, float(x_next), q2, h2)]] += p
        if not admissible[si].any():
            raise SpecError(f"state {states[si]} has no admissible action")

    row_sums = trans[admissible].sum(axis=1)
    if np.abs(row_sums - 1.0).max() > 1e-12:
        raise InvariantViolation("transition rows must sum to 1")

    reported = tuple(itertools.product(spec.battery_levels, spec.queue_levels,
                                       spec.q_support, spec.h_support))
    return MdpTables(spec=spec, states=states, reported_states=reported,
                     actions=actions, admissible=admissible, cost=cost,
                     d_eff=d_eff, queue_value=queue_value, trans=trans,
                     gamma=spec.gamma)


# ---------------------------------------------------------------------------
# solving


def _vi_arrays(cost, trans, discount, tol, max_iterations=200000):
    """Raw value iteration on dense tables; returns (V, act_idx, iters, hist)."""
    n_s = cost.shape[0]
    v = np.zeros(n_s)
    hist = []
    iters = 0
    for iters in range(1, max_iterations + 1):
        qv = cost + discount * (trans @ v)
        vn = qv.min(axis=1)
        r = float(np.max(np.abs(vn - v)))
        hist.append(r)
        v = vn
        if r < tol:
            break
    qv = cost + discount * (trans @ v)
    return v, np.argmin(qv, axis=1), iters, hist


def value_iteration(mdp: MdpTables, discount: float,
                    tol: float = 1e-10) -> SolvedPolicy:
    """Solve for the discounted optimum; greedy actions break ties toward
    the lexicographically lowest (d, ts, tt)."""
    if not 0.0 <= discount < 1.0:
        raise DomainError("discount must lie in [0, 1)")
    v, act, iters, hist = _vi_arrays(mdp.cost, mdp.trans, discount, tol)
    value = {s: float(v[i]) for i, s in enumerate(mdp.states)}
    action = {s: mdp.actions[act[i]] for i, s in enumerate(mdp.states)}
    return SolvedPolicy(value=value, action=action, iterations=iters,
                        residual=hist[-1] if hist else 0.0,
                        residual_history=tuple(hist))


def _stationary_power(P, start_index=0, tol=1e-12, max_iterations=500000):
    """Long-run state law by lazy power iteration from a point mass."""
    n = P.shape[0]
    x = np.zeros(n)
    x[start_index] = 1.0
    for _ in range(max_iterations):
        xn = 0.5 * x + 0.5 * (x @ P)
        if np.abs(xn - x).sum() < tol:
            return xn / xn.sum()
        x = xn
    return x / x.sum()


def stationary_distribution(mdp: MdpTables, policy: SolvedPolicy,
                            tol: float = 1e-12) -> np.ndarray:
    """Stationary law of the chain the policy induces, by power iteration."""
    act = np.array([mdp.actions.index(policy.action[s]) for s in mdp.states])
    P = mdp.trans[np.arange(len(mdp.states)), act, :]
    return _stationary_power(P, 0, tol)


@dataclass(frozen=True)
class TradeoffPoint:
    gamma: float
    avg_queue: float
    avg_distortion: float
    iterations: int
    residual: float


TRADEOFF_CSV_HEADER = "gamma,avg_queue,avg_distortion,iterations,residual"


def _curve_point(mdp: MdpTables, gamma: float, discount: float,
                 tol: float) -> TradeoffPoint:
    g_tables = mdp.with_gamma(gamma)
    v, act, iters, hist = _vi_arrays(g_tables.cost, g_tables.trans, discount, tol)
    P = g_tables.trans[np.arange(len(g_tables.states)), act, :]
    pi = _stationary_power(P)
    avg_q = float(pi @ g_tables.queue_value)
    avg_d = float(pi @ g_tables.d_eff[np.arange(len(g_tables.states)), act])
    return TradeoffPoint(gamma=float(gamma), avg_queue=avg_q,
                         avg_distortion=avg_d, iterations=iters,
                         residual=hist[-1] if hist else 0.0)


def tradeoff_curve(spec: DiscreteSpec, source, geometry: SlotGeometry,
                   gamma_grid, tol: float = 1e-10, jobs: int = 1) -> list:
    """One (avg queue, avg distortion) point per gamma.

    Axes are long-run averages under the solved policy, from the stationary
    law of the induced chain, to match how the trade-off is reported.
    """
    if any(not 0.0 <= g <= 1.0 for g in gamma_grid):
        raise DomainError("gamma grid must lie in [0, 1]")
    base = build_mdp(spec, source, geometry)
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            futs = [ex.submit(_curve_point, base, g, spec.discount, tol)
                    for g in gamma_grid]
            return [f.result() for f in futs]
    return [_curve_point(base, g, spec.discount, tol) for g in gamma_grid]


def write_tradeoff_csv(points, path, preamble: Optional[dict] = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in (preamble or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write(TRADEOFF_CSV_HEADER + "\n")
        for p in points:
            fh.write(f"{p.gamma!r},{p.avg_queue!r},{p.avg_distortion!r},"
                     f"{p.iterations},{p.residual!r}\n")


# ---------------------------------------------------------------------------
# separable baseline: split batteries, decoupled solves, coupled evaluation


def _lattice(alpha: float, b_max: float, arrivals, spend_levels) -> tuple:
    """Closure of carried sub-battery values under charge alpha*e and the
    discrete spends; returns (carried levels, avail levels, cap)."""
    cap = _key(alpha * b_max)
    carried = {0.0}
    frontier = [0.0]
    while frontier:
        c = frontier.pop()
        for e in arrivals.values:
            av = _key(c + _key(alpha * e))
            for sp in spend_levels:
                if sp > av + 1e-9:
                    continue
                nxt = _key(min(av - sp, cap))
                if nxt not in carried:
                    if len(carried) >= 512:
                        raise SpecError("sub-battery lattice too fine; "
                                        "coarsen the alpha grid")
                    carried.add(nxt)
                    frontier.append(nxt)
    avail = sorted({_key(c + _key(alpha * e))
                    for c in carried for e in arrivals.values})
    return sorted(carried), avail, cap


def _solve_source_side(spec, source, geometry, alpha, g_bar, tol):
    """Source sub-problem: queue served at the constant rate g_bar, energy
    from the alpha share. Returns (policy dict keyed (avail, x, q), tables)."""
    arr = spec.energy_arrivals
    _, avail, cap = _lattice(alpha, spec.battery_levels[-1], arr,
                             spec.ts_levels)
    x_max = int(spec.queue_levels[-1])
    states = tuple(itertools.product(avail, spec.queue_levels, spec.q_support))
    index = {s: i for i, s in enumerate(states)}
    actions = tuple(sorted(itertools.product(spec.d_levels, spec.ts_levels)))
    n_s, n_a = len(states), len(actions)
    cost = np.full((n_s, n_a), np.inf)
    trans = np.zeros((n_s, n_a, n_s))
    branches = [(e, q, pe * pq) for e, pe in zip(arr.values, arr.probs)
                for q, pq in zip(spec.q_support, spec.q_pmf)]
    for si, (av, x, q) in enumerate(states):
        for ai, (d, ts) in enumerate(actions):
            if ts > av + 1e-9:
                continue
            produced, dist, skipped = _produced_units(source, geometry, d, ts, q)
            x_after = max(int(x) - int(g_bar), 0)
            overflow = x_after + produced > x_max
            x_next = float(min(x_after + produced, x_max))
            de = spec.d_max if (overflow or skipped) else dist
            cost[si, ai] = spec.gamma * de + (1.0 - spec.gamma) * x
            c2 = _key(min(av - ts, cap))
            for e2, q2, p in branches:
                trans[si, ai, index[(_key(c2 + _key(alpha * e2)), x_next, q2)]] += p
    _, act, _, _ = _vi_arrays(cost, trans, spec.discount, tol)
    policy = {(av, x, q): actions[act[i]]
              for i, (av, x, q) in enumerate(states)}
    return policy, cap


def _solve_channel_side(spec, geometry, alpha, f_bar, tol):
    """Channel sub-problem: arrivals fixed at f_bar, queue-only cost."""
    arr = spec.energy_arrivals
    share = 1.0 - alpha
    _, avail, cap = _lattice(share, spec.battery_levels[-1], arr,
                             spec.tt_levels)
    x_max = int(spec.queue_levels[-1])
    states = tuple(itertools.product(avail, spec.queue_levels, spec.h_support))
    index = {s: i for i, s in enumerate(states)}
    actions = tuple(sorted(spec.tt_levels))
    n_s, n_a = len(states), len(actions)
    cost = np.full((n_s, n_a), np.inf)
    trans = np.zeros((n_s, n_a, n_s))
    branches = [(e, h, pe * ph) for e, pe in zip(arr.values, arr.probs)
                for h, ph in zip(spec.h_support, spec.h_pmf)]
    for si, (av, x, h) in enumerate(states):
        for ai, tt in enumerate(actions):
            if tt > av + 1e-9:
                continue
            served = _served_units(geometry, h, tt)
            x_after = max(int(x) - served, 0)
            x_next = float(min(x_after + int(f_bar), x_max))
            cost[si, ai] = x  # gamma = 0 on this side
            c2 = _key(min(av - tt, cap))
            for e2, h2, p in branches:
                trans[si, ai, index[(_key(c2 + _key(share * e2)), x_next, h2)]] += p
    _, act, _, _ = _vi_arrays(cost, trans, spec.discount, tol)
    policy = {(av, x, h): actions[act[i]]
              for i, (av, x, h) in enumerate(states)}
    return policy, cap


def _evaluate_coupled(spec, source, geometry, alpha, src_policy, src_cap,
                      ch_policy, ch_cap):
    """Long-run (avg queue, avg distortion) of the combined policy on the
    full coupled chain with both sub-batteries tracked."""
    arr = spec.energy_arrivals
    share = 1.0 - alpha
    src_carried = sorted({_key(min(av - a[1], src_cap))
                          for (av, x, q), a in src_policy.items()})
    ch_carried = sorted({_key(min(av - a, ch_cap))
                         for (av, x, h), a in ch_policy.items()})
    x_max = int(spec.queue_levels[-1])
    states = tuple(itertools.product(src_carried, ch_carried,
                                     spec.queue_levels, spec.q_support,
                                     spec.h_support))
    n = len(states)
    if n > 100000:
        raise SpecError("coupled evaluation state space too large")
    index = {s: i for i, s in enumerate(states)}
    env_branches = [(q2, h2, pq * ph)
                    for q2, pq in zip(spec.q_support, spec.q_pmf)
                    for h2, ph in zip(spec.h_support, spec.h_pmf)]
    P = np.zeros((n, n))
    dist_cost = np.zeros(n)
    for si, (cs, cc, x, q, h) in enumerate(states):
        for e, pe in zip(arr.values, arr.probs):
            avs = _key(cs + _key(alpha * e))
            avc = _key(cc + _key(share * e))
            d, ts = src_policy[(avs, x, q)]
            tt = ch_policy[(avc, x, h)]
            produced, dist, skipped = _produced_units(source, geometry, d, ts, q)
            served = _served_units(geometry, h, tt)
            x_after = max(int(x) - served, 0)
            overflow = x_after + produced > x_max
            x_next = float(min(x_after + produced, x_max))
            de = spec.d_max if (overflow or skipped) else dist
            dist_cost[si] += pe * de
            cs2 = _key(min(avs - ts, src_cap))
            cc2 = _key(min(avc - tt, ch_cap))
            for q2, h2, p in env_branches:
                P[si, index[(cs2, cc2, x_next, q2, h2)]] += pe * p
    pi = _stationary_exact(P)
    queue_vals = np.array([s[2] for s in states])
    return float(pi @ queue_vals), float(pi @ dist_cost)


def _stationary_exact(P: np.ndarray) -> np.ndarray:
    """Stationary law by direct solve, power-iteration fallback when the
    linear system is degenerate (multiple closed classes)."""
    n = P.shape[0]
    A = P.T - np.eye(n)
    A[-1, :] = 1.0
    b = np.zeros(n)
    b[-1] = 1.0
    try:
        pi = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        pi = None
    if pi is not None and pi.min() > -1e-9 \
            and np.abs(pi @ P - pi).sum() < 1e-8:
        pi = np.clip(pi, 0.0, None)
        return pi / pi.sum()
    return _stationary_power(P)


@dataclass(frozen=True)
class SeparableSolution:
    """Best split-design operating point and its decoupled policies."""

    alpha: float
    g_bar: float
    f_bar: float
    avg_queue: float
    avg_distortion: float
    score: float
    source_policy: dict
    channel_policy: dict


def default_alpha_ratios(spec: DiscreteSpec) -> tuple:
    """Energy-split candidates from the declared action levels."""
    vals = set()
    for levels in (spec.ts_levels, spec.tt_levels):
        top = levels[-1]
        if top > 0.0:
            vals.update(_key(v / top) for v in levels)
    return tuple(sorted(vals)) or (0.5,)


def default_rate_grids(spec: DiscreteSpec, source, geometry) -> tuple:
    """(service grid, arrival grid) of achievable whole-unit rates."""
    g_vals = sorted({_served_units(geometry, h, tt)
                     for h in spec.h_support for tt in spec.tt_levels})
    f_vals = sorted({_produced_units(source, geometry, d, ts, q)[0]
                     for d in spec.d_levels for ts in spec.ts_levels
                     for q in spec.q_support})
    return tuple(g_vals), tuple(f_vals)


def separable_optimize(spec: DiscreteSpec, source, geometry: SlotGeometry,
                       alpha_grid=None, gbar_grid=None, fbar_grid=None,
                       tol: float = 1e-10) -> SeparableSolution:
    """Best decoupled design over (alpha, g_bar, f_bar) candidates.

    The battery is split in proportion alpha / (1 - alpha) between the
    source and channel encoders; each side is solved alone (the source side
    assumes constant service g_bar, the channel side constant arrivals
    f_bar and pure queue cost) and every candidate triple is then scored by
    exact policy evaluation on the coupled chain.
    """
    if alpha_grid is None:
        alpha_grid = default_alpha_ratios(spec)
    if gbar_grid is None or fbar_grid is None:
        g_default, f_default = default_rate_grids(spec, source, geometry)
        gbar_grid = g_default if gbar_grid is None else gbar_grid
        fbar_grid = f_default if fbar_grid is None else fbar_grid
    if not alpha_grid or not gbar_grid or not fbar_grid:
        raise SpecError("candidate grids must be nonempty")
    if any(not 0.0 <= a <= 1.0 for a in alpha_grid):
        raise SpecError("alpha candidates must lie in [0, 1]")

    best = None
    for alpha in alpha_grid:
        src_solved = {g: _solve_source_side(spec, source, geometry, alpha, g, tol)
                      for g in gbar_grid}
        ch_solved = {f: _solve_channel_side(spec, geometry, alpha, f, tol)
                     for f in fbar_grid}
        for g_bar in gbar_grid:
            src_policy, src_cap = src_solved[g_bar]
            for f_bar in fbar_grid:
                ch_policy, ch_cap = ch_solved[f_bar]
                avg_q, avg_d = _evaluate_coupled(
                    spec, source, geometry, alpha, src_policy, src_cap,
                    ch_policy, ch_cap)
                score = spec.gamma * avg_d + (1.0 - spec.gamma) * avg_q
                if best is None or score < best.score:
                    best = SeparableSolution(
                        alpha=float(alpha), g_bar=float(g_bar),
                        f_bar=float(f_bar), avg_queue=avg_q,
                        avg_distortion=avg_d, score=score,
                        source_policy=src_policy, channel_policy=ch_policy)
    return best


def separable_curve(spec: DiscreteSpec, source, geometry: SlotGeometry,
                    gamma_grid, tol: float = 1e-10) -> list:
    """Best separable (avg queue, avg distortion) point per gamma."""
    points = []
    for g in gamma_grid:
        sol = separable_optimize(replace(spec, gamma=float(g)), source,
                                 geometry, tol=tol)
        points.append(TradeoffPoint(gamma=float(g), avg_queue=sol.avg_queue,
                                    avg_distortion=sol.avg_distortion,
                                    iterations=0, residual=0.0))
    return points

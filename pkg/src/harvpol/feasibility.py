"""Long-run feasibility certificates and policy synthesis.

A policy class is certified for a target mean distortion ``d_bar`` by
checking stability of the data queue (mean bits produced strictly below
mean channel capacity) together with the distortion and energy-budget
conditions the class requires.  Checkers evaluate those conditions for
given parameters; synthesizers search the parameter space and return a
checker-certified witness when one exists.

Slot-level error states (zero sensing energy, distortion outside the
model's range) are totalized the same way the simulator treats them:
the encoder skips the slot, produces nothing and accrues d_max.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import DomainError, RateInfinite
from .models import (
    DiscretePmf,
    Environment,
    GaussianIidSourceModel,
    GaussMarkovSourceModel,
    SensorSpec,
    SlotGeometry,
    analog_mmse,
    channel_rate_awgn,
    d_mmse_gaussian_iid,
    mean_energy,
    source_rate,
)
from .policies import (
    AnalogPolicy,
    DoPolicy,
    _lookup,
    GreedyFixedPolicy,
    GreedyPolicy,
    Hybrid1Policy,
    Hybrid2Policy,
    PolicyParams,
)

LN2 = math.log(2.0)

# Rate slack below this is treated as "not strictly stable".
RATE_SLACK = 1e-12
# Synthesizers aim slightly inside every budget so certified witnesses
# carry strictly positive slacks.
BACKOFF = 1.0 - 1e-9


@dataclass(frozen=True)
class FeasibilityReport:
    """Certificate for one policy class at one distortion target.

    binding_margins holds per-condition slack: positive means satisfied
    with room to spare.  Keys depend on the class: "rate" (bits/slot),
    "distortion", "energy_src", "energy_ch" (Joule).  Conditions a
    class does not have are absent.
    """

    feasible: bool
    witness: Optional[PolicyParams]
    binding_margins: dict
    proposition: str


def default_epsilon(env: Environment) -> float:
    return 1e-3 * mean_energy(env)


def default_alpha_grid(n: int = 64):
    """Interior grid on (0,1) shared by the buffered-class searches."""
    return [k / (n + 1) for k in range(1, n + 1)]


# ---------------------------------------------------------------------------
# Expectations over the energy-arrival distribution (closed forms).
# ---------------------------------------------------------------------------

def expected_channel_rate(geom: SlotGeometry, h: float, share: float, energy) -> float:
    """E[g^h(share * E)] in bits per slot."""
    if share < 0 or h < 0:
        raise DomainError("share and h must be nonnegative")
    c = h * share
    if c == 0.0:
        return 0.0
    if isinstance(energy, DiscretePmf):
        return math.fsum(
            p * channel_rate_awgn(geom, h, share * e)
            for e, p in zip(energy.values, energy.probs)
        )
    lo, hi = energy.lo, energy.hi

    def prim(x: float) -> float:
        cx = c * x
        return ((1.0 + cx) * math.log1p(cx) - cx) / c

    return geom.channel_uses * (prim(hi) - prim(lo)) / ((hi - lo) * LN2)


def _ex1_f2_expect(model: GaussianIidSourceModel, geom: SlotGeometry,
                   share: float, energy) -> tuple:
    """(E[f2 factor of share*E | non-skip], P(skip)) for the iid encoder.

    Only zero sensing energy produces a skip; with a continuous arrival
    the factor can still diverge (eta == 1 with support touching 0), in
    which case inf is returned.
    """
    zeta, eta = model.zeta, model.eta
    if isinstance(energy, DiscretePmf):
        tot = 0.0
        pskip = 0.0
        plive = 0.0
        for e, p in zip(energy.values, energy.probs):
            ts = share * e
            if ts <= 0.0:
                pskip += p
                continue
            plive += p
            tot += p * zeta * max(
                (geom.bandwidth_ratio * ts / model.ts_max) ** (-1.0 / eta), 1.0)
        if plive <= 0.0:
            return 0.0, pskip
        return tot / plive, pskip
    lo, hi = energy.lo, energy.hi
    kappa = geom.bandwidth_ratio * share / model.ts_max
    if kappa == 0.0:
        return 0.0, 1.0
    xstar = 1.0 / kappa
    flat = hi - min(max(lo, xstar), hi)
    pow_hi = min(hi, xstar)
    if pow_hi > lo:
        expo = 1.0 - 1.0 / eta
        if expo <= 0.0:
            if lo <= 0.0:
                return math.inf, 0.0
            powpart = (math.log(pow_hi) - math.log(lo)) / kappa
        else:
            powpart = kappa ** (-1.0 / eta) * (pow_hi ** expo - lo ** expo) / expo
    else:
        powpart = 0.0
    return zeta * (powpart + flat) / (hi - lo), 0.0


def _ex2_expected(model: GaussMarkovSourceModel, geom: SlotGeometry, d: float,
                  q: float, share: float, energy) -> tuple:
    """(mean bits, skip probability) for the predictive encoder at
    sensing energy share*E.  Arrivals at or below the minimum sensing
    energy skip the slot (0 bits, d_max distortion)."""
    ov = model.nu / geom.bandwidth_ratio
    M = geom.source_samples
    if isinstance(energy, DiscretePmf):
        bits = 0.0
        pskip = 0.0
        for e, p in zip(energy.values, energy.probs):
            try:
                bits += p * source_rate(model, geom, d, share * e, q)
            except (DomainError, RateInfinite):
                pskip += p
        return bits, pskip
    lo, hi = energy.lo, energy.hi
    if share <= 0.0 or d <= 0.0 or not (0.0 <= q < 1.0):
        return 0.0, 1.0
    ev = ov / share
    if ev >= hi:
        return 0.0, 1.0
    pskip = (min(hi, max(lo, ev)) - lo) / (hi - lo)
    c = math.log2(model.zeta * model.d_max / d)
    if c <= 0.0:
        return 0.0, pskip
    s = math.log2(1.0 - q * q) if q > 0.0 else 0.0
    a = max(lo, ev)
    if c + s < 0.0:
        b2 = min(hi, s * ov / (share * (c + s)))
    else:
        b2 = hi
    if b2 <= a:
        return 0.0, pskip
    integral = (c + s) * (b2 - a) - (s * ov / share) * math.log(b2 / a)
    return M * integral / (hi - lo), pskip


def expected_source_rate(source, geom: SlotGeometry, q: float, d: float,
                         share: float, energy) -> tuple:
    """(mean bits, mean distortion, skip probability) when the encoder
    sees sensing energy share*E each slot, totalizing error slots."""
    dmax = source.d_max
    if isinstance(source, GaussianIidSourceModel):
        m = d_mmse_gaussian_iid(source, q)
        if not (m < d <= dmax):
            return 0.0, dmax, 1.0
        phi, pskip = _ex1_f2_expect(source, geom, share, energy)
        if pskip >= 1.0:
            return 0.0, dmax, 1.0
        f1 = math.log2((dmax - m) / (d - m))
        bits = 0.0 if f1 <= 0.0 else geom.source_samples * f1 * phi * (1.0 - pskip)
        dist = pskip * dmax + (1.0 - pskip) * d
        return bits, dist, pskip
    bits, pskip = _ex2_expected(source, geom, d, q, share, energy)
    if pskip >= 1.0:
        return 0.0, dmax, 1.0
    dist = pskip * dmax + (1.0 - pskip) * d
    return bits, dist, pskip


def _rate_or_totalized(source, geom, d, q, ts) -> tuple:
    """Point evaluation (bits, distortion) with skip totalization."""
    try:
        return source_rate(source, geom, d, ts, q), d
    except (DomainError, RateInfinite):
        return 0.0, source.d_max


# ---------------------------------------------------------------------------
# Checkers.
# ---------------------------------------------------------------------------

def _verdict(margins: dict) -> bool:
    ok = margins.get("rate", math.inf) > RATE_SLACK
    for key, val in margins.items():
        if key != "rate" and not val >= 0.0:
            ok = False
    return ok


def check_do(params: DoPolicy, spec: SensorSpec, d_bar: float) -> FeasibilityReport:
    """Certify buffered source+channel parameters for target d_bar.

    Conditions: mean source rate strictly below mean channel capacity,
    mean distortion within d_bar, and both per-encoder energy budgets
    met with the epsilon reserve."""
    env = spec.environment
    ebar = mean_energy(env)
    mean_f = mean_dist = mean_ts = 0.0
    for qv, pq in zip(env.q_support, env.q_pmf):
        d = _lookup(params.d_per_q, qv, "d_per_q")
        ts = _lookup(params.ts_per_q, qv, "ts_per_q")
        bits, dist = _rate_or_totalized(spec.source, spec.geometry, d, qv, ts)
        mean_f += pq * bits
        mean_dist += pq * dist
        mean_ts += pq * ts
    mean_g = mean_tt = 0.0
    for hv, ph in zip(env.h_support, env.h_pmf):
        tt = _lookup(params.tt_per_h, hv, "tt_per_h")
        mean_g += ph * channel_rate_awgn(spec.geometry, hv, tt)
        mean_tt += ph * tt
    margins = {
        "rate": mean_g - mean_f,
        "distortion": d_bar - mean_dist,
        "energy_src": (1.0 - params.alpha) * ebar - params.epsilon - mean_ts,
        "energy_ch": params.alpha * ebar - params.epsilon - mean_tt,
    }
    if mean_f == 0.0:
        # a silent compressor cannot destabilize the queue
        margins["rate"] = math.inf
    feasible = _verdict(margins)
    return FeasibilityReport(feasible, params if feasible else None, margins, "do")


def check_greedy(params, spec: SensorSpec, d_bar: float) -> FeasibilityReport:
    """Certify store-nothing parameters: expected rates are taken over
    the energy arrival in every joint (q, h) cell."""
    env = spec.environment
    fixed = isinstance(params, GreedyFixedPolicy)
    mean_f = mean_g = mean_dist = 0.0
    for qv, pq in zip(env.q_support, env.q_pmf):
        for hv, ph in zip(env.h_support, env.h_pmf):
            w = pq * ph
            alpha = params.alpha if fixed else _lookup(
                params.alpha_per_qh, (qv, hv), "alpha_per_qh")
            d = _lookup(params.d_per_qh, (qv, hv), "d_per_qh")
            bits, dist, _ = expected_source_rate(
                spec.source, spec.geometry, qv, d, alpha, env.energy)
            mean_f += w * bits
            mean_dist += w * dist
            mean_g += w * expected_channel_rate(
                spec.geometry, hv, 1.0 - alpha, env.energy)
    margins = {"rate": mean_g - mean_f, "distortion": d_bar - mean_dist}
    if mean_f == 0.0:
        margins["rate"] = math.inf
    feasible = _verdict(margins)
    prop = "greedy_fixed" if fixed else "greedy"
    return FeasibilityReport(feasible, params if feasible else None, margins, prop)


def check_hybrid(params, spec: SensorSpec, d_bar: float,
                 epsilon: Optional[float] = None) -> FeasibilityReport:
    """Certify single-buffer parameters.  The buffered encoder keeps an
    energy budget with an epsilon reserve (default 1e-3 of the mean
    arrival); the unbuffered one spends its share of each arrival."""
    env = spec.environment
    ebar = mean_energy(env)
    eps = default_epsilon(env) if epsilon is None else epsilon
    alpha = params.alpha
    if isinstance(params, Hybrid1Policy):
        mean_f = mean_dist = 0.0
        for qv, pq in zip(env.q_support, env.q_pmf):
            bits, dist, _ = expected_source_rate(
                spec.source, spec.geometry, qv,
                _lookup(params.d_per_q, qv, "d_per_q"),
                1.0 - alpha, env.energy)
            mean_f += pq * bits
            mean_dist += pq * dist
        mean_g = mean_tt = 0.0
        for hv, ph in zip(env.h_support, env.h_pmf):
            tt = _lookup(params.tt_per_h, hv, "tt_per_h")
            mean_g += ph * channel_rate_awgn(spec.geometry, hv, tt)
            mean_tt += ph * tt
        margins = {
            "rate": mean_g - mean_f,
            "distortion": d_bar - mean_dist,
            "energy_ch": alpha * ebar - eps - mean_tt,
        }
        prop = "hybrid1"
    else:
        mean_f = mean_dist = mean_ts = 0.0
        for qv, pq in zip(env.q_support, env.q_pmf):
            d = _lookup(params.d_per_q, qv, "d_per_q")
            ts = _lookup(params.ts_per_q, qv, "ts_per_q")
            bits, dist = _rate_or_totalized(spec.source, spec.geometry, d, qv, ts)
            mean_f += pq * bits
            mean_dist += pq * dist
            mean_ts += pq * ts
        mean_g = 0.0
        for hv, ph in zip(env.h_support, env.h_pmf):
            mean_g += ph * expected_channel_rate(
                spec.geometry, hv, alpha, env.energy)
        margins = {
            "rate": mean_g - mean_f,
            "distortion": d_bar - mean_dist,
            "energy_src": (1.0 - alpha) * ebar - eps - mean_ts,
        }
        prop = "hybrid2"
    if mean_f == 0.0:
        margins["rate"] = math.inf
    feasible = _verdict(margins)
    return FeasibilityReport(feasible, params if feasible else None, margins, prop)


def check_analog(params: AnalogPolicy, spec: SensorSpec, d_bar: float) -> FeasibilityReport:
    """Certify uncoded-forwarding parameters: mean end-to-end distortion
    within d_bar and mean transmit energy within the mean arrival."""
    env = spec.environment
    mean_d = mean_tt = 0.0
    for qv, pq in zip(env.q_support, env.q_pmf):
        for hv, ph in zip(env.h_support, env.h_pmf):
            w = pq * ph
            tt = _lookup(params.tt_per_qh, (qv, hv), "tt_per_qh")
            mean_d += w * analog_mmse(spec.geometry, tt, qv, hv, spec.source.d_max)
            mean_tt += w * tt
    margins = {
        "distortion": d_bar - mean_d,
        "energy_ch": mean_energy(env) - mean_tt,
    }
    feasible = _verdict(margins)
    return FeasibilityReport(feasible, params if feasible else None, margins, "analog")


# ---------------------------------------------------------------------------
# Water-filling.
# ---------------------------------------------------------------------------

def weighted_waterfill(h_support: Sequence[float], weights: Sequence[float],
                       budget: float) -> dict:
    """Allocation T^h = max(mu - 1/h, 0) with sum w_h T^h = budget.

    weights need not sum to one (the schedule search weighs states by
    time share); zero-weight states still receive 1/h-rule levels, they
    just do not consume budget."""
    if budget <= 0.0:
        raise DomainError("waterfill budget must be positive")
    hs = [float(h) for h in h_support]
    ws = [float(w) for w in weights]
    if any(h <= 0.0 for h in hs):
        raise DomainError("channel states must be positive")
    wtot = sum(ws)
    if wtot <= 0.0:
        raise DomainError("weights must have positive mass")
    if len(hs) == 1:
        return {hs[0]: budget / ws[0]}

    def spent(mu: float) -> float:
        return math.fsum(w * max(mu - 1.0 / h, 0.0) for h, w in zip(hs, ws))

    lo = min(1.0 / h for h in hs)
    hi = max(1.0 / h for h in hs) + budget / wtot + 1.0
    while spent(hi) < budget:
        hi *= 2.0
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if spent(mid) < budget:
            lo = mid
        else:
            hi = mid
    mu = 0.5 * (lo + hi)
    return {h: max(mu - 1.0 / h, 0.0) for h in hs}


def waterfill(h_support: Sequence[float], h_pmf: Sequence[float],
              budget: float) -> dict:
    """Capacity-maximizing transmit-energy split across channel states."""
    return weighted_waterfill(h_support, h_pmf, budget)


def _mean_capacity(geom: SlotGeometry, h_support, h_pmf, tt_map: dict) -> float:
    return math.fsum(
        p * channel_rate_awgn(geom, h, tt_map[h])
        for h, p in zip(h_support, h_pmf))


# ---------------------------------------------------------------------------
# Source-side minimization.
# ---------------------------------------------------------------------------

_ALT_TOL = 1e-8
_ALT_MAX_ITERS = 60
_BISECT_ITERS = 48


def _min_source_single(source, geom: SlotGeometry, q: float, bd: float,
                       sb: float) -> tuple:
    """Closed-form single-state source minimum: (J, d, ts).

    With one observation state both couplings bind trivially: the rate
    is decreasing in d and in ts, so saturate the distortion target and
    the sensing budget (capped where the rate curve flattens).
    Returns J = inf when no valid allocation exists.
    """
    dmax = source.d_max
    if isinstance(source, GaussianIidSourceModel):
        m = d_mmse_gaussian_iid(source, q)
        d = min(bd, dmax)
        if not d > m:
            # cannot meet the distortion target even at infinite rate;
            # skipping every slot costs d_max which is no better
            return math.inf, dmax, 0.0
        cap = source.ts_max / geom.bandwidth_ratio
        ts = min(sb, cap)
        if ts <= 0.0:
            return (0.0, dmax, 0.0) if bd >= dmax else (math.inf, dmax, 0.0)
        try:
            J = source_rate(source, geom, d, ts, q)
        except RateInfinite:
            return math.inf, dmax, 0.0
        return J, d, ts
    ov = source.nu / geom.bandwidth_ratio
    ts = sb
    if ts <= ov:
        # forced skip: every slot accrues d_max
        return (0.0, dmax, 0.0) if bd >= dmax else (math.inf, dmax, 0.0)
    ceiling = source.zeta * dmax * (1.0 - q * q) ** ((ts - ov) / ts)
    d = min(bd, ceiling)
    if d <= 0.0:
        return math.inf, dmax, 0.0
    J = geom.source_samples * max(math.log2(ceiling / d), 0.0)
    return J, d, ts


def _min_source_rate_batch(source, geom: SlotGeometry, q_support, q_pmf,
                           d_budget, ts_budget, skip_mask) -> tuple:
    """Minimize mean source rate over per-state (d, ts) allocations.

    Rows of d_budget/ts_budget are independent problems solved in
    lockstep.  States in skip_mask are pinned to the skip action
    (ts = 0, d_max distortion) and excluded from the smooth problem.
    Alternates exact block minimizations: each block is convex with
    closed-form per-state argmins under a budget multiplier found by
    vectorized bisection.  Returns (J, D, T); J[i] = inf marks an
    impossible row.
    """
    dmax = source.d_max
    B = len(d_budget)
    nq = len(q_support)
    live = [i for i in range(nq) if not skip_mask[i]]
    d_budget = np.asarray(d_budget, dtype=float)
    ts_budget = np.asarray(ts_budget, dtype=float)
    p_skip_mass = math.fsum(q_pmf[i] for i in range(nq) if skip_mask[i])
    bd = d_budget - p_skip_mass * dmax
    D_full = np.full((B, nq), dmax)
    T_full = np.zeros((B, nq))
    if not live:
        J = np.where(bd >= -1e-15, 0.0, np.inf)
        return J, D_full, T_full

    p = np.array([q_pmf[i] for i in live])
    qv = np.array([float(q_support[i]) for i in live])
    n = len(live)
    psum = float(p.sum())
    M = geom.source_samples

    if n == 1:
        p0 = float(p[0])
        if p0 <= 0.0:
            # the lone live state never occurs, so only the skip mass counts
            J = np.where(bd >= -1e-15, 0.0, np.inf)
            return J, D_full, T_full
        # scalar shortcut shared with the synthesizer fast paths; budgets
        # scale by 1/p0 per state, the mean rate scales back by p0
        J = np.empty(B)
        for i in range(B):
            Ji, di, ti = _min_source_single(
                source, geom, float(qv[0]), float(bd[i] / p0),
                float(ts_budget[i] / p0))
            J[i] = p0 * Ji
            D_full[i, live[0]] = di
            T_full[i, live[0]] = ti
        return J, D_full, T_full

    ex1 = isinstance(source, GaussianIidSourceModel)
    if ex1:
        m = np.array([d_mmse_gaussian_iid(source, q) for q in qv])
        tcap = source.ts_max / geom.bandwidth_ratio
        tfloor = np.zeros(n)
    else:
        ov = source.nu / geom.bandwidth_ratio
        m = np.zeros(n)
        tfloor = np.full(n, ov * (1.0 + 1e-9))
        s_arr = np.log2(1.0 - qv * qv)

    feasible_rows = (bd > (p * m).sum() + 1e-15) & (ts_budget > (p * tfloor).sum())

    def phi_ex1(T):
        kappa = geom.bandwidth_ratio / source.ts_max
        with np.errstate(divide="ignore", over="ignore"):
            raw = np.where(T > 0.0,
                           (kappa * np.maximum(T, 1e-300)) ** (-1.0 / source.eta),
                           np.inf)
        return source.zeta * np.maximum(raw, 1.0)

    def ceil_ex2(T):
        expo = np.where(T > ov, (T - ov) / np.maximum(T, ov), 0.0)
        return source.zeta * dmax * np.exp2(expo * s_arr)

    def eval_rows(D, T):
        with np.errstate(all="ignore"):
            if ex1:
                f1 = np.maximum(np.log2((dmax - m) / np.maximum(D - m, 1e-300)), 0.0)
                terms = np.where(f1 > 0.0, M * f1 * phi_ex1(T), 0.0)
            else:
                rate = M * np.maximum(
                    np.log2(ceil_ex2(T) / np.maximum(D, 1e-300)), 0.0)
                terms = np.where(T > ov, rate, 0.0)
        return terms.dot(p)

    def d_step(T):
        if ex1:
            # cap the equivalent rate weight so a starved state (T = 0,
            # infinite acquisition factor) cannot wedge the alternation
            # in the D = d_max, T = 0 fixed point
            W = np.minimum(M * phi_ex1(T), 1e30)
            at_zero = np.full((B, n), dmax)

            def D_of(mu):
                return np.minimum(m + W / (np.maximum(mu, 1e-300) * LN2), dmax)

            with np.errstate(over="ignore"):
                mu_hi0 = 4.0 * psum * np.max(W, axis=1) / (
                    np.maximum(bd - (p * m).sum(), 1e-300) * LN2)
            # rows with no distortion slack overflow here; they are ruled
            # out by feasible_rows, a finite bracket just keeps math quiet
            mu_hi0 = np.minimum(mu_hi0, 1e300)
        else:
            ceil_here = ceil_ex2(T)
            at_zero = ceil_here

            def D_of(mu):
                return np.minimum(M / (np.maximum(mu, 1e-300) * LN2), ceil_here)

            mu_hi0 = 4.0 * psum * M / (np.maximum(bd, 1e-300) * LN2)
        need = (at_zero * p).sum(axis=1) > bd
        mu_lo = np.zeros(B)
        mu_hi = np.maximum(mu_hi0, 1e-12)
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (mu_lo + mu_hi)
            overshoot = (D_of(mid[:, None]) * p).sum(axis=1) > bd
            mu_lo = np.where(overshoot, mid, mu_lo)
            mu_hi = np.where(overshoot, mu_hi, mid)
        D_new = D_of(mu_hi[:, None])
        return np.where(need[:, None], D_new, at_zero)

    def t_step(D):
        with np.errstate(all="ignore"):
            if ex1:
                f1 = np.maximum(np.log2((dmax - m) / np.maximum(D - m, 1e-300)), 0.0)
                K = M * source.zeta * f1
                kappa = geom.bandwidth_ratio / source.ts_max
                coef = K * kappa ** (-1.0 / source.eta) / source.eta
                expo = source.eta / (source.eta + 1.0)

                def T_of(nu):
                    tst = (coef / np.maximum(nu, 1e-300)) ** expo
                    return np.where(K > 0.0, np.minimum(tst, tcap), 0.0)

                nu_hi0 = 4.0 * np.max(coef, axis=1) / np.maximum(
                    (ts_budget / psum) ** (1.0 / expo), 1e-300)
            else:
                c = np.log2(source.zeta * dmax / np.maximum(D, 1e-300))
                live_rate = c > 0.0
                cap = np.where(c + s_arr < 0.0,
                               s_arr * ov / np.minimum(c + s_arr, -1e-300),
                               np.inf)
                coef = M * (-s_arr) * ov

                def T_of(nu):
                    tst = np.sqrt(coef / np.maximum(nu, 1e-300))
                    tst = np.minimum(tst, cap)
                    return np.where(live_rate, np.maximum(tst, tfloor), tfloor)

                nu_hi0 = 4.0 * np.max(coef) / np.maximum(
                    (ts_budget / psum) ** 2, 1e-300)
            at_zero = T_of(np.full((B, 1), 1e-300))
            need = (at_zero * p).sum(axis=1) > ts_budget
            nu_lo = np.zeros(B)
            nu_hi = np.maximum(nu_hi0, 1e-12)
            for _ in range(16):
                over = (T_of(nu_hi[:, None]) * p).sum(axis=1) > ts_budget
                if not over.any():
                    break
                nu_hi = np.where(over, nu_hi * 8.0, nu_hi)
            for _ in range(_BISECT_ITERS):
                mid = 0.5 * (nu_lo + nu_hi)
                overshoot = (T_of(mid[:, None]) * p).sum(axis=1) > ts_budget
                nu_lo = np.where(overshoot, mid, nu_lo)
                nu_hi = np.where(overshoot, nu_hi, mid)
            T_new = T_of(nu_hi[:, None])
        return np.where(need[:, None], T_new, at_zero)

    best_J = np.full(B, np.inf)
    best_D = np.full((B, n), dmax)
    best_T = np.tile(tfloor, (B, 1))

    d_lo_corner = m + 0.25 * np.maximum((bd[:, None] / max(psum, 1e-300)) - m, 1e-12)
    corners = [
        ("t_first", 0.98, None),
        ("t_first", 0.06, None),
        ("d_first", None, np.minimum(np.full((B, n), dmax), np.inf)),
        ("d_first", None, np.minimum(d_lo_corner, dmax)),
    ]
    for phase, t_scale, D0 in corners:
        if phase == "t_first":
            T = np.maximum(
                np.tile((t_scale * ts_budget / max(psum, 1e-300))[:, None], (1, n)),
                tfloor * (1.0 + 1e-9))
            over = (T * p).sum(axis=1) > ts_budget
            if over.any():
                slack = np.maximum(ts_budget - (p * tfloor).sum(), 0.0)
                T_fb = tfloor[None, :] * (1.0 + 1e-9) + (
                    slack * 0.5 / max(psum, 1e-300))[:, None]
                T = np.where(over[:, None], T_fb, T)
            D = d_step(T)
        else:
            D = D0
            T = t_step(D)
            D = d_step(T)
        prev = eval_rows(D, T)
        for _ in range(_ALT_MAX_ITERS):
            T = t_step(D)
            D = d_step(T)
            cur = eval_rows(D, T)
            done = np.abs(prev - cur) <= _ALT_TOL * (1.0 + np.abs(cur))
            prev = cur
            if done.all():
                break
        better = prev < best_J
        best_J = np.where(better, prev, best_J)
        best_D = np.where(better[:, None], D, best_D)
        best_T = np.where(better[:, None], T, best_T)

    best_J = np.where(feasible_rows, best_J, np.inf)
    for col, i in enumerate(live):
        D_full[:, i] = best_D[:, col]
        T_full[:, i] = best_T[:, col]
    return best_J, D_full, T_full


def _skip_subsets(nq: int):
    """Candidate sets of source states pinned to the skip action."""
    subsets = [()]
    subsets += [(i,) for i in range(nq)]
    if nq in (3, 4):
        subsets += [(i, j) for i in range(nq) for j in range(i + 1, nq)]
    if nq > 1:
        subsets.append(tuple(range(nq)))
    return subsets


def min_source_rate(source, geom, q_support, q_pmf, d_budget: float,
                    ts_budget: float) -> tuple:
    """Best (J, d_map, ts_map) over skip subsets for scalar budgets."""
    best = (math.inf, {q: source.d_max for q in q_support},
            {q: 0.0 for q in q_support})
    for subset in _skip_subsets(len(q_support)):
        mask = [i in subset for i in range(len(q_support))]
        J, D, T = _min_source_rate_batch(
            source, geom, q_support, q_pmf, [d_budget], [ts_budget], mask)
        if J[0] < best[0]:
            best = (float(J[0]),
                    {q: float(D[0, i]) for i, q in enumerate(q_support)},
                    {q: float(T[0, i]) for i, q in enumerate(q_support)})
    return best


# ---------------------------------------------------------------------------
# Synthesizers.
# ---------------------------------------------------------------------------

def _infeasible(margins: dict, prop: str) -> FeasibilityReport:
    return FeasibilityReport(False, None, margins, prop)


def synthesize_do(spec: SensorSpec, d_bar: float, alpha_points: int = 64,
                  epsilon: Optional[float] = None,
                  first_feasible: bool = False) -> FeasibilityReport:
    """Search the buffered class for a certified witness at d_bar.

    Grid over the energy split alpha; for each split the channel side
    is water-filled on its budget and the source side minimized by
    alternating per-state descent (closed-form block argmins, budget
    multipliers by bisection, 4 corner restarts) under the distortion
    and sensing-energy budgets.  Budgets are approached from strictly
    inside so a feasible report always carries positive slacks.
    first_feasible stops at the first certified split (region sweeps).
    """
    env = spec.environment
    geom = spec.geometry
    ebar = mean_energy(env)
    eps = default_epsilon(env) if epsilon is None else epsilon
    alphas = default_alpha_grid(alpha_points)
    d_target = d_bar * BACKOFF
    nq = len(env.q_support)

    def finish(alpha, tt_map, d_map, ts_map):
        witness = DoPolicy(d_per_q=d_map, ts_per_q=ts_map, tt_per_h=tt_map,
                           alpha=alpha, epsilon=eps)
        return check_do(witness, spec, d_bar)

    # scan from the middle outward so feasible instances exit early
    order = sorted(range(len(alphas)), key=lambda i: abs(alphas[i] - 0.55))
    prepared = []
    for idx in order:
        a = alphas[idx]
        tb = (a * ebar - eps) * BACKOFF
        sb = ((1.0 - a) * ebar - eps) * BACKOFF
        if tb <= 0.0 or sb <= 0.0:
            continue
        tt = waterfill(env.h_support, env.h_pmf, tb)
        cap = _mean_capacity(geom, env.h_support, env.h_pmf, tt)
        prepared.append((a, sb, tt, cap))
    if not prepared:
        return _infeasible({"rate": -math.inf, "distortion": -math.inf,
                            "energy_src": -math.inf, "energy_ch": -math.inf}, "do")

    best = None  # (margin, alpha, tt, d_map, ts_map)
    for subset in _skip_subsets(nq):
        mask = [i in subset for i in range(nq)]
        skip_dist = math.fsum(
            env.q_pmf[i] for i in range(nq) if mask[i]) * spec.source.d_max
        if skip_dist > d_target:
            continue
        if first_feasible:
            step = max(1, len(prepared) // 5)
            probe = list(range(0, len(prepared), step))[:6]
            chunks = [probe,
                      [i for i in range(len(prepared)) if i not in probe]]
        else:
            chunks = [list(range(len(prepared)))]
        for chunk in chunks:
            if not chunk:
                continue
            J, D, T = _min_source_rate_batch(
                spec.source, geom, env.q_support, env.q_pmf,
                [d_target] * len(chunk), [prepared[i][1] for i in chunk], mask)
            for row, i in enumerate(chunk):
                a, _, tt, cap = prepared[i]
                margin = cap - J[row]
                if not math.isfinite(margin):
                    continue
                cand = (margin, a, tt,
                        {q: float(D[row, k]) for k, q in enumerate(env.q_support)},
                        {q: float(T[row, k]) for k, q in enumerate(env.q_support)})
                if best is None or margin > best[0]:
                    best = cand
                if first_feasible and margin > RATE_SLACK:
                    report = finish(cand[1], cand[2], cand[3], cand[4])
                    if report.feasible:
                        return report
    if best is None:
        return _infeasible({"rate": -math.inf, "distortion": -math.inf,
                            "energy_src": -math.inf, "energy_ch": -math.inf}, "do")
    report = finish(best[1], best[2], best[3], best[4])
    if report.feasible:
        return report
    return _infeasible(report.binding_margins, "do")


def synthesize_hybrid2(spec: SensorSpec, d_bar: float, alpha_points: int = 64,
                       epsilon: Optional[float] = None) -> FeasibilityReport:
    """Buffered source encoder, store-nothing channel encoder."""
    env = spec.environment
    geom = spec.geometry
    ebar = mean_energy(env)
    eps = default_epsilon(env) if epsilon is None else epsilon
    d_target = d_bar * BACKOFF
    alphas = [a for a in default_alpha_grid(alpha_points)
              if (1.0 - a) * ebar - eps > 0.0]
    best = None
    if alphas:
        sb = np.array([((1.0 - a) * ebar - eps) * BACKOFF for a in alphas])
        mean_g = np.array([
            math.fsum(ph * expected_channel_rate(geom, hv, a, env.energy)
                      for hv, ph in zip(env.h_support, env.h_pmf))
            for a in alphas])
        bd = np.full(len(alphas), d_target)
        qs = env.q_support
        for subset in _skip_subsets(len(qs)):
            mask = [i in subset for i in range(len(qs))]
            J, D, T = _min_source_rate_batch(
                spec.source, geom, qs, env.q_pmf, bd, sb, mask)
            with np.errstate(invalid="ignore"):
                margin = np.where(np.isfinite(mean_g - J), mean_g - J, -np.inf)
            j = int(np.argmax(margin))
            if math.isfinite(margin[j]) and (best is None or margin[j] > best[0]):
                best = (float(margin[j]), alphas[j],
                        {q: float(D[j, i]) for i, q in enumerate(qs)},
                        {q: float(T[j, i]) for i, q in enumerate(qs)})
    if best is None:
        return _infeasible({"rate": -math.inf, "distortion": -math.inf,
                            "energy_src": -math.inf}, "hybrid2")
    _, a, d_map, ts_map = best
    witness = Hybrid2Policy(d_per_q=d_map, ts_per_q=ts_map, alpha=a)
    report = check_hybrid(witness, spec, d_bar, epsilon=eps)
    if report.feasible:
        return report
    return _infeasible(report.binding_margins, "hybrid2")


def _unbuffered_source_best(spec, d_target: float, share: float):
    """Best per-q distortion map for a store-nothing source encoder at
    sensing share `share`, spending the distortion budget exactly.
    None when even the loosest distortions overshoot the target."""
    env = spec.environment
    source, geom = spec.source, spec.geometry
    dmax = source.d_max
    qs = env.q_support

    def mean_dist(d_map):
        return math.fsum(
            pq * expected_source_rate(source, geom, qv, d_map[qv], share,
                                      env.energy)[1]
            for qv, pq in zip(qs, env.q_pmf))

    if isinstance(source, GaussianIidSourceModel):
        phi, pskip = _ex1_f2_expect(source, geom, share, env.energy)
        if pskip >= 1.0:
            return None if d_target < dmax else {q: dmax for q in qs}
        W = geom.source_samples * phi * (1.0 - pskip)
        ms = {q: d_mmse_gaussian_iid(source, q) for q in qs}
        floor_dist = mean_dist({q: ms[q] * (1 + 1e-12) + 1e-300 for q in qs})
        if floor_dist >= d_target or not math.isfinite(W):
            return None

        def d_of(mu):
            return {q: min(ms[q] + W / (max(mu, 1e-300) * LN2), dmax)
                    for q in qs}
    else:
        grids = {q: np.geomspace(1e-9 * dmax, source.zeta * dmax, 96) for q in qs}

        def d_of(mu):
            out = {}
            for qv in qs:
                best_v, best_d = math.inf, dmax
                for d in grids[qv]:
                    bits, dist, _ = expected_source_rate(
                        source, geom, qv, float(d), share, env.energy)
                    v = bits + mu * dist
                    if v < best_v:
                        best_v, best_d = v, float(d)
                out[qv] = best_d
            return out

    loose = d_of(1e-300)
    if mean_dist(loose) <= d_target:
        return loose
    lo, hi = 1e-12, 1.0
    for _ in range(90):
        if mean_dist(d_of(hi)) <= d_target:
            break
        hi *= 4.0
    else:
        return None
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (lo + hi)
        if mean_dist(d_of(mid)) > d_target:
            lo = mid
        else:
            hi = mid
    return d_of(hi)


def synthesize_hybrid1(spec: SensorSpec, d_bar: float, alpha_points: int = 64,
                       epsilon: Optional[float] = None) -> FeasibilityReport:
    """Store-nothing source encoder, buffered channel encoder."""
    env = spec.environment
    geom = spec.geometry
    ebar = mean_energy(env)
    eps = default_epsilon(env) if epsilon is None else epsilon
    d_target = d_bar * BACKOFF
    best = None
    for a in default_alpha_grid(alpha_points):
        tb = (a * ebar - eps) * BACKOFF
        if tb <= 0.0:
            continue
        tt = waterfill(env.h_support, env.h_pmf, tb)
        cap = _mean_capacity(geom, env.h_support, env.h_pmf, tt)
        d_map = _unbuffered_source_best(spec, d_target, 1.0 - a)
        if d_map is None:
            continue
        mf = math.fsum(
            pq * expected_source_rate(spec.source, geom, qv, d_map[qv],
                                      1.0 - a, env.energy)[0]
            for qv, pq in zip(env.q_support, env.q_pmf))
        margin = cap - mf
        if best is None or margin > best[0]:
            best = (margin, a, d_map, tt)
    if best is None:
        return _infeasible({"rate": -math.inf, "distortion": -math.inf,
                            "energy_ch": -math.inf}, "hybrid1")
    _, a, d_map, tt = best
    witness = Hybrid1Policy(d_per_q=d_map, tt_per_h=tt, alpha=a)
    report = check_hybrid(witness, spec, d_bar, epsilon=eps)
    if report.feasible:
        return report
    return _infeasible(report.binding_margins, "hybrid1")


# --- store-nothing (greedy) search ----------------------------------------

class _GreedyTables:
    """Per-instance cache of expected-rate building blocks on the
    alpha grid for the store-nothing searches."""

    def __init__(self, spec: SensorSpec, alphas):
        env = spec.environment
        self.spec = spec
        self.alphas = np.asarray(alphas)
        self.cells = [(q, h) for q in env.q_support for h in env.h_support]
        wq = dict(zip(env.q_support, env.q_pmf))
        wh = dict(zip(env.h_support, env.h_pmf))
        self.weights = {c: wq[c[0]] * wh[c[1]] for c in self.cells}
        self.G = {
            c: np.array([
                expected_channel_rate(spec.geometry, c[1], 1.0 - a, env.energy)
                for a in alphas])
            for c in self.cells
        }
        self.ex1 = isinstance(spec.source, GaussianIidSourceModel)
        if self.ex1:
            pairs = [_ex1_f2_expect(spec.source, spec.geometry, a, env.energy)
                     for a in alphas]
            phi = np.array([pp[0] for pp in pairs])
            psk = np.array([pp[1] for pp in pairs])
            self.W = spec.geometry.source_samples * np.where(
                np.isfinite(phi), phi, np.inf) * (1.0 - psk)
            self.psk = psk
            self.m = {q: d_mmse_gaussian_iid(spec.source, q)
                      for q in env.q_support}
        else:
            self.dgrid = np.geomspace(1e-9 * spec.source.d_max,
                                      spec.source.zeta * spec.source.d_max, 72)
            # bits[q][j, k], dist[q][j, k] over (alpha, d) pairs
            self.bits = {}
            self.dist = {}
            for qv in env.q_support:
                bits = np.empty((len(alphas), len(self.dgrid)))
                dist = np.empty_like(bits)
                for j, a in enumerate(alphas):
                    for k, d in enumerate(self.dgrid):
                        b, dd, _ = expected_source_rate(
                            spec.source, spec.geometry, qv, float(d), float(a),
                            env.energy)
                        bits[j, k] = b
                        dist[j, k] = dd
                self.bits[qv] = bits
                self.dist[qv] = dist

    def cell_tables(self, qv, mu):
        """(bits_j, dist_j, d_j) best-d tables over the alpha grid at
        distortion multiplier mu (scalar or per-alpha vector) for
        observation state qv."""
        dmax = self.spec.source.d_max
        mu = np.maximum(np.broadcast_to(np.asarray(mu, dtype=float),
                                        self.alphas.shape), 1e-300)
        if self.ex1:
            m = self.m[qv]
            with np.errstate(all="ignore"):
                d = np.minimum(m + self.W / (mu * LN2), dmax)
                f1 = np.maximum(np.log2((dmax - m) / np.maximum(d - m, 1e-300)), 0.0)
                bits = np.where(f1 > 0.0, self.W * f1, 0.0)
            dist = self.psk * dmax + (1.0 - self.psk) * d
            # alpha = 0 column: full skip
            zero = self.alphas <= 0.0
            bits = np.where(zero, 0.0, bits)
            dist = np.where(zero, dmax, dist)
            d = np.where(zero, dmax, d)
            return bits, dist, d
        val = self.bits[qv] + mu[:, None] * self.dist[qv]
        k = np.argmin(val, axis=1)
        rows = np.arange(len(self.alphas))
        return (self.bits[qv][rows, k], self.dist[qv][rows, k], self.dgrid[k])

    def best_d_for_budget(self, qv, budget):
        """Per-alpha (bits_j, dist_j, d_j) spending at most `budget` of
        mean distortion on this cell alone (nan-marked where impossible)."""
        dmax = self.spec.source.d_max
        if self.ex1:
            m = self.m[qv]
            with np.errstate(all="ignore"):
                d = np.minimum((budget - self.psk * dmax)
                               / np.maximum(1.0 - self.psk, 1e-300), dmax)
                ok = d > m
                d = np.where(ok, d, np.nan)
                f1 = np.maximum(np.log2((dmax - m) / np.maximum(d - m, 1e-300)), 0.0)
                bits = np.where(f1 > 0.0, self.W * f1, 0.0)
                dist = self.psk * dmax + (1.0 - self.psk) * d
            zero = self.alphas <= 0.0
            feas0 = budget >= dmax - 1e-15
            bits = np.where(zero, 0.0 if feas0 else np.nan, bits)
            dist = np.where(zero, dmax, dist)
            d = np.where(zero, dmax, d)
            return bits, dist, d
        ok = self.dist[qv] <= budget + 1e-15
        val = np.where(ok, self.bits[qv], np.inf)
        k = np.argmin(val, axis=1)
        rows = np.arange(len(self.alphas))
        bits = self.bits[qv][rows, k]
        dist = self.dist[qv][rows, k]
        bad = ~ok[rows, k]
        return (np.where(bad, np.nan, bits), np.where(bad, np.nan, dist),
                self.dgrid[k])


def _greedy_candidate(tbl: _GreedyTables, mu: float):
    """Per-cell argmin of bits + mu*dist - channel over the alpha grid."""
    per_q = {}
    for qv in {c[0] for c in tbl.cells}:
        per_q[qv] = tbl.cell_tables(qv, mu)
    d_map, a_map = {}, {}
    mf = mg = md = 0.0
    for c in tbl.cells:
        bits, dist, dvals = per_q[c[0]]
        with np.errstate(invalid="ignore"):
            score = bits + mu * dist - tbl.G[c]
        j = int(np.nanargmin(score))
        d_map[c] = float(dvals[j])
        a_map[c] = float(tbl.alphas[j])
        w = tbl.weights[c]
        mf += w * float(bits[j])
        mg += w * float(tbl.G[c][j])
        md += w * float(dist[j])
    return d_map, a_map, mf, mg, md


_MU_SWEEP = [0.0] + list(np.geomspace(1e-7, 1e8, 46))


def _search_greedy_fixed(tbl: _GreedyTables, d_target: float):
    """Best shared-split candidate: every alpha gets its own distortion
    multiplier, bisected in lockstep so each lands on the target."""
    nj = len(tbl.alphas)
    qs = sorted({c[0] for c in tbl.cells})

    def tables_at(mu_vec):
        return {qv: tbl.cell_tables(qv, mu_vec) for qv in qs}

    def totals(per_q):
        mf = np.zeros(nj)
        mg = np.zeros(nj)
        md = np.zeros(nj)
        for c in tbl.cells:
            bits, dist, _ = per_q[c[0]]
            w = tbl.weights[c]
            mf += w * bits
            mg += w * tbl.G[c]
            md += w * dist
        return mf, mg, md

    def harvest(per_q):
        mf, mg, md = totals(per_q)
        ok = md <= d_target + 1e-15
        with np.errstate(invalid="ignore"):
            margin = np.where(ok & np.isfinite(mf), mg - mf, -np.inf)
        j = int(np.argmax(margin))
        if not math.isfinite(margin[j]):
            return None
        return (float(margin[j]), j,
                {c: float(per_q[c[0]][2][j]) for c in tbl.cells})

    cands = []
    loose = tables_at(np.zeros(nj))
    c0 = harvest(loose)
    if c0 is not None:
        cands.append(c0)
    if (totals(loose)[2] > d_target + 1e-15).any():
        mu_lo = np.zeros(nj)
        mu_hi = np.ones(nj)
        for _ in range(70):
            md = totals(tables_at(mu_hi))[2]
            over = md > d_target
            if not over.any():
                break
            mu_hi = np.where(over, mu_hi * 4.0, mu_hi)
        for _ in range(_BISECT_ITERS):
            mid = 0.5 * (mu_lo + mu_hi)
            md = totals(tables_at(mid))[2]
            over = md > d_target
            mu_lo = np.where(over, mid, mu_lo)
            mu_hi = np.where(over, mu_hi, mid)
        c1 = harvest(tables_at(mu_hi))
        if c1 is not None:
            cands.append(c1)
    if not cands:
        return None
    return max(cands, key=lambda c: c[0])


def _polish_free(tbl: _GreedyTables, d_map, a_map, d_target: float,
                 rounds: int = 2):
    """Round-robin refinement: re-solve each cell against the residual
    distortion budget left by the others, recovering margin the shared
    multiplier leaves on the table when its argmin jumps."""
    dist_of: dict = {}
    for c in tbl.cells:
        _, dist, _ = expected_source_rate(
            tbl.spec.source, tbl.spec.geometry, c[0], d_map[c], a_map[c],
            tbl.spec.environment.energy)
        dist_of[c] = dist
    for _ in range(rounds):
        for c in tbl.cells:
            if tbl.weights[c] <= 0.0:
                continue  # cell never occurs; its action cannot move the mean
            others = math.fsum(tbl.weights[cc] * dist_of[cc]
                               for cc in tbl.cells if cc != c)
            resid = (d_target - others) / tbl.weights[c]
            bits, dist, dvals = tbl.best_d_for_budget(c[0], resid)
            with np.errstate(invalid="ignore"):
                score = tbl.G[c] - bits
            if np.isnan(score).all():
                continue
            j = int(np.nanargmax(score))
            if math.isnan(float(bits[j])):
                continue
            d_map[c] = float(dvals[j])
            a_map[c] = float(tbl.alphas[j])
            dist_of[c] = float(dist[j])
    return d_map, a_map


def _search_greedy_free(tbl: _GreedyTables, d_target: float):
    best = None  # (margin, d_map, a_map)

    def consider(mu):
        nonlocal best
        d_map, a_map, mf, mg, md = _greedy_candidate(tbl, mu)
        if md <= d_target + 1e-15 and math.isfinite(mg - mf):
            if best is None or mg - mf > best[0]:
                best = (mg - mf, d_map, a_map)
        return md

    lo_br = hi_br = None
    for mu in _MU_SWEEP:
        md = consider(mu)
        if md > d_target + 1e-15:
            lo_br = mu
        elif hi_br is None:
            hi_br = mu
    if lo_br is not None and hi_br is not None and hi_br > lo_br:
        lo, hi = max(lo_br, 1e-12), hi_br
        for _ in range(48):
            mid = math.sqrt(lo * hi)
            if consider(mid) > d_target + 1e-15:
                lo = mid
            else:
                hi = mid
    if best is None:
        return None
    _, d_map, a_map = best
    d_map, a_map = _polish_free(tbl, dict(d_map), dict(a_map), d_target)
    return (best[0], d_map, a_map)


def synthesize_greedy_fixed(spec: SensorSpec, d_bar: float,
                            alpha_points: int = 64) -> FeasibilityReport:
    """Store-nothing class with one shared energy split."""
    alphas = [0.0] + default_alpha_grid(alpha_points) + [1.0]
    tbl = _GreedyTables(spec, alphas)
    best = _search_greedy_fixed(tbl, d_bar * BACKOFF)
    if best is None:
        return _infeasible({"rate": -math.inf, "distortion": -math.inf},
                           "greedy_fixed")
    _, j, d_map = best
    witness = GreedyFixedPolicy(d_per_qh=d_map, alpha=float(tbl.alphas[j]))
    report = check_greedy(witness, spec, d_bar)
    if report.feasible:
        return report
    return _infeasible(report.binding_margins, "greedy_fixed")


def synthesize_greedy(spec: SensorSpec, d_bar: float,
                      alpha_points: int = 64) -> FeasibilityReport:
    """Store-nothing class with per-(q,h) splits.  The shared-split
    search runs first and its witness is promoted when the richer
    search cannot beat it, so the shared-split region is contained in
    this one by construction."""
    alphas = [0.0] + default_alpha_grid(alpha_points) + [1.0]
    tbl = _GreedyTables(spec, alphas)
    d_target = d_bar * BACKOFF
    reports = []
    free = _search_greedy_free(tbl, d_target)
    if free is not None:
        _, d_map, a_map = free
        witness = GreedyPolicy(d_per_qh=d_map, alpha_per_qh=a_map)
        reports.append(check_greedy(witness, spec, d_bar))
    shared = _search_greedy_fixed(tbl, d_target)
    if shared is not None:
        _, j, d_map = shared
        promoted = GreedyPolicy(
            d_per_qh=d_map,
            alpha_per_qh={c: float(tbl.alphas[j]) for c in tbl.cells})
        reports.append(check_greedy(promoted, spec, d_bar))
    feasible = [r for r in reports if r.feasible]
    if feasible:
        return max(feasible, key=lambda r: r.binding_margins["rate"])
    if reports:
        return _infeasible(
            max(reports, key=lambda r: r.binding_margins["rate"]).binding_margins,
            "greedy")
    return _infeasible({"rate": -math.inf, "distortion": -math.inf}, "greedy")


# --- uncoded forwarding -----------------------------------------------------

def _analog_cell_alloc(spec: SensorSpec, budget: float) -> dict:
    """Split the transmit budget across (q,h) cells to minimize mean
    reconstruction distortion (marginal-value equalization)."""
    env = spec.environment
    src, geom = spec.source, spec.geometry
    cells = [(q, h) for q in env.q_support for h in env.h_support]
    wq = dict(zip(env.q_support, env.q_pmf))
    wh = dict(zip(env.h_support, env.h_pmf))
    weights = {c: wq[c[0]] * wh[c[1]] for c in cells}
    if len(cells) == 1:
        return {cells[0]: budget}
    b = geom.bandwidth_ratio
    r = 1.0 / src.d_max

    def slope(cell, tt):
        q, h = cell
        if b >= 1.0:
            gg = b * q * h * tt / (b * q * tt + q + 1.0)
            gp = b * q * h * (q + 1.0) / (b * q * tt + q + 1.0) ** 2
            return gp / (gg + r) ** 2
        gg = q * h * tt / (q * tt + q + 1.0)
        gp = q * h * (q + 1.0) / (q * tt + q + 1.0) ** 2
        return b * gp / (gg + r) ** 2

    def t_of(cell, lam):
        if slope(cell, 0.0) <= lam:
            return 0.0
        lo, hi = 0.0, 1.0
        while slope(cell, hi) > lam and hi < 1e12:
            hi *= 2.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if slope(cell, mid) > lam:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)

    def spend(lam):
        return math.fsum(weights[c] * t_of(c, lam) for c in cells)

    hi = max(slope(c, 0.0) for c in cells)
    lo = 0.0
    for _ in range(90):
        mid = 0.5 * (lo + hi)
        if spend(mid) > budget:
            lo = mid
        else:
            hi = mid
    lam = 0.5 * (lo + hi)
    alloc = {c: t_of(c, lam) for c in cells}
    used = math.fsum(weights[c] * alloc[c] for c in cells)
    if used > 0.0:
        scale = budget / used
        return {c: t * scale for c, t in alloc.items()}
    return {c: budget for c in cells}


def synthesize_analog(spec: SensorSpec, d_bar: float) -> FeasibilityReport:
    """Uncoded forwarding: spend the full mean arrival on transmission,
    split across cells to minimize mean distortion."""
    budget = mean_energy(spec.environment) * BACKOFF
    alloc = _analog_cell_alloc(spec, budget)
    witness = AnalogPolicy(tt_per_qh=alloc,
                           epsilon=default_epsilon(spec.environment))
    report = check_analog(witness, spec, d_bar)
    if report.feasible:
        return report
    return _infeasible(report.binding_margins, "analog")


_SYNTHESIZERS = {
    "do": synthesize_do,
    "greedy": synthesize_greedy,
    "greedy_fixed": synthesize_greedy_fixed,
    "hybrid1": synthesize_hybrid1,
    "hybrid2": synthesize_hybrid2,
    "analog": synthesize_analog,
}

POLICY_CLASSES = tuple(_SYNTHESIZERS)


def synthesize(spec: SensorSpec, d_bar: float, policy_class: str,
               **kw) -> FeasibilityReport:
    """Dispatch by class name: do, greedy, greedy_fixed, hybrid1,
    hybrid2, analog."""
    try:
        fn = _SYNTHESIZERS[policy_class]
    except KeyError:
        raise DomainError(f"unknown policy class {policy_class!r}") from None
    return fn(spec, d_bar, **kw)


def min_feasible_distortion(spec: SensorSpec, tol: float = 1e-4,
                            alpha_points: int = 64) -> Optional[float]:
    """Smallest certifiable mean-distortion target for the buffered
    class, by bisection; None when even d_max cannot be certified."""
    src = spec.source
    if isinstance(src, GaussianIidSourceModel):
        d_lo = math.fsum(
            p * d_mmse_gaussian_iid(src, q)
            for q, p in zip(spec.environment.q_support, spec.environment.q_pmf))
    else:
        d_lo = 0.0
    d_hi = src.d_max
    if not synthesize_do(spec, d_hi, alpha_points, first_feasible=True).feasible:
        return None
    while d_hi - d_lo > tol:
        mid = 0.5 * (d_lo + d_hi)
        if synthesize_do(spec, mid, alpha_points, first_feasible=True).feasible:
            d_hi = mid
        else:
            d_lo = mid
    return d_hi


# ---------------------------------------------------------------------------
# Region sweeps.
# ---------------------------------------------------------------------------

@dataclass
class RegionResult:
    """Membership grid plus per-point certificate margins for one class."""
    policy_class: str
    axis1: np.ndarray
    axis2: np.ndarray
    feasible: np.ndarray
    rate_margin: np.ndarray
    dist_margin: np.ndarray
    energy_margin_src: np.ndarray
    energy_margin_ch: np.ndarray


def _sweep_point(args):
    factory, x1, x2, d_bar, classes, alpha_points = args
    spec = factory(x1, x2)
    out = {}
    for cls in classes:
        if cls == "analog":
            kw = {}
        elif cls == "do":
            kw = {"alpha_points": alpha_points, "first_feasible": True}
        else:
            kw = {"alpha_points": alpha_points}
        rep = synthesize(spec, d_bar, cls, **kw)
        m = rep.binding_margins
        out[cls] = (
            bool(rep.feasible),
            float(m.get("rate", math.nan)),
            float(m.get("distortion", math.nan)),
            float(m.get("energy_src", math.nan)),
            float(m.get("energy_ch", math.nan)),
        )
    return out


def region_sweep(factory: Callable[[float, float], SensorSpec],
                 axis1_values: Sequence[float], axis2_values: Sequence[float],
                 d_bar: float, classes: Sequence[str] = ("do",),
                 alpha_points: int = 64, jobs: int = 1) -> dict:
    """Evaluate class feasibility over a 2-D grid of instances.

    factory(x1, x2) builds the sensor instance at one grid point; the
    result maps each class name to a RegionResult."""
    a1 = np.asarray(list(axis1_values), dtype=float)
    a2 = np.asarray(list(axis2_values), dtype=float)
    n1, n2 = len(a1), len(a2)
    results = {
        cls: RegionResult(
            cls, a1, a2,
            np.zeros((n1, n2), dtype=bool),
            np.full((n1, n2), np.nan), np.full((n1, n2), np.nan),
            np.full((n1, n2), np.nan), np.full((n1, n2), np.nan))
        for cls in classes
    }
    tasks = [(factory, float(a1[i]), float(a2[j]), d_bar, tuple(classes),
              alpha_points)
             for i in range(n1) for j in range(n2)]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outputs = list(ex.map(_sweep_point, tasks, chunksize=8))
    else:
        outputs = [_sweep_point(t) for t in tasks]
    for flat, out in enumerate(outputs):
        i, j = divmod(flat, n2)
        for cls, (feas, rm, dm, es, ec) in out.items():
            rr = results[cls]
            rr.feasible[i, j] = feas
            rr.rate_margin[i, j] = rm
            rr.dist_margin[i, j] = dm
            rr.energy_margin_src[i, j] = es
            rr.energy_margin_ch[i, j] = ec
    return results


REGION_CSV_HEADER = ("axis1,axis2,feasible,rate_margin,dist_margin,"
                     "energy_margin_src,energy_margin_ch")


def write_region_csv(result: RegionResult, path, preamble: Optional[dict] = None) -> None:
    lines = []
    if preamble:
        for k, v in preamble.items():
            lines.append(f"# {k}={v}")
    lines.append(REGION_CSV_HEADER)
    for i, x1 in enumerate(result.axis1):
        for j, x2 in enumerate(result.axis2):
            lines.append(",".join([
                repr(float(x1)), repr(float(x2)),
                str(int(result.feasible[i, j])),
                repr(float(result.rate_margin[i, j])),
                repr(float(result.dist_margin[i, j])),
                repr(float(result.energy_margin_src[i, j])),
                repr(float(result.energy_margin_ch[i, j])),
            ]))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")

"""Slot-by-slot simulation of the coupled energy/data buffers under a policy.

Update order within slot k: the arrival E_k lands in the energy buffer,
(q, h) are observed, the policy decides (d, ts, tt), the channel serves
min[queue, g(h, tt)] bits, and the compressor appends f(d, ts, q) bits.
Produced bits cannot be transmitted in the same slot. Buffers are unbounded
reals and never go negative by construction.

`run` is the fast path: it draws all randomness up front, runs the energy
allocation recursion per policy class, vectorizes production and service
capacity, then runs the queue recursion. `_run_reference` computes the same
trace through `decide` and `step` one slot at a time and exists to pin the
fast path down in tests.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import (
    DomainError,
    EnergyViolation,
    InvariantViolation,
    TooShortError,
)
from .models import (
    DiscretePmf,
    GaussianIidSourceModel,
    GaussMarkovSourceModel,
    SensorSpec,
    UniformContinuous,
    analog_mmse,
    channel_rate_awgn,
    d_mmse_gaussian_iid,
    effective_source_output,
)
from .policies import (
    Action,
    AnalogGreedyPolicy,
    AnalogPolicy,
    DoPolicy,
    GreedyFixedPolicy,
    GreedyPolicy,
    Hybrid1Policy,
    Hybrid2Policy,
    PolicyParams,
    decide,
    _lookup,
)

CSV_HEADER = "slot,energy,queue_bits,q,h,d,ts,tt,bits_in,bits_out,distortion"


@dataclass
class SlotState:
    """Observable state at decision time: buffer after the arrival."""

    energy: float
    queue_bits: float
    q: float
    h: float


@dataclass
class Trace:
    """Per-slot records of one run plus summary statistics.

    `energy` and `queue_bits` are the buffers at decision time (energy after
    the arrival, queue before service). `capacity` is the slot's service
    capacity g(h, tt); `bits_out` is the served min[queue, capacity]. `skip`
    marks slots where the configured distortion was infeasible and the
    compressor fell back to acquiring nothing (distortion d_max).
    """

    seed: int
    energy: np.ndarray
    queue_bits: np.ndarray
    q: np.ndarray
    h: np.ndarray
    d: np.ndarray
    ts: np.ndarray
    tt: np.ndarray
    bits_in: np.ndarray
    bits_out: np.ndarray
    distortion: np.ndarray
    capacity: np.ndarray
    skip: np.ndarray
    summary: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return int(self.energy.shape[0])


# ---------------------------------------------------------------------------
# single-slot transition


def step(state: SlotState, action: Action, next_arrivals: tuple, models: SensorSpec):
    """Apply one slot transition; returns (new state, record dict).

    next_arrivals is (e, q', h'): the energy arriving next slot and the
    states observed next slot.
    """
    ts, tt = action.ts, action.tt
    if ts < 0.0 or tt < 0.0:
        raise EnergyViolation("negative energy allocation")
    spend = ts + tt
    if spend > state.energy + 1e-12 * (1.0 + state.energy):
        raise EnergyViolation(
            f"action spends {spend} from a buffer holding {state.energy}"
        )
    cap = channel_rate_awgn(models.geometry, state.h, tt)
    served = min(state.queue_bits, cap)
    if action.d is None:
        produced, skipped = 0.0, False
        try:
            dist = analog_mmse(models.geometry, tt, state.q, state.h, models.source.d_max)
        except DomainError:
            dist = models.source.d_max
    else:
        produced, dist, skipped = effective_source_output(
            models.source, models.geometry, action.d, ts, state.q
        )
    e_next, q_next, h_next = next_arrivals
    new_state = SlotState(
        energy=max(state.energy - spend, 0.0) + e_next,
        queue_bits=state.queue_bits - served + produced,
        q=q_next,
        h=h_next,
    )
    record = {
        "bits_produced": produced,
        "bits_served": served,
        "distortion_accrued": dist,
        "capacity": cap,
        "skip": skipped,
    }
    return new_state, record


# ---------------------------------------------------------------------------
# environment draws


def _draw_energy(rng, dist, n: int) -> np.ndarray:
    if isinstance(dist, UniformContinuous):
        return rng.uniform(dist.lo, dist.hi, size=n)
    if isinstance(dist, DiscretePmf):
        idx = rng.choice(len(dist.values), size=n, p=dist.probs)
        return np.asarray(dist.values, dtype=float)[idx]
    raise DomainError(f"unknown energy distribution {type(dist)!r}")


def draw_environment(rng, env, n: int):
    """All per-slot randomness, in the canonical order q, h, e."""
    q_idx = rng.choice(len(env.q_support), size=n, p=env.q_pmf)
    h_idx = rng.choice(len(env.h_support), size=n, p=env.h_pmf)
    e = _draw_energy(rng, env.energy, n)
    return q_idx, h_idx, e


# ---------------------------------------------------------------------------
# fast path: allocation recursion per class, vectorized production, queue pass


def _alloc_pass(params: PolicyParams, env, qi, hi, e):
    """Energy-buffer recursion; returns (energy, ts, tt) as Python lists."""
    n = len(e)
    energy = [0.0] * n
    ts = [0.0] * n
    tt = [0.0] * n
    qs, hs = env.q_support, env.h_support
    bal = 0.0
    if isinstance(params, DoPolicy):
        alpha, eps = params.alpha, params.epsilon
        src = 1.0 - alpha
        tsc = [_lookup(params.ts_per_q, q, "ts_per_q") for q in qs]
        ttc = [_lookup(params.tt_per_h, h, "tt_per_h") for h in hs]
        for k in range(n):
            bal += e[k]
            energy[k] = bal
            a = src * bal - eps
            c = tsc[qi[k]]
            if a > c:
                a = c
            if a < 0.0:
                a = 0.0
            b = alpha * bal - eps
            c = ttc[hi[k]]
            if b > c:
                b = c
            if b < 0.0:
                b = 0.0
            ts[k] = a
            tt[k] = b
            bal -= a + b
            if bal < 0.0:
                bal = 0.0
    elif isinstance(params, (GreedyPolicy, GreedyFixedPolicy)):
        if isinstance(params, GreedyPolicy):
            amap = [
                [_lookup(params.alpha_per_qh, (q, h), "alpha_per_qh") for h in hs]
                for q in qs
            ]
        else:
            amap = [[params.alpha for _ in hs] for _ in qs]
        for k in range(n):
            bal += e[k]
            energy[k] = bal
            a = amap[qi[k]][hi[k]]
            s = a * e[k]
            t = (1.0 - a) * e[k]
            ts[k] = s
            tt[k] = t
            bal -= s + t
            if bal < 0.0:
                bal = 0.0
    elif isinstance(params, Hybrid1Policy):
        alpha = params.alpha
        src = 1.0 - alpha
        ttc = [_lookup(params.tt_per_h, h, "tt_per_h") for h in hs]
        for k in range(n):
            bal += e[k]
            energy[k] = bal
            s = src * e[k]
            b = alpha * bal
            c = ttc[hi[k]]
            if b > c:
                b = c
            if b < 0.0:
                b = 0.0
            ts[k] = s
            tt[k] = b
            bal -= s + b
            if bal < 0.0:
                bal = 0.0
    elif isinstance(params, Hybrid2Policy):
        alpha = params.alpha
        src = 1.0 - alpha
        tsc = [_lookup(params.ts_per_q, q, "ts_per_q") for q in qs]
        for k in range(n):
            bal += e[k]
            energy[k] = bal
            a = src * bal
            c = tsc[qi[k]]
            if a > c:
                a = c
            if a < 0.0:
                a = 0.0
            t = alpha * e[k]
            ts[k] = a
            tt[k] = t
            bal -= a + t
            if bal < 0.0:
                bal = 0.0
    elif isinstance(params, AnalogPolicy):
        eps = params.epsilon
        tmap = [
            [_lookup(params.tt_per_qh, (q, h), "tt_per_qh") for h in hs] for q in qs
        ]
        for k in range(n):
            bal += e[k]
            energy[k] = bal
            b = bal - eps
            c = tmap[qi[k]][hi[k]]
            if b > c:
                b = c
            if b < 0.0:
                b = 0.0
            tt[k] = b
            bal -= b
            if bal < 0.0:
                bal = 0.0
    elif isinstance(params, AnalogGreedyPolicy):
        for k in range(n):
            bal += e[k]
            energy[k] = bal
            t = e[k]
            tt[k] = t
            bal -= t
            if bal < 0.0:
                bal = 0.0
    else:
        raise DomainError(f"unknown policy class {type(params)!r}")
    return energy, ts, tt


def _digital_outputs(spec, d_by_state, state_q, state_idx, ts_arr):
    """bits/distortion/skip arrays given per-state d and per-slot (q, ts)."""
    source, geom = spec.source, spec.geometry
    b = geom.bandwidth_ratio
    m_uses = geom.channel_uses / b
    d_arr = np.asarray(d_by_state, dtype=float)[state_idx]
    q_arr = np.asarray(state_q, dtype=float)[state_idx]
    ts = np.asarray(ts_arr, dtype=float)
    if isinstance(source, GaussianIidSourceModel):
        mm = 1.0 / (1.0 / source.d_max + q_arr)
        valid = (d_arr > mm) & (d_arr <= source.d_max) & (ts > 0.0)
        d_safe = np.where(valid, d_arr, source.d_max + 1.0)
        ts_safe = np.where(valid, ts, 1.0)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            f1 = np.maximum(np.log2((source.d_max - mm) / (d_safe - mm)), 0.0)
            pw = (b * ts_safe / source.ts_max) ** (-1.0 / source.eta)
        f2 = source.zeta * np.maximum(pw, 1.0)
        bits = np.where(valid, m_uses * f1 * f2, 0.0)
    elif isinstance(source, GaussMarkovSourceModel):
        overhead = source.nu / b
        valid = (ts > overhead) & (q_arr >= 0.0) & (q_arr < 1.0) & (d_arr > 0.0)
        ts_safe = np.where(valid, ts, 2.0 * overhead + 1.0)
        d_safe = np.where(valid, d_arr, 1.0)
        q_safe = np.where(valid, q_arr, 0.0)
        expo = (ts_safe - overhead) / ts_safe
        ceiling = source.zeta * source.d_max * (1.0 - q_safe * q_safe) ** expo
        bits = np.where(valid, m_uses * np.maximum(np.log2(ceiling / d_safe), 0.0), 0.0)
    else:
        raise DomainError(f"unknown source model {type(source)!r}")
    skip = ~valid
    dist = np.where(skip, source.d_max, d_arr)
    return bits, d_arr, dist, skip


def _queue_pass(bits_in, cap):
    """Queue recursion; returns (queue_at_decision, bits_served) lists."""
    n = len(bits_in)
    queue = [0.0] * n
    out = [0.0] * n
    x = 0.0
    for k in range(n):
        queue[k] = x
        c = cap[k]
        srv = x if x < c else c
        out[k] = srv
        x = x - srv + bits_in[k]
    return queue, out


def _simulate_arrays(spec: SensorSpec, params: PolicyParams, qi, hi, e, seed: int,
                     scheduled=None) -> Trace:
    """Core simulation given pre-drawn environment arrays.

    `scheduled` optionally masks transmission (TDMA): slots where it is
    False force tt = 0 before the energy recursion — used by the scheduling
    module; None means always scheduled.
    """
    env = spec.environment
    n = len(e)
    qi_l = qi.tolist() if isinstance(qi, np.ndarray) else list(qi)
    hi_l = hi.tolist() if isinstance(hi, np.ndarray) else list(hi)
    e_l = e.tolist() if isinstance(e, np.ndarray) else list(e)

    if scheduled is None:
        energy, ts, tt = _alloc_pass(params, env, qi_l, hi_l, e_l)
    else:
        energy, ts, tt = _alloc_pass_masked(params, env, qi_l, hi_l, e_l, scheduled)

    q_vals = np.asarray(env.q_support, dtype=float)
    h_vals = np.asarray(env.h_support, dtype=float)
    qi_a = np.asarray(qi_l)
    hi_a = np.asarray(hi_l)
    ts_a = np.asarray(ts)
    tt_a = np.asarray(tt)
    h_arr = h_vals[hi_a]
    cap = spec.geometry.channel_uses * np.log2(1.0 + h_arr * tt_a)

    if isinstance(params, (AnalogPolicy, AnalogGreedyPolicy)):
        bits_in = np.zeros(n)
        d_col = np.full(n, np.nan)
        q_arr = q_vals[qi_a]
        geom = spec.geometry
        b = geom.bandwidth_ratio
        with np.errstate(divide="ignore", invalid="ignore"):
            if b >= 1.0:
                snr = b * tt_a * q_arr * h_arr / (b * tt_a * q_arr + q_arr + 1.0)
                dist = 1.0 / (snr + 1.0 / spec.source.d_max)
            else:
                snr = tt_a * q_arr * h_arr / (tt_a * q_arr + q_arr + 1.0)
                dist = b / (snr + 1.0 / spec.source.d_max) + (1.0 - b) * spec.source.d_max
        dist = np.where(q_arr > 0.0, dist, spec.source.d_max)
        skip = np.zeros(n, dtype=bool)
        queue, out = np.zeros(n), np.zeros(n)
    else:
        if isinstance(params, (GreedyPolicy, GreedyFixedPolicy)):
            qs, hs = env.q_support, env.h_support
            d_by_cell = [
                _lookup(params.d_per_qh, (q, h), "d_per_qh") for q in qs for h in hs
            ]
            q_by_cell = [q for q in qs for _ in hs]
            cell_idx = qi_a * len(hs) + hi_a
            bits_in, d_col, dist, skip = _digital_outputs(
                spec, d_by_cell, q_by_cell, cell_idx, ts_a
            )
        else:
            d_by_q = [_lookup(params.d_per_q, q, "d_per_q") for q in env.q_support]
            bits_in, d_col, dist, skip = _digital_outputs(
                spec, d_by_q, env.q_support, qi_a, ts_a
            )
        queue_l, out_l = _queue_pass(bits_in.tolist(), cap.tolist())
        queue, out = np.asarray(queue_l), np.asarray(out_l)

    total_in = math.fsum(e_l)
    total_spent = math.fsum(ts) + math.fsum(tt)
    if total_spent > total_in + 1e-9 * max(1.0, total_in):
        raise InvariantViolation(
            f"energy conservation broken: spent {total_spent} > harvested {total_in}"
        )
    energy_a = np.asarray(energy)
    if energy_a.min(initial=0.0) < 0.0 or queue.min(initial=0.0) < 0.0:
        raise InvariantViolation("negative buffer")

    trace = Trace(
        seed=seed,
        energy=energy_a,
        queue_bits=queue,
        q=q_vals[qi_a],
        h=h_arr,
        d=np.asarray(d_col, dtype=float),
        ts=ts_a,
        tt=tt_a,
        bits_in=np.asarray(bits_in, dtype=float),
        bits_out=np.asarray(out, dtype=float),
        distortion=np.asarray(dist, dtype=float),
        capacity=np.asarray(cap, dtype=float),
        skip=np.asarray(skip, dtype=bool),
    )
    trace.summary = {
        "mean_queue": float(queue.mean()),
        "mean_distortion": float(trace.distortion.mean()),
        "mean_bits_in": float(trace.bits_in.mean()),
        "mean_bits_out": float(trace.bits_out.mean()),
        "mean_ts": float(ts_a.mean()),
        "mean_tt": float(tt_a.mean()),
        "skip_fraction": float(trace.skip.mean()),
        "harvested": float(total_in),
        "final_energy": float(max(energy[-1] - ts[-1] - tt[-1], 0.0)),
        "final_queue": float(queue[-1] - out[-1] + bits_in[-1]),
    }
    return trace


def _alloc_pass_masked(params, env, qi, hi, e, scheduled):
    """Like _alloc_pass but transmission is suppressed on unscheduled slots."""
    n = len(e)
    energy = [0.0] * n
    ts = [0.0] * n
    tt = [0.0] * n
    bal = 0.0
    state = SlotState(0.0, 0.0, 0.0, 0.0)
    qs, hs = env.q_support, env.h_support
    for k in range(n):
        bal += e[k]
        energy[k] = bal
        state.energy = bal
        state.q = qs[qi[k]]
        state.h = hs[hi[k]]
        act = decide(params, state, e[k])
        a = act.ts
        b = act.tt if scheduled[k] else 0.0
        ts[k] = a
        tt[k] = b
        bal -= a + b
        if bal < 0.0:
            bal = 0.0
    return energy, ts, tt


def run(spec: SensorSpec, params: PolicyParams, horizon: int, seed: int) -> Trace:
    """Simulate `horizon` slots from empty buffers; deterministic in `seed`."""
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise DomainError("horizon must be a positive integer")
    rng = np.random.default_rng(seed)
    qi, hi, e = draw_environment(rng, spec.environment, int(horizon))
    return _simulate_arrays(spec, params, qi, hi, e, seed)


def _run_reference(spec: SensorSpec, params: PolicyParams, horizon: int, seed: int) -> Trace:
    """Slot-by-slot decide/step path; slow, used to pin down the fast path."""
    if horizon < 1:
        raise DomainError("horizon must be a positive integer")
    rng = np.random.default_rng(seed)
    qi, hi, e = draw_environment(rng, spec.environment, horizon)
    env = spec.environment
    q_vals, h_vals = env.q_support, env.h_support
    cols = {k: [] for k in (
        "energy", "queue", "q", "h", "d", "ts", "tt", "bin", "bout", "dist", "cap", "skip"
    )}
    state = SlotState(e[0], 0.0, q_vals[qi[0]], h_vals[hi[0]])
    for k in range(horizon):
        act = decide(params, state, e[k])
        nxt = (e[k + 1] if k + 1 < horizon else 0.0,
               q_vals[qi[(k + 1) % horizon]], h_vals[hi[(k + 1) % horizon]])
        new_state, rec = step(state, act, nxt, spec)
        cols["energy"].append(state.energy)
        cols["queue"].append(state.queue_bits)
        cols["q"].append(state.q)
        cols["h"].append(state.h)
        cols["d"].append(np.nan if act.d is None else act.d)
        cols["ts"].append(act.ts)
        cols["tt"].append(act.tt)
        cols["bin"].append(rec["bits_produced"])
        cols["bout"].append(rec["bits_served"])
        cols["dist"].append(rec["distortion_accrued"])
        cols["cap"].append(rec["capacity"])
        cols["skip"].append(rec["skip"])
        state = new_state
    trace = Trace(
        seed=seed,
        energy=np.asarray(cols["energy"]),
        queue_bits=np.asarray(cols["queue"]),
        q=np.asarray(cols["q"]),
        h=np.asarray(cols["h"]),
        d=np.asarray(cols["d"]),
        ts=np.asarray(cols["ts"]),
        tt=np.asarray(cols["tt"]),
        bits_in=np.asarray(cols["bin"]),
        bits_out=np.asarray(cols["bout"]),
        distortion=np.asarray(cols["dist"]),
        capacity=np.asarray(cols["cap"]),
        skip=np.asarray(cols["skip"], dtype=bool),
    )
    trace.summary = {"mean_queue": float(trace.queue_bits.mean())}
    return trace


# ---------------------------------------------------------------------------
# stability


@dataclass(frozen=True)
class StabilityVerdict:
    """Empirical stability surrogate; see stability_estimate."""

    verdict: str  # "Stable" | "Unstable" | "Inconclusive"
    drift_estimate: float
    tail_fraction: float
    drift_ci: tuple


def stability_estimate(
    trace: Trace,
    confidence: float = 0.99,
    growth_ratio: float = 1.05,
    n_batches: int = 200,
    n_boot: int = 1000,
) -> StabilityVerdict:
    """Drift-based stability surrogate.

    drift = mean(bits produced) - mean(service capacity) over the second
    half of the trace. The verdict is Stable only when the whole bootstrap
    confidence interval for the drift is below zero AND the second-half
    mean queue is at most `growth_ratio` times the first-half mean. It is
    Unstable when the interval is entirely above zero, else Inconclusive.
    The batch-means bootstrap absorbs the mild serial dependence the energy
    buffer induces. This is a surrogate; no finite trace certifies the
    distributional notion of stability.
    """
    n = len(trace)
    if n < 10_000:
        raise TooShortError(f"need at least 1e4 slots, got {n}")
    half = n // 2
    d_series = trace.bits_in[half:] - trace.capacity[half:]
    drift = float(d_series.mean())
    nb = min(n_batches, len(d_series) // 50)
    m = len(d_series) // nb
    batches = d_series[: nb * m].reshape(nb, m).mean(axis=1)
    rng = np.random.default_rng((trace.seed & 0x7FFFFFFF, 0x5AB1E))
    idx = rng.integers(0, nb, size=(n_boot, nb))
    boot = batches[idx].mean(axis=1)
    a = 0.5 * (1.0 - confidence)
    lo, hi = float(np.quantile(boot, a)), float(np.quantile(boot, 1.0 - a))

    q1 = float(trace.queue_bits[:half].mean())
    q2 = float(trace.queue_bits[half:].mean())
    growth_ok = q2 <= growth_ratio * q1 or (q1 == 0.0 and q2 == 0.0)

    queue = trace.queue_bits
    tail_cut = float(np.quantile(queue, 0.9))
    tail_fraction = float((queue >= tail_cut).mean())

    # drift below 1e-9 of the traffic volume is rounding noise, not evidence;
    # exactly balanced arrival/service must land on Inconclusive
    scale = float(trace.bits_in[half:].mean() + trace.capacity[half:].mean())
    floor = 1e-9 * max(1.0, scale)
    if hi < -floor and growth_ok:
        verdict = "Stable"
    elif lo > floor:
        verdict = "Unstable"
    else:
        verdict = "Inconclusive"
    return StabilityVerdict(verdict, drift, tail_fraction, (lo, hi))


# ---------------------------------------------------------------------------
# export


def write_trace_csv(trace: Trace, path, preamble: Optional[dict] = None) -> None:
    """Write the trace in the delimited schema; '#' lines carry metadata."""
    n = len(trace)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for key, value in (preamble or {}).items():
            fh.write(f"# {key}={value}\n")
        fh.write(CSV_HEADER + "\n")
        cols = (
            trace.energy, trace.queue_bits, trace.q, trace.h, trace.d,
            trace.ts, trace.tt, trace.bits_in, trace.bits_out, trace.distortion,
        )
        for k in range(n):
            row = ",".join(repr(float(c[k])) for c in cols)
            fh.write(f"{k},{row}\n")

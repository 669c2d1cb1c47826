"""TDMA scheduling of several harvesting sensors sharing one access point.

Each slot is granted to exactly one sensor. The grant is drawn from a
probability row indexed by the joint channel state (the opportunistic
schedule) or from constant per-sensor probabilities (the fixed schedule).
The granted sensor transmits per its buffered-class parameters; the others
still sense and compress, so their queues keep filling, but they put no
energy into the channel that slot.

Once the grant rows are fixed, feasibility decomposes per sensor: channel
terms are weighted by the effective grant probability
w_l(h) = sum over joint states whose l-th entry is h of Pr(hvec) * beta_l(hvec)
while the source terms keep their single-sensor form. The synthesizer
exploits the decoupling: a source-side table J_l(alpha) is computed once per
sensor, and the grant simplex is scanned vectorized with a closed-form
weighted water-fill on the channel side.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Callable, Mapping, Optional, Sequence

import numpy as np

from .errors import DomainError, InvariantViolation, MissingState, SpecError
from .feasibility import (
    BACKOFF,
    FeasibilityReport,
    RegionResult,
    _min_source_rate_batch,
    _rate_or_totalized,
    _skip_subsets,
    _verdict,
    default_alpha_grid,
    default_epsilon,
    synthesize_do,
    weighted_waterfill,
)
from .models import SensorSpec, channel_rate_awgn, mean_energy
from .policies import DoPolicy, _lookup
from .simulator import _draw_energy, _simulate_arrays, run

_ROW_TOL = 1e-9


def product_joint_pmf(sensors: Sequence[SensorSpec]) -> dict:
    """Joint channel pmf for independent sensors (product of marginals)."""
    supports = [s.environment.h_support for s in sensors]
    pmfs = [s.environment.h_pmf for s in sensors]
    joint = {}
    for combo in itertools.product(*(range(len(s)) for s in supports)):
        p = 1.0
        for l, i in enumerate(combo):
            p *= pmfs[l][i]
        joint[tuple(supports[l][i] for l, i in enumerate(combo))] = p
    return joint


@dataclass(frozen=True)
class MultiSensorSpec:
    """Static description of L sensors sharing the channel by TDMA.

    joint_h_pmf maps a tuple of per-sensor channel states to its
    probability; omitted, it defaults to the product of the per-sensor
    marginals (independent fading). Observation qualities and energy
    arrivals are always drawn independently across sensors.
    """

    sensors: tuple
    d_bar_vec: tuple
    joint_h_pmf: Optional[Mapping] = None

    def __post_init__(self):
        sensors = tuple(self.sensors)
        if not sensors:
            raise SpecError("need at least one sensor")
        if any(not isinstance(s, SensorSpec) for s in sensors):
            raise SpecError("sensors must be SensorSpec instances")
        object.__setattr__(self, "sensors", sensors)
        d_bar = tuple(float(d) for d in self.d_bar_vec)
        if len(d_bar) != len(sensors):
            raise SpecError("d_bar_vec length must match the sensor count")
        if any(d <= 0.0 for d in d_bar):
            raise SpecError("distortion constraints must be positive")
        object.__setattr__(self, "d_bar_vec", d_bar)
        if self.joint_h_pmf is None:
            joint = product_joint_pmf(sensors)
        else:
            joint = {}
            for key, p in dict(self.joint_h_pmf).items():
                hvec = tuple(float(h) for h in key)
                if len(hvec) != len(sensors):
                    raise SpecError(f"joint state {hvec} has wrong length")
                for l, h in enumerate(hvec):
                    if h not in sensors[l].environment.h_support:
                        raise SpecError(
                            f"joint state entry {h} not in sensor {l} support")
                if float(p) < 0.0:
                    raise SpecError("joint probabilities must be nonnegative")
                joint[hvec] = joint.get(hvec, 0.0) + float(p)
            if abs(math.fsum(joint.values()) - 1.0) > 1e-12:
                raise SpecError("joint channel pmf must sum to 1")
            for l, s in enumerate(sensors):
                env = s.environment
                for h, ph in zip(env.h_support, env.h_pmf):
                    marg = math.fsum(
                        p for hvec, p in joint.items() if hvec[l] == h)
                    if abs(marg - ph) > 1e-10:
                        raise SpecError(
                            f"joint pmf marginal for sensor {l} at h={h} is "
                            f"{marg}, sensor declares {ph}")
        object.__setattr__(self, "joint_h_pmf", joint)

    def joint_items(self) -> tuple:
        """(hvec, prob) pairs in a canonical deterministic order."""
        return tuple(sorted(self.joint_h_pmf.items()))


def _check_row(row, n: int, label: str) -> tuple:
    vals = tuple(float(b) for b in row)
    if len(vals) != n:
        raise SpecError(f"grant row {label} has {len(vals)} entries, need {n}")
    if any(b < -1e-12 or b > 1.0 + 1e-12 for b in vals):
        raise InvariantViolation(f"grant probabilities {label} outside [0, 1]")
    if abs(math.fsum(vals) - 1.0) > _ROW_TOL:
        raise InvariantViolation(
            f"grant probabilities {label} sum to {math.fsum(vals)}, not 1")
    return vals


@dataclass(frozen=True)
class DoSchedule:
    """Opportunistic schedule: one grant row per joint channel state.

    beta maps each joint state tuple to the per-sensor grant
    probabilities; per_sensor holds each sensor's buffered-class
    parameters.
    """

    beta: Mapping
    per_sensor: tuple

    def __post_init__(self):
        per_sensor = tuple(self.per_sensor)
        if not per_sensor or any(not isinstance(p, DoPolicy) for p in per_sensor):
            raise SpecError("per_sensor must be buffered-class parameter sets")
        object.__setattr__(self, "per_sensor", per_sensor)
        rows = {}
        for key, row in dict(self.beta).items():
            hvec = tuple(float(h) for h in key)
            rows[hvec] = _check_row(row, len(per_sensor), f"for state {hvec}")
        if not rows:
            raise SpecError("schedule needs at least one grant row")
        object.__setattr__(self, "beta", rows)


@dataclass(frozen=True)
class FixedSchedule:
    """Channel-oblivious schedule: constant grant probability per sensor."""

    beta: tuple
    per_sensor: tuple

    def __post_init__(self):
        per_sensor = tuple(self.per_sensor)
        if not per_sensor or any(not isinstance(p, DoPolicy) for p in per_sensor):
            raise SpecError("per_sensor must be buffered-class parameter sets")
        object.__setattr__(self, "per_sensor", per_sensor)
        object.__setattr__(
            self, "beta", _check_row(self.beta, len(per_sensor), "(fixed)"))


def _grant_row(policy, hvec) -> tuple:
    if isinstance(policy, FixedSchedule):
        return policy.beta
    row = policy.beta.get(tuple(hvec))
    if row is None:
        raise MissingState(f"no grant row for joint channel state {hvec}")
    return row


def effective_weights(spec: MultiSensorSpec, policy, l: int) -> dict:
    """Per-channel-state grant mass w_l(h) = sum Pr(hvec) beta_l(hvec)."""
    env = spec.sensors[l].environment
    w = {h: 0.0 for h in env.h_support}
    for hvec, p in spec.joint_items():
        w[hvec[l]] += p * _grant_row(policy, hvec)[l]
    return w


# ---------------------------------------------------------------------------
# Checker.
# ---------------------------------------------------------------------------

def check_multi(policy, spec: MultiSensorSpec) -> tuple:
    """Certify a schedule; returns one report per sensor.

    Per sensor: mean source rate strictly below the grant-weighted mean
    channel rate, mean distortion within that sensor's constraint, the
    sensing budget within the source share, and the grant-weighted
    transmit energy within the channel share. Both energy budgets keep
    the sensor's own epsilon reserve so that the single-sensor reduction
    (L = 1, grant probability one) agrees exactly with the buffered-class
    checker."""
    if not isinstance(policy, (DoSchedule, FixedSchedule)):
        raise SpecError(f"unknown schedule type {type(policy)!r}")
    if len(policy.per_sensor) != len(spec.sensors):
        raise SpecError("schedule and spec disagree on the sensor count")
    prop = "tdma_fixed" if isinstance(policy, FixedSchedule) else "tdma_do"
    reports = []
    for l, sensor in enumerate(spec.sensors):
        env = sensor.environment
        params = policy.per_sensor[l]
        ebar = mean_energy(env)
        mean_f = mean_dist = mean_ts = 0.0
        for qv, pq in zip(env.q_support, env.q_pmf):
            d = _lookup(params.d_per_q, qv, "d_per_q")
            ts = _lookup(params.ts_per_q, qv, "ts_per_q")
            bits, dist = _rate_or_totalized(sensor.source, sensor.geometry, d, qv, ts)
            mean_f += pq * bits
            mean_dist += pq * dist
            mean_ts += pq * ts
        w = effective_weights(spec, policy, l)
        mean_g = mean_tt = 0.0
        for hv, wl in w.items():
            tt = _lookup(params.tt_per_h, hv, "tt_per_h")
            mean_g += wl * channel_rate_awgn(sensor.geometry, hv, tt)
            mean_tt += wl * tt
        margins = {
            "rate": mean_g - mean_f,
            "distortion": spec.d_bar_vec[l] - mean_dist,
            "energy_src": (1.0 - params.alpha) * ebar - params.epsilon - mean_ts,
            "energy_ch": params.alpha * ebar - params.epsilon - mean_tt,
        }
        if mean_f == 0.0:
            # a silent compressor cannot destabilize the queue
            margins["rate"] = math.inf
        feasible = _verdict(margins)
        reports.append(FeasibilityReport(
            feasible, params if feasible else None, margins, prop))
    return tuple(reports)


# ---------------------------------------------------------------------------
# Synthesis: per-sensor source tables plus a vectorized grant-simplex scan.
# ---------------------------------------------------------------------------

@dataclass
class _SensorTable:
    """Grant-independent per-sensor data over the alpha grid."""

    alphas: tuple
    eps: float
    ebar: float
    J: np.ndarray          # min mean source rate per alpha, inf if impossible
    D: np.ndarray          # distortion allocation behind J, (n_alpha, nq)
    T: np.ndarray          # sensing allocation behind J
    cb: np.ndarray         # channel-side budget per alpha
    skip_ok: bool          # the always-skip fallback meets the constraint
    h_support: tuple
    perm: np.ndarray       # support order -> descending-h order
    h_desc: np.ndarray
    inv_h: np.ndarray
    n_uses: int


def _sensor_table(sensor: SensorSpec, d_bar: float, alpha_points: int) -> _SensorTable:
    env = sensor.environment
    ebar = mean_energy(env)
    eps = default_epsilon(env)
    alphas = tuple(default_alpha_grid(alpha_points))
    na = len(alphas)
    nq = len(env.q_support)
    d_target = d_bar * BACKOFF
    J = np.full(na, np.inf)
    D = np.full((na, nq), sensor.source.d_max)
    T = np.zeros((na, nq))
    sb = np.array([((1.0 - a) * ebar - eps) * BACKOFF for a in alphas])
    live = np.nonzero(sb > 0.0)[0]
    if live.size:
        bd = np.full(live.size, d_target)
        for subset in _skip_subsets(nq):
            mask = [i in subset for i in range(nq)]
            Js, Ds, Ts = _min_source_rate_batch(
                sensor.source, sensor.geometry, env.q_support, env.q_pmf,
                bd, sb[live], mask)
            imp = Js < J[live]
            if np.any(imp):
                rows = live[imp]
                J[rows] = Js[imp]
                D[rows] = Ds[imp]
                T[rows] = Ts[imp]
    cb = np.maximum([(a * ebar - eps) * BACKOFF for a in alphas], 0.0)
    h = np.asarray(env.h_support, dtype=float)
    perm = np.argsort(-h, kind="stable")
    h_desc = h[perm]
    if h_desc[-1] <= 0.0:
        raise DomainError("channel states must be positive")
    return _SensorTable(
        alphas=alphas, eps=eps, ebar=ebar, J=J, D=D, T=T, cb=cb,
        skip_ok=d_bar >= sensor.source.d_max,
        h_support=env.h_support, perm=perm, h_desc=h_desc,
        inv_h=1.0 / h_desc, n_uses=sensor.geometry.channel_uses)


def _weighted_fill_rate(tbl: _SensorTable, W: np.ndarray) -> np.ndarray:
    """Best grant-weighted channel rate per (row of W, alpha).

    Closed-form water level: with h sorted descending, the level over the
    first k states is (budget + sum w/h) / (sum w), valid when it lies
    between the bracketing 1/h thresholds. Zero weights are lifted to a
    denormal floor so the prefix algebra stays exact while the rate sum
    keeps the true zeros.
    """
    m = len(tbl.h_desc)
    K = W.shape[0]
    Wd = W[:, tbl.perm]
    Ws = np.maximum(Wd, 1e-300)
    cw = np.cumsum(Ws, axis=1)
    cwh = np.cumsum(Ws * tbl.inv_h[None, :], axis=1)
    cb = tbl.cb[None, :]
    mu = np.full((K, len(tbl.alphas)), tbl.inv_h[0])
    unset = np.ones((K, len(tbl.alphas)), dtype=bool)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        for k in range(1, m + 1):
            mu_k = (cb + cwh[:, k - 1, None]) / cw[:, k - 1, None]
            ok = mu_k >= tbl.inv_h[k - 1] * (1.0 - 1e-12)
            if k < m:
                ok &= mu_k <= tbl.inv_h[k] * (1.0 + 1e-12)
            pick = ok & unset
            mu = np.where(pick, mu_k, mu)
            unset &= ~pick
        rate = np.zeros_like(mu)
        for i in range(m):
            term = tbl.n_uses * np.maximum(np.log2(tbl.h_desc[i] * mu), 0.0)
            rate += np.where(Wd[:, i, None] > 0.0, Wd[:, i, None] * term, 0.0)
    return np.where(cb > 0.0, rate, 0.0)


def _sensor_margins(tbl: _SensorTable, W: np.ndarray):
    """(effective margin, raw margin, best alpha index) per row of W."""
    with np.errstate(invalid="ignore"):
        marg = _weighted_fill_rate(tbl, W) - tbl.J[None, :]
    marg = np.where(np.isnan(marg), -np.inf, marg)
    j = np.argmax(marg, axis=1)
    best = marg[np.arange(W.shape[0]), j]
    eff = np.where(tbl.skip_ok & (best <= 0.0), np.inf, best)
    return eff, best, j


def _compositions(total: int, parts: int):
    if parts == 1:
        yield (total,)
        return
    for head in range(total + 1):
        for rest in _compositions(total - head, parts - 1):
            yield (head,) + rest


def _simplex_rows(L: int, levels: int) -> list:
    """Grant-row candidates: the probability simplex on a uniform grid."""
    if levels < 2:
        raise SpecError("beta_levels must be at least 2")
    denom = levels - 1
    return [tuple(k / denom for k in comp) for comp in _compositions(denom, L)]


@dataclass(frozen=True)
class ScheduleReport:
    """Synthesis outcome: the certified schedule plus per-sensor reports."""

    feasible: bool
    policy: object
    sensor_reports: tuple


def _weights_for(spec, tables, rows, cb_assign):
    """Per-sensor weight matrices for the combo batch cb_assign."""
    L = len(spec.sensors)
    items = spec.joint_items()
    C = cb_assign.shape[0]
    row_mat = np.asarray(rows, dtype=float)
    Ws = []
    for l in range(L):
        support = tables[l].h_support
        pos = {h: i for i, h in enumerate(support)}
        W = np.zeros((C, len(support)))
        col = row_mat[:, l]
        for j, (hvec, pj) in enumerate(items):
            if pj > 0.0:
                W[:, pos[hvec[l]]] += pj * col[cb_assign[:, j]]
        Ws.append(W)
    return Ws


def _score_combos(spec, tables, rows, cb_assign):
    Ws = _weights_for(spec, tables, rows, cb_assign)
    effs, raws, ajs = [], [], []
    for l in range(len(spec.sensors)):
        eff, raw, j = _sensor_margins(tables[l], Ws[l])
        effs.append(eff)
        raws.append(raw)
        ajs.append(j)
    return np.minimum.reduce(effs), raws, ajs


def _all_skip_policy(sensor: SensorSpec) -> DoPolicy:
    env = sensor.environment
    dmax = sensor.source.d_max
    return DoPolicy(
        d_per_q={q: dmax for q in env.q_support},
        ts_per_q={q: 0.0 for q in env.q_support},
        tt_per_h={h: 0.0 for h in env.h_support},
        alpha=0.5, epsilon=0.0)


def _sensor_witness(sensor, tbl, w: dict) -> Optional[DoPolicy]:
    """Best single-sensor parameters under grant weights w, or None."""
    W = np.array([[w[h] for h in tbl.h_support]])
    _, raw, j = _sensor_margins(tbl, W)
    if raw[0] > 0.0 and math.isfinite(tbl.J[j[0]]):
        ji = int(j[0])
        env = sensor.environment
        d_map = {q: float(tbl.D[ji, i]) for i, q in enumerate(env.q_support)}
        ts_map = {q: float(tbl.T[ji, i]) for i, q in enumerate(env.q_support)}
        budget = float(tbl.cb[ji])
        pos_h = [h for h in tbl.h_support if w[h] > 1e-15]
        tt_map = {h: 0.0 for h in tbl.h_support}
        if pos_h and budget > 0.0:
            fill = weighted_waterfill(pos_h, [w[h] for h in pos_h], budget)
            for h, v in fill.items():
                tt_map[h] = float(v)
        return DoPolicy(d_map, ts_map, tt_map,
                        alpha=float(tbl.alphas[ji]), epsilon=tbl.eps)
    if tbl.skip_ok:
        return _all_skip_policy(sensor)
    return None


def _assemble(spec, tables, rows, assign, fixed_mode: bool):
    """Build the schedule for one combo and certify it."""
    items = spec.joint_items()
    row_of = [rows[r] for r in assign]
    per_sensor = []
    for l, sensor in enumerate(spec.sensors):
        w = {h: 0.0 for h in tables[l].h_support}
        for (hvec, pj), row in zip(items, row_of):
            w[hvec[l]] += pj * row[l]
        params = _sensor_witness(sensor, tables[l], w)
        if params is None:
            return None
        per_sensor.append(params)
    if fixed_mode:
        policy = FixedSchedule(beta=row_of[0], per_sensor=tuple(per_sensor))
    else:
        policy = DoSchedule(
            beta={hvec: row for (hvec, _), row in zip(items, row_of)},
            per_sensor=tuple(per_sensor))
    reports = check_multi(policy, spec)
    if all(r.feasible for r in reports):
        return ScheduleReport(True, policy, reports)
    return None


def _diag_reports(spec, raws, best_idx, prop) -> tuple:
    out = []
    for l in range(len(spec.sensors)):
        m = float(raws[l][best_idx])
        out.append(FeasibilityReport(False, None, {"rate": m}, prop))
    return tuple(out)


_COMBO_CACHE: dict = {}


def _combo_matrix(n_rows: int, n_joint: int) -> np.ndarray:
    key = (n_rows, n_joint)
    if key not in _COMBO_CACHE:
        if len(_COMBO_CACHE) > 8:
            _COMBO_CACHE.clear()
        _COMBO_CACHE[key] = np.array(
            list(itertools.product(range(n_rows), repeat=n_joint)),
            dtype=np.int32)
    return _COMBO_CACHE[key]


def _tables_for(spec, alpha_points: int, cache: Optional[dict]) -> list:
    tables = []
    for sensor, d_bar in zip(spec.sensors, spec.d_bar_vec):
        env = sensor.environment
        key = (sensor.source, sensor.geometry, env.q_support, env.q_pmf,
               env.h_support, env.energy, d_bar, alpha_points)
        if cache is not None and key in cache:
            tables.append(cache[key])
            continue
        tbl = _sensor_table(sensor, d_bar, alpha_points)
        if cache is not None:
            cache[key] = tbl
        tables.append(tbl)
    return tables


def _search(spec, fixed_mode: bool, beta_levels: int, alpha_points: int,
            combo_cap: int, table_cache: Optional[dict]) -> ScheduleReport:
    L = len(spec.sensors)
    tables = _tables_for(spec, alpha_points, table_cache)
    rows = _simplex_rows(L, beta_levels)
    items = spec.joint_items()
    n_joint = len(items)
    prop = "tdma_fixed" if fixed_mode else "tdma_do"

    if fixed_mode:
        assign = np.repeat(np.arange(len(rows), dtype=np.int32)[:, None],
                           n_joint, axis=1)
    elif len(rows) ** n_joint <= combo_cap:
        assign = _combo_matrix(len(rows), n_joint)
    else:
        return _search_coordinate(spec, tables, rows, beta_levels, prop)

    score, raws, _ = _score_combos(spec, tables, rows, assign)
    order = np.argsort(-score, kind="stable")
    tried = 0
    for c in order:
        if not score[c] > 0.0 or tried >= 32:
            break
        tried += 1
        rep = _assemble(spec, tables, rows, assign[c], fixed_mode)
        if rep is not None:
            return rep
    best = int(order[0]) if len(order) else 0
    return ScheduleReport(False, None, _diag_reports(spec, raws, best, prop))


def _search_coordinate(spec, tables, rows, beta_levels: int,
                       prop: str) -> ScheduleReport:
    """Grant-row descent for joint state spaces too large to enumerate.

    One pass sweeps the joint states, re-optimizing each state's grant
    row with the others held fixed; passes repeat to a fixed point. The
    result is resolution- and order-limited, like the grid search."""
    L = len(spec.sensors)
    items = spec.joint_items()
    n_joint = len(items)
    uniform = np.full(L, 1.0 / L)
    start = int(np.argmin([max(abs(b - u) for b, u in zip(row, uniform))
                           for row in rows]))
    current = np.full(n_joint, start, dtype=np.int32)
    n_rows = len(rows)
    for _ in range(8):
        changed = False
        for j in range(n_joint):
            assign = np.repeat(current[None, :], n_rows, axis=0)
            assign[:, j] = np.arange(n_rows, dtype=np.int32)
            score, _, _ = _score_combos(spec, tables, rows, assign)
            best = int(np.argmax(score))
            if best != current[j] and score[best] > score[current[j]]:
                current[j] = best
                changed = True
        if not changed:
            break
    assign = current[None, :]
    score, raws, _ = _score_combos(spec, tables, rows, assign)
    if score[0] > 0.0:
        rep = _assemble(spec, tables, rows, current, fixed_mode=False)
        if rep is not None:
            return rep
    return ScheduleReport(False, None, _diag_reports(spec, raws, 0, prop))


def synthesize_schedule(spec: MultiSensorSpec, beta_levels: int = 11,
                        alpha_points: int = 32, combo_cap: int = 200_000,
                        table_cache: Optional[dict] = None) -> ScheduleReport:
    """Search the opportunistic class for a certified schedule.

    Grant rows are drawn from a uniform simplex grid per joint channel
    state (beta_levels points per sensor); per sensor the energy split is
    scanned on the shared interior grid with the channel side water-filled
    under the effective grant weights and the source side minimized by the
    block descent used for the single-sensor buffered class. Joint spaces
    whose row combinations exceed combo_cap fall back to coordinate
    descent over the rows."""
    return _search(spec, False, beta_levels, alpha_points, combo_cap,
                   table_cache)


def synthesize_fixed_schedule(spec: MultiSensorSpec, beta_levels: int = 11,
                              alpha_points: int = 32,
                              table_cache: Optional[dict] = None) -> ScheduleReport:
    """Same search restricted to grant rows constant across channel states."""
    return _search(spec, True, beta_levels, alpha_points, 0, table_cache)


# ---------------------------------------------------------------------------
# Simulation.
# ---------------------------------------------------------------------------

def simulate_tdma(spec: MultiSensorSpec, policy, horizon: int,
                  seed: int) -> tuple:
    """Simulate all sensors under a TDMA schedule; one trace per sensor.

    Randomness order per run: each sensor's observation-quality stream in
    sensor order, the joint channel stream, each sensor's energy stream in
    sensor order, then the grant uniforms. A single sensor delegates to the
    plain simulator so the reduction is bit-exact on the same seed.
    Unscheduled sensors still run their sensing/compression recursion; only
    transmission is suppressed. Each trace's summary records the fraction
    of slots the sensor was granted."""
    if not isinstance(policy, (DoSchedule, FixedSchedule)):
        raise SpecError(f"unknown schedule type {type(policy)!r}")
    L = len(spec.sensors)
    if len(policy.per_sensor) != L:
        raise SpecError("schedule and spec disagree on the sensor count")
    if not isinstance(horizon, (int, np.integer)) or horizon < 1:
        raise DomainError("horizon must be a positive integer")
    if L == 1:
        trace = run(spec.sensors[0], policy.per_sensor[0], int(horizon), seed)
        trace.summary["scheduled_fraction"] = 1.0
        return (trace,)

    n = int(horizon)
    items = spec.joint_items()
    rng = np.random.default_rng(seed)
    qi = [rng.choice(len(s.environment.q_support), size=n,
                     p=s.environment.q_pmf) for s in spec.sensors]
    jp = np.array([p for _, p in items])
    ji = rng.choice(len(items), size=n, p=jp / jp.sum())
    es = [_draw_energy(rng, s.environment.energy, n) for s in spec.sensors]
    u = rng.random(n)

    B = np.array([_grant_row(policy, hvec) for hvec, _ in items])
    B = B / B.sum(axis=1, keepdims=True)
    cum = np.cumsum(B, axis=1)
    tau = np.clip((u[:, None] > cum[ji]).sum(axis=1), 0, L - 1)

    traces = []
    for l, sensor in enumerate(spec.sensors):
        support = sensor.environment.h_support
        pos = {h: i for i, h in enumerate(support)}
        hmap = np.array([pos[hvec[l]] for hvec, _ in items])
        sched = tau == l
        trace = _simulate_arrays(sensor, policy.per_sensor[l], qi[l],
                                 hmap[ji], es[l], seed, scheduled=sched)
        trace.summary["scheduled_fraction"] = float(sched.mean())
        traces.append(trace)
    return tuple(traces)


# ---------------------------------------------------------------------------
# Two-sensor region sweep.
# ---------------------------------------------------------------------------

def _min_margin(reports, key: str) -> float:
    vals = [r.binding_margins.get(key) for r in reports]
    vals = [v for v in vals if v is not None]
    return min(vals) if vals else math.nan

def _tdma_sweep_point(args):
    factory, x1, x2, beta_levels, alpha_points, cache = args
    spec = factory(x1, x2)
    if len(spec.sensors) > 2:
        raise SpecError("the two-sensor sweep needs at most two sensors")
    out = {}
    outer = synthesize_do(spec.sensors[0], spec.d_bar_vec[0],
                          alpha_points=alpha_points, first_feasible=True)
    m = outer.binding_margins
    out["outer"] = (bool(outer.feasible),
                    float(m.get("rate", math.nan)),
                    float(m.get("distortion", math.nan)),
                    float(m.get("energy_src", math.nan)),
                    float(m.get("energy_ch", math.nan)))
    for name, synth in (("do", synthesize_schedule),
                        ("fixed", synthesize_fixed_schedule)):
        rep = synth(spec, beta_levels=beta_levels, alpha_points=alpha_points,
                    table_cache=cache)
        out[name] = (bool(rep.feasible),
                     float(_min_margin(rep.sensor_reports, "rate")),
                     float(_min_margin(rep.sensor_reports, "distortion")),
                     float(_min_margin(rep.sensor_reports, "energy_src")),
                     float(_min_margin(rep.sensor_reports, "energy_ch")))
    return out


def region_sweep_two_sensors(factory: Callable[[float, float], MultiSensorSpec],
                             axis1_values: Sequence[float],
                             axis2_values: Sequence[float],
                             beta_levels: int = 11, alpha_points: int = 32,
                             jobs: int = 1) -> dict:
    """Schedule feasibility over a grid of two-sensor instances.

    factory(x1, x2) builds the instance at one grid point; typically the
    axes are sensor 1's worst-case state probabilities with sensor 2 held
    fixed. Returns membership grids for the single-sensor outer bound
    (sensor 1 alone), the opportunistic class, and the fixed class."""
    a1 = np.asarray(list(axis1_values), dtype=float)
    a2 = np.asarray(list(axis2_values), dtype=float)
    n1, n2 = len(a1), len(a2)
    names = ("outer", "do", "fixed")
    tags = {"outer": "outer", "do": "tdma_do", "fixed": "tdma_fixed"}
    results = {
        name: RegionResult(
            tags[name], a1, a2,
            np.zeros((n1, n2), dtype=bool),
            np.full((n1, n2), np.nan), np.full((n1, n2), np.nan),
            np.full((n1, n2), np.nan), np.full((n1, n2), np.nan))
        for name in names
    }
    if jobs > 1:
        tasks = [(factory, float(a1[i]), float(a2[j]), beta_levels,
                  alpha_points, None)
                 for i in range(n1) for j in range(n2)]
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            outputs = list(ex.map(_tdma_sweep_point, tasks, chunksize=4))
    else:
        cache: dict = {}
        outputs = [
            _tdma_sweep_point((factory, float(a1[i]), float(a2[j]),
                               beta_levels, alpha_points, cache))
            for i in range(n1) for j in range(n2)
        ]
    for flat, out in enumerate(outputs):
        i, j = divmod(flat, n2)
        for name, (feas, rm, dm, es, ec) in out.items():
            rr = results[name]
            rr.feasible[i, j] = feas
            rr.rate_margin[i, j] = rm
            rr.dist_margin[i, j] = dm
            rr.energy_margin_src[i, j] = es
            rr.energy_margin_ch[i, j] = ec
    return results

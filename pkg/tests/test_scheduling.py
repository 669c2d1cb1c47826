"""Multi-sensor grant scheduling: checkers, synthesis, simulation, sweeps."""

import math

import numpy as np
import pytest

from harvpol import feasibility, models, policies, scheduling, simulator
from harvpol.errors import InvariantViolation, MissingState, SpecError

from _helpers import gauss_source, geometry, point_spec, prob_spec


def _skip_params(spec):
    env = spec.environment
    dmax = spec.source.d_max
    return policies.DoPolicy(
        {q: dmax for q in env.q_support},
        {q: 0.0 for q in env.q_support},
        {h: 0.0 for h in env.h_support},
        alpha=0.5, epsilon=0.0)


def test_single_sensor_full_grant_matches_plain_checker():
    """With one sensor granted every slot the TDMA checker must reproduce
    the single-sensor report bit for bit: same verdict, same margins."""
    rng = np.random.default_rng(7)
    for trial in range(50):
        qs = tuple(sorted(rng.uniform(0.3, 12.0, size=2)))
        hs = tuple(sorted(rng.uniform(0.5, 12.0, size=2)))
        pq, ph = rng.uniform(0.05, 0.95, size=2)
        env = models.Environment(
            qs, (pq, 1 - pq), hs, (ph, 1 - ph),
            models.UniformContinuous(0.0, rng.uniform(0.5, 3.0)))
        spec = models.SensorSpec(
            gauss_source(), models.AwgnChannelModel(), geometry(), env)
        d_map = {q: 1.0 / (1.0 + q) + rng.uniform(0.1, 1.0) * (1.0 - 1.0 / (1.0 + q))
                 for q in qs}
        ts_map = {q: rng.uniform(0.01, 0.6) for q in qs}
        if trial % 7 == 0:
            # exercise the skip totalization path as well
            d_map[qs[0]] = spec.source.d_max
            ts_map[qs[0]] = 0.0
        params = policies.DoPolicy(
            d_map, ts_map, {h: rng.uniform(0.0, 0.8) for h in hs},
            alpha=rng.uniform(0.1, 0.9), epsilon=rng.uniform(0.0, 0.05))
        d_bar = rng.uniform(0.5, 1.0)

        sched = scheduling.DoSchedule({(h,): (1.0,) for h in hs}, (params,))
        multi = scheduling.check_multi(
            sched, scheduling.MultiSensorSpec((spec,), (d_bar,)))
        assert len(multi) == 1
        single = feasibility.check_do(params, spec, d_bar)
        assert multi[0].feasible == single.feasible
        assert multi[0].binding_margins == single.binding_margins


def test_symmetric_half_grant_margin_arithmetic():
    # deterministic unit-energy sensors so every margin is hand-checkable
    energy = models.DiscretePmf((1.0,), (1.0,))
    spec = point_spec(10.0, 10.0, energy=energy)
    d, ts, tt, alpha, eps = 0.7, 0.3, 0.4, 0.5, 0.01
    params = policies.DoPolicy({10.0: d}, {10.0: ts}, {10.0: tt}, alpha, eps)
    spec2 = scheduling.MultiSensorSpec((spec, spec), (0.8, 0.8))
    sched = scheduling.DoSchedule({(10.0, 10.0): (0.5, 0.5)}, (params, params))

    w = scheduling.effective_weights(spec2, sched, 0)
    assert w == {10.0: 0.5}

    f = models.source_rate(spec.source, spec.geometry, d, ts, 10.0)
    g = models.channel_rate_awgn(spec.geometry, 10.0, tt)
    for rep in scheduling.check_multi(sched, spec2):
        m = rep.binding_margins
        assert m["rate"] == pytest.approx(0.5 * g - f, rel=1e-12)
        assert m["distortion"] == pytest.approx(0.8 - d, rel=1e-12)
        assert m["energy_src"] == pytest.approx((1 - alpha) * 1.0 - eps - ts, rel=1e-12)
        # transmit energy is only spent on granted slots
        assert m["energy_ch"] == pytest.approx(alpha * 1.0 - eps - 0.5 * tt, rel=1e-12)


def test_grant_rows_validated():
    params = policies.DoPolicy({10.0: 0.8}, {10.0: 0.3}, {10.0: 0.3}, 0.5, 1e-3)
    pair = (params, params)
    with pytest.raises(InvariantViolation):
        scheduling.DoSchedule({(10.0, 10.0): (0.7, 0.7)}, pair)
    with pytest.raises(InvariantViolation):
        scheduling.DoSchedule({(10.0, 10.0): (0.7, 0.2)}, pair)
    with pytest.raises(InvariantViolation):
        scheduling.DoSchedule({(10.0, 10.0): (-0.1, 0.9)}, pair)
    with pytest.raises(InvariantViolation):
        scheduling.FixedSchedule((0.8, 0.8), pair)

    spec = point_spec(10.0, 10.0)
    sched = scheduling.DoSchedule({(10.0, 10.0): (0.5, 0.5)}, pair)
    solo = scheduling.MultiSensorSpec((spec,), (0.8,))
    with pytest.raises(SpecError):
        scheduling.check_multi(sched, solo)
    with pytest.raises(SpecError):
        scheduling.simulate_tdma(solo, object(), 100, seed=0)


def test_missing_policy_state_is_reported():
    spec = point_spec(10.0, 10.0)
    bad = policies.DoPolicy({9.9: 0.8}, {9.9: 0.3}, {10.0: 0.3}, 0.5, 1e-3)
    sched = scheduling.DoSchedule({(10.0, 10.0): (0.5, 0.5)}, (bad, bad))
    spec2 = scheduling.MultiSensorSpec((spec, spec), (0.8, 0.8))
    with pytest.raises(MissingState):
        scheduling.check_multi(sched, spec2)


def test_product_joint_pmf_marginals():
    s1 = prob_spec(0.3, 0.25)
    env2 = models.Environment(
        (0.8, 1.0), (0.6, 0.4), (1.0, 2.0, 8.0), (0.4, 0.35, 0.25),
        models.UniformContinuous(0.0, 2.0))
    s2 = models.SensorSpec(
        gauss_source(), models.AwgnChannelModel(), geometry(), env2)

    joint = scheduling.product_joint_pmf((s1, s2))
    assert math.isclose(sum(joint.values()), 1.0, abs_tol=1e-12)
    for i, spec in enumerate((s1, s2)):
        env = spec.environment
        for hv, ph in zip(env.h_support, env.h_pmf):
            mass = sum(p for hvec, p in joint.items() if hvec[i] == hv)
            assert math.isclose(mass, ph, abs_tol=1e-10)


def test_dead_second_sensor_gets_no_grant():
    """A sensor that never harvests can only meet a vacuous target; the
    synthesizer should hand the whole channel to the live sensor."""
    live = point_spec(10.0, 10.0)
    dead = point_spec(10.0, 10.0, energy=models.DiscretePmf((0.0,), (1.0,)))
    spec2 = scheduling.MultiSensorSpec((live, dead), (0.8, 1.0))

    rep = scheduling.synthesize_schedule(spec2, beta_levels=5, alpha_points=16)
    assert rep.feasible
    assert rep.policy.beta[(10.0, 10.0)] == (1.0, 0.0)
    assert all(r.feasible for r in rep.sensor_reports)

    # the same split written by hand also certifies
    solo = feasibility.synthesize_do(live, 0.8, alpha_points=16)
    assert solo.feasible
    manual = scheduling.DoSchedule(
        {(10.0, 10.0): (1.0, 0.0)}, (solo.witness, _skip_params(dead)))
    reports = scheduling.check_multi(manual, spec2)
    assert all(r.feasible for r in reports)
    assert reports[1].binding_margins["rate"] == math.inf


def test_fixed_schedule_symmetric_split():
    spec = point_spec(10.0, 10.0)
    spec2 = scheduling.MultiSensorSpec((spec, spec), (0.8, 0.8))
    rep = scheduling.synthesize_fixed_schedule(spec2, beta_levels=11, alpha_points=16)
    assert rep.feasible
    assert rep.policy.beta == (0.5, 0.5)


def test_single_sensor_simulation_is_bit_exact():
    spec = point_spec(10.0, 10.0)
    params = policies.DoPolicy({10.0: 0.8}, {10.0: 0.3}, {10.0: 0.3}, 0.5, 1e-3)
    sched = scheduling.DoSchedule({(10.0,): (1.0,)}, (params,))
    spec1 = scheduling.MultiSensorSpec((spec,), (0.8,))

    (tdma,) = scheduling.simulate_tdma(spec1, sched, 5_000, seed=42)
    plain = simulator.run(spec, params, 5_000, seed=42)
    for field in ("energy", "queue_bits", "q", "h", "d", "ts", "tt",
                  "bits_in", "bits_out", "distortion"):
        assert np.array_equal(getattr(tdma, field), getattr(plain, field)), field
    assert tdma.summary["scheduled_fraction"] == 1.0


def test_simulated_grant_fractions_track_the_schedule():
    spec = point_spec(10.0, 10.0)
    params = policies.DoPolicy({10.0: 0.9}, {10.0: 0.1}, {10.0: 0.1}, 0.5, 1e-3)
    spec2 = scheduling.MultiSensorSpec((spec, spec), (1.0, 1.0))
    sched = scheduling.FixedSchedule((0.3, 0.7), (params, params))

    traces = scheduling.simulate_tdma(spec2, sched, 200_000, seed=3)
    fracs = [tr.summary["scheduled_fraction"] for tr in traces]
    assert abs(fracs[0] - 0.3) < 0.01
    assert abs(fracs[1] - 0.7) < 0.01
    assert fracs[0] + fracs[1] == 1.0


def test_region_sweep_containment():
    """Fixed grants are a subclass of opportunistic ones, and any schedule
    is dominated by sensor 1 owning the channel outright."""
    def factory(x1, x2):
        return scheduling.MultiSensorSpec(
            (prob_spec(x1, x2), prob_spec(0.5, 0.5)), (0.75, 0.9))

    vals = [0.1, 0.5, 0.9]
    res = scheduling.region_sweep_two_sensors(
        factory, vals, vals, beta_levels=5, alpha_points=16)
    fixed, do, outer = (res[k].feasible for k in ("fixed", "do", "outer"))
    assert not (fixed & ~do).any()
    assert not (do & ~outer).any()
    # the gap is real on this grid
    assert do.sum() < outer.sum() or fixed.sum() < do.sum() or do.sum() > 0


def test_single_sensor_sweep_reduces_to_region_sweep():
    # d_bar chosen so the 4x4 grid is split (7 of 16 feasible)
    d_bar = 0.75
    vals = [0.05, 0.35, 0.65, 0.95]

    def factory(x1, x2):
        return scheduling.MultiSensorSpec((prob_spec(x1, x2),), (d_bar,))

    res = scheduling.region_sweep_two_sensors(
        factory, vals, vals, beta_levels=5, alpha_points=16)
    single = feasibility.region_sweep(
        prob_spec, vals, vals, d_bar, classes=("do",), alpha_points=16)
    ref = single["do"].feasible
    assert ref.any() and not ref.all()
    for name in ("outer", "do", "fixed"):
        assert (res[name].feasible == ref).all(), name
    assert np.allclose(res["outer"].rate_margin, single["do"].rate_margin,
                       equal_nan=True)


def test_certified_schedule_survives_simulation():
    spec = point_spec(10.0, 10.0)
    spec2 = scheduling.MultiSensorSpec((spec, spec), (0.8, 0.8))
    rep = scheduling.synthesize_schedule(spec2, beta_levels=5, alpha_points=16)
    assert rep.feasible

    traces = scheduling.simulate_tdma(spec2, rep.policy, 200_000, seed=11)
    for tr, d_bar in zip(traces, spec2.d_bar_vec):
        assert simulator.stability_estimate(tr).verdict != "Unstable"
        assert tr.summary["mean_distortion"] <= d_bar * 1.01
        assert tr.energy.min() >= 0.0
        assert tr.queue_bits.min() >= 0.0
        assert abs(tr.summary["scheduled_fraction"] - 0.5) < 0.01

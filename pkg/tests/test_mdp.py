import itertools

import numpy as np
import pytest

from harvpol import mdp, models
from harvpol.errors import SpecError

GAUSS = models.GaussianIidSourceModel(d_max=1.0, ts_max=1.0)
GEOM = models.SlotGeometry(100, 100)
GM = models.GaussMarkovSourceModel(d_max=1.0, nu=0.1)
GM_GEOM = models.SlotGeometry(100, 100)


def paper_grid_spec(gamma=0.5, discount=0.5, p_w=0.1):
    """The finite-buffer benchmark grid used for the trade-off figure."""
    return mdp.DiscreteSpec(
        queue_levels=(0, 1, 2, 3, 4, 5),
        battery_levels=(0, 1, 2),
        energy_arrivals=models.DiscretePmf((1.0, 2.0), (p_w, 1.0 - p_w)),
        q_support=(0.1, 0.5), q_pmf=(p_w, 1.0 - p_w),
        h_support=(0.5, 10.0), h_pmf=(p_w, 1.0 - p_w),
        d_levels=(0.1, 0.55, 1.0),
        ts_levels=(0.0, 1.0, 2.0, 3.0, 4.0),
        tt_levels=(0.0, 1.0, 2.0, 3.0, 4.0),
        gamma=gamma, discount=discount, d_max=1.0)


def reduced_spec():
    return mdp.DiscreteSpec(
        queue_levels=(0, 1), battery_levels=(0, 1),
        energy_arrivals=models.DiscretePmf((1.0,), (1.0,)),
        q_support=(1.0,), q_pmf=(1.0,),
        h_support=(1.0, 4.0), h_pmf=(0.5, 0.5),
        d_levels=(0.55,), ts_levels=(0.0, 1.0), tt_levels=(0.0, 1.0),
        gamma=0.5, discount=0.5, d_max=1.0)


def policy_value(tbl, choice, discount):
    """Discounted value of a fixed action map by direct linear solve."""
    n = len(tbl.states)
    P = np.zeros((n, n))
    c = np.zeros(n)
    for s in range(n):
        P[s] = tbl.trans[s, choice[s]]
        c[s] = tbl.cost[s, choice[s]]
    return np.linalg.solve(np.eye(n) - discount * P, c)


# ---------------------------------------------------------------------------
# model construction


def test_benchmark_grid_dimensions():
    tbl = mdp.build_mdp(paper_grid_spec(), GM, GM_GEOM)
    assert len(tbl.reported_states) == 3 * 6 * 2 * 2
    # internal solving grid folds the arrival into the pre-decision state
    assert len(tbl.states) == len(tbl.reported_states) + 24


def test_transition_rows_are_normalized():
    tbl = mdp.build_mdp(paper_grid_spec(), GM, GM_GEOM)
    sums = tbl.trans.sum(axis=2)
    assert np.all(np.abs(sums[tbl.admissible] - 1.0) < 1e-12)


def test_idle_action_always_admissible_and_costed_as_skip():
    spec = paper_grid_spec(gamma=0.5)
    tbl = mdp.build_mdp(spec, GM, GM_GEOM)
    idle = tbl.actions.index((1.0, 0.0, 0.0))
    assert np.all(tbl.admissible[:, idle])
    for s, state in enumerate(tbl.states):
        if state[1] == 0.0:  # empty queue
            assert abs(tbl.cost[s, idle] - 0.5 * 1.0) < 1e-12
            assert tbl.d_eff[s, idle] == 1.0


def test_empty_action_grid_rejected():
    with pytest.raises(SpecError):
        mdp.DiscreteSpec(
            queue_levels=(0, 1), battery_levels=(0,),
            energy_arrivals=models.DiscretePmf((1.0,), (1.0,)),
            q_support=(0.5,), q_pmf=(1.0,), h_support=(1.0,), h_pmf=(1.0,),
            d_levels=(), ts_levels=(0.0,), tt_levels=(0.0,),
            gamma=0.5, discount=0.5, d_max=1.0)


# ---------------------------------------------------------------------------
# value iteration


def test_zero_discount_is_myopic():
    tbl = mdp.build_mdp(reduced_spec(), GAUSS, GEOM)
    sol = mdp.value_iteration(tbl, 0.0)
    for s, state in enumerate(tbl.states):
        best = min(tbl.cost[s, a] for a in range(len(tbl.actions))
                   if tbl.admissible[s, a])
        assert abs(sol.value[state] - best) < 1e-15


def test_residuals_contract_geometrically():
    tbl = mdp.build_mdp(paper_grid_spec(discount=0.7), GM, GM_GEOM)
    sol = mdp.value_iteration(tbl, 0.7)
    hist = sol.residual_history
    assert len(hist) >= 3
    for r_prev, r_next in zip(hist, hist[1:]):
        # contraction up to float noise in the sup norm
        assert r_next <= 0.7 * r_prev + 1e-12


def test_single_state_closed_form():
    spec = mdp.DiscreteSpec(
        queue_levels=(0,), battery_levels=(0,),
        energy_arrivals=models.DiscretePmf((0.0,), (1.0,)),
        q_support=(1.0,), q_pmf=(1.0,), h_support=(1.0,), h_pmf=(1.0,),
        d_levels=(1.0,), ts_levels=(0.0,), tt_levels=(0.0,),
        gamma=0.5, discount=0.9, d_max=1.0)
    tbl = mdp.build_mdp(spec, GAUSS, GEOM)
    sol = mdp.value_iteration(tbl, 0.9, tol=1e-12)
    # forced idling accrues gamma * d_max forever: V = 0.5 / (1 - 0.9)
    want = 0.5 / 0.1
    assert abs(sol.value[tbl.states[0]] - want) < 1e-9


def test_greedy_policy_matches_exhaustive_enumeration():
    tbl = mdp.build_mdp(reduced_spec(), GAUSS, GEOM)
    discount = 0.5
    sol = mdp.value_iteration(tbl, discount, tol=1e-13)
    n = len(tbl.states)
    options = [tuple(a for a in range(len(tbl.actions)) if tbl.admissible[s, a])
               for s in range(n)]
    best = np.full(n, np.inf)
    for choice in itertools.product(*options):
        best = np.minimum(best, policy_value(tbl, choice, discount))
    greedy_choice = [tbl.actions.index(sol.action[st]) for st in tbl.states]
    greedy_val = policy_value(tbl, greedy_choice, discount)
    assert np.all(np.abs(greedy_val - best) < 1e-9)
    assert np.all(np.abs(np.array([sol.value[st] for st in tbl.states]) - best) < 1e-8)


def test_greedy_policy_is_a_fixed_point():
    tbl = mdp.build_mdp(reduced_spec(), GAUSS, GEOM)
    sol = mdp.value_iteration(tbl, 0.5, tol=1e-13)
    v = np.array([sol.value[st] for st in tbl.states])
    for s, state in enumerate(tbl.states):
        backups = {a: tbl.cost[s, a] + 0.5 * float(tbl.trans[s, a] @ v)
                   for a in range(len(tbl.actions)) if tbl.admissible[s, a]}
        best = min(backups.values())
        chosen = tbl.actions.index(sol.action[state])
        assert backups[chosen] <= best + 1e-9


# ---------------------------------------------------------------------------
# long-run evaluation


def test_stationary_distribution_solves_the_chain():
    tbl = mdp.build_mdp(paper_grid_spec(), GM, GM_GEOM)
    sol = mdp.value_iteration(tbl, 0.5)
    pi = mdp.stationary_distribution(tbl, sol)
    assert pi.shape == (len(tbl.states),)
    assert np.all(pi >= -1e-15)
    assert abs(pi.sum() - 1.0) < 1e-9
    P = np.array([tbl.trans[s, tbl.actions.index(sol.action[st])]
                  for s, st in enumerate(tbl.states)])
    assert np.max(np.abs(pi @ P - pi)) < 1e-9


def test_discounted_value_consistent_with_chain_average():
    # for a fixed policy, (1 - lambda) * pi . V equals pi . c identically
    tbl = mdp.build_mdp(paper_grid_spec(), GM, GM_GEOM)
    lam = 0.5
    sol = mdp.value_iteration(tbl, lam, tol=1e-12)
    pi = mdp.stationary_distribution(tbl, sol)
    v = np.array([sol.value[st] for st in tbl.states])
    c = np.array([tbl.cost[s, tbl.actions.index(sol.action[st])]
                  for s, st in enumerate(tbl.states)])
    assert abs((1.0 - lam) * float(pi @ v) - float(pi @ c)) < 1e-6


# ---------------------------------------------------------------------------
# trade-off curves


def test_tradeoff_curve_monotone_and_endpoints(tmp_path):
    spec = paper_grid_spec()
    pts = mdp.tradeoff_curve(spec, GM, GM_GEOM, (0.0, 0.5, 1.0))
    assert [p.gamma for p in pts] == [0.0, 0.5, 1.0]
    for a, b in zip(pts, pts[1:]):
        assert b.avg_distortion <= a.avg_distortion + 1e-9
        assert b.avg_queue >= a.avg_queue - 1e-9
    assert pts[0].avg_queue == min(p.avg_queue for p in pts)
    assert pts[-1].avg_distortion == min(p.avg_distortion for p in pts)
    path = tmp_path / "curve.csv"
    mdp.write_tradeoff_csv(pts, path, preamble={"kind": "tradeoff"})
    lines = path.read_text().splitlines()
    assert lines[1] == "gamma,avg_queue,avg_distortion,iterations,residual"
    assert len(lines) == 2 + 3


def test_separable_matches_joint_on_deterministic_environment():
    spec = mdp.DiscreteSpec(
        queue_levels=(0, 1, 2), battery_levels=(0, 1),
        energy_arrivals=models.DiscretePmf((2.0,), (1.0,)),
        q_support=(0.5,), q_pmf=(1.0,), h_support=(2.0,), h_pmf=(1.0,),
        d_levels=(0.55, 1.0), ts_levels=(0.0, 1.0), tt_levels=(0.0, 1.0),
        gamma=0.5, discount=0.5, d_max=1.0)
    joint = mdp.tradeoff_curve(spec, GM, GM_GEOM, (0.5,))[0]
    sep = mdp.separable_optimize(spec, GM, GM_GEOM)
    score_joint = 0.5 * joint.avg_distortion + 0.5 * joint.avg_queue
    score_sep = 0.5 * sep.avg_distortion + 0.5 * sep.avg_queue
    assert score_sep >= score_joint - 1e-9
    assert score_sep <= score_joint + 1e-6


def test_separable_rejects_empty_grids():
    with pytest.raises(SpecError):
        mdp.separable_optimize(paper_grid_spec(), GM, GM_GEOM, alpha_grid=())

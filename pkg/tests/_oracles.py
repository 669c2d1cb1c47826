"""Independent brute-force oracles the tests compare library results against."""

import math

import numpy as np

from harvpol import models


def do_oracle_single_state(spec, d_bar, levels=16):
    """Exhaustive (d, alpha) grid check for single-state feasibility.

    Maximal energy draws per split: ts = (1-a)*E[E], tt = a*E[E]. Feasible
    when some grid cell produces fewer bits than the channel serves. The
    grid is deliberately coarse; callers treat one grid step as the
    resolution limit of the verdict.
    """
    env = spec.environment
    q, h = env.q_support[0], env.h_support[0]
    ee = models.mean_energy(env.energy)
    floor, ceil = models.distortion_bounds(spec.source, spec.geometry, q, ee)
    hi = min(d_bar, ceil)
    if hi <= floor:
        return False
    d_grid = floor + (hi - floor) * np.linspace(1.0 / levels, 1.0, levels)
    alpha_grid = np.linspace(0.0, 1.0, levels + 2)[1:-1]
    for a in alpha_grid:
        tt = a * ee
        g = models.channel_rate_awgn(spec.geometry, h, tt)
        for d in d_grid:
            bits, _, skipped = models.effective_source_output(
                spec.source, spec.geometry, float(d), (1.0 - a) * ee, q)
            if not skipped and bits < g:
                return True
    return False


def do_oracle_boundary_cell(spec, d_bar, levels=16):
    """True when the instance sits within one oracle grid step of the
    feasibility boundary, where grid verdicts are allowed to wobble."""
    env = spec.environment
    q = env.q_support[0]
    ee = models.mean_energy(env.energy)
    floor, ceil = models.distortion_bounds(spec.source, spec.geometry, q, ee)
    step = (min(d_bar, ceil) - floor) / levels
    if step <= 0.0:
        step = d_bar / levels
    lo = do_oracle_single_state(spec, max(d_bar - step, 1e-9), levels)
    hi = do_oracle_single_state(spec, d_bar + step, levels)
    return lo != hi


def waterfill_kkt_violation(h_support, weights, budget, alloc):
    """Largest KKT defect of a water-filling allocation (0 when optimal)."""
    levels = [alloc[h] + 1.0 / h for h in h_support if alloc[h] > 0.0]
    worst = 0.0
    if levels:
        mu = sum(levels) / len(levels)
        worst = max(abs(lv - mu) for lv in levels)
        for h in h_support:
            if alloc[h] == 0.0:
                worst = max(worst, mu - 1.0 / h)  # shut-off state must sit above water
    spent = sum(w * alloc[h] for h, w in zip(h_support, weights))
    worst = max(worst, abs(spent - budget) / max(1.0, budget))
    return worst


def waterfill_objective(h_support, weights, alloc):
    return sum(w * math.log2(1.0 + h * alloc[h]) for h, w in zip(h_support, weights))

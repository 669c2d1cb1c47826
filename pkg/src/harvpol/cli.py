"""Command-line entry point.

Five subcommands cover the workflows: ``region`` sweeps single-sensor
feasibility grids, ``tradeoff`` traces the delay-distortion frontier,
``simulate`` synthesizes one policy and runs a certified trajectory,
``schedule`` sweeps two-sensor shared-channel regions, and ``validate``
re-checks the shipped presets end to end.

Outputs are delimited text plus rendered figures in the chosen directory.
Identical config and seed produce byte-identical delimited files; every
file header echoes the seed and a hash of the experiment parameters.
"""

import argparse
import dataclasses
import json
import sys
import time
from pathlib import Path

from . import feasibility, mdp, scheduling, simulator
from .config import (
    ExperimentConfig,
    PRESETS,
    ScheduleJob,
    build_job,
    config_digest,
    load_config,
    preset,
)
from .errors import ConfigError, HarvpolError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_VALIDATION = 2


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH",
                        help="TOML or JSON experiment file")
    common.add_argument("--preset", metavar="NAME",
                        help="shipped preset (%s)" % ", ".join(PRESETS))
    common.add_argument("--out", metavar="DIR",
                        help="output directory (default from config)")
    common.add_argument("--seed", type=int, metavar="N",
                        help="RNG seed override")
    common.add_argument("--resolution", type=int, metavar="N",
                        help="grid points per axis override")
    common.add_argument("--jobs", type=int, metavar="N",
                        help="worker processes")
    common.add_argument("--no-plot", action="store_true",
                        help="skip figure rendering")

    top = argparse.ArgumentParser(
        prog="harvpol",
        description="Synthesize, verify, and simulate energy-management "
                    "policies for harvesting sensors.")
    sub = top.add_subparsers(dest="cmd", required=True)
    sub.add_parser("region", parents=[common],
                   help="sweep single-sensor feasibility over a 2-D grid")
    sub.add_parser("tradeoff", parents=[common],
                   help="trace the average delay vs distortion frontier")
    sub.add_parser("simulate", parents=[common],
                   help="synthesize a policy and run one long trajectory")
    sub.add_parser("schedule", parents=[common],
                   help="sweep two-sensor shared-channel feasibility")
    sub.add_parser("validate", parents=[common],
                   help="re-check shipped presets and exit nonzero on failure")
    return top


def _resolve_config(args) -> ExperimentConfig:
    if args.config and args.preset:
        raise ConfigError("--config and --preset are mutually exclusive")
    if args.config:
        cfg = load_config(args.config)
    elif args.preset:
        cfg = preset(args.preset)
    elif args.cmd == "validate":
        cfg = ExperimentConfig(kind="validate", payload={"presets": list(PRESETS)})
    else:
        raise ConfigError("one of --config or --preset is required")
    if cfg.kind != args.cmd:
        raise ConfigError(
            f"config describes a {cfg.kind!r} experiment; run it with the "
            f"{cfg.kind!r} subcommand")
    overrides = {}
    if args.out is not None:
        overrides["out"] = args.out
    if args.seed is not None:
        if not 0 <= args.seed < 2 ** 64:
            raise ConfigError("--seed must fit in an unsigned 64-bit integer")
        overrides["seed"] = args.seed
    if args.resolution is not None:
        if args.resolution < 2:
            raise ConfigError("--resolution must be at least 2")
        overrides["resolution"] = args.resolution
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError("--jobs must be at least 1")
        overrides["jobs"] = args.jobs
    return dataclasses.replace(cfg, **overrides) if overrides else cfg


def _outdir(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _preamble(cfg: ExperimentConfig, **extra) -> dict:
    p = {"kind": cfg.kind}
    name = cfg.payload.get("preset")
    if name:
        p["preset"] = name
    p["seed"] = cfg.seed
    p["config_sha256"] = config_digest(cfg)
    p.update(extra)
    return p


def _jsonable(v):
    if isinstance(v, dict):
        return {k: _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, float) and (v != v or v in (float("inf"), float("-inf"))):
        return repr(v)  # strict JSON has no literal for these
    return v


def _write_summary(out: Path, cfg: ExperimentConfig, body: dict) -> None:
    doc = {"kind": cfg.kind, "seed": cfg.seed,
           "config_sha256": config_digest(cfg)}
    name = cfg.payload.get("preset")
    if name:
        doc["preset"] = name
    doc.update(_jsonable(body))
    with open(out / "summary.json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True, allow_nan=False)
        fh.write("\n")


_AXIS_LABELS = {
    "point_state": ("source snr q", "channel snr h"),
    "worst_prob": ("P(worst source state)", "P(worst channel state)"),
}


def cmd_region(cfg: ExperimentConfig, args) -> int:
    from .plots import plot_region

    job = build_job(cfg)
    out = _outdir(cfg)
    t0 = time.perf_counter()
    results = feasibility.region_sweep(
        job.factory, job.axis1, job.axis2, job.d_bar, job.classes,
        alpha_points=job.alpha_points, jobs=cfg.jobs)
    elapsed = time.perf_counter() - t0
    files = []
    counts = {}
    for cls in job.classes:
        rr = results[cls]
        path = out / f"region_{cls}.csv"
        feasibility.write_region_csv(rr, path,
                                     _preamble(cfg, policy_class=cls))
        files.append(path.name)
        counts[cls] = {"feasible": int(rr.feasible.sum()),
                       "total": int(rr.feasible.size)}
        print(f"{cls}: {counts[cls]['feasible']}/{counts[cls]['total']} "
              f"grid points feasible")
    if not args.no_plot:
        xlab, ylab = _AXIS_LABELS[cfg.payload["axes"]]
        plot_region(results, out / "region.png",
                    title=cfg.payload.get("preset", "region sweep"),
                    log_axes=cfg.payload["axes"] == "point_state",
                    xlabel=xlab, ylabel=ylab)
        files.append("region.png")
    _write_summary(out, cfg, {"elapsed_s": round(elapsed, 3),
                              "classes": counts, "files": files,
                              "grid": [len(job.axis1), len(job.axis2)]})
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


def cmd_tradeoff(cfg: ExperimentConfig, args) -> int:
    from .plots import plot_tradeoff

    job = build_job(cfg)
    out = _outdir(cfg)
    t0 = time.perf_counter()
    files = []
    curves = []
    stats = {}
    for run in job.runs:
        for method in job.methods:
            if method == "joint":
                points = mdp.tradeoff_curve(run.spec, job.source,
                                            job.geometry, job.gammas,
                                            jobs=cfg.jobs)
            else:
                points = mdp.separable_curve(run.spec, job.source,
                                             job.geometry, job.gammas)
            tag = f"{method}_pw{run.p_worst:g}"
            path = out / f"tradeoff_{tag}.csv"
            mdp.write_tradeoff_csv(points, path,
                                   _preamble(cfg, method=method,
                                             p_worst=run.p_worst))
            files.append(path.name)
            style = {"linestyle": "-" if method == "joint" else "--"}
            curves.append((tag, points, style))
            stats[tag] = {
                "min_queue": min(p.avg_queue for p in points),
                "min_distortion": min(p.avg_distortion for p in points),
            }
            print(f"{tag}: {len(points)} gamma points, queue range "
                  f"[{min(p.avg_queue for p in points):.4f}, "
                  f"{max(p.avg_queue for p in points):.4f}]")
    elapsed = time.perf_counter() - t0
    if not args.no_plot:
        plot_tradeoff(curves, out / "tradeoff.png",
                      title=cfg.payload.get("preset", "tradeoff"))
        files.append("tradeoff.png")
    _write_summary(out, cfg, {"elapsed_s": round(elapsed, 3),
                              "curves": stats, "files": files,
                              "gamma_points": len(job.gammas)})
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


def cmd_simulate(cfg: ExperimentConfig, args) -> int:
    from .plots import plot_trace

    job = build_job(cfg)
    out = _outdir(cfg)
    kw = {}
    if job.policy_class != "analog":
        kw["alpha_points"] = job.alpha_points
    report = feasibility.synthesize(job.sensor, job.d_bar, job.policy_class,
                                    **kw)
    if not report.feasible:
        print(f"policy class {job.policy_class!r} is infeasible at "
              f"d_bar={job.d_bar}; margins {report.binding_margins}",
              file=sys.stderr)
        return EXIT_VALIDATION
    t0 = time.perf_counter()
    trace = simulator.run(job.sensor, report.witness, job.horizon, cfg.seed)
    verdict = None
    if job.horizon >= 10_000:
        verdict = simulator.stability_estimate(trace)
    elapsed = time.perf_counter() - t0
    simulator.write_trace_csv(
        trace, out / "trace.csv",
        _preamble(cfg, policy_class=job.policy_class, horizon=job.horizon))
    files = ["trace.csv"]
    if not args.no_plot:
        plot_trace(trace, out / "trace.png",
                   title=f"{job.policy_class}, seed {cfg.seed}",
                   d_bar=job.d_bar)
        files.append("trace.png")
    body = {
        "elapsed_s": round(elapsed, 3),
        "policy_class": job.policy_class,
        "horizon": job.horizon,
        "margins": {k: v for k, v in report.binding_margins.items()},
        "trace": {k: trace.summary[k] for k in sorted(trace.summary)},
        "files": files,
    }
    if verdict is not None:
        body["stability"] = {"verdict": verdict.verdict,
                             "drift": verdict.drift_estimate,
                             "tail_fraction": verdict.tail_fraction}
        print(f"stability: {verdict.verdict} (drift {verdict.drift_estimate:.3g})")
    print(f"mean distortion {trace.summary['mean_distortion']:.4f} "
          f"(target {job.d_bar}), mean queue {trace.summary['mean_queue']:.1f}")
    _write_summary(out, cfg, body)
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


def cmd_schedule(cfg: ExperimentConfig, args) -> int:
    from .plots import plot_schedule

    job = build_job(cfg)
    out = _outdir(cfg)
    t0 = time.perf_counter()
    files = []
    panels = []
    counts = {}
    for i, sweep in enumerate(job.sweeps, start=1):
        results = scheduling.region_sweep_two_sensors(
            sweep.factory, job.axis1, job.axis2,
            beta_levels=job.beta_levels, alpha_points=job.alpha_points,
            jobs=cfg.jobs)
        label = f"cfg{i} (p_q2={sweep.p_q2:g}, p_h2={sweep.p_h2:g})"
        panel_counts = {}
        for name, rr in results.items():
            path = out / f"region_{name}_cfg{i}.csv"
            feasibility.write_region_csv(
                rr, path, _preamble(cfg, sweep=label, policy_class=name))
            files.append(path.name)
            panel_counts[name] = int(rr.feasible.sum())
            print(f"{label} {name}: {panel_counts[name]}/{rr.feasible.size} "
                  f"grid points feasible")
        counts[f"cfg{i}"] = panel_counts
        panels.append((label, results))
    elapsed = time.perf_counter() - t0
    if not args.no_plot:
        xlab, ylab = _AXIS_LABELS["worst_prob"]
        plot_schedule(panels, out / "schedule.png",
                      title=cfg.payload.get("preset", "schedule sweep"),
                      xlabel=xlab, ylabel=ylab)
        files.append("schedule.png")
    _write_summary(out, cfg, {"elapsed_s": round(elapsed, 3),
                              "configs": counts, "files": files,
                              "grid": [len(job.axis1), len(job.axis2)]})
    print(f"wrote {len(files)} files to {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# validate: cheap invariant battery over the shipped presets
# ---------------------------------------------------------------------------


def _corners(values) -> tuple:
    return (values[0], values[-1]) if len(values) > 1 else (values[0],)


def _validate_region_preset(name: str, cfg: ExperimentConfig) -> list:
    problems = []
    job = build_job(cfg)
    a1, a2 = _corners(job.axis1), _corners(job.axis2)
    results = feasibility.region_sweep(job.factory, a1, a2, job.d_bar,
                                       job.classes,
                                       alpha_points=job.alpha_points)
    if "do" in results:
        do_feas = results["do"].feasible
        for cls in job.classes:
            if cls in ("do", "analog"):
                continue
            if (results[cls].feasible & ~do_feas).any():
                problems.append(f"{cls} region escapes the do region")
    # one certified point must survive a short run
    for i, x1 in enumerate(a1):
        for j, x2 in enumerate(a2):
            if "do" in results and results["do"].feasible[i, j]:
                spec = job.factory(x1, x2)
                rep = feasibility.synthesize_do(spec, job.d_bar,
                                                job.alpha_points)
                trace = simulator.run(spec, rep.witness, 20_000, cfg.seed)
                sv = simulator.stability_estimate(trace)
                if sv.verdict == "Unstable":
                    problems.append(f"certified point ({x1:g},{x2:g}) "
                                    f"simulates unstable")
                if trace.summary["mean_distortion"] > job.d_bar * 1.05:
                    problems.append(f"distortion overshoot at ({x1:g},{x2:g})")
                return problems
    return problems


def _validate_tradeoff_preset(name: str, cfg: ExperimentConfig) -> list:
    problems = []
    job = build_job(cfg)
    run = job.runs[0]
    gammas = (0.0, 0.5, 1.0)
    points = mdp.tradeoff_curve(run.spec, job.source, job.geometry, gammas)
    for a, b in zip(points, points[1:]):
        if b.avg_distortion > a.avg_distortion + 1e-9:
            problems.append("joint distortion not monotone in gamma")
        if b.avg_queue + 1e-9 < a.avg_queue:
            problems.append("joint queue not monotone in gamma")
    if any(p.residual > 1e-8 for p in points):
        problems.append("value iteration left a large residual")
    return problems


def _validate_simulate_preset(name: str, cfg: ExperimentConfig) -> list:
    problems = []
    job = build_job(cfg)
    rep = feasibility.synthesize(job.sensor, job.d_bar, job.policy_class,
                                 alpha_points=job.alpha_points)
    if not rep.feasible:
        return [f"preset instance infeasible for {job.policy_class}"]
    trace = simulator.run(job.sensor, rep.witness, 20_000, cfg.seed)
    if trace.summary["mean_distortion"] > job.d_bar * 1.05:
        problems.append("distortion overshoot on the demo run")
    if simulator.stability_estimate(trace).verdict == "Unstable":
        problems.append("demo run unstable")
    return problems


def _validate_schedule_preset(name: str, cfg: ExperimentConfig) -> list:
    problems = []
    job = build_job(cfg)
    sweep = job.sweeps[0]
    a1, a2 = _corners(job.axis1), _corners(job.axis2)
    results = scheduling.region_sweep_two_sensors(
        sweep.factory, a1, a2, beta_levels=5,
        alpha_points=job.alpha_points)
    feas = {k: results[k].feasible for k in ("outer", "do", "fixed")}
    if (feas["fixed"] & ~feas["do"]).any():
        problems.append("fixed-share region escapes the adaptive one")
    if (feas["do"] & ~feas["outer"]).any():
        problems.append("adaptive region escapes the outer bound")
    return problems


_PRESET_CHECKS = {
    "region": _validate_region_preset,
    "tradeoff": _validate_tradeoff_preset,
    "simulate": _validate_simulate_preset,
    "schedule": _validate_schedule_preset,
}


def cmd_validate(cfg: ExperimentConfig, args) -> int:
    from .config import config_from_dict

    job = build_job(cfg)
    failures = 0
    for name in job.presets:
        pc = preset(name)
        problems = []
        rt = config_from_dict(pc.to_dict())
        if rt != pc:
            problems.append("config does not round-trip")
        try:
            problems += _PRESET_CHECKS[pc.kind](name, pc)
        except HarvpolError as exc:
            problems.append(f"{type(exc).__name__}: {exc}")
        if problems:
            failures += 1
            for p in problems:
                print(f"FAIL {name}: {p}")
        else:
            print(f"ok {name}")
    if failures:
        print(f"{failures}/{len(job.presets)} presets failed validation",
              file=sys.stderr)
        return EXIT_VALIDATION
    print(f"all {len(job.presets)} presets validated")
    return EXIT_OK


_DISPATCH = {
    "region": cmd_region,
    "tradeoff": cmd_tradeoff,
    "simulate": cmd_simulate,
    "schedule": cmd_schedule,
    "validate": cmd_validate,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = _resolve_config(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return _DISPATCH[args.cmd](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except HarvpolError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

"""Experiment configuration: schema, presets, and job builders.

A config is a small document (TOML or JSON) with scalar keys ``kind``,
``seed``, ``out``, ``resolution``, ``jobs`` and one table named after the
kind holding the experiment parameters.  Unknown keys anywhere are
rejected by name rather than ignored, so typos fail loudly.  Shipped
presets expand to full payloads at load time; a preset-based config and
the equivalent fully spelled-out one build identical jobs.
"""

import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np

try:
    import tomllib as _toml
except ModuleNotFoundError:  # 3.10 has no stdlib TOML reader
    import tomli as _toml

from .errors import ConfigError
from .mdp import DiscreteSpec
from .models import (
    AwgnChannelModel,
    DiscretePmf,
    Environment,
    GaussianIidSourceModel,
    GaussMarkovSourceModel,
    SensorSpec,
    SlotGeometry,
    UniformContinuous,
)
from .scheduling import MultiSensorSpec

KINDS = ("region", "tradeoff", "simulate", "schedule", "validate")

POLICY_CLASS_NAMES = ("do", "greedy", "greedy_fixed", "hybrid1", "hybrid2",
                      "analog")

_TOP_KEYS = {"kind", "seed", "out", "resolution", "jobs"}


def _fail(path: str, msg: str):
    raise ConfigError(f"{path}: {msg}")


def _check_keys(d: Mapping, allowed, path: str) -> None:
    for key in d:
        if key not in allowed:
            _fail(path, f"unknown key {key!r}")


def _need(d: Mapping, key: str, path: str):
    if key not in d:
        _fail(path, f"missing required key {key!r}")
    return d[key]


def _as_float(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        _fail(path, f"expected a number, got {type(v).__name__}")
    return float(v)


def _as_int(v, path: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        _fail(path, f"expected an integer, got {type(v).__name__}")
    return int(v)


def _as_str(v, path: str) -> str:
    if not isinstance(v, str):
        _fail(path, f"expected a string, got {type(v).__name__}")
    return v


def _as_table(v, path: str) -> Mapping:
    if not isinstance(v, Mapping):
        _fail(path, f"expected a table, got {type(v).__name__}")
    return v


def _float_list(v, path: str) -> list:
    if not isinstance(v, Sequence) or isinstance(v, (str, bytes)):
        _fail(path, "expected a list of numbers")
    return [_as_float(x, f"{path}[{i}]") for i, x in enumerate(v)]


def _str_list(v, path: str) -> list:
    if not isinstance(v, Sequence) or isinstance(v, (str, bytes)):
        _fail(path, "expected a list of strings")
    return [_as_str(x, f"{path}[{i}]") for i, x in enumerate(v)]


# ---------------------------------------------------------------------------
# Sub-schemas shared across kinds.
# ---------------------------------------------------------------------------


def _canon_source(d, path: str) -> dict:
    d = _as_table(d, path)
    family = _as_str(_need(d, "family", path), f"{path}.family")
    if family == "gaussian_iid":
        _check_keys(d, {"family", "d_max", "ts_max", "zeta", "eta"}, path)
        return {
            "family": family,
            "d_max": _as_float(_need(d, "d_max", path), f"{path}.d_max"),
            "ts_max": _as_float(_need(d, "ts_max", path), f"{path}.ts_max"),
            "zeta": _as_float(d.get("zeta", 1.0), f"{path}.zeta"),
            "eta": _as_float(d.get("eta", 1.5), f"{path}.eta"),
        }
    if family == "gauss_markov":
        _check_keys(d, {"family", "d_max", "nu", "zeta"}, path)
        return {
            "family": family,
            "d_max": _as_float(_need(d, "d_max", path), f"{path}.d_max"),
            "nu": _as_float(_need(d, "nu", path), f"{path}.nu"),
            "zeta": _as_float(d.get("zeta", 1.0), f"{path}.zeta"),
        }
    _fail(f"{path}.family", f"unknown source family {family!r}")


def _canon_geometry(d, path: str) -> dict:
    d = _as_table(d, path)
    _check_keys(d, {"channel_uses", "source_samples"}, path)
    return {
        "channel_uses": _as_int(_need(d, "channel_uses", path),
                                f"{path}.channel_uses"),
        "source_samples": _as_int(_need(d, "source_samples", path),
                                  f"{path}.source_samples"),
    }


def _canon_energy(d, path: str) -> dict:
    d = _as_table(d, path)
    kind = _as_str(_need(d, "kind", path), f"{path}.kind")
    if kind == "uniform":
        _check_keys(d, {"kind", "lo", "hi"}, path)
        return {"kind": kind,
                "lo": _as_float(_need(d, "lo", path), f"{path}.lo"),
                "hi": _as_float(_need(d, "hi", path), f"{path}.hi")}
    if kind == "discrete":
        _check_keys(d, {"kind", "values", "probs"}, path)
        return {"kind": kind,
                "values": _float_list(_need(d, "values", path), f"{path}.values"),
                "probs": _float_list(_need(d, "probs", path), f"{path}.probs")}
    _fail(f"{path}.kind", f"unknown energy kind {kind!r}")


def _canon_axis(d, path: str) -> dict:
    d = _as_table(d, path)
    if "values" in d:
        _check_keys(d, {"values"}, path)
        vals = _float_list(d["values"], f"{path}.values")
        if len(vals) < 1:
            _fail(f"{path}.values", "needs at least one value")
        return {"values": vals}
    _check_keys(d, {"lo", "hi", "points", "scale"}, path)
    out = {
        "lo": _as_float(_need(d, "lo", path), f"{path}.lo"),
        "hi": _as_float(_need(d, "hi", path), f"{path}.hi"),
        "points": _as_int(_need(d, "points", path), f"{path}.points"),
        "scale": _as_str(d.get("scale", "linear"), f"{path}.scale"),
    }
    if out["scale"] not in ("linear", "log"):
        _fail(f"{path}.scale", f"expected 'linear' or 'log', got {out['scale']!r}")
    if out["points"] < 2:
        _fail(f"{path}.points", "needs at least 2 points")
    if not out["lo"] < out["hi"]:
        _fail(path, "lo must be below hi")
    if out["scale"] == "log" and out["lo"] <= 0.0:
        _fail(f"{path}.lo", "log axis needs a positive lower bound")
    return out


def _canon_classes(v, path: str) -> list:
    names = _str_list(v, path)
    if not names:
        _fail(path, "needs at least one policy class")
    for name in names:
        if name not in POLICY_CLASS_NAMES:
            _fail(path, f"unknown policy class {name!r}")
    if len(set(names)) != len(names):
        _fail(path, "policy classes must not repeat")
    return names


def _canon_pmf_pair(sup, pmf, path: str, n: Optional[int] = None) -> tuple:
    sup = _float_list(sup, f"{path} support")
    pmf = _float_list(pmf, f"{path} pmf")
    if len(sup) != len(pmf) or not sup:
        _fail(path, "support and pmf must be equal-length and nonempty")
    if n is not None and len(sup) != n:
        _fail(path, f"expected exactly {n} states")
    if any(p < 0.0 for p in pmf):
        _fail(path, "pmf entries must be nonnegative")
    if abs(math.fsum(pmf) - 1.0) > 1e-9:
        _fail(path, "pmf must sum to 1")
    return sup, pmf


# ---------------------------------------------------------------------------
# Per-kind payload validators. Each returns the canonical payload dict.
# ---------------------------------------------------------------------------


_REGION_KEYS = {"preset", "d_bar", "classes", "axes", "axis1", "axis2",
                "source", "geometry", "energy", "q_support", "h_support",
                "alpha_points"}


def _validate_region(p: Mapping, path: str) -> dict:
    _check_keys(p, _REGION_KEYS, path)
    axes = _as_str(_need(p, "axes", path), f"{path}.axes")
    if axes not in ("point_state", "worst_prob"):
        _fail(f"{path}.axes", f"expected 'point_state' or 'worst_prob', got {axes!r}")
    out = {
        "axes": axes,
        "d_bar": _as_float(_need(p, "d_bar", path), f"{path}.d_bar"),
        "classes": _canon_classes(p.get("classes", ["do"]), f"{path}.classes"),
        "axis1": _canon_axis(_need(p, "axis1", path), f"{path}.axis1"),
        "axis2": _canon_axis(_need(p, "axis2", path), f"{path}.axis2"),
        "source": _canon_source(_need(p, "source", path), f"{path}.source"),
        "geometry": _canon_geometry(_need(p, "geometry", path), f"{path}.geometry"),
        "energy": _canon_energy(_need(p, "energy", path), f"{path}.energy"),
        "alpha_points": _as_int(p.get("alpha_points", 64), f"{path}.alpha_points"),
    }
    if axes == "worst_prob":
        qs = _float_list(_need(p, "q_support", path), f"{path}.q_support")
        hs = _float_list(_need(p, "h_support", path), f"{path}.h_support")
        if len(qs) != 2 or len(hs) != 2:
            _fail(path, "worst_prob axes need two-state q_support and h_support"
                        " (worst state first)")
        out["q_support"] = qs
        out["h_support"] = hs
    elif "q_support" in p or "h_support" in p:
        _fail(path, "q_support/h_support only apply when axes='worst_prob'")
    if "preset" in p:
        out["preset"] = _as_str(p["preset"], f"{path}.preset")
    return out


_TRADEOFF_KEYS = {"preset", "source", "geometry", "queue_levels",
                  "battery_levels", "energy_values", "q_support", "h_support",
                  "d_levels", "ts_levels", "tt_levels", "discount", "d_max",
                  "p_worst", "gammas", "methods"}


def _validate_tradeoff(p: Mapping, path: str) -> dict:
    _check_keys(p, _TRADEOFF_KEYS, path)
    gam = _as_table(p.get("gammas", {"points": 21}), f"{path}.gammas")
    _check_keys(gam, {"points"}, f"{path}.gammas")
    points = _as_int(gam.get("points", 21), f"{path}.gammas.points")
    if points < 2:
        _fail(f"{path}.gammas.points", "needs at least 2 points")
    methods = _str_list(p.get("methods", ["joint", "separable"]),
                        f"{path}.methods")
    for m in methods:
        if m not in ("joint", "separable"):
            _fail(f"{path}.methods", f"unknown method {m!r}")
    p_worst = _float_list(p.get("p_worst", [0.1, 0.9]), f"{path}.p_worst")
    for i, pw in enumerate(p_worst):
        if not 0.0 <= pw <= 1.0:
            _fail(f"{path}.p_worst[{i}]", "probabilities must lie in [0, 1]")
    out = {
        "source": _canon_source(_need(p, "source", path), f"{path}.source"),
        "geometry": _canon_geometry(_need(p, "geometry", path),
                                    f"{path}.geometry"),
        "queue_levels": _float_list(_need(p, "queue_levels", path),
                                    f"{path}.queue_levels"),
        "battery_levels": _float_list(_need(p, "battery_levels", path),
                                      f"{path}.battery_levels"),
        "energy_values": _float_list(_need(p, "energy_values", path),
                                     f"{path}.energy_values"),
        "q_support": _float_list(_need(p, "q_support", path),
                                 f"{path}.q_support"),
        "h_support": _float_list(_need(p, "h_support", path),
                                 f"{path}.h_support"),
        "d_levels": _float_list(_need(p, "d_levels", path), f"{path}.d_levels"),
        "ts_levels": _float_list(_need(p, "ts_levels", path),
                                 f"{path}.ts_levels"),
        "tt_levels": _float_list(_need(p, "tt_levels", path),
                                 f"{path}.tt_levels"),
        "discount": _as_float(_need(p, "discount", path), f"{path}.discount"),
        "d_max": _as_float(_need(p, "d_max", path), f"{path}.d_max"),
        "p_worst": p_worst,
        "gammas": {"points": points},
        "methods": methods,
    }
    for key in ("energy_values", "q_support", "h_support"):
        if len(out[key]) != 2:
            _fail(f"{path}.{key}", "expected exactly 2 states (worst first)")
    if "preset" in p:
        out["preset"] = _as_str(p["preset"], f"{path}.preset")
    return out


_SIMULATE_KEYS = {"preset", "source", "geometry", "energy", "q_support",
                  "q_pmf", "h_support", "h_pmf", "d_bar", "policy_class",
                  "horizon", "alpha_points"}


def _validate_simulate(p: Mapping, path: str) -> dict:
    _check_keys(p, _SIMULATE_KEYS, path)
    cls = _as_str(p.get("policy_class", "do"), f"{path}.policy_class")
    if cls not in POLICY_CLASS_NAMES:
        _fail(f"{path}.policy_class", f"unknown policy class {cls!r}")
    qs, qp = _canon_pmf_pair(_need(p, "q_support", path),
                             _need(p, "q_pmf", path), f"{path}.q")
    hs, hp = _canon_pmf_pair(_need(p, "h_support", path),
                             _need(p, "h_pmf", path), f"{path}.h")
    horizon = _as_int(p.get("horizon", 1_000_000), f"{path}.horizon")
    if horizon < 1:
        _fail(f"{path}.horizon", "must be positive")
    out = {
        "source": _canon_source(_need(p, "source", path), f"{path}.source"),
        "geometry": _canon_geometry(_need(p, "geometry", path),
                                    f"{path}.geometry"),
        "energy": _canon_energy(_need(p, "energy", path), f"{path}.energy"),
        "q_support": qs, "q_pmf": qp, "h_support": hs, "h_pmf": hp,
        "d_bar": _as_float(_need(p, "d_bar", path), f"{path}.d_bar"),
        "policy_class": cls,
        "horizon": horizon,
        "alpha_points": _as_int(p.get("alpha_points", 64),
                                f"{path}.alpha_points"),
    }
    if "preset" in p:
        out["preset"] = _as_str(p["preset"], f"{path}.preset")
    return out


_SCHEDULE_KEYS = {"preset", "d_bar", "axis1", "axis2", "source", "geometry",
                  "energy", "q_support", "h_support", "sensor2_configs",
                  "beta_levels", "alpha_points"}


def _validate_schedule(p: Mapping, path: str) -> dict:
    _check_keys(p, _SCHEDULE_KEYS, path)
    d_bar = _float_list(_need(p, "d_bar", path), f"{path}.d_bar")
    if len(d_bar) != 2:
        _fail(f"{path}.d_bar", "expected one target per sensor (two sensors)")
    raw_cfgs = _need(p, "sensor2_configs", path)
    if not isinstance(raw_cfgs, Sequence) or isinstance(raw_cfgs, (str, bytes)):
        _fail(f"{path}.sensor2_configs", "expected a list of [p_q, p_h] pairs")
    cfgs = []
    for i, pair in enumerate(raw_cfgs):
        vals = _float_list(pair, f"{path}.sensor2_configs[{i}]")
        if len(vals) != 2 or any(not 0.0 <= v <= 1.0 for v in vals):
            _fail(f"{path}.sensor2_configs[{i}]",
                  "expected a probability pair [p_q, p_h]")
        cfgs.append(vals)
    if not cfgs:
        _fail(f"{path}.sensor2_configs", "needs at least one configuration")
    qs = _float_list(_need(p, "q_support", path), f"{path}.q_support")
    hs = _float_list(_need(p, "h_support", path), f"{path}.h_support")
    if len(qs) != 2 or len(hs) != 2:
        _fail(path, "schedule sweeps use two-state q/h supports (worst first)")
    beta_levels = _as_int(p.get("beta_levels", 11), f"{path}.beta_levels")
    if beta_levels < 2:
        _fail(f"{path}.beta_levels", "needs at least 2 levels")
    out = {
        "d_bar": d_bar,
        "axis1": _canon_axis(_need(p, "axis1", path), f"{path}.axis1"),
        "axis2": _canon_axis(_need(p, "axis2", path), f"{path}.axis2"),
        "source": _canon_source(_need(p, "source", path), f"{path}.source"),
        "geometry": _canon_geometry(_need(p, "geometry", path),
                                    f"{path}.geometry"),
        "energy": _canon_energy(_need(p, "energy", path), f"{path}.energy"),
        "q_support": qs, "h_support": hs,
        "sensor2_configs": cfgs,
        "beta_levels": beta_levels,
        "alpha_points": _as_int(p.get("alpha_points", 32),
                                f"{path}.alpha_points"),
    }
    if "preset" in p:
        out["preset"] = _as_str(p["preset"], f"{path}.preset")
    return out


def _validate_validate(p: Mapping, path: str) -> dict:
    _check_keys(p, {"presets"}, path)
    names = _str_list(p.get("presets", list(PRESETS)), f"{path}.presets")
    for name in names:
        if name not in PRESETS:
            _fail(f"{path}.presets", f"unknown preset {name!r}")
    return {"presets": names}


_VALIDATORS = {
    "region": _validate_region,
    "tradeoff": _validate_tradeoff,
    "simulate": _validate_simulate,
    "schedule": _validate_schedule,
    "validate": _validate_validate,
}


# ---------------------------------------------------------------------------
# The config object.
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=True)
class ExperimentConfig:
    """One experiment: what to run, where to write, how to seed it."""

    kind: str
    payload: dict = field(default_factory=dict)
    seed: int = 0
    out: str = "out"
    resolution: Optional[int] = None
    jobs: int = 1

    def to_dict(self) -> dict:
        d = {"kind": self.kind, "seed": self.seed, "out": self.out,
             "jobs": self.jobs, self.kind: json.loads(json.dumps(self.payload))}
        if self.resolution is not None:
            d["resolution"] = self.resolution
        return d


def config_from_dict(d: Mapping, origin: str = "config") -> ExperimentConfig:
    d = _as_table(d, origin)
    kind = _as_str(_need(d, "kind", origin), f"{origin}.kind")
    if kind not in KINDS:
        _fail(f"{origin}.kind", f"unknown kind {kind!r}; expected one of {KINDS}")
    _check_keys(d, _TOP_KEYS | {kind}, origin)
    seed = _as_int(d.get("seed", 0), f"{origin}.seed")
    if not 0 <= seed < 2 ** 64:
        _fail(f"{origin}.seed", "seed must fit in an unsigned 64-bit integer")
    jobs = _as_int(d.get("jobs", 1), f"{origin}.jobs")
    if jobs < 1:
        _fail(f"{origin}.jobs", "jobs must be at least 1")
    resolution = d.get("resolution")
    if resolution is not None:
        resolution = _as_int(resolution, f"{origin}.resolution")
        if resolution < 2:
            _fail(f"{origin}.resolution", "resolution must be at least 2")
    payload = _as_table(d.get(kind, {}), f"{origin}.{kind}")
    merged = dict(payload)
    if "preset" in payload:
        name = _as_str(payload["preset"], f"{origin}.{kind}.preset")
        base_kind, base_payload = _preset_entry(name, f"{origin}.{kind}.preset")
        if base_kind != kind:
            _fail(f"{origin}.{kind}.preset",
                  f"preset {name!r} is a {base_kind} experiment, not {kind}")
        merged = {**base_payload, **payload}
    canon = _VALIDATORS[kind](merged, f"{origin}.{kind}")
    return ExperimentConfig(kind=kind, payload=canon, seed=seed,
                            out=_as_str(d.get("out", "out"), f"{origin}.out"),
                            resolution=resolution, jobs=jobs)


def load_config(path) -> ExperimentConfig:
    """Parse a TOML or JSON config file (by suffix, else try both)."""
    text = None
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    name = str(path)
    if name.endswith(".json"):
        parsers = ("json",)
    elif name.endswith(".toml"):
        parsers = ("toml",)
    else:
        parsers = ("toml", "json")
    data = None
    errors = []
    for parser in parsers:
        try:
            if parser == "toml":
                data = _toml.loads(raw.decode("utf-8"))
            else:
                data = json.loads(raw.decode("utf-8"))
            break
        except (ValueError, UnicodeDecodeError) as exc:
            errors.append(f"{parser}: {exc}")
    if data is None:
        raise ConfigError(f"cannot parse config {path}: " + "; ".join(errors))
    return config_from_dict(data, origin=name)


def save_config(cfg: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(cfg.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def config_digest(cfg: ExperimentConfig) -> str:
    """Stable sha256 of the experiment-defining fields; echoed into output
    headers.  Where results land (out) and how work is split (jobs) do not
    change what is computed, so they stay out of the hash."""
    d = cfg.to_dict()
    d.pop("out", None)
    d.pop("jobs", None)
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# Shipped presets.
# ---------------------------------------------------------------------------

_SRC_SMOOTH = {"family": "gaussian_iid", "d_max": 1.0, "ts_max": 1.0,
               "zeta": 1.0, "eta": 1.5}
_ENERGY_U02 = {"kind": "uniform", "lo": 0.0, "hi": 2.0}
_GEOM_B1 = {"channel_uses": 100, "source_samples": 100}
_SNR_AXIS = {"lo": 0.1, "hi": 1000.0, "points": 40, "scale": "log"}
_PROB_AXIS = {"lo": 0.0, "hi": 1.0, "points": 21, "scale": "linear"}
_TWO_STATE_Q = [10.0 ** -0.2, 1.0]
_TWO_STATE_H = [3.5, 7.0]


def _snr_region(channel_uses: int, source_samples: int) -> dict:
    return {
        "axes": "point_state", "d_bar": 0.8,
        "classes": ["do", "greedy", "hybrid1", "hybrid2", "analog"],
        "axis1": dict(_SNR_AXIS), "axis2": dict(_SNR_AXIS),
        "source": dict(_SRC_SMOOTH),
        "geometry": {"channel_uses": channel_uses,
                     "source_samples": source_samples},
        "energy": dict(_ENERGY_U02),
    }


def _prob_region(q_support, h_support) -> dict:
    return {
        "axes": "worst_prob", "d_bar": 0.8,
        "classes": ["do", "greedy", "greedy_fixed"],
        "axis1": dict(_PROB_AXIS), "axis2": dict(_PROB_AXIS),
        "source": dict(_SRC_SMOOTH), "geometry": dict(_GEOM_B1),
        "energy": dict(_ENERGY_U02),
        "q_support": list(q_support), "h_support": list(h_support),
    }


_PRESET_DEFS = {
    # single-sensor regions over the (q, h) plane at three bandwidth ratios
    "fig2a": ("region", _snr_region(201, 1000)),
    "fig2b": ("region", _snr_region(100, 100)),
    "fig2c": ("region", _snr_region(500, 100)),
    # regions over worst-state probabilities for a two-state environment
    "fig3a": ("region", _prob_region([0.1, 100.0], [0.1, 100.0])),
    "fig3b": ("region", _prob_region(_TWO_STATE_Q, _TWO_STATE_H)),
    # delay-distortion trade-off on the finite model
    "fig4": ("tradeoff", {
        "source": {"family": "gauss_markov", "d_max": 1.0, "nu": 0.1,
                   "zeta": 1.0},
        "geometry": dict(_GEOM_B1),
        "queue_levels": [0, 1, 2, 3, 4, 5],
        "battery_levels": [0, 1, 2],
        "energy_values": [1.0, 2.0],
        "q_support": [0.1, 0.5],
        "h_support": [0.5, 10.0],
        "d_levels": [0.1, 0.55, 1.0],
        "ts_levels": [0, 1, 2, 3, 4],
        "tt_levels": [0, 1, 2, 3, 4],
        "discount": 0.5,
        "d_max": 1.0,
        "p_worst": [0.1, 0.9],
        "gammas": {"points": 21},
        "methods": ["joint", "separable"],
    }),
    # two-sensor shared-channel regions, sensor 1 swept, sensor 2 pinned
    "fig5": ("schedule", {
        "d_bar": [0.8, 0.8],
        "axis1": dict(_PROB_AXIS), "axis2": dict(_PROB_AXIS),
        "source": dict(_SRC_SMOOTH), "geometry": dict(_GEOM_B1),
        "energy": dict(_ENERGY_U02),
        "q_support": list(_TWO_STATE_Q), "h_support": list(_TWO_STATE_H),
        "sensor2_configs": [[0.1, 0.1], [0.5, 0.5]],
        "beta_levels": 11,
        "alpha_points": 32,
    }),
    # single certified trajectory on the two-state environment
    "demo": ("simulate", {
        "source": dict(_SRC_SMOOTH), "geometry": dict(_GEOM_B1),
        "energy": dict(_ENERGY_U02),
        "q_support": list(_TWO_STATE_Q), "q_pmf": [0.3, 0.7],
        "h_support": list(_TWO_STATE_H), "h_pmf": [0.3, 0.7],
        "d_bar": 0.8, "policy_class": "do", "horizon": 200_000,
    }),
}

PRESETS = tuple(_PRESET_DEFS)


def _preset_entry(name: str, path: str) -> tuple:
    try:
        return _PRESET_DEFS[name]
    except KeyError:
        _fail(path, f"unknown preset {name!r}; available: {', '.join(PRESETS)}")


def preset(name: str) -> ExperimentConfig:
    kind, payload = _preset_entry(name, "preset")
    return config_from_dict({"kind": kind, kind: {**payload, "preset": name}},
                            origin=f"preset:{name}")


# ---------------------------------------------------------------------------
# Builders: canonical payload -> model objects and sweep factories.
# ---------------------------------------------------------------------------


def _build_source(d: Mapping):
    if d["family"] == "gaussian_iid":
        return GaussianIidSourceModel(d_max=d["d_max"], ts_max=d["ts_max"],
                                      zeta=d["zeta"], eta=d["eta"])
    return GaussMarkovSourceModel(d_max=d["d_max"], nu=d["nu"], zeta=d["zeta"])


def _build_geometry(d: Mapping) -> SlotGeometry:
    return SlotGeometry(channel_uses=d["channel_uses"],
                        source_samples=d["source_samples"])


def _build_energy(d: Mapping):
    if d["kind"] == "uniform":
        return UniformContinuous(lo=d["lo"], hi=d["hi"])
    return DiscretePmf(values=tuple(d["values"]), probs=tuple(d["probs"]))


def _axis_values(d: Mapping, resolution: Optional[int]) -> tuple:
    if "values" in d:
        return tuple(d["values"])
    points = resolution if resolution is not None else d["points"]
    if d["scale"] == "log":
        grid = np.logspace(math.log10(d["lo"]), math.log10(d["hi"]), points)
    else:
        grid = np.linspace(d["lo"], d["hi"], points)
    return tuple(float(v) for v in grid)


@dataclass(frozen=True)
class PointStateFactory:
    """Grid point (q, h) -> sensor whose environment sits at that point."""

    source: object
    geometry: SlotGeometry
    energy: object

    def __call__(self, q: float, h: float) -> SensorSpec:
        env = Environment(q_support=(q,), q_pmf=(1.0,), h_support=(h,),
                          h_pmf=(1.0,), energy=self.energy)
        return SensorSpec(source=self.source, channel=AwgnChannelModel(),
                          geometry=self.geometry, environment=env)


@dataclass(frozen=True)
class WorstProbFactory:
    """Grid point (p_q, p_h) -> two-state sensor; axes weight the worst
    states."""

    source: object
    geometry: SlotGeometry
    energy: object
    q_support: tuple
    h_support: tuple

    def __call__(self, p_q: float, p_h: float) -> SensorSpec:
        env = Environment(q_support=self.q_support,
                          q_pmf=(p_q, 1.0 - p_q),
                          h_support=self.h_support,
                          h_pmf=(p_h, 1.0 - p_h),
                          energy=self.energy)
        return SensorSpec(source=self.source, channel=AwgnChannelModel(),
                          geometry=self.geometry, environment=env)


@dataclass(frozen=True)
class TwoSensorFactory:
    """Grid point sweeps sensor 1's worst-state probabilities; sensor 2 is
    pinned at (p_q2, p_h2)."""

    sensor_factory: WorstProbFactory
    p_q2: float
    p_h2: float
    d_bar_vec: tuple

    def __call__(self, p_q1: float, p_h1: float) -> MultiSensorSpec:
        s1 = self.sensor_factory(p_q1, p_h1)
        s2 = self.sensor_factory(self.p_q2, self.p_h2)
        return MultiSensorSpec(sensors=(s1, s2), d_bar_vec=self.d_bar_vec)


@dataclass(frozen=True)
class RegionJob:
    d_bar: float
    classes: tuple
    axis1: tuple
    axis2: tuple
    factory: object
    alpha_points: int


@dataclass(frozen=True)
class TradeoffRun:
    p_worst: float
    spec: DiscreteSpec


@dataclass(frozen=True)
class TradeoffJob:
    runs: tuple
    source: object
    geometry: SlotGeometry
    gammas: tuple
    methods: tuple


@dataclass(frozen=True)
class SimulateJob:
    sensor: SensorSpec
    d_bar: float
    policy_class: str
    horizon: int
    alpha_points: int


@dataclass(frozen=True)
class ScheduleSweep:
    p_q2: float
    p_h2: float
    factory: TwoSensorFactory


@dataclass(frozen=True)
class ScheduleJob:
    sweeps: tuple
    axis1: tuple
    axis2: tuple
    beta_levels: int
    alpha_points: int
    d_bar_vec: tuple


@dataclass(frozen=True)
class ValidateJob:
    presets: tuple


def build_job(cfg: ExperimentConfig):
    """Turn a validated config into the concrete objects the runners use."""
    p = cfg.payload
    if cfg.kind == "region":
        factory = _region_factory(p)
        return RegionJob(d_bar=p["d_bar"], classes=tuple(p["classes"]),
                         axis1=_axis_values(p["axis1"], cfg.resolution),
                         axis2=_axis_values(p["axis2"], cfg.resolution),
                         factory=factory, alpha_points=p["alpha_points"])
    if cfg.kind == "tradeoff":
        return _build_tradeoff(p, cfg.resolution)
    if cfg.kind == "simulate":
        env = Environment(q_support=tuple(p["q_support"]),
                          q_pmf=tuple(p["q_pmf"]),
                          h_support=tuple(p["h_support"]),
                          h_pmf=tuple(p["h_pmf"]),
                          energy=_build_energy(p["energy"]))
        sensor = SensorSpec(source=_build_source(p["source"]),
                            channel=AwgnChannelModel(),
                            geometry=_build_geometry(p["geometry"]),
                            environment=env)
        return SimulateJob(sensor=sensor, d_bar=p["d_bar"],
                           policy_class=p["policy_class"],
                           horizon=p["horizon"],
                           alpha_points=p["alpha_points"])
    if cfg.kind == "schedule":
        base = WorstProbFactory(source=_build_source(p["source"]),
                                geometry=_build_geometry(p["geometry"]),
                                energy=_build_energy(p["energy"]),
                                q_support=tuple(p["q_support"]),
                                h_support=tuple(p["h_support"]))
        d_bar_vec = tuple(p["d_bar"])
        sweeps = tuple(
            ScheduleSweep(p_q2=pq, p_h2=ph,
                          factory=TwoSensorFactory(sensor_factory=base,
                                                   p_q2=pq, p_h2=ph,
                                                   d_bar_vec=d_bar_vec))
            for pq, ph in p["sensor2_configs"])
        return ScheduleJob(sweeps=sweeps,
                           axis1=_axis_values(p["axis1"], cfg.resolution),
                           axis2=_axis_values(p["axis2"], cfg.resolution),
                           beta_levels=p["beta_levels"],
                           alpha_points=p["alpha_points"],
                           d_bar_vec=d_bar_vec)
    if cfg.kind == "validate":
        return ValidateJob(presets=tuple(p["presets"]))
    raise ConfigError(f"no builder for kind {cfg.kind!r}")


def _region_factory(p: Mapping):
    source = _build_source(p["source"])
    geometry = _build_geometry(p["geometry"])
    energy = _build_energy(p["energy"])
    if p["axes"] == "point_state":
        return PointStateFactory(source=source, geometry=geometry,
                                 energy=energy)
    return WorstProbFactory(source=source, geometry=geometry, energy=energy,
                            q_support=tuple(p["q_support"]),
                            h_support=tuple(p["h_support"]))


def _build_tradeoff(p: Mapping, resolution: Optional[int]) -> TradeoffJob:
    points = resolution if resolution is not None else p["gammas"]["points"]
    gammas = tuple(float(g) for g in np.linspace(0.0, 1.0, points))
    source = _build_source(p["source"])
    geometry = _build_geometry(p["geometry"])
    runs = []
    for pw in p["p_worst"]:
        spec = DiscreteSpec(
            queue_levels=tuple(p["queue_levels"]),
            battery_levels=tuple(p["battery_levels"]),
            energy_arrivals=DiscretePmf(values=tuple(p["energy_values"]),
                                        probs=(pw, 1.0 - pw)),
            q_support=tuple(p["q_support"]), q_pmf=(pw, 1.0 - pw),
            h_support=tuple(p["h_support"]), h_pmf=(pw, 1.0 - pw),
            d_levels=tuple(p["d_levels"]),
            ts_levels=tuple(p["ts_levels"]),
            tt_levels=tuple(p["tt_levels"]),
            gamma=0.5, discount=p["discount"], d_max=p["d_max"])
        runs.append(TradeoffRun(p_worst=float(pw), spec=spec))
    return TradeoffJob(runs=tuple(runs), source=source, geometry=geometry,
                       gammas=gammas, methods=tuple(p["methods"]))

"""Config schema, presets, and the command-line surface."""

import dataclasses
import json

import pytest

from harvpol import cli, config
from harvpol.errors import ConfigError


TINY_REGION_TOML = """
kind = "region"
seed = 3
out = "{out}"

[region]
axes = "point_state"
d_bar = 0.8
classes = ["do", "greedy"]
alpha_points = 16

[region.axis1]
values = [5.0, 10.0, 20.0]

[region.axis2]
values = [5.0, 10.0]

[region.source]
family = "gaussian_iid"
d_max = 1.0
ts_max = 1.0

[region.geometry]
channel_uses = 100
source_samples = 100

[region.energy]
kind = "uniform"
lo = 0.0
hi = 2.0
"""


def _simulate_doc(out, d_bar, horizon=20_000):
    return {
        "kind": "simulate", "seed": 5, "out": str(out),
        "simulate": {
            "source": {"family": "gaussian_iid", "d_max": 1.0, "ts_max": 1.0},
            "geometry": {"channel_uses": 100, "source_samples": 100},
            "energy": {"kind": "uniform", "lo": 0.0, "hi": 2.0},
            "q_support": [10.0 ** -0.2, 1.0], "q_pmf": [0.3, 0.7],
            "h_support": [3.5, 7.0], "h_pmf": [0.3, 0.7],
            "d_bar": d_bar, "policy_class": "do", "horizon": horizon,
            "alpha_points": 16,
        },
    }


# ---------------------------------------------------------------------------
# Schema.
# ---------------------------------------------------------------------------


def test_presets_round_trip():
    for name in config.PRESETS:
        cfg = config.preset(name)
        back = config.config_from_dict(cfg.to_dict())
        assert back == cfg, name
        assert config.config_digest(back) == config.config_digest(cfg)


def test_digest_tracks_experiment_not_bookkeeping():
    cfg = config.preset("demo")
    moved = dataclasses.replace(cfg, out="elsewhere", jobs=4)
    assert config.config_digest(moved) == config.config_digest(cfg)
    reseeded = dataclasses.replace(cfg, seed=99)
    assert config.config_digest(reseeded) != config.config_digest(cfg)


def test_unknown_keys_fail_with_dotted_path():
    doc = config.preset("demo").to_dict()
    doc["simulate"]["bogus"] = 1
    with pytest.raises(ConfigError, match=r"simulate.*bogus"):
        config.config_from_dict(doc)
    with pytest.raises(ConfigError, match="top_level_novelty"):
        config.config_from_dict({"kind": "simulate", "top_level_novelty": 1})


def test_preset_kind_must_match_table():
    with pytest.raises(ConfigError, match="tradeoff"):
        config.config_from_dict({"kind": "region",
                                 "region": {"preset": "fig4"}})


def test_scalar_validation():
    base = config.preset("demo").to_dict()
    for patch in ({"seed": -1}, {"seed": 2 ** 64}, {"jobs": 0},
                  {"resolution": 1}, {"kind": "frontier"}):
        doc = {**base, **patch}
        with pytest.raises(ConfigError):
            config.config_from_dict(doc)


def test_pmf_validation():
    doc = _simulate_doc("out", 0.8)
    doc["simulate"]["q_pmf"] = [0.3, 0.6]
    with pytest.raises(ConfigError, match="sum to 1"):
        config.config_from_dict(doc)
    doc["simulate"]["q_pmf"] = [-0.1, 1.1]
    with pytest.raises(ConfigError, match="nonnegative"):
        config.config_from_dict(doc)


def test_every_preset_builds_a_job():
    expect = {
        "fig2a": config.RegionJob, "fig2b": config.RegionJob,
        "fig2c": config.RegionJob, "fig3a": config.RegionJob,
        "fig3b": config.RegionJob, "fig4": config.TradeoffJob,
        "fig5": config.ScheduleJob, "demo": config.SimulateJob,
    }
    assert set(expect) == set(config.PRESETS)
    for name, job_type in expect.items():
        job = config.build_job(config.preset(name))
        assert isinstance(job, job_type), name

    fig2b = config.build_job(config.preset("fig2b"))
    assert len(fig2b.axis1) == len(fig2b.axis2) == 40
    fig3b = config.build_job(config.preset("fig3b"))
    assert len(fig3b.axis1) == 21 and fig3b.axis1[0] == 0.0 and fig3b.axis1[-1] == 1.0
    fig4 = config.build_job(config.preset("fig4"))
    assert [r.p_worst for r in fig4.runs] == [0.1, 0.9]
    assert len(fig4.gammas) == 21 and fig4.methods == ("joint", "separable")
    fig5 = config.build_job(config.preset("fig5"))
    assert len(fig5.sweeps) == 2 and fig5.beta_levels == 11
    demo = config.build_job(config.preset("demo"))
    assert demo.policy_class == "do" and demo.horizon == 200_000


def test_resolution_overrides_axis_points():
    cfg = dataclasses.replace(config.preset("fig2b"), resolution=5)
    job = config.build_job(cfg)
    assert len(job.axis1) == len(job.axis2) == 5
    # tradeoff resolution controls the gamma count instead
    tcfg = dataclasses.replace(config.preset("fig4"), resolution=4)
    assert len(config.build_job(tcfg).gammas) == 4


def test_load_config_both_formats(tmp_path):
    doc = _simulate_doc(tmp_path, 0.8)
    jpath = tmp_path / "exp.json"
    jpath.write_text(json.dumps(doc))
    from_json = config.load_config(jpath)

    tpath = tmp_path / "exp.toml"
    sim = doc["simulate"]
    lines = ['kind = "simulate"', "seed = 5", f'out = "{doc["out"]}"',
             "[simulate]"]
    for key in ("q_support", "q_pmf", "h_support", "h_pmf"):
        lines.append(f"{key} = {sim[key]}")
    lines += [f"d_bar = {sim['d_bar']}", f"policy_class = \"{sim['policy_class']}\"",
              f"horizon = {sim['horizon']}", f"alpha_points = {sim['alpha_points']}",
              '[simulate.source]', 'family = "gaussian_iid"', "d_max = 1.0",
              "ts_max = 1.0",
              "[simulate.geometry]", "channel_uses = 100", "source_samples = 100",
              "[simulate.energy]", 'kind = "uniform"', "lo = 0.0", "hi = 2.0"]
    tpath.write_text("\n".join(lines) + "\n")
    from_toml = config.load_config(tpath)
    assert from_toml == from_json

    bad = tmp_path / "broken.toml"
    bad.write_text("kind = [unclosed")
    with pytest.raises(ConfigError, match="cannot parse"):
        config.load_config(bad)
    with pytest.raises(ConfigError, match="cannot read"):
        config.load_config(tmp_path / "missing.toml")


# ---------------------------------------------------------------------------
# CLI.
# ---------------------------------------------------------------------------


def _write_tiny_region(tmp_path, out_name):
    path = tmp_path / "region.toml"
    path.write_text(TINY_REGION_TOML.format(out=tmp_path / out_name))
    return path


def test_cli_region_writes_expected_files(tmp_path):
    path = _write_tiny_region(tmp_path, "run1")
    assert cli.main(["region", "--config", str(path)]) == 0
    out = tmp_path / "run1"
    for name in ("region_do.csv", "region_greedy.csv", "region.png",
                 "summary.json"):
        assert (out / name).exists(), name

    text = (out / "region_do.csv").read_text()
    cfg = config.load_config(path)
    assert "# kind=region\n" in text
    assert "# seed=3\n" in text
    assert f"# config_sha256={config.config_digest(cfg)}\n" in text
    header = [l for l in text.splitlines() if not l.startswith("#")][0]
    assert header.startswith("axis1,axis2,feasible")

    summary = json.loads((out / "summary.json").read_text())
    assert summary["kind"] == "region" and summary["seed"] == 3
    assert summary["classes"]["do"]["total"] == 6

    # same config, fresh directory, no figures: delimited output is identical
    assert cli.main(["region", "--config", str(path),
                     "--out", str(tmp_path / "run2"), "--no-plot"]) == 0
    assert not (tmp_path / "run2" / "region.png").exists()
    for name in ("region_do.csv", "region_greedy.csv"):
        assert (tmp_path / "run2" / name).read_bytes() == (out / name).read_bytes()


def test_cli_exit_codes(tmp_path, capsys):
    assert cli.main(["region", "--preset", "nope"]) == 1
    path = _write_tiny_region(tmp_path, "x")
    assert cli.main(["region", "--config", str(path),
                     "--preset", "fig2b"]) == 1
    assert cli.main(["region"]) == 1
    assert cli.main(["region", "--preset", "demo"]) == 1  # kind mismatch
    assert cli.main(["region", "--preset", "fig2b", "--seed", "-1"]) == 1
    capsys.readouterr()


def test_cli_infeasible_target_exits_two(tmp_path, capsys):
    # below the mmse floor of the two-state environment, so no class helps
    doc = _simulate_doc(tmp_path / "out", 0.45, horizon=1000)
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(doc))
    assert cli.main(["simulate", "--config", str(path)]) == 2
    assert "infeasible" in capsys.readouterr().err


def test_cli_simulate_deterministic(tmp_path):
    doc = _simulate_doc(tmp_path / "a", 0.8)
    path = tmp_path / "sim.json"
    path.write_text(json.dumps(doc))
    assert cli.main(["simulate", "--config", str(path)]) == 0
    assert cli.main(["simulate", "--config", str(path),
                     "--out", str(tmp_path / "b"), "--no-plot"]) == 0

    a, b = tmp_path / "a", tmp_path / "b"
    assert (a / "trace.png").exists()
    assert not (b / "trace.png").exists()
    assert (a / "trace.csv").read_bytes() == (b / "trace.csv").read_bytes()

    lines = (a / "trace.csv").read_text().splitlines()
    meta = [l for l in lines if l.startswith("#")]
    assert any(l.startswith("# config_sha256=") for l in meta)
    body = [l for l in lines if not l.startswith("#")]
    assert body[0] == ("slot,energy,queue_bits,q,h,d,ts,tt,"
                      "bits_in,bits_out,distortion")
    assert len(body) == 1 + 20_000

    summary = json.loads((a / "summary.json").read_text())
    assert summary["stability"]["verdict"] != "Unstable"
    assert summary["trace"]["mean_distortion"] <= 0.8 * 1.05


def test_cli_validate_single_preset(tmp_path, capsys):
    path = tmp_path / "check.json"
    path.write_text(json.dumps(
        {"kind": "validate", "validate": {"presets": ["demo"]}}))
    assert cli.main(["validate", "--config", str(path)]) == 0
    assert "ok demo" in capsys.readouterr().out

import json

import numpy as np
import pytest
import yaml
from hypothesis import given, settings, strategies as st

from bkuq.harness.cli import main
from bkuq.harness.config import (DEFAULTS, ConfigError, dump_config, load_config,
                                 parse_config_text)
from bkuq.harness.output import write_csv

SMALL = {"grid": {"resolution": [12, 8], "tol_grid": 1e-3},
         "experiment": {"gap_certify": {"Ks": [2, 3], "gammas": [0.0, 0.1, 0.25]}}}


@pytest.fixture
def small_cfg(tmp_path):
    p = tmp_path / "cfg.yaml"
    cfg = json.loads(json.dumps(SMALL))
    cfg["experiment"]["cache_dir"] = str(tmp_path / "cache")
    p.write_text(yaml.safe_dump(cfg))
    return p


def test_defaults_round_trip():
    cfg = load_config()
    assert parse_config_text(dump_config(cfg)) == cfg
    assert cfg == DEFAULTS


@settings(max_examples=25, deadline=None)
@given(beta=st.floats(1.6, 4.0), b1=st.floats(-0.9, 0.9), K=st.integers(1, 10),
       m=st.floats(1.6, 4.0), alpha=st.integers(0, 3))
def test_config_round_trip_property(beta, b1, K, m, alpha):
    over = {"grid": {"beta": beta}, "model": {"b1": b1, "alpha": alpha},
            "basis": {"K": K, "m": m},
            "experiment": {"decay": {"orders": [0]}}}
    cfg = load_config(None, over)
    assert parse_config_text(dump_config(cfg)) == cfg


def test_guards_rerun_at_parse_time():
    with pytest.raises(ConfigError, match="unknown config key 'grid.bogus'"):
        load_config(None, {"grid": {"bogus": 1}})
    with pytest.raises(ConfigError, match="beta must exceed 3/2"):
        load_config(None, {"grid": {"beta": 1.0}})
    with pytest.raises(ConfigError, match="m must exceed"):
        load_config(None, {"basis": {"m": 1.0}})
    with pytest.raises(ConfigError, match="not positive"):
        load_config(None, {"model": {"b1": 2.0}})
    with pytest.raises(ConfigError, match="ref_nodes"):
        load_config(None, {"experiment": {"gpc_converge": {"ref_nodes": 8}}})


def test_cli_invalid_beta(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("grid:\n  beta: 1.0\n")
    assert main(["spectrum", "--config", str(p), "--out", str(tmp_path / "o")]) == 2
    assert "beta must exceed 3/2" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_empty_csv_is_header_only(tmp_path):
    p = write_csv(tmp_path / "e.csv", ["a", "b"], [])
    assert p.read_text() == "a,b\n"


def test_csv_sorted_by_keys(tmp_path):
    p = write_csv(tmp_path / "s.csv", ["k", "v"], [(2, 0.5), (1, 0.25)])
    assert p.read_text().splitlines()[1:] == ["1,0.25", "2,0.5"]


def test_gap_certify_outputs_and_determinism(tmp_path, small_cfg):
    outs = [tmp_path / "a", tmp_path / "b"]
    for o in outs:
        assert main(["gap-certify", "--config", str(small_cfg), "--out", str(o),
                     "--threads", "1"]) == 0
    a, b = ((o / "gap_certificate.csv").read_bytes() for o in outs)
    assert a == b
    rows = a.decode().splitlines()
    assert rows[0] == "m,gamma,K,bound,rayleigh_check"
    assert any(",0.25," in r and "nan" in r for r in rows)       # rejected by the guard
    man = json.loads((outs[0] / "manifest.json").read_text())
    assert man["scenario"] == "gap-certify" and man["config"]["grid"]["resolution"] == [12, 8]
    assert man["version"].startswith("0.1.0")
    assert (outs[0] / "gap_certify.gp").exists()
    assert not [p for p in outs[0].iterdir() if p.name.startswith(".partial")]


def test_no_plots_flag(tmp_path, small_cfg):
    out = tmp_path / "np"
    assert main(["gap-certify", "--config", str(small_cfg), "--out", str(out), "--no-plots"]) == 0
    assert sorted(p.name for p in out.iterdir()) == ["gap_certificate.csv", "manifest.json"]


def test_failure_leaves_no_partial_output(tmp_path, small_cfg, monkeypatch, capsys):
    from bkuq.harness import scenarios

    def boom(cfg):
        raise FloatingPointError("synthetic failure")
    monkeypatch.setitem(scenarios.RUNNERS, "spectrum", boom)
    out = tmp_path / "f"
    assert main(["spectrum", "--config", str(small_cfg), "--out", str(out)]) == 2
    assert "scenario 'spectrum' failed: synthetic failure" in capsys.readouterr().err
    assert list(out.iterdir()) == []


def test_cache_commands(tmp_path, small_cfg, capsys):
    assert main(["cache", "build", "--config", str(small_cfg)]) == 0
    entries = sorted((tmp_path / "cache").glob("kernel_*.bin"))
    assert len(entries) == 3                                   # k = 0, 1, 2
    assert main(["cache", "verify", "--config", str(small_cfg)]) == 0
    assert "ok" in capsys.readouterr().out
    entries[0].write_bytes(entries[0].read_bytes()[:-64])
    assert main(["cache", "verify", "--config", str(small_cfg)]) == 1
    assert "length" in capsys.readouterr().err
    assert main(["cache", "purge", "--config", str(small_cfg)]) == 0
    assert not list((tmp_path / "cache").glob("kernel_*.bin"))


def test_cache_requires_directory(tmp_path, capsys):
    assert main(["cache", "build"]) == 2
    assert "cache_dir" in capsys.readouterr().err


def test_validate_scenario(tmp_path):
    out = tmp_path / "v"
    assert main(["validate", "--out", str(out)]) == 0
    lines = (out / "validate.csv").read_text().splitlines()
    assert lines[0] == "check,value,tolerance,passed"
    assert len(lines) == 14 and all(l.endswith(",1") for l in lines[1:])

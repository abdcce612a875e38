"""Declarative run configuration (YAML), with defaults and parse-time guards."""
from __future__ import annotations

import copy
from pathlib import Path

import yaml

from ..gpc_basis import make_basis, weight_matrix
from ..velocity_ops.collision import CollisionModel
from ..velocity_ops.grid import build_grid

SCENARIOS = ("spectrum", "decay", "gap-certify", "gpc-converge", "validate")


class ConfigError(ValueError):
    pass


DEFAULTS = {
    "grid": {"mode": "axisym2d", "xi_max": 6.0, "resolution": [40, 20], "beta": 2.0,
             "tol_grid": 1e-6},
    "model": {"family": "proportional", "b1": 0.3, "eps": 0.4, "c_z": 1.0, "alpha": 2},
    "basis": {"family": "legendre", "K": 6, "m": 2.0},
    "experiment": {
        "scenario": "spectrum",
        "output_dir": "out",
        "threads": None,
        "cache_dir": None,
        "spectrum": {"eta_min": 0.02, "eta_max": 0.3, "n_eta": 29,
                     "gap_delta": 0.3, "gap_eta_max": 10.0, "gap_samples": 100},
        "decay": {"resolution": [24, 12], "init": "macro", "orders": [0, 1],
                  "t_min": 0.5, "t_max": 400.0, "n_times": 60, "fit_window": [20.0, 300.0],
                  "z_nodes": 1},
        "gap_certify": {"m_values": [2.0], "gammas": [0.0, 0.1, 0.15], "Ks": [2, 4, 6, 8]},
        "gpc_converge": {"resolution": [16, 8], "Ks": [2, 3, 4, 5, 6, 7, 8],
                         "ref_nodes": 32, "times": [0.0, 1.0, 5.0, 20.0, 50.0],
                         "data": "analytic", "r_max": 4.0, "n_r": 40},
        "validate": {"resolution": [24, 12], "gamma_resolution": 10, "seed": 0},
    },
}


def _merge(base, over, path=""):
    out = copy.deepcopy(base)
    for k, v in (over or {}).items():
        if k not in base:
            raise ConfigError(f"unknown config key {path + k!r}")
        if isinstance(base[k], dict):
            if not isinstance(v, dict):
                raise ConfigError(f"config key {path + k!r} must be a mapping")
            out[k] = _merge(base[k], v, path + k + ".")
        else:
            out[k] = v
    return out


def validate(cfg):
    """Re-run the owning modules' guards; raises ConfigError with the message."""
    g, m, b = cfg["grid"], cfg["model"], cfg["basis"]
    try:
        build_grid(g["mode"], float(g["xi_max"]), tuple(g["resolution"]), float(g["beta"]),
                   tol_grid=float(g["tol_grid"]))
        CollisionModel(m["family"], float(m["b1"]), float(m["eps"]), float(m["c_z"]),
                       int(m["alpha"]))
        make_basis(b["family"], int(b["K"]))
        weight_matrix(int(b["K"]), float(b["m"]))
    except ValueError as e:
        raise ConfigError(str(e)) from None
    ex = cfg["experiment"]
    if ex["scenario"] not in SCENARIOS:
        raise ConfigError(f"unknown scenario {ex['scenario']!r}; expected one of {SCENARIOS}")
    d = ex["decay"]
    if d["init"] not in ("macro", "micro"):
        raise ConfigError("experiment.decay.init must be 'macro' or 'micro'")
    if any(int(o) < 0 or int(o) > int(m["alpha"]) for o in d["orders"]):
        raise ConfigError(f"decay orders must lie in 0..alpha={m['alpha']}")
    lo, hi = d["fit_window"]
    if not 0 <= lo < hi <= d["t_max"]:
        raise ConfigError("fit window must satisfy 0 <= start < end <= t_max")
    gc = ex["gpc_converge"]
    if gc["ref_nodes"] < 2 * max(gc["Ks"]):
        raise ConfigError("gpc_converge.ref_nodes must be at least 2 max(Ks)")
    if gc["data"] not in ("analytic", "c2", "constant"):
        raise ConfigError("gpc_converge.data must be analytic, c2 or constant")
    return cfg


def load_config(path=None, overrides=None):
    user = {}
    if path is not None:
        text = Path(path).read_text()
        user = yaml.safe_load(text) or {}
        if not isinstance(user, dict):
            raise ConfigError("config file must contain a mapping")
    cfg = _merge(DEFAULTS, user)
    if overrides:
        cfg = _merge(cfg, overrides)
    return validate(cfg)


def dump_config(cfg):
    return yaml.safe_dump(cfg, sort_keys=True, default_flow_style=False)


def parse_config_text(text):
    return validate(_merge(DEFAULTS, yaml.safe_load(text) or {}))


def make_grid(cfg, resolution=None):
    g = cfg["grid"]
    res = tuple(resolution or g["resolution"])
    tol = float(g["tol_grid"]) if resolution is None else max(float(g["tol_grid"]), 1e-3)
    return build_grid(g["mode"], float(g["xi_max"]), res, float(g["beta"]), tol_grid=tol)


def make_model(cfg, family=None):
    m = cfg["model"]
    return CollisionModel(family or m["family"], float(m["b1"]), float(m["eps"]),
                          float(m["c_z"]), int(m["alpha"]))

"""Experiment configuration: TOML parsing, validation, and builders.

One config file fully describes an experiment: the plant and observation
horizon under ``[system]``, estimator weights under ``[mhe]``, learning-loop
knobs under ``[bomhe]``, and the output directory under ``[output]``.
Unknown keys are rejected so typos fail loudly before any run starts.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .acquisition import AcquisitionConfig
from .errors import ConfigError
from .loop import BomheConfig
from .mhe import MheConfig
from .models import LinearModel, ParamTemplate, free_cell_template
from .systems import (
    HEAT_C,
    LEAK_A,
    HeatConstants,
    SystemSim,
    heat_system,
    jacobian_linearize,
    leak_system,
)

_SYSTEM_KEYS = {
    "leak": {"kind", "T", "x0", "q_w", "r_v"},
    "heat": {"kind", "T", "x0", "q_w", "r_v", "dt", "k1", "k2", "k3", "k_u", "t_env", "u"},
}
_MHE_KEYS = {"N", "q", "r", "p0", "x0_guess"}
_BOMHE_KEYS = {
    "max_iter", "n_init", "bounds", "xi", "n_candidates", "n_refine",
    "refine_top_k", "gp_refit_period", "gp_restarts",
}
_TOP_KEYS = {"seed", "monitored", "system", "mhe", "bomhe", "output"}

_DIMS = {"leak": (5, 0, 5), "heat": (3, 1, 2)}


@dataclass(frozen=True)
class ExperimentConfig:
    """A fully resolved experiment description (defaults filled in)."""

    seed: int
    monitored: tuple[int, ...]  # 1-based state indices, as written in the file
    system: dict
    mhe: dict
    bomhe: dict | None
    output_dir: str
    source: str = ""

    @property
    def monitored_indices(self) -> tuple[int, ...]:
        """Zero-based monitored components."""
        return tuple(i - 1 for i in self.monitored)

    def resolved(self) -> dict:
        """The config echo embedded in emitted metadata."""
        out = {
            "seed": self.seed,
            "monitored": list(self.monitored),
            "system": dict(self.system),
            "mhe": dict(self.mhe),
            "output": {"dir": self.output_dir},
        }
        if self.bomhe is not None:
            out["bomhe"] = dict(self.bomhe)
        return out


def _require(table: dict, key: str, where: str):
    if key not in table:
        raise ConfigError("required field is missing", field=f"{where}.{key}")
    return table[key]


def _reject_unknown(table: dict, allowed: set, where: str):
    for key in table:
        if key not in allowed:
            raise ConfigError("unknown key", field=f"{where}.{key}")


def _float_list(value, length: int, where: str) -> list[float]:
    if not isinstance(value, (list, tuple)) or len(value) != length:
        raise ConfigError(f"expected a list of {length} numbers", field=where)
    try:
        return [float(v) for v in value]
    except (TypeError, ValueError):
        raise ConfigError("entries must be numbers", field=where)


def _positive_int(value, where: str) -> int:
    if not isinstance(value, int) or isinstance(value, bool) or value < 1:
        raise ConfigError("expected a positive integer", field=where)
    return value


def load_config(path) -> ExperimentConfig:
    """Parse and validate an experiment file; defaults are filled here."""
    path = Path(path)
    try:
        with open(path, "rb") as fh:
            raw = tomllib.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML syntax error in {path}: {exc}")
    return parse_config(raw, source=str(path))


def parse_config(raw: dict, source: str = "") -> ExperimentConfig:
    _reject_unknown(raw, _TOP_KEYS, "config")
    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        raise ConfigError("expected a nonnegative integer", field="config.seed")

    system_raw = _require(raw, "system", "config")
    kind = _require(system_raw, "kind", "system")
    if kind not in _DIMS:
        raise ConfigError(f"unknown system kind {kind!r}; expected leak or heat",
                          field="system.kind")
    _reject_unknown(system_raw, _SYSTEM_KEYS[kind], "system")
    n_x, n_u, n_y = _DIMS[kind]

    system = {"kind": kind, "T": _positive_int(_require(system_raw, "T", "system"), "system.T")}
    defaults = _system_defaults(kind)
    for key, default in defaults.items():
        value = system_raw.get(key, default)
        if key in ("x0", "q_w", "r_v"):
            length = {"x0": n_x, "q_w": n_x, "r_v": n_y}[key]
            value = _float_list(value, length, f"system.{key}")
        else:
            value = float(value)
        system[key] = value
    if kind == "heat" and system["dt"] <= 0:
        raise ConfigError("dt must be positive", field="system.dt")

    mhe_raw = _require(raw, "mhe", "config")
    _reject_unknown(mhe_raw, _MHE_KEYS, "mhe")
    mhe = {
        "N": _positive_int(_require(mhe_raw, "N", "mhe"), "mhe.N"),
        "q": _float_list(_require(mhe_raw, "q", "mhe"), n_x, "mhe.q"),
        "r": _float_list(_require(mhe_raw, "r", "mhe"), n_y, "mhe.r"),
        "p0": _float_list(mhe_raw.get("p0", [1.0] * n_x), n_x, "mhe.p0"),
        "x0_guess": _float_list(mhe_raw.get("x0_guess", [0.0] * n_x), n_x, "mhe.x0_guess"),
    }
    if mhe["N"] >= system["T"]:
        raise ConfigError("horizon N must be smaller than the observation period T",
                          field="mhe.N")
    for key in ("q", "r", "p0"):
        if any(v <= 0 for v in mhe[key]):
            raise ConfigError("diagonal entries must be positive", field=f"mhe.{key}")

    bomhe = None
    if "bomhe" in raw:
        bomhe_raw = raw["bomhe"]
        _reject_unknown(bomhe_raw, _BOMHE_KEYS, "bomhe")
        d = 9  # both benchmark templates learn the full set of state-matrix cells
        bounds = _parse_bounds(bomhe_raw.get("bounds", None), d, "bomhe.bounds")
        bomhe = {
            "max_iter": _positive_int(_require(bomhe_raw, "max_iter", "bomhe"), "bomhe.max_iter"),
            "n_init": _positive_int(bomhe_raw.get("n_init", 5), "bomhe.n_init"),
            "bounds": bounds,
            "xi": float(bomhe_raw.get("xi", 0.01)),
            "n_candidates": _positive_int(bomhe_raw.get("n_candidates", 2048), "bomhe.n_candidates"),
            "n_refine": int(bomhe_raw.get("n_refine", 3)),
            "refine_top_k": _positive_int(bomhe_raw.get("refine_top_k", 5), "bomhe.refine_top_k"),
            "gp_refit_period": _positive_int(bomhe_raw.get("gp_refit_period", 10), "bomhe.gp_refit_period"),
            "gp_restarts": _positive_int(bomhe_raw.get("gp_restarts", 4), "bomhe.gp_restarts"),
        }
        if bomhe["xi"] < 0 or bomhe["n_refine"] < 0:
            raise ConfigError("xi and n_refine must be nonnegative", field="bomhe")

    monitored = raw.get("monitored", list(range(1, n_x + 1)))
    if not isinstance(monitored, list) or not monitored:
        raise ConfigError("expected a nonempty list of state indices", field="config.monitored")
    for idx in monitored:
        if not isinstance(idx, int) or isinstance(idx, bool) or not (1 <= idx <= n_x):
            raise ConfigError(f"state index {idx!r} outside 1..{n_x}", field="config.monitored")

    output_raw = raw.get("output", {})
    _reject_unknown(output_raw, {"dir"}, "output")
    default_dir = f"runs/{Path(source).stem}" if source else "runs/experiment"
    output_dir = str(output_raw.get("dir", default_dir))

    return ExperimentConfig(
        seed=seed,
        monitored=tuple(monitored),
        system=system,
        mhe=mhe,
        bomhe=bomhe,
        output_dir=output_dir,
        source=source,
    )


def _system_defaults(kind: str) -> dict:
    if kind == "leak":
        return {
            "x0": [0.0] * 5,
            "q_w": [0.0, 0.0, 5.0, 0.0, 15.0],
            "r_v": [8.0, 8.0, 8.0, 8.0, 4.0],
        }
    return {
        "x0": [50.0, 0.0, 100.0],
        "q_w": [1.0, 1.0, 1.0],
        "r_v": [5.0, 5.0],
        "dt": 0.1,
        "k1": 0.1,
        "k2": 0.05,
        "k3": 0.01,
        "k_u": 1.0,
        "t_env": 25.0,
        "u": 0.0,
    }


def _parse_bounds(value, d: int, where: str) -> list[list[float]]:
    if value is None:
        raise ConfigError("required field is missing", field=where)
    if not isinstance(value, list) or not value:
        raise ConfigError("expected [lo, hi] or a list of per-parameter pairs", field=where)
    if all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in value):
        if len(value) != 2 or value[0] > value[1]:
            raise ConfigError("scalar form must be [lo, hi] with lo <= hi", field=where)
        return [[float(value[0]), float(value[1])]] * d
    if len(value) != d:
        raise ConfigError(f"expected {d} per-parameter pairs", field=where)
    out = []
    for i, pair in enumerate(value):
        pair = _float_list(pair, 2, f"{where}[{i}]")
        if pair[0] > pair[1]:
            raise ConfigError("lo > hi", field=f"{where}[{i}]")
        out.append(pair)
    return out


# Builders: turn the validated dictionaries into runtime objects.

def build_system(cfg: ExperimentConfig) -> SystemSim:
    s = cfg.system
    if s["kind"] == "leak":
        return leak_system(q_w=s["q_w"], r_v=s["r_v"], x0=s["x0"])
    constants = HeatConstants(
        k1=s["k1"], k2=s["k2"], k3=s["k3"], k_u=s["k_u"], t_env=s["t_env"], u=s["u"]
    )
    return heat_system(constants=constants, q_w=s["q_w"], r_v=s["r_v"],
                       x0=s["x0"], dt=s["dt"])


def build_mhe_config(cfg: ExperimentConfig) -> MheConfig:
    m = cfg.mhe
    return MheConfig(
        N=m["N"],
        Q=np.diag(m["q"]),
        R=np.diag(m["r"]),
        P0=np.diag(m["p0"]),
        x0_guess=np.asarray(m["x0_guess"]),
    )


def build_template(cfg: ExperimentConfig) -> ParamTemplate:
    """The learnable parameterization for each benchmark: the state-matrix
    cells are free in row-major order, the observation matrix is fixed."""
    kind = cfg.system["kind"]
    if kind == "leak":
        free = [("A", r, c) for r in range(5) for c in range(5) if LEAK_A[r, c] != 0.0]
        fixed = [("C", i, i, 1.0) for i in range(5)]
        return free_cell_template(5, 0, 5, free, fixed)
    free = [("A", r, c) for r in range(3) for c in range(3)]
    fixed = [("C", i, j, HEAT_C[i, j]) for i in range(2) for j in range(3) if HEAT_C[i, j] != 0.0]
    return free_cell_template(3, 1, 2, free, fixed)


def build_bomhe_config(cfg: ExperimentConfig) -> BomheConfig:
    if cfg.bomhe is None:
        raise ConfigError("required section is missing", field="config.bomhe")
    b = cfg.bomhe
    return BomheConfig(
        max_iter=b["max_iter"],
        bounds=np.asarray(b["bounds"]),
        n_init=b["n_init"],
        seed=cfg.seed,
        gp_refit_period=b["gp_refit_period"],
        gp_restarts=b["gp_restarts"],
        acquisition=AcquisitionConfig(
            xi=b["xi"],
            n_candidates=b["n_candidates"],
            n_refine=b["n_refine"],
            refine_top_k=b["refine_top_k"],
        ),
    )


def true_model(cfg: ExperimentConfig, sys: SystemSim) -> LinearModel:
    """The reference model for the baseline estimator: the actual matrices
    for the leak plant, the analytic linearization for the heat plant."""
    if sys.kind == "leak":
        return sys.linear
    return jacobian_linearize(sys, np.asarray(cfg.mhe["x0_guess"]))

"""Run configuration: flat dotted keys over the built-in presets.

Configs are TOML (``grid.X_g = 0.5``) or JSON; a ``summary.json`` written
by the CLI is itself a valid config because it carries the resolved
settings under ``"config"``.
"""

from __future__ import annotations

import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path

from .energy import PiGains
from .errors import ConfigError
from .models import FaultScenario, GflParams, GfmParams, preset, table_a1_scenario
from .roa import GridSpec
from .sim import BISECTION_TOL, DEFAULT_STEP

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

_COMMON = {
    "model": str,
    "grid.R_g": float, "grid.X_g": float, "grid.U_g": float, "grid.omega_b": float,
    "scenario.sag_depth": float, "scenario.sag_mode": str, "scenario.t_start": float,
    "scenario.t_clear": float, "scenario.t_end": float,
    "roa.n_delta": int, "roa.n_axis2": int, "roa.delta_min": float, "roa.delta_max": float,
    "roa.axis2_min": float, "roa.axis2_max": float, "roa.oracle_step": float,
    "sim.step": float, "sim.limiter": bool, "sim.record_every": int, "sim.bisection_tol": float,
    "output.dir": str,
}
_MODEL_KEYS = {
    "gfl": {"gfl.I_d": float, "gfl.I_q": float, "gfl.k_p": float, "gfl.k_i": float,
            "gfl.omega_limit": float, "gfl.feedthrough": bool},
    "gfm": {"gfm.E": float, "gfm.P_in": float, "gfm.k_p": float, "gfm.k_i": float,
            "gfm.C_dc": float, "gfm.V_dc_ref": float, "gfm.dc_report_factor": float,
            "gfm.omega_limit": float},
}
_NULLABLE = {"gfl.omega_limit", "gfm.omega_limit", "roa.oracle_step", "sim.limiter",
             "roa.delta_min", "roa.delta_max", "roa.axis2_min", "roa.axis2_max"}


@dataclass
class RunConfig:
    kind: str
    params: GflParams | GfmParams
    scenario: FaultScenario
    step: float = DEFAULT_STEP
    limiter: bool | None = None
    record_every: int = 1
    bisection_tol: float = BISECTION_TOL
    n_delta: int = 201
    n_axis2: int = 201
    grid_bounds: dict | None = None
    oracle_step: float | None = None
    out_dir: str = "out"

    def grid(self) -> GridSpec:
        from .roa import default_grid
        b = dict(self.grid_bounds or {})
        if len(b) < 4:
            g = default_grid(self.params, n=self.n_delta, scenario=self.scenario, step=self.step)
            for k in ("delta_min", "delta_max", "axis2_min", "axis2_max"):
                b.setdefault(k, getattr(g, k))
        return GridSpec(b["delta_min"], b["delta_max"], self.n_delta,
                        b["axis2_min"], b["axis2_max"], self.n_axis2)

    def limiter_for(self, default: bool) -> bool:
        return default if self.limiter is None else self.limiter

    def to_flat(self, grid: GridSpec | None = None, limiter: bool | None = None) -> dict:
        """Fully resolved settings as flat dotted keys."""
        p, g, s = self.params, self.params.grid, self.scenario
        flat = {"model": self.kind,
                "grid.R_g": g.R_g, "grid.X_g": g.X_g, "grid.U_g": g.U_g,
                "grid.omega_b": g.omega_b,
                "scenario.sag_depth": s.sag_depth, "scenario.sag_mode": s.sag_mode,
                "scenario.t_start": s.t_start, "scenario.t_clear": s.t_clear,
                "scenario.t_end": s.t_end,
                "sim.step": self.step, "sim.record_every": self.record_every,
                "sim.bisection_tol": self.bisection_tol,
                "sim.limiter": self.limiter if limiter is None else limiter,
                "roa.n_delta": self.n_delta, "roa.n_axis2": self.n_axis2,
                "roa.oracle_step": self.oracle_step,
                "output.dir": self.out_dir}
        if self.kind == "gfl":
            flat.update({"gfl.I_d": p.I_d, "gfl.I_q": p.I_q, "gfl.k_p": p.gains.k_p,
                         "gfl.k_i": p.gains.k_i, "gfl.omega_limit": p.omega_limit,
                         "gfl.feedthrough": p.feedthrough})
        else:
            flat.update({"gfm.E": p.E, "gfm.P_in": p.P_in, "gfm.k_p": p.gains.k_p,
                         "gfm.k_i": p.gains.k_i, "gfm.C_dc": p.C_dc,
                         "gfm.V_dc_ref": p.V_dc_ref,
                         "gfm.dc_report_factor": p.dc_report_factor,
                         "gfm.omega_limit": p.omega_limit})
        bounds = grid.to_dict() if grid is not None else (self.grid_bounds or {})
        for k in ("delta_min", "delta_max", "axis2_min", "axis2_max"):
            if k in bounds:
                flat[f"roa.{k}"] = bounds[k]
        return flat


def flatten(d: dict, prefix: str = "") -> dict:
    out = {}
    for k, v in d.items():
        key = f"{prefix}{k}"
        if isinstance(v, dict):
            out.update(flatten(v, key + "."))
        else:
            out[key] = v
    return out


def read_config_file(path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        if path.suffix == ".json":
            data = json.loads(text)
            data = data.get("config", data)
        else:
            data = tomllib.loads(text)
    except (ValueError, tomllib.TOMLDecodeError) as exc:
        raise ConfigError(f"cannot parse config {path}: {exc}") from None
    return flatten(data)


def _coerce(key, value, typ):
    if value is None:
        if key in _NULLABLE:
            return None
        raise ConfigError(f"{key} may not be null")
    if typ is bool:
        if isinstance(value, bool):
            return value
        if isinstance(value, str) and value.lower() in ("on", "off", "true", "false"):
            return value.lower() in ("on", "true")
        raise ConfigError(f"{key} must be a boolean, got {value!r}")
    if typ is int:
        if isinstance(value, bool) or not float(value).is_integer():
            raise ConfigError(f"{key} must be an integer, got {value!r}")
        return int(value)
    if typ is float:
        if isinstance(value, bool):
            raise ConfigError(f"{key} must be a number, got {value!r}")
        try:
            return float(value)
        except (TypeError, ValueError):
            raise ConfigError(f"{key} must be a number, got {value!r}") from None
    if not isinstance(value, str):
        raise ConfigError(f"{key} must be a string, got {value!r}")
    return value


def build_config(raw: dict) -> RunConfig:
    """Validate flat settings and overlay them on the presets."""
    raw = flatten(raw)
    kind = raw.get("model", "gfl")
    if kind not in _MODEL_KEYS:
        raise ConfigError(f"model must be 'gfl' or 'gfm', got {kind!r}")
    allowed = {**_COMMON, **_MODEL_KEYS[kind]}
    unknown = sorted(set(raw) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown config keys for model {kind!r}: {', '.join(unknown)}")
    v = {k: _coerce(k, val, allowed[k]) for k, val in raw.items()}

    base = preset(kind)
    gkw = {k.split(".", 1)[1]: v[k] for k in v if k.startswith("grid.")}
    grid = replace(base.grid, **gkw)
    mkw = {k.split(".", 1)[1]: v[k] for k in v if k.startswith(kind + ".")}
    gains = PiGains(mkw.pop("k_p", base.gains.k_p), mkw.pop("k_i", base.gains.k_i))
    params = replace(base, grid=grid, gains=gains, **mkw)

    s0 = table_a1_scenario()
    skw = {k.split(".", 1)[1]: v[k] for k in v if k.startswith("scenario.")}
    scenario = replace(s0, **skw)

    bounds = {k.split(".", 1)[1]: v[k] for k in v
              if k.startswith("roa.") and k.split(".", 1)[1] in
              ("delta_min", "delta_max", "axis2_min", "axis2_max") and v[k] is not None}
    cfg = RunConfig(kind=kind, params=params, scenario=scenario,
                    step=v.get("sim.step", DEFAULT_STEP),
                    limiter=v.get("sim.limiter"),
                    record_every=v.get("sim.record_every", 1),
                    bisection_tol=v.get("sim.bisection_tol", BISECTION_TOL),
                    n_delta=v.get("roa.n_delta", 201), n_axis2=v.get("roa.n_axis2", 201),
                    grid_bounds=bounds or None, oracle_step=v.get("roa.oracle_step"),
                    out_dir=v.get("output.dir", "out"))
    if not cfg.step > 0 or cfg.record_every < 1 or not cfg.bisection_tol > 0:
        raise ConfigError("sim.step and sim.bisection_tol must be positive, sim.record_every >= 1")
    return cfg


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    raw = read_config_file(path) if path else {}
    raw.update(overrides or {})
    return build_config(raw)

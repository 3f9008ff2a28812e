"""Command-line entry point.

    ibrlyap equilibria|roa|simulate|cct|compare [--config PATH] [--model gfl|gfm]
            [--oracle] [--limiter on|off] [--step SECONDS] [--out DIR]

Exit codes: 0 success, 2 configuration error, 3 numeric failure,
4 stability verdict requested but indeterminate.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

from . import roa, sim
from .config import RunConfig, load_config
from .equilibrium import Stability, stability_of
from .errors import ConfigError, EquilibriumLost, NumericError
from .models import apply_fault

log = logging.getLogger("ibrlyap")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_INDETERMINATE = 0, 2, 3, 4


def _finite_or_none(x):
    return None if x is None or not math.isfinite(x) else x


def _out(cfg: RunConfig) -> Path:
    path = Path(cfg.out_dir)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {path}: {exc}") from None
    return path


def cmd_equilibria(cfg: RunConfig, args) -> int:
    result = {}
    for phase in ("pre", "during", "post"):
        p = apply_fault(cfg.params if phase != "post" else
                        apply_fault(cfg.params, cfg.scenario, "during"), cfg.scenario, phase)
        eq = p.equilibria()
        entry = {"delta_sep": _finite_or_none(eq.delta_sep),
                 "delta_uep": _finite_or_none(eq.delta_uep), "exists": eq.exists}
        if eq.exists:
            entry["sep_stability"] = stability_of(eq.delta_sep, p).value
            entry["uep_stability"] = stability_of(eq.delta_uep, p).value
        result[phase] = entry
    summary = {"equilibria": result, "config": cfg.to_flat()}
    roa.write_json(summary, _out(cfg) / "equilibria.json")
    print(json.dumps(result, indent=2))
    return EXIT_OK


def _roa_bundle(cfg: RunConfig, args, out: Path, with_oracle: bool) -> dict:
    p = cfg.params
    eq = p.equilibria()
    if not eq.exists:
        raise EquilibriumLost("post-fault equilibrium does not exist")
    grid = cfg.grid()
    est = roa.level_set(p, grid=grid)
    roa.write_contour_csv(est, out / "contour.csv")
    summary = {"w_cri": est.w_cri, "delta_sep": eq.delta_sep, "delta_uep": eq.delta_uep,
               "axis2": est.axis2_name, "inside_points": int(est.inside.sum())}
    extra = {}
    classical = None
    if p.AXIS2 == "omega":
        classical = roa.classical_level_set_gfl(p, grid)
        roa.write_contour_csv(classical, out / "classical_contour.csv")
        extra["inside_classical"] = classical.inside.astype(int)
        summary["classical"] = {"w_cri": classical.w_cri,
                                "inside_points": int(classical.inside.sum()),
                                "mask_difference": float((classical.inside != est.inside).mean())}
    oracle = None
    if with_oracle:
        limiter = cfg.limiter_for(False)
        oracle = roa.roa_oracle(p, grid, step=cfg.oracle_step, t_end=cfg.scenario.t_end,
                                limiter=limiter)
        rep = roa.containment_report(est, oracle)
        summary.update(rep.summary())
        summary["oracle_indeterminate"] = int(oracle.indeterminate.sum())
        if classical is not None:
            summary["classical"].update(roa.containment_report(classical, oracle).summary())
    roa.write_mask_csv(est, out / "mask.csv", oracle, extra)
    summary["config"] = cfg.to_flat(grid=grid, limiter=cfg.limiter_for(False))
    return summary


def cmd_roa(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    summary = _roa_bundle(cfg, args, out, args.oracle)
    roa.write_json(summary, out / "summary.json")
    print(json.dumps({k: v for k, v in summary.items() if k != "config"}, indent=2))
    return EXIT_OK


def cmd_simulate(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    limiter = cfg.limiter_for(True)
    traj = sim.simulate_fault(cfg.params, cfg.scenario, cfg.step, limiter, cfg.record_every)
    verdict = sim.classify_stability(traj)
    traj.to_csv(out / "trajectory.csv")
    post = traj.t >= cfg.scenario.t_clear
    summary = {"verdict": verdict.value, "diverged": traj.diverged,
               "fault_duration": cfg.scenario.duration,
               "w_at_clearing": float(traj.W[post][0]) if post.any() else None,
               "w_cri": sim.critical_energy(apply_fault(
                   apply_fault(cfg.params, cfg.scenario, "during"), cfg.scenario, "post")),
               "config": cfg.to_flat(limiter=limiter)}
    roa.write_json(summary, out / "summary.json")
    print(json.dumps({k: v for k, v in summary.items() if k != "config"}, indent=2))
    if verdict is Stability.INDETERMINATE:
        log.error("verdict indeterminate within t_end=%g s; extend scenario.t_end",
                  cfg.scenario.t_end)
        return EXIT_INDETERMINATE
    return EXIT_OK


def _cct(cfg: RunConfig) -> tuple[dict, bool]:
    limiter = cfg.limiter_for(True)
    res = sim.critical_clearing(cfg.params, cfg.scenario, cfg.step, limiter, cfg.bisection_tol)
    return ({"cct_energy": res.cct_energy, "cct_sim": res.cct_sim, "w_cri": res.w_cri,
             "conservative": res.conservative, "limiter": limiter}, res.conservative)


def cmd_cct(cfg: RunConfig, args) -> int:
    result, ok = _cct(cfg)
    out = _out(cfg)
    roa.write_json({**result, "config": cfg.to_flat(limiter=result["limiter"])}, out / "cct.json")
    print(json.dumps(result, indent=2))
    if not ok:
        log.error("energy-criterion CCT exceeds the simulated CCT")
        return EXIT_NUMERIC
    return EXIT_OK


def cmd_compare(cfg: RunConfig, args) -> int:
    out = _out(cfg)
    summary = _roa_bundle(cfg, args, out, with_oracle=True)
    cct, ok = _cct(cfg)
    summary["cct"] = cct
    roa.write_json(summary, out / "compare.json")
    print(json.dumps({k: v for k, v in summary.items() if k != "config"}, indent=2))
    return EXIT_OK if ok else EXIT_NUMERIC


COMMANDS = {"equilibria": cmd_equilibria, "roa": cmd_roa, "simulate": cmd_simulate,
            "cct": cmd_cct, "compare": cmd_compare}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="TOML or JSON run configuration")
    common.add_argument("--model", choices=("gfl", "gfm"), help="preset model (overrides config)")
    common.add_argument("--oracle", action="store_true", help="also run the simulation oracle")
    common.add_argument("--limiter", choices=("on", "off"), help="PLL frequency limiter")
    common.add_argument("--step", type=float, metavar="SECONDS", help="RK4 step")
    common.add_argument("--out", metavar="DIR", help="output directory")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="ibrlyap", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common])
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    overrides = {}
    if args.model:
        overrides["model"] = args.model
    if args.limiter:
        overrides["sim.limiter"] = args.limiter == "on"
    if args.step is not None:
        overrides["sim.step"] = args.step
    if args.out:
        overrides["output.dir"] = args.out
    try:
        cfg = load_config(args.config, overrides)
        return COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    except (NumericError, EquilibriumLost) as exc:
        log.error("%s", exc)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

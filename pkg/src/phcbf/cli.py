"""Command-line front end.

Subcommands:
    run <preset-or-config>   simulate a scenario, write CSV/SVG/audit files
    list                     show the preset registry
    audit <csv>              re-audit a trajectory CSV

Exit codes: 0 success, 1 audit failure, 2 configuration error.  The output
directory can be forced with the PHCBF_OUT environment variable.
"""
from __future__ import annotations

import argparse
import dataclasses
import sys
from pathlib import Path

from .io import read_trajectory_csv
from .scenarios import (ConfigError, ScenarioConfig, list_presets, load_config,
                        preset_config, run_scenario)
from .simulate import SimConfig, audit


def _parse_gammas(values: list[str]) -> tuple[float, ...]:
    out: list[float] = []
    for v in values:
        out.extend(float(tok) for tok in v.split(",") if tok)
    return tuple(out)


def _resolve_config(target: str, args: argparse.Namespace) -> ScenarioConfig:
    path = Path(target)
    if path.suffix in (".yaml", ".yml") or path.exists():
        cfg = load_config(path)
    else:
        cfg = preset_config(target)
    sim_kwargs = {}
    if args.dt is not None:
        sim_kwargs["dt"] = args.dt
    if args.t_end is not None:
        sim_kwargs["t_end"] = args.t_end
    if sim_kwargs:
        cfg = dataclasses.replace(cfg, sim=dataclasses.replace(cfg.sim, **sim_kwargs))
    if args.gamma:
        gammas = _parse_gammas(args.gamma)
        cfg = dataclasses.replace(cfg, barrier=dataclasses.replace(cfg.barrier, gammas=gammas))
    return cfg


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="phcbf",
        description="Energy-aware CBF safety filters on port-Hamiltonian systems")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a preset or a YAML scenario config")
    p_run.add_argument("target", help="preset name or path to a config file")
    p_run.add_argument("--dt", type=float, default=None, help="integration step [s]")
    p_run.add_argument("--t-end", type=float, default=None, help="simulation horizon [s]")
    p_run.add_argument("--gamma", action="append", default=None,
                       help="class-K gain(s); repeatable or comma separated")
    p_run.add_argument("--out", type=str, default=None, help="output directory")
    p_run.add_argument("--seed", type=int, default=0,
                       help="seed for the randomized structure-validation sampling "
                            "(scenario dynamics are deterministic)")

    sub.add_parser("list", help="list available presets")

    p_audit = sub.add_parser("audit", help="audit a trajectory CSV")
    p_audit.add_argument("csv", help="path to a trajectory CSV")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)

    if args.command == "list":
        for name, desc in list_presets():
            print(f"{name:12s} {desc}")
        return 0

    if args.command == "audit":
        try:
            traj = read_trajectory_csv(args.csv)
        except (OSError, ValueError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        rep = audit(traj)
        for key, value in dataclasses.asdict(rep).items():
            print(f"{key}: {value}")
        print(f"passed: {rep.passed}")
        return 0 if rep.passed else 1

    try:
        cfg = _resolve_config(args.target, args)
        result = run_scenario(cfg, out_dir=args.out, seed=args.seed)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    for gamma, rep in sorted(result.audits.items()):
        status = "ok" if rep.passed else "FAIL"
        print(f"gamma={gamma:g}: audit {status} "
              f"(balance residual {rep.max_balance_residual:.3e} W, "
              f"tol {rep.balance_tol:.3e} W)")
    print(f"wrote {len(result.files)} files under {result.out_dir}")
    return 0 if result.passed else 1


if __name__ == "__main__":
    raise SystemExit(main())

"""Command-line entry points: run, sweep-eps, sweep-n, validate."""

from __future__ import annotations

import argparse
import sys

from .backend import backend_name
from .errors import BlowupError, ConfigError
from .harness import run_scenario, sweep_eps, sweep_n, validate_invariants
from .scenario import ScenarioConfig, build_scenario, parse_config


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fhnscale",
        description=(
            "Multiscale FitzHugh-Nagumo suite: particle solver for the neuron "
            "phase-space density, the limiting nonlocal reaction-diffusion "
            "system, and convergence sweeps between the scales."
        ),
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name, info in (
        ("run", "run one scenario at the configured eps and write diagnostics"),
        ("sweep-eps", "run the interaction-strength sweep and fit slopes"),
        ("sweep-n", "run the network-size sweep against the kinetic reference"),
        ("validate", "run the invariant suite only"),
    ):
        cmd = sub.add_parser(name, help=info)
        cmd.add_argument("--config", help="JSON scenario file (defaults apply when omitted)")
        cmd.add_argument("--out-dir", help="output directory (overrides the config)")
        cmd.add_argument("--seed", type=int, help="seed override")
        cmd.add_argument("--threads", type=int, help="sweep task-pool size override")
    return parser


def _load_config(args) -> ScenarioConfig:
    cfg = parse_config(args.config) if args.config else ScenarioConfig()
    if args.out_dir is not None:
        cfg.out_dir = args.out_dir
    if args.seed is not None:
        cfg.seed = int(args.seed)
    if args.threads is not None:
        if args.threads < 1:
            raise ConfigError(["threads: must be at least 1"])
        cfg.threads = int(args.threads)
    return cfg


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        cfg = _load_config(args)
        scenario = build_scenario(cfg)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1

    try:
        if args.command == "run":
            result = run_scenario(scenario, out_dir=cfg.out_dir)
            for name, monitor in result.monitors.items():
                status = "PASS" if monitor["passed"] else "FAIL"
                print(f"{status} {name}: {monitor['detail']}")
            print(f"outputs written to {cfg.out_dir} (backend: {backend_name()})")
            return 0 if result.all_monitors_passed else 2

        if args.command == "sweep-eps":
            result = sweep_eps(scenario, out_dir=cfg.out_dir)
            for key, fit in result.slopes.items():
                if fit is not None:
                    print(f"{key}: slope {fit.slope:.4f} (rms residual {fit.residual:.2e})")
            ok = all(r.all_monitors_passed for r in result.runs)
            print(f"sweep outputs written to {cfg.out_dir}")
            return 0 if ok and not result.aborted else 2

        if args.command == "sweep-n":
            result = sweep_n(scenario, out_dir=cfg.out_dir)
            fit = result.slopes.get("mean_distance")
            if fit is not None:
                print(f"mean_distance: slope {fit.slope:.4f} (rms residual {fit.residual:.2e})")
            else:
                print("fewer than 3 network sizes; no slope fitted")
            print(f"sweep outputs written to {cfg.out_dir}")
            return 0

        checks = validate_invariants(scenario)
        failed = 0
        for name, ok, detail in checks:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
            failed += 0 if ok else 1
        return 0 if failed == 0 else 2
    except (BlowupError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())

"""``mimo-ura`` command line: run, sweep, design, selftest and serve."""

from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from mimo_ura._capacity import DesignPoint, design_report, format_report
from mimo_ura._config import ConfigError, SystemConfig, load_config, reference_config, small_config
from mimo_ura._results import dump_activity_csv, sidecar_path, write_sidecar, write_sweep_csv
from mimo_ura._selftest import run_selftest
from mimo_ura._settings import get_log_level
from mimo_ura._simulation import SweepAxis, SweepResult, monte_carlo_sweep, run_point, run_trial

logger = logging.getLogger(__name__)

_PRESETS = {"small": small_config, "reference": reference_config}


def _common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", type=Path, help="JSON or TOML config file")
    parser.add_argument("--preset", choices=sorted(_PRESETS), default="small", help="used when --config is absent")
    parser.add_argument("--log-level", default=None, help="logging level (default: $MIMO_URA_LOG_LEVEL or WARNING)")
    parser.add_argument("--format", choices=("json", "text"), default="json")


def _simulation_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--trials", type=int, default=20)
    parser.add_argument("--seed", type=int, default=None, help="master seed (default: config trial_seed)")
    parser.add_argument("--out", type=Path, default=None, help="CSV output; a JSON sidecar is written next to it")
    parser.add_argument("--threads", type=int, default=1, help="worker processes")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mimo-ura", description="Massive-MIMO unsourced random access simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="Monte-Carlo trials at one operating point")
    _common(run)
    _simulation_flags(run)
    run.add_argument("--dump-activity", type=Path, default=None, help="CSV of the first trial's activity estimates")

    sweep = sub.add_parser("sweep", help="PUPE along one parameter axis")
    _common(sweep)
    _simulation_flags(sweep)
    sweep.add_argument("--axis", choices=[a.value for a in SweepAxis], required=True)
    sweep.add_argument("--values", type=float, nargs="+", required=True)

    design = sub.add_parser("design", help="closed-form design report")
    _common(design)
    design.add_argument("--active-users", type=int, default=None)
    design.add_argument("--ebn0-db", type=float, default=None)
    design.add_argument("--c", type=float, default=1.0, help="inner-decoder constant")
    design.add_argument("--kappa", type=float, default=1.0, help="NNLS error-bound constant")

    selftest = sub.add_parser("selftest", help="fast invariant checks")
    selftest.add_argument("--seed", type=int, default=0)
    selftest.add_argument("--log-level", default=None)

    serve = sub.add_parser("serve", help="HTTP service")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8080)
    serve.add_argument("--log-level", default=None)
    return parser


def _load(args: argparse.Namespace) -> SystemConfig:
    if args.config is not None:
        return load_config(args.config)
    return _PRESETS[args.preset]()


def _emit(data: dict[str, Any], fmt: str) -> None:
    print(json.dumps(data, indent=2) if fmt == "json" else format_report(data))


def _write_outputs(out: Path | None, cfg: SystemConfig, sweep: SweepResult) -> None:
    if out is None:
        return
    write_sweep_csv(out, sweep)
    write_sidecar(sidecar_path(out), cfg, {"sweep": sweep.to_dict()})
    logger.info("wrote %s and %s", out, sidecar_path(out))


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args)
    point, results = run_point(cfg, args.trials, args.seed, args.threads, axis_value=cfg.active_users)
    master = cfg.seeds.trial_seed if args.seed is None else args.seed
    sweep = SweepResult(axis=SweepAxis.ACTIVE_USERS, master_seed=master, trials=args.trials, points=[point])
    _write_outputs(args.out, cfg, sweep)
    if args.dump_activity is not None:
        first = run_trial(cfg, results[0].trial_seed, keep_estimates=True)
        dump_activity_csv(args.dump_activity, first.estimates or [])
    _emit(sweep.to_dict()["points"][0], args.format)
    return 0


def _cmd_sweep(args: argparse.Namespace) -> int:
    cfg = _load(args)
    sweep = monte_carlo_sweep(cfg, args.axis, args.values, args.trials, master_seed=args.seed, workers=args.threads)
    _write_outputs(args.out, cfg, sweep)
    if args.format == "json":
        _emit(sweep.to_dict(), "json")
    else:
        for row in sweep.rows():
            print("  ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in row.items()))
    return 0


def design_point_from_config(cfg: SystemConfig, active_users: int | None = None,
                             ebn0_db: float | None = None, c: float = 1.0, kappa: float = 1.0) -> DesignPoint:
    ebn0 = 10 ** (ebn0_db / 10) if ebn0_db is not None else cfg.power * cfg.n / (cfg.payload_bits * cfg.noise)
    return DesignPoint(
        index_bits=cfg.index_bits,
        outer_rate=cfg.payload_bits / (cfg.num_subslots * cfg.index_bits),
        num_subslots=cfg.num_subslots,
        n=cfg.n,
        active_users=cfg.active_users if active_users is None else active_users,
        ebn0=ebn0,
        c=c,
        kappa=kappa,
    )


def _cmd_design(args: argparse.Namespace) -> int:
    cfg = _load(args)
    point = design_point_from_config(cfg, args.active_users, args.ebn0_db, args.c, args.kappa)
    _emit(design_report(point), args.format)
    return 0


def _cmd_selftest(args: argparse.Namespace) -> int:
    results = run_selftest(args.seed)
    for result in results:
        print(f"{'ok' if result.passed else 'FAIL':4}  {result.name}: {result.detail}")
    return 0 if all(r.passed for r in results) else 1


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    uvicorn.run("mimo_ura._app:app", host=args.host, port=args.port)
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "sweep": _cmd_sweep,
    "design": _cmd_design,
    "selftest": _cmd_selftest,
    "serve": _cmd_serve,
}


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=(args.log_level or get_log_level()).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    if getattr(args, "trials", 1) < 1:
        print("error: --trials must be >= 1", file=sys.stderr)
        return 1
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"error: {exc.violation.value}: {exc.detail}", file=sys.stderr)
        return 2
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

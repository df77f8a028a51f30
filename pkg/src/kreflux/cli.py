"""Command-line harness.

Subcommands: simulate, compare, verify, pe, sweep.  Exit codes: 0 success,
1 check failure, 2 usage/config error, 3 numerical fault.
"""

import argparse
import json
import math
import sys
from pathlib import Path

import numpy as np

from .analysis import pe_index
from .errors import ConfigError, KrefluxError
from .runner import (compare_observers, comparison_table, expand_observers,
                     run_scenario, sweep)
from .scenario import load_config, parse_number
from .verify import ALL_CHECKS, verify_config

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_USAGE = 2
EXIT_NUMERICAL = 3


def _load(path):
    try:
        return load_config(path)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}")


def _apply_overrides(cfg, args):
    over = {}
    if getattr(args, "seed", None) is not None:
        over["seed"] = args.seed
    if getattr(args, "observer", None):
        over["observer"] = args.observer
    if getattr(args, "integration", None):
        over["integration"] = args.integration
    return cfg.with_overrides(**over) if over else cfg


def cmd_simulate(args):
    cfg = _apply_overrides(_load(args.config), args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    observers = expand_observers(cfg)
    status = EXIT_OK
    for obs in observers:
        log = run_scenario(cfg, observer=obs)
        csv_path = out / f"{obs}.csv"
        log.write_csv(csv_path)
        log.write_metrics(out / f"{obs}_metrics.json")
        if len(observers) == 1:
            log.write_metrics(out / "metrics.json")
        m = log.metrics
        if log.diverged:
            print(f"{obs}: DIVERGED at step {log.diverged_at} "
                  f"(t={log.diverged_at * cfg.dt_sample:.6g} s); partial log "
                  f"flushed to {csv_path}")
            status = EXIT_NUMERICAL
        else:
            print(f"{obs}: wrote {csv_path} ({m.n_samples} rows); "
                  f"settle|xt|<5%={_fmt(m.settle_flux_5pct)} s, "
                  f"steady|xt|={_fmt(m.flux_err_tail_mean)} Wb, "
                  f"steady|tht|={_fmt(m.angle_err_tail_mean)} rad")
    return status


def _fmt(v):
    if v is None:
        return "-"
    if isinstance(v, float) and v == float("inf"):
        return "never"
    return f"{v:.6g}"


def cmd_compare(args):
    cfg = _apply_overrides(_load(args.config), args)
    observers = expand_observers(cfg, args.observers or "kre,grad_aut,grad_tie")
    results = compare_observers(cfg, observers)
    print(comparison_table(results))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        for obs, log in results.items():
            log.write_csv(out / f"{obs}.csv")
            log.write_metrics(out / f"{obs}_metrics.json")
    if any(log.diverged for log in results.values()):
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_verify(args):
    cfg = _apply_overrides(_load(args.config), args)
    checks = tuple(args.checks.split(",")) if args.checks else None
    report = verify_config(cfg, checks=checks,
                           break_omega1=args.break_omega1, drop_qe=args.drop_qe)
    print(report.render())
    if args.json:
        Path(args.json).write_text(report.to_json() + "\n", encoding="utf-8")
    return EXIT_OK if report.passed else EXIT_CHECK_FAILED


def cmd_pe(args):
    cfg = _apply_overrides(_load(args.config), args)
    obs = cfg.observer if cfg.observer != "all" else "kre"
    log = run_scenario(cfg, observer=obs)
    if log.diverged:
        print("run diverged; PE index unavailable", file=sys.stderr)
        return EXIT_NUMERICAL
    period = (args.window if args.window is not None
              else 2 * math.pi / abs(cfg.trajectory().mean_omega(cfg.duration)))
    rep = pe_index(np.stack([log.columns["phi1"], log.columns["phi2"]], axis=1),
                   period, cfg.dt_sample, delta_min=cfg.pe_delta_min)
    print(json.dumps(rep.to_dict(), indent=2, sort_keys=True))
    return EXIT_OK if rep.is_pe else EXIT_CHECK_FAILED


def cmd_sweep(args):
    cfg = _apply_overrides(_load(args.config), args)
    values = [parse_number(v) for v in args.values.split(",")]
    results = sweep(cfg, args.param, values)
    print(f"{'value':>12} {'settle|xt|<5% [s]':>20} {'steady|xt| [Wb]':>18} "
          f"{'rate [1/s]':>12} {'outcome':>10}")
    for v, log in results:
        m = log.metrics
        outcome = "diverged" if log.diverged else "ok"
        print(f"{v:>12.6g} {_fmt(m.settle_flux_5pct):>20} "
              f"{_fmt(m.flux_err_tail_mean):>18} {_fmt(m.decay_rate):>12} "
              f"{outcome:>10}")
    return EXIT_OK


def build_parser():
    p = argparse.ArgumentParser(
        prog="kreflux",
        description="Sensorless active-flux observer simulation and "
                    "verification harness")
    sub = p.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("config", help="scenario config file")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--observer", default=None,
                        choices=["kre", "grad_aut", "grad_tie", "all"])
        sp.add_argument("--integration", default=None,
                        choices=["sampled", "continuous"])

    sp = sub.add_parser("simulate", help="run one scenario, write CSV + metrics")
    add_common(sp)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("compare", help="run several observers side by side")
    add_common(sp)
    sp.add_argument("--observers", default=None,
                    help="comma list, e.g. kre,grad_aut")
    sp.add_argument("--out", default=None)
    sp.set_defaults(func=cmd_compare)

    sp = sub.add_parser("verify", help="run the verification battery")
    add_common(sp)
    sp.add_argument("--checks", default=None,
                    help=f"comma list from {','.join(ALL_CHECKS)}")
    sp.add_argument("--json", default=None, help="write JSON verdict here")
    sp.add_argument("--break-omega1", action="store_true",
                    help="mutation: drop the L_q*H1[i] term from Omega1")
    sp.add_argument("--drop-qe", action="store_true",
                    help="mutation: remove the Q*E term from Ydot")
    sp.set_defaults(func=cmd_verify)

    sp = sub.add_parser("pe", help="persistency-of-excitation report")
    add_common(sp)
    sp.add_argument("--window", type=float, default=None,
                    help="window length in s (default: one electrical period)")
    sp.set_defaults(func=cmd_pe)

    sp = sub.add_parser("sweep", help="sweep gamma, a or alpha")
    add_common(sp)
    sp.add_argument("--param", required=True, choices=["gamma", "a", "alpha"])
    sp.add_argument("--values", required=True,
                    help="comma list; pi suffix allowed, e.g. 20pi,200pi")
    sp.set_defaults(func=cmd_sweep)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except KrefluxError as exc:
        print(f"numerical fault: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())

"""Command-line driver.

    chemoflux run CONFIG            single trajectory, monitors and final snapshot
    chemoflux study reg|sweep|mesh CONFIG
    chemoflux check CONFIG          run and evaluate every invariant

Exit codes: 0 success, 1 invariant or study failure, 2 configuration error,
3 solver failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import replace
from pathlib import Path

from . import experiments, io
from .config import ConfigError, parse_config, render
from .monitors import full_report

EXIT_OK, EXIT_INVARIANT, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3

log = logging.getLogger("chemoflux")


def _load(args):
    try:
        text = Path(args.config).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    cfg = parse_config(text, args.override or ())
    if args.output:
        cfg = replace(cfg, output=args.output)
    if getattr(args, "jobs", None):
        cfg = replace(cfg, study=replace(cfg.study, jobs=args.jobs))
    return cfg


def _outdir(cfg):
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    (out / "config.txt").write_text(render(cfg))
    return out


def _simulate(cfg, out):
    res = experiments.simulate(cfg)
    if res.series:
        io.write_monitor_csv(res.series, out / "monitor.csv")
    io.write_snapshot(res.final.u, res.grid.spec, out / "final.snap")
    # an initial solve failure leaves no records
    peaks = [r.max_u for r in res.series] or [float(res.final.u.values.max())]
    peak = max(peaks)
    io.write_table(
        ["verdict", "t_final", "steps", "initial_max_u", "peak_max_u"],
        [{"verdict": res.verdict, "t_final": float(res.final.t), "steps": res.final.step_count,
          "initial_max_u": float(peaks[0]), "peak_max_u": float(peak)}],
        out / "summary.csv")
    print(f"verdict={res.verdict} t={res.final.t:.6g} steps={res.final.step_count} "
          f"peak_max_u={peak:.6g}")
    return res


def cmd_run(args):
    cfg = _load(args)
    res = _simulate(cfg, _outdir(cfg))
    return EXIT_SOLVER if res.verdict == "solver_failure" else EXIT_OK


def cmd_check(args):
    cfg = _load(args)
    out = _outdir(cfg)
    res = _simulate(cfg, out)
    if res.verdict == "solver_failure":
        return EXIT_SOLVER
    report = full_report(res.series, res.audit, res.m0, res.grid.total_volume,
                         cfg.model.elliptic.rel_tol)
    rows = [{"name": r.name, "passed": r.passed, "margin": float(r.margin),
             "t_worst": float(r.t_worst)} for r in report.results]
    io.write_table(["name", "passed", "margin", "t_worst"], rows, out / "invariants.csv")
    for line in report.lines():
        print(line)
    return EXIT_OK if report.passed else EXIT_INVARIANT


def cmd_study(args):
    cfg = _load(args)
    out = _outdir(cfg)
    if args.kind == "reg":
        result = experiments.regularization_study(cfg)
    elif args.kind == "sweep":
        result = experiments.exponent_sweep(cfg)
    else:
        result = experiments.mesh_convergence(cfg)
    io.write_table(result.columns, result.rows, out / f"study_{args.kind}.csv")
    print(f"{result.name}: {result.verdict}")
    if any(r.get("verdict") == "solver_failure" for r in result.rows):
        return EXIT_SOLVER
    return EXIT_INVARIANT if result.verdict.startswith("fail") else EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="chemoflux", description=__doc__.split("\n")[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("config")
        p.add_argument("--override", action="append", metavar="KEY=VALUE",
                       help="replace a config value; repeatable")
        p.add_argument("--output", help="output directory (overrides run.output)")

    p = sub.add_parser("run", help="integrate one trajectory")
    common(p)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("check", help="run and evaluate the invariant report")
    common(p)
    p.set_defaults(func=cmd_check)
    p = sub.add_parser("study", help="regularisation, exponent or mesh study")
    p.add_argument("kind", choices=["reg", "sweep", "mesh"])
    common(p)
    p.add_argument("--jobs", type=int, help="worker processes for independent rows")
    p.set_defaults(func=cmd_study)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

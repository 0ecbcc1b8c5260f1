"""Command-line driver: ``graddiv-bench {run,sweep,table}``.

Settings come from an optional ``key = value`` file (``--config``); any flag
given on the command line overrides the file.  Sweep levels run in
``GRADDIV_JOBS`` worker processes (default 1) unless ``--jobs`` is given.
"""

from __future__ import annotations

import argparse
import logging
import sys
import warnings
from pathlib import Path

from . import bench
from .linear_solvers import ConvergenceError, SingularSystemError
from .schemes import StabilityWarning, StepError

EXIT_CONFIG = 2
EXIT_SOLVER = 1


def _add_run_flags(p: argparse.ArgumentParser):
    p.add_argument("--config", type=Path, help="key=value file with any of the settings below")
    p.add_argument("--scheme", help="theta|jacobi|gauss_seidel|alt_triangular|three_level (or cn, j, gs, at, 3l)")
    p.add_argument("--sigma", type=float)
    p.add_argument("--tau", type=float)
    p.add_argument("--T", type=float, dest="T")
    p.add_argument("--nx", type=int, help="cells per direction on the unit square")
    p.add_argument("--k", type=float, help="constant coefficient k")
    p.add_argument("--monitor", action=argparse.BooleanOptionalAction, default=None,
                   help="check the energy inequality at every step")
    p.add_argument("--out", help="directory for CSV/markdown output")
    p.add_argument("--error-reference", choices=("faces", "analytic"), dest="error_reference")
    p.add_argument("--solver-tol", type=float, dest="solver_tol")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="graddiv-bench", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="single run of the manufactured problem")
    _add_run_flags(p_run)

    p_sweep = sub.add_parser("sweep", help="tau-halving convergence sweep")
    _add_run_flags(p_sweep)
    p_sweep.add_argument("--halvings", "--sweep-halvings", type=int, dest="halvings")
    p_sweep.add_argument("--jobs", type=int)

    p_table = sub.add_parser("table", help="all five reference scheme columns side by side")
    p_table.add_argument("--nx", type=int, default=200)
    p_table.add_argument("--T", type=float, default=10.0, dest="T")
    p_table.add_argument("--tau", type=float, default=0.1)
    p_table.add_argument("--halvings", type=int, default=4)
    p_table.add_argument("--schemes", default=",".join(bench.REFERENCE_SCHEMES),
                         help="comma-separated subset of " + ",".join(bench.REFERENCE_SCHEMES))
    p_table.add_argument("--error-reference", choices=("faces", "analytic"), default="faces",
                         dest="error_reference")
    p_table.add_argument("--out")
    p_table.add_argument("--jobs", type=int)
    return parser


RUN_KEYS = ("scheme", "sigma", "tau", "T", "nx", "k", "monitor", "out", "error_reference", "solver_tol", "halvings")


def resolve_config(args) -> bench.RunConfig:
    values = bench.read_config_file(args.config) if getattr(args, "config", None) else {}
    for key in RUN_KEYS:
        val = getattr(args, key, None)
        if val is not None:
            values[key] = val
    return bench.RunConfig.from_mapping(values)


def _cmd_run(args) -> int:
    cfg = resolve_config(args)
    report = bench.run_single(cfg)
    mon = "" if report.monitor_passed is None else f" monitor={'pass' if report.monitor_passed else 'FAIL'}"
    print(f"{cfg.scheme} sigma={cfg.sigma:g} tau={cfg.tau:g} T={cfg.T:g} nx={cfg.nx} "
          f"steps={report.steps} error={report.error:.6g} time={report.wall_time:.3g}s{mon}")
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        path = bench.write_report_csv([report], out / f"run_{cfg.scheme}_tau{cfg.tau:g}.csv")
        print(f"wrote {path}")
        if report.ledger_path:
            print(f"wrote {report.ledger_path}")
    return 0 if report.monitor_passed is not False else EXIT_SOLVER


def _cmd_sweep(args) -> int:
    cfg = resolve_config(args)
    sweep = bench.run_sweep(cfg, cfg.halvings, args.jobs)
    md = sweep.to_markdown()
    print(md, end="")
    if cfg.out:
        out = Path(cfg.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = f"sweep_{cfg.scheme}_sigma{cfg.sigma:g}"
        sweep.to_csv(out / f"{stem}.csv")
        (out / f"{stem}.md").write_text(md)
        print(f"wrote {out / stem}.csv and .md")
    return 0


def _cmd_table(args) -> int:
    labels = [s.strip() for s in args.schemes.split(",") if s.strip()]
    unknown = [s for s in labels if s not in bench.REFERENCE_SCHEMES]
    if unknown:
        raise ValueError(f"unknown table column(s) {unknown}; choose from {list(bench.REFERENCE_SCHEMES)}")
    sweeps = bench.run_reference_table(args.nx, args.T, args.tau, args.halvings, labels, args.jobs,
                              error_reference=args.error_reference)
    md = bench.table_markdown(sweeps)
    print(md, end="")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "table.md").write_text(md)
        for lab, sw in sweeps.items():
            sw.to_csv(out / f"table_{lab}.csv")
        print(f"wrote {out}/table.md and per-scheme CSVs")
    return 0


COMMANDS = {"run": _cmd_run, "sweep": _cmd_sweep, "table": _cmd_table}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    warnings.simplefilter("always", StabilityWarning)
    try:
        return COMMANDS[args.command](args)
    except (ValueError, OSError) as exc:
        print(f"graddiv-bench: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (StepError, ConvergenceError, SingularSystemError) as exc:
        print(f"graddiv-bench: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())

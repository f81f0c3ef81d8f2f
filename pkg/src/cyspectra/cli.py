"""Command-line entry point: ``cyspectra run | list-experiments | validate-config``.

Exit codes: 0 all checks pass, 1 a check failed, 2 usage or configuration
error, 3 solver error.
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import shutil
import sys
import tempfile
from pathlib import Path

from .assembly2d import AssemblyError
from .config import ConfigError, ExperimentConfig, load_config
from .domains import ConstraintViolation
from .eigensolve import EigensolveError
from .experiments import EXPERIMENTS, SCHEMAS, Outcome
from .geometry import DomainError
from .inequalities import CSV_FIELDS, InequalityError, _clean
from .sturm_liouville import SLError

log = logging.getLogger("cyspectra")

EXIT_OK, EXIT_CHECK, EXIT_CONFIG, EXIT_SOLVER = 0, 1, 2, 3
SOLVER_ERRORS = (EigensolveError, SLError, AssemblyError, InequalityError)
REPORT_NAME = "report.json"


class SolverFailure(RuntimeError):
    pass


def _prepare_all(cfg: ExperimentConfig, grid=None, refine=None):
    prepared = {}
    for name in cfg.experiments:
        exp = EXPERIMENTS[name]
        params = dict(cfg.params[name])
        if grid is not None and exp.grid_key:
            params[exp.grid_key] = grid
        if refine is not None and "refine" in params:
            params["refine"] = refine
        try:
            prepared[name] = (params, exp.prepare(params))
        except (ConstraintViolation, DomainError, ValueError) as exc:
            raise ConfigError(f"invalid parameters for '{name}': {exc}", str(cfg.path or "")) from exc
    return prepared


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, float) else v for v in row])


def _write_outputs(target: Path, results: dict, summary: dict):
    """Write everything into a sibling temporary directory, then swap it in."""
    target = target.resolve()
    target.parent.mkdir(parents=True, exist_ok=True)
    if target.exists() and any(target.iterdir()) and not (target / REPORT_NAME).exists():
        raise ConfigError(f"output directory {target} is not empty and holds no previous report")
    tmp = Path(tempfile.mkdtemp(prefix=f".{target.name}.", dir=target.parent))
    try:
        (tmp / REPORT_NAME).write_text(json.dumps(_clean(summary), indent=2, sort_keys=True) + "\n")
        with open(tmp / "reports.csv", "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(("experiment",) + CSV_FIELDS)
            for name, out in results.items():
                for r in out.reports:
                    d = r.to_dict()
                    w.writerow([name] + [repr(float(d[f])) if f in ("lhs", "rhs", "margin", "slack")
                                         else _clean(d[f]) for f in CSV_FIELDS])
        for name, out in results.items():
            for stem, table in out.tables.items():
                _write_csv(tmp / f"{name}_{stem}.csv", table.header, table.rows)
            for stem, table in out.plots.items():
                _write_csv(tmp / f"{name}_plot_{stem}.csv", table.header, table.rows)
        if target.exists():
            old = target.with_name(f".{target.name}.old")
            if old.exists():
                shutil.rmtree(old)
            os.replace(target, old)
            os.replace(tmp, target)
            shutil.rmtree(old)
        else:
            os.replace(tmp, target)
    finally:
        if tmp.exists():
            shutil.rmtree(tmp)


def run_config(cfg: ExperimentConfig, out_dir=None, grid=None, refine=None, strict=False):
    """Run every experiment of ``cfg``; returns ``(exit_code, summary)``."""
    prepared = _prepare_all(cfg, grid, refine)
    results, summary = {}, {"experiments": {}}
    any_fail = False
    for name, (params, prep) in prepared.items():
        log.info("running %s", name)
        try:
            out: Outcome = EXPERIMENTS[name].run(params, prep)
        except SOLVER_ERRORS as exc:
            raise SolverFailure(f"experiment '{name}': {exc}") from exc
        failed = [r.name for r in out.reports if not r.passed]
        warned = [r.name for r in out.reports if r.status == "not-applicable"] + out.warnings
        ok = not failed and not (strict and warned)
        any_fail |= not ok
        results[name] = out
        summary["experiments"][name] = {
            "params": params, "passed": ok, "failed": failed, "warnings": warned,
            "reports": [r.to_dict() for r in out.reports],
        }
        for r in out.reports:
            log.info("  %-34s %-14s lhs=%.10g rhs=%.10g", r.name + (f"[k={r.k}]" if r.k else ""),
                     r.status, r.lhs, r.rhs)
    summary["passed"] = not any_fail
    summary["strict"] = strict
    _write_outputs(Path(out_dir) if out_dir else cfg.output_dir, results, summary)
    return (EXIT_CHECK if any_fail else EXIT_OK), summary


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="cyspectra", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiments of a config file")
    run.add_argument("config")
    run.add_argument("--grid", type=int, help="override the main grid size of each experiment")
    run.add_argument("--refine", action=argparse.BooleanOptionalAction, default=None,
                     help="Richardson-extrapolated eigenvalues (default) or raw values")
    run.add_argument("--out", help="output directory (overrides [output].dir)")
    run.add_argument("--strict", action="store_true", help="treat warnings as failures")
    sub.add_parser("list-experiments", help="list experiment names and parameters")
    val = sub.add_parser("validate-config", help="parse and validate a config without solving")
    val.add_argument("config")
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(message)s")
    if args.command == "list-experiments":
        for name, exp in EXPERIMENTS.items():
            print(f"{name}: {exp.summary}")
            for key, spec in exp.schema.items():
                print(f"    {key} ({spec.kind}) = {spec.default!r}")
        return EXIT_OK
    try:
        cfg = load_config(args.config, SCHEMAS)
        if args.command == "validate-config":
            _prepare_all(cfg)
            print(f"{args.config}: ok ({', '.join(cfg.experiments)})")
            return EXIT_OK
        if args.grid is not None and args.grid < 2:
            raise ConfigError("--grid must be at least 2")
        code, summary = run_config(cfg, args.out, args.grid, args.refine, args.strict)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SolverFailure as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    for name, res in summary["experiments"].items():
        status = "PASS" if res["passed"] else "FAIL"
        extra = f" failed: {', '.join(res['failed'])}" if res["failed"] else ""
        print(f"{name}: {status} ({len(res['reports'])} checks){extra}")
    return code


if __name__ == "__main__":
    sys.exit(main())

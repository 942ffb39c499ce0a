"""Command line entry point: ``oddlab run | list | verify-all``.

Exit codes: 0 when every check passes, 1 when a check fails (the report is
still written), 2 for configuration errors.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

from . import __version__
from .errors import ConfigurationError
from .experiments import (CATALOG, catalog_config, list_experiments, load_config, render_json,
                          run_config, validate_report)

EXIT_PASS, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _render_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["run", "check", "item", "lhs", "rhs_total", "pass"])
    runs = report["runs"] if "runs" in report else [report]
    for run in runs:
        name = run["config"]["name"]
        for chk in run["checks"]:
            w.writerow([name, chk["name"], "", "", "", chk["pass"]])
            for ir in chk["index_reports"]:
                tot = ir["rhs_total"]
                w.writerow([name, chk["name"], ir["name"], ir["lhs"],
                            f"{tot['num']}/2^{tot['log2_den']}", ir["pass"]])
    return buf.getvalue()


def _write(report, out, fmt):
    text = render_json(report) if fmt == "json" else _render_csv(report)
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w") as fh:
            fh.write(text)


def _threads() -> int:
    raw = os.environ.get("ODDLAB_THREADS", "0")
    try:
        n = int(raw)
    except ValueError as exc:
        raise ConfigurationError(f"ODDLAB_THREADS must be an integer, got {raw!r}") from exc
    if n < 0:
        raise ConfigurationError("ODDLAB_THREADS must be nonnegative")
    return n


def cmd_run(args) -> int:
    cfg = load_config(args.config)
    overrides = {}
    if args.truncation is not None:
        overrides["truncation"] = args.truncation
    if args.seed is not None:
        overrides["seed"] = args.seed
    if overrides:
        cfg = replace(cfg, **overrides)
        cfg.validate()
    report = run_config(cfg, overrides, timing=args.timing)
    _write(report, args.out, args.format)
    return EXIT_PASS if report["pass"] else EXIT_FAIL


def cmd_list(args) -> int:
    entries = list_experiments()
    if args.json:
        sys.stdout.write(json.dumps(entries, indent=2, sort_keys=True) + "\n")
    else:
        for e in entries:
            sys.stdout.write(f"{e['name']:22s} {e['description']}  [{'; '.join(e['anchors'])}]\n")
    return EXIT_PASS


def verify_all(threads: int = 0, timing: bool = False) -> dict:
    """Run the full catalog; the result order follows the catalog regardless of threads."""
    configs = [catalog_config(n) for n in CATALOG]
    if threads:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            runs = list(pool.map(lambda c: run_config(c, timing=timing), configs))
    else:
        runs = [run_config(c, timing=timing) for c in configs]
    return {"tool": "oddlab", "version": __version__, "runs": runs,
            "pass": all(r["pass"] for r in runs)}


def cmd_verify_all(args) -> int:
    report = verify_all(_threads(), args.timing)
    problems = validate_report(report)
    _write(report, args.out, args.format)
    for p in problems:
        sys.stderr.write(f"schema: {p}\n")
    for run in report["runs"]:
        sys.stderr.write(f"{'PASS' if run['pass'] else 'FAIL'} {run['config']['name']}\n")
    return EXIT_PASS if report["pass"] and not problems else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="oddlab", description="Odd subspaces, eta and index experiments")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one experiment config")
    r.add_argument("--config", required=True, help='JSON config, or {"catalog": "<name>"}')
    r.add_argument("--out", default="-", help="output path ('-' for stdout)")
    r.add_argument("--format", choices=("json", "csv"), default="json")
    r.add_argument("--truncation", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--timing", action="store_true", help="add wall-clock per check")
    r.set_defaults(fn=cmd_run)

    ls = sub.add_parser("list", help="list the built-in catalog")
    ls.add_argument("--json", action="store_true")
    ls.set_defaults(fn=cmd_list)

    va = sub.add_parser("verify-all", help="run the full catalog")
    va.add_argument("--out", default="-")
    va.add_argument("--format", choices=("json", "csv"), default="json")
    va.add_argument("--timing", action="store_true")
    va.set_defaults(fn=cmd_verify_all)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_PASS if exc.code == 0 else EXIT_CONFIG
    try:
        return args.fn(args)
    except ConfigurationError as exc:
        sys.stderr.write(f"configuration error: {exc}\n")
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())

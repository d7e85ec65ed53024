"""Command-line front end.

Exit codes: 0 success, 1 analysis or dataset error, 2 usage error,
3 the comparison found discrepancies.
"""

from __future__ import annotations

import argparse
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from functools import lru_cache
from pathlib import Path
from typing import Any, Sequence

from dsaudit.apianalysis import NoAnalyzableCode
from dsaudit.axml import AxmlError
from dsaudit.container import ContainerError
from dsaudit.datasets import AppContext, DatasetBundle, DatasetError, check_bundle, load_bundle, seed_dir
from dsaudit.dexscan import DexError
from dsaudit.manifestanalysis import NotAManifest
from dsaudit.pipeline import AnalysisResult, analyze_path
from dsaudit.report import (
    analysis_to_dict,
    comparison_to_dict,
    render_analysis_csv,
    render_analysis_table,
    render_batch_csv,
    render_batch_table,
    render_comparison_csv,
    render_comparison_table,
    render_matrix_figure,
    to_json,
)
from dsaudit.safetycompare import ComparisonReport, MalformedDeclaration, Status, compare, load_declaration
from dsaudit.taxonomy import SafetyCategory

EXIT_OK, EXIT_ERROR, EXIT_USAGE, EXIT_DISCREPANCY = 0, 1, 2, 3
DATASETS_ENV = "DSAUDIT_DATASETS"
DECLARATION_SUFFIXES = (".declaration.json", ".declaration")

ANALYSIS_ERRORS = (ContainerError, AxmlError, DexError, NoAnalyzableCode, NotAManifest)


class UsageError(Exception):
    pass


def _err(msg: str) -> None:
    print(f"dsaudit: {msg}", file=sys.stderr)


def datasets_dir(args: argparse.Namespace) -> Path:
    if args.datasets:
        return Path(args.datasets)
    env = os.environ.get(DATASETS_ENV)
    return Path(env) if env else seed_dir()


def _load(args: argparse.Namespace) -> DatasetBundle:
    root = datasets_dir(args)
    if not root.is_dir():
        raise UsageError(f"datasets directory not found: {root}")
    return load_bundle(root)


def _existing(path: str, what: str) -> Path:
    p = Path(path)
    if not p.exists():
        raise UsageError(f"{what} not found: {path}")
    return p


def _stamp(obj: dict[str, Any], args: argparse.Namespace) -> dict[str, Any]:
    if args.timestamps:
        obj["generated_at"] = datetime.now(timezone.utc).isoformat(timespec="seconds")
    return obj


def _statuses(report: ComparisonReport) -> dict:
    return {s.category: s.status for s in report.statuses}


# --- commands ----------------------------------------------------------------------

def cmd_analyze(args: argparse.Namespace) -> int:
    path = _existing(args.apk, "package")
    bundle = _load(args)
    result = analyze_path(path, bundle, AppContext(args.domain))
    if args.format == "json":
        sys.stdout.write(to_json(_stamp(analysis_to_dict(result), args)))
    elif args.format == "csv":
        sys.stdout.write(render_analysis_csv(result))
    else:
        sys.stdout.write(render_analysis_table(result))
    for w in result.warnings:
        _err(f"warning: {w}")
    return EXIT_ERROR if args.fail_on_warnings and result.warnings else EXIT_OK


def _compare(result: AnalysisResult, decl_path: Path) -> ComparisonReport:
    return compare(load_declaration(decl_path), result.evidence)


def cmd_compare(args: argparse.Namespace) -> int:
    if args.declaration_pos and args.declaration:
        raise UsageError("give the declaration either positionally or with --declaration, not both")
    decl_arg = args.declaration_pos or args.declaration
    if not decl_arg:
        raise UsageError("compare needs a declaration file")
    path = _existing(args.apk, "package")
    decl_path = _existing(decl_arg, "declaration")
    decl = load_declaration(decl_path)
    bundle = _load(args)
    result = analyze_path(path, bundle, AppContext(args.domain))
    report = compare(decl, result.evidence)
    if args.format == "json":
        obj = {"app": result.name, "dataset_version": result.dataset_version,
               "analysis": analysis_to_dict(result), "comparison": comparison_to_dict(report)}
        sys.stdout.write(to_json(_stamp(obj, args)))
    elif args.format == "csv":
        sys.stdout.write(render_comparison_csv(result.name, report))
    else:
        sys.stdout.write(render_comparison_table(result.name, report))
    if args.figure:
        render_matrix_figure([(result.name, _statuses(report))], args.figure)
    for w in result.warnings:
        _err(f"warning: {w}")
    if args.fail_on_warnings and result.warnings:
        return EXIT_ERROR
    return EXIT_DISCREPANCY if report.has_discrepancy else EXIT_OK


def cmd_datasets_validate(args: argparse.Namespace) -> int:
    root = Path(args.dir) if args.dir else datasets_dir(args)
    if not root.is_dir():
        raise UsageError(f"datasets directory not found: {root}")
    bundle, errors = check_bundle(root)
    for e in errors:
        print(str(e), file=sys.stderr)
    if bundle is None:
        return EXIT_ERROR
    print(f"datasets {root} (version {bundle.version})")
    for name, n in bundle.counts().items():
        print(f"  {name}: {n} rows")
    return EXIT_OK


@lru_cache(maxsize=None)
def _bundle_for(root: str) -> DatasetBundle:
    return load_bundle(root)


def find_declaration(apk: Path) -> Path | None:
    base = apk.with_suffix("")
    for suffix in DECLARATION_SUFFIXES:
        cand = base.with_name(base.name + suffix)
        if cand.is_file():
            return cand
    return None


def audit_one(apk: str, decl: str | None, datasets: str, domain: str) -> dict[str, Any]:
    """One batch row; never raises for per-app failures."""
    row: dict[str, Any] = {"app": Path(apk).name}
    try:
        result = analyze_path(apk, _bundle_for(datasets), AppContext(domain))
        row["categories"] = len(result.evidence.categories())
        row["warnings"] = len(result.warnings)
        if decl is None:
            row["result"] = "analyzed"
            row["detail"] = "no declaration"
            return row
        report = _compare(result, Path(decl))
    except (*ANALYSIS_ERRORS, MalformedDeclaration) as exc:
        row.update(result="error", detail=f"{type(exc).__name__}: {exc}")
        return row
    counts = report.counts()
    row.update(
        result="discrepancy" if report.has_discrepancy else "ok",
        collected_not_reported=counts[Status.COLLECTED_NOT_REPORTED],
        reported_not_collected=counts[Status.REPORTED_NOT_COLLECTED],
        collected_and_reported=counts[Status.COLLECTED_AND_REPORTED],
        verdicts=",".join(sorted(v.value for v in report.verdicts)) or "none",
        statuses={s.category.value: s.status.value for s in report.statuses},
    )
    return row


def cmd_batch(args: argparse.Namespace) -> int:
    root = _existing(args.dir, "directory")
    if not root.is_dir():
        raise UsageError(f"not a directory: {root}")
    apks = sorted(p for p in root.iterdir() if p.suffix == ".apk" and p.is_file())
    if not apks:
        raise UsageError(f"no .apk files in {root}")
    if args.workers < 1:
        raise UsageError("--workers must be at least 1")
    ds = datasets_dir(args)
    if not ds.is_dir():
        raise UsageError(f"datasets directory not found: {ds}")
    load_bundle(ds)  # fail fast on a broken dataset before fanning out
    jobs = [(str(p), str(d) if (d := find_declaration(p)) else None, str(ds), args.domain) for p in apks]
    if args.workers == 1 or len(jobs) == 1:
        rows = [audit_one(*j) for j in jobs]
    else:
        with ProcessPoolExecutor(max_workers=min(args.workers, len(jobs))) as pool:
            rows = list(pool.map(audit_one, *zip(*jobs)))
    rows.sort(key=lambda r: r["app"])
    if args.format == "json":
        sys.stdout.write(to_json(_stamp({"dataset_version": _bundle_for(str(ds)).version, "apps": rows}, args)))
    elif args.format == "csv":
        sys.stdout.write(render_batch_csv(rows))
    else:
        sys.stdout.write(render_batch_table(rows))
    if args.figure:
        compared = [(r["app"], {SafetyCategory(k): Status(v) for k, v in r["statuses"].items()})
                    for r in rows if "statuses" in r]
        render_matrix_figure(compared, args.figure)
    if any(r["result"] == "error" for r in rows):
        return EXIT_ERROR
    if args.fail_on_warnings and any(r.get("warnings") for r in rows):
        return EXIT_ERROR
    return EXIT_DISCREPANCY if any(r["result"] == "discrepancy" for r in rows) else EXIT_OK


# --- parser ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--datasets", metavar="DIR",
                        help=f"dataset directory (default: ${DATASETS_ENV} or the bundled seed)")
    common.add_argument("--format", choices=("table", "json", "csv"), default="table")
    common.add_argument("--domain", default="unknown", metavar="TAG",
                        help="app domain tag for keyword context overrides (e.g. messaging, ecommerce)")
    common.add_argument("--fail-on-warnings", action="store_true")
    common.add_argument("--timestamps", action="store_true", help="add generated_at to JSON output")

    p = argparse.ArgumentParser(prog="dsaudit", description="Static privacy audit of Android packages "
                                "against their data-safety declarations.")
    sub = p.add_subparsers(dest="command", required=True)

    a = sub.add_parser("analyze", parents=[common], help="label privacy-related data sources in a package")
    a.add_argument("apk", help="APK file or decoded package directory")
    a.set_defaults(func=cmd_analyze)

    c = sub.add_parser("compare", parents=[common], help="compare a package against a declaration")
    c.add_argument("apk")
    c.add_argument("declaration_pos", nargs="?", metavar="DECLARATION")
    c.add_argument("--declaration", metavar="FILE")
    c.add_argument("--figure", metavar="PATH", help="also write the status matrix as an image")
    c.set_defaults(func=cmd_compare)

    d = sub.add_parser("datasets", help="dataset maintenance")
    dsub = d.add_subparsers(dest="datasets_command", required=True)
    v = dsub.add_parser("validate", parents=[common], help="check a dataset directory")
    v.add_argument("dir", nargs="?")
    v.set_defaults(func=cmd_datasets_validate)

    b = sub.add_parser("batch", parents=[common], help="audit every .apk in a directory")
    b.add_argument("dir")
    b.add_argument("--workers", type=int, default=1, metavar="N")
    b.add_argument("--figure", metavar="PATH")
    b.set_defaults(func=cmd_batch)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_USAGE
    try:
        return args.func(args)
    except UsageError as exc:
        _err(str(exc))
        return EXIT_USAGE
    except MalformedDeclaration as exc:
        _err(f"malformed declaration: {exc}")
        return EXIT_ERROR
    except DatasetError as exc:
        _err(f"dataset error: {exc}")
        return EXIT_ERROR
    except ANALYSIS_ERRORS as exc:
        _err(f"{type(exc).__name__}: {exc}")
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

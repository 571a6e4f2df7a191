"""Command-line interface for stellar-modes."""
import argparse
import asyncio
import csv
import json
import logging
import os
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any

from stellar_modes.cache import ResultCache
from stellar_modes.config import ModeRequest, RunConfig
from stellar_modes.database import (
    create_database,
    export_results_to_db,
    get_db_connection,
    import_modes,
    import_stars,
)
from stellar_modes.equilibrium import (
    EquilibriumStar,
    GridSpec,
    build_equilibrium,
    check_admissible,
    rescale_tau,
)
from stellar_modes.errors import ConfigError, FormulationMismatch, StellarModesError
from stellar_modes.nonradial import fixed_point_eigenvalues
from stellar_modes.ode4 import ode4_modes, scan_curve
from stellar_modes.radial import radial_spectrum
from stellar_modes.utils import _chunks
from stellar_modes.validation import run_invariant_suite

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUILD = 3


def save_json(data: Any, file_path: Path) -> None:
    """Save data to JSON file with UTF-8 encoding.

    Args:
        data: JSON-serializable rows or record
        file_path: Path to output JSON file
    """
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8") as f:
        json.dump(data if data is not None else [], f, indent=2, ensure_ascii=False, default=str)


def save_csv(rows: list[dict], file_path: Path) -> None:
    """Save rows to CSV; columns are the union of keys in first-seen order.

    Args:
        rows: List of flat dictionaries
        file_path: Path to output CSV file
    """
    columns: list[str] = []
    for row in rows:
        for key in row:
            if key not in columns:
                columns.append(key)
    file_path.parent.mkdir(parents=True, exist_ok=True)
    with open(file_path, "w", encoding="utf-8", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=columns, quoting=csv.QUOTE_MINIMAL)
        writer.writeheader()
        writer.writerows(rows)


# ---------------------------------------------------------------------------
# Database export
# ---------------------------------------------------------------------------

_TABLE_IMPORTERS = {
    "stars": import_stars,
    "modes": import_modes,
}

# Parent table first to satisfy the foreign key.
_TABLE_ORDER = ["stars", "modes"]


def _setup_db(database_url: str | None = None) -> None:
    """Ensure database schema exists."""
    create_database(database_url or os.environ.get("DATABASE_URL"))


def _flush_to_db(
    grouped: dict,
    database_url: str | None = None,
    accumulator: dict[str, int] | None = None,
) -> None:
    """Import grouped in-memory records and update per-table counts."""
    conn = get_db_connection(database_url or os.environ.get("DATABASE_URL"))
    try:
        for table_name in _TABLE_ORDER:
            records = grouped.get(table_name, [])
            if not records:
                continue
            inserted = _TABLE_IMPORTERS[table_name](records, conn)
            conn.commit()
            if accumulator is not None:
                accumulator[table_name] = accumulator.get(table_name, 0) + inserted
    finally:
        conn.close()


def export_to_db(
    output_dir: str,
    database_url: str | None = None,
    grouped: dict | None = None,
) -> None:
    """Export results to PostgreSQL.

    Imports ``grouped`` directly when given, otherwise reads the star_*.json
    and modes_*.json files in ``output_dir``. Errors are printed, not raised.
    """
    print("\nExporting to PostgreSQL database...")
    try:
        if grouped:
            _setup_db(database_url)
            counts: dict[str, int] = {}
            _flush_to_db(grouped, database_url, counts)
        else:
            counts = export_results_to_db(output_dir, database_url or os.environ.get("DATABASE_URL"))

        print("\nDatabase export summary:")
        for table, count in counts.items():
            print(f"  {table}: {count} records")
    except Exception as e:
        print(f"Error exporting to database: {e}")


# ---------------------------------------------------------------------------
# Pipeline pieces
# ---------------------------------------------------------------------------

def build_star(config: RunConfig) -> EquilibriumStar:
    """Build (and tau-rescale) the equilibrium described by a config."""
    star = build_equilibrium(
        config.eos(),
        config.rho_center,
        GridSpec(nodes=config.grid_nodes),
        rho_center_bound=config.rho_center_bound,
        tolerances=config.tolerances,
    )
    if config.tau != 1.0:
        star = rescale_tau(star, config.tau, config.tolerances)
    return star


def star_record(star: EquilibriumStar, config: RunConfig) -> dict[str, Any]:
    """Metadata JSON of a star with its key, tau and admissibility report."""
    report = check_admissible(star, config.tolerances)
    return {
        "star_key": config.star_key(),
        "tau": config.tau,
        **star.metadata(),
        "admissibility": report.to_dict(),
    }


def _build_or_report(config: RunConfig, out_dir: Path) -> EquilibriumStar | None:
    try:
        return build_star(config)
    except StellarModesError as e:
        path = out_dir / f"report_{config.star_key()}.json"
        save_json({"star_key": config.star_key(), "gamma": config.gamma, **e.to_dict()}, path)
        print(f"Equilibrium build failed: {type(e).__name__}: {e}")
        print(f"Saved failure report to {path}")
        return None


def _error_rows(request: ModeRequest, formulation: str, error: Exception) -> list[dict]:
    return [
        {
            "l": request.l, "branch": request.branch, "n": n, "formulation": formulation,
            "cowling": request.cowling, "error": f"{type(error).__name__}: {error}",
        }
        for n in request.orders
    ]


def _cross_check(gough: list[dict], ode4: list[dict], threshold: float, strict: bool) -> None:
    """Attach delta_cross to both row sets, matched by order n."""
    by_n = {row["n"]: row for row in gough if "lambda" in row}
    for row in ode4:
        ref = by_n.get(row["n"])
        if ref is None or "lambda" not in row:
            continue
        delta = abs(row["lambda"] - ref["lambda"]) / abs(ref["lambda"])
        row["delta_cross"] = ref["delta_cross"] = delta
        if delta > threshold:
            if strict:
                raise FormulationMismatch(
                    f"Formulations disagree for l={row['l']} {row['branch']}{row['n']}",
                    gough=ref["lambda"], ode4=row["lambda"], delta=delta,
                )
            logger.warning("Formulations disagree for l=%d %s%d: %.3e",
                           row["l"], row["branch"], row["n"], delta)


def compute_modes(star: EquilibriumStar, request: ModeRequest, config: RunConfig) -> list[dict]:
    """Mode rows for one request; failures become rows with an ``error`` field."""
    tol = config.tolerances
    if request.branch == "radial":
        try:
            spectrum = radial_spectrum(star, request.n_range[1], tol, strict=config.strict)
        except StellarModesError as e:
            return _error_rows(request, "gough", e)
        return [
            {"l": 0, "branch": "radial", "formulation": "gough", "cowling": False,
             "multiplicity": 1, **row}
            for row in spectrum.rows() if row["n"] in request.orders
        ]

    rows: list[dict] = []
    gough: list[dict] = []
    if request.formulation in ("gough", "both"):
        try:
            results = fixed_point_eigenvalues(
                star, request.l, request.branch, request.n_range, request.cowling, tol,
                strict=config.strict, with_fields=False,
            )
            gough = [r.to_row() for r in results]
        except StellarModesError as e:
            logger.warning("l=%d %s-modes failed: %s", request.l, request.branch, e)
            gough = _error_rows(request, "gough", e)
        rows.extend(gough)
    if request.formulation in ("ode4", "both"):
        solved = sorted((row for row in gough if "lambda" in row), key=lambda row: row["n"])
        orders = list(request.orders)[: len(solved)]
        references = [row["lambda"] for row in solved] if [row["n"] for row in solved] == orders else None
        try:
            results = ode4_modes(
                star, request.l, request.branch, request.n_range, request.cowling, tol,
                references=references,
            )
            ode4 = [r.to_row() for r in results]
            if gough:
                _cross_check(gough, ode4, tol.cross_formulation, config.strict)
        except StellarModesError as e:
            logger.warning("l=%d %s-modes (ode4) failed: %s", request.l, request.branch, e)
            ode4 = _error_rows(request, "ode4", e)
        rows.extend(ode4)
    return rows


async def _compute_all(
    star: EquilibriumStar,
    requests: list[ModeRequest],
    config: RunConfig,
    cache: ResultCache | None,
) -> list[dict]:
    """Run requests in worker threads, ``config.jobs`` at a time, using the cache."""
    rows: list[dict] = []
    pending: list[ModeRequest] = []
    for request in requests:
        key = config.request_key(request)
        if cache is not None and cache.is_cached(key):
            logger.info("Cache hit for l=%d %s", request.l, request.branch)
            rows.extend(cache.get_spectrum(key) or [])
        else:
            pending.append(request)

    for chunk in _chunks(pending, config.jobs):
        results = await asyncio.gather(*(
            asyncio.to_thread(compute_modes, star, request, config) for request in chunk
        ))
        for request, request_rows in zip(chunk, results):
            if cache is not None and not any("error" in row for row in request_rows):
                cache.add_spectrum(config.request_key(request), request_rows,
                                   star_key=config.star_key(), l=request.l, branch=request.branch)
            rows.extend(request_rows)

    star_key = config.star_key()
    for row in rows:
        row["star_key"] = star_key
    return rows


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_equilibrium(config: RunConfig, export_db: bool = False) -> int:
    """Build the star; write its profile table and metadata."""
    out_dir = Path(config.output_dir)
    star = _build_or_report(config, out_dir)
    if star is None:
        return EXIT_BUILD

    key = config.star_key()
    record = star_record(star, config)
    profiles = star.profile_table()
    save_csv(profiles, out_dir / f"profiles_{key}.csv")
    save_json(record, out_dir / f"star_{key}.json")
    print(f"Saved {len(profiles)} profile rows to {out_dir / f'profiles_{key}.csv'}")
    print(f"Saved star metadata to {out_dir / f'star_{key}.json'}")

    admissible = record["admissibility"]["passed"]
    print("\nSummary:")
    print(f"  R = {star.radius_R:.10g}, M = {star.mass:.10g}, nu = {star.nu:.6g}")
    print(f"  admissible: {admissible}")
    if not admissible:
        failed = [c["name"] for c in record["admissibility"]["checks"] if not c["passed"]]
        print(f"  failed checks: {', '.join(failed)}")

    if export_db:
        export_to_db(str(out_dir), config.database_url, grouped={"stars": [record]})
    return EXIT_OK if admissible else EXIT_BUILD


async def cmd_spectrum(config: RunConfig, export_db: bool = False, refresh_cache: bool = False) -> int:
    """Compute every requested mode; write the mode table as CSV and JSON."""
    out_dir = Path(config.output_dir)
    star = await asyncio.to_thread(_build_or_report, config, out_dir)
    if star is None:
        return EXIT_BUILD

    cache = ResultCache(config.cache_path or str(out_dir / ".stellar_modes_cache.json"))
    if not refresh_cache:
        cache.load()
    rows = await _compute_all(star, config.modes, config, cache)
    cache.save()

    key = config.star_key()
    record = star_record(star, config)
    save_json(record, out_dir / f"star_{key}.json")
    save_json(rows, out_dir / f"modes_{key}.json")
    save_csv(rows, out_dir / f"modes_{key}.csv")
    print(f"Saved {len(rows)} modes to {out_dir / f'modes_{key}.csv'}")

    print("\nSummary:")
    grouped: dict[tuple, list[dict]] = {}
    for row in rows:
        grouped.setdefault((row["l"], row["branch"], row.get("formulation", "gough")), []).append(row)
    for (l, branch, formulation), group in grouped.items():
        failed = sum(1 for row in group if "error" in row)
        print(f"  l={l} {branch} ({formulation}): {len(group) - failed} modes, {failed} failed")
    deltas = [row["delta_cross"] for row in rows if row.get("delta_cross") is not None]
    if deltas:
        print(f"  max |dlambda/lambda| between formulations: {max(deltas):.3e}")

    if export_db:
        export_to_db(str(out_dir), config.database_url, grouped={"stars": [record], "modes": rows})
    return EXIT_OK


def cmd_validate(config: RunConfig) -> int:
    """Run the invariant suite and print the pass/fail matrix."""
    out_dir = Path(config.output_dir)
    star = _build_or_report(config, out_dir)
    if star is None:
        return EXIT_BUILD

    report = run_invariant_suite(star, config.tolerances, seed=config.seed)
    path = out_dir / f"validation_{config.star_key()}.json"
    save_json(report.to_dict(), path)

    print("\nInvariant checks:")
    for check in report.checks:
        print(f"  {check.name:<28} {check.status:<4}  value={check.value:.3e}  threshold={check.threshold:.1e}")
    print(f"Saved validation report to {path}")
    return EXIT_OK if report.passed else EXIT_VALIDATION


async def cmd_compare(config: RunConfig, export_db: bool = False, refresh_cache: bool = False) -> int:
    """Both formulations and Cowling against full for every nonradial request."""
    out_dir = Path(config.output_dir)
    star = await asyncio.to_thread(_build_or_report, config, out_dir)
    if star is None:
        return EXIT_BUILD

    nonradial = [m for m in config.modes if m.branch != "radial"]
    variants = [replace(m, formulation="both", cowling=False) for m in nonradial]
    variants += [replace(m, formulation="gough", cowling=True) for m in nonradial]
    cache = ResultCache(config.cache_path or str(out_dir / ".stellar_modes_cache.json"))
    if not refresh_cache:
        cache.load()
    rows = await _compute_all(star, variants, config, cache)
    cache.save()
    record = star_record(star, config)
    save_json(record, out_dir / f"star_{config.star_key()}.json")

    table: dict[tuple, dict[str, Any]] = {}
    for row in rows:
        if "lambda" not in row:
            continue
        entry = table.setdefault((row["l"], row["branch"], row["n"]),
                                 {"l": row["l"], "branch": row["branch"], "n": row["n"]})
        if row["cowling"]:
            entry["lambda_cowling"] = row["lambda"]
        else:
            entry[f"lambda_{row['formulation']}"] = row["lambda"]
    for entry in table.values():
        full = entry.get("lambda_gough")
        if full and "lambda_ode4" in entry:
            entry["delta_cross"] = abs(entry["lambda_ode4"] - full) / abs(full)
        if full and "lambda_cowling" in entry:
            entry["cowling_shift"] = abs(entry["lambda_cowling"] - full) / abs(full)
    compare_rows = sorted(table.values(), key=lambda e: (e["branch"], e["n"], e["l"]))
    save_csv(compare_rows, out_dir / "compare.csv")
    save_json(compare_rows, out_dir / "compare.json")
    print(f"Saved {len(compare_rows)} comparison rows to {out_dir / 'compare.csv'}")

    for request in nonradial:
        refs = [e["lambda_gough"] for e in compare_rows
                if e["l"] == request.l and e["branch"] == request.branch and "lambda_gough" in e]
        if not refs or star.rational_nu is None:
            continue
        try:
            curve = await asyncio.to_thread(
                scan_curve, star, request.l, (0.8 * min(refs), 1.2 * max(refs)), 40, None, config.tolerances,
            )
        except StellarModesError as e:
            logger.warning("Scan curve for l=%d %s failed: %s", request.l, request.branch, e)
            continue
        path = out_dir / f"scan_l{request.l}_{request.branch}.csv"
        save_csv(curve, path)
        print(f"Saved {len(curve)} scan points to {path}")

    print("\nSummary:")
    deltas = [e["delta_cross"] for e in compare_rows if "delta_cross" in e]
    if deltas:
        print(f"  max |dlambda/lambda| between formulations: {max(deltas):.3e}")
    for branch, n in sorted({(e["branch"], e["n"]) for e in compare_rows}):
        shifts = [(e["l"], e["cowling_shift"]) for e in compare_rows
                  if e["branch"] == branch and e["n"] == n and "cowling_shift" in e]
        if shifts:
            trend = ", ".join(f"l={l}: {s:.3e}" for l, s in sorted(shifts))
            print(f"  Cowling shift {branch}{n}: {trend}")

    if export_db:
        export_to_db(str(out_dir), config.database_url, grouped={"stars": [record], "modes": rows})
    return EXIT_OK


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------

def _load_config(args: argparse.Namespace) -> RunConfig:
    config = RunConfig.from_file(args.config)
    if args.out:
        config.output_dir = args.out
    if args.jobs is not None:
        if args.jobs < 1:
            raise ConfigError(f"--jobs must be at least 1, got {args.jobs}")
        config.jobs = args.jobs
    if args.strict:
        config.strict = True
    if args.tau is not None:
        if args.tau <= 0:
            raise ConfigError(f"--tau must be positive, got {args.tau}")
        config.tau = args.tau
    if args.tolerance_scale is not None:
        config.tolerances = config.tolerances.scaled(args.tolerance_scale)
    if args.database_url:
        config.database_url = args.database_url
    return config


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="Run configuration JSON file")
    common.add_argument("--out", default=None, help="Output directory (overrides output_dir)")
    common.add_argument("--jobs", type=int, default=None, help="Worker threads for mode requests")
    common.add_argument("--strict", action="store_true", help="Raise on flagged results instead of warning")
    common.add_argument("--tau", type=float, default=None, help="Rescale the star by tau after building")
    common.add_argument(
        "--tolerance-scale", type=float, default=None,
        help="Multiply every tolerance by this factor (e.g. 0.1 to tighten)",
    )
    common.add_argument("--export-db", action="store_true", help="Export results to PostgreSQL")
    common.add_argument(
        "--database-url", type=str, default=None,
        help="PostgreSQL connection URL. Also reads DATABASE_URL env var.",
    )
    common.add_argument("--refresh-cache", action="store_true", help="Ignore cached spectra")
    common.add_argument(
        "--log-level", default="WARNING", choices=["DEBUG", "INFO", "WARNING", "ERROR"],
        help="Logging level",
    )

    parser = argparse.ArgumentParser(description="Stellar Modes - equilibria and oscillation spectra")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("equilibrium", parents=[common], help="Build the star and write its profiles")
    sub.add_parser("spectrum", parents=[common], help="Compute the requested modes")
    sub.add_parser("validate", parents=[common], help="Run the invariant suite")
    sub.add_parser("compare", parents=[common], help="Cross-check formulations and Cowling")
    return parser


async def async_main(argv: list[str] | None = None) -> int:
    """Async main entry point for the CLI; returns the exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=getattr(logging, args.log_level),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        config = _load_config(args)
    except ConfigError as e:
        print(f"Invalid configuration: {e}")
        return EXIT_VALIDATION

    if args.command == "equilibrium":
        return cmd_equilibrium(config, args.export_db)
    if args.command == "spectrum":
        return await cmd_spectrum(config, args.export_db, args.refresh_cache)
    if args.command == "validate":
        return cmd_validate(config)
    return await cmd_compare(config, args.export_db, args.refresh_cache)


def main() -> None:
    """Main entry point for the CLI (synchronous wrapper for async_main)."""
    sys.exit(asyncio.run(async_main()))


if __name__ == "__main__":
    main()

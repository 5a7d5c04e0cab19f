"""Command-line pipeline: synth -> ingest -> fit -> simulate -> compare.

Every subcommand reads its declared inputs, writes its declared outputs
and drops a manifest beside them.  Exit codes: 0 success, 2 usage error,
3 input validation failure, 4 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .coords import CoordinateDomainError
from .demand import (
    IDENTITY_SCENARIO,
    ScenarioError,
    load_scenario,
    scenario_to_dict,
)
from .distributions import NoDataError, fit_models, load_model, save_model
from .dwell import InsufficientDataError
from .ingest import (
    IngestError,
    build_total_log,
    read_counts_csv,
    read_events_csv,
    read_total_log,
    write_counts_csv,
    write_events_csv,
    write_rejection_report,
    write_total_log,
)
from .kpi import (
    KpiError,
    align,
    compare,
    compute_stop_series,
    compute_trip_series,
    log_observations,
    save_summary,
    series_bundle_from_dict,
    write_comparison_tables,
    write_series_tables,
)
from .manifest import MANIFEST_NAME, build_manifest, write_manifest
from .network import DIRECTIONS, NetworkError, load_network, save_network
from .runner import simulate_runs
from .synth import (
    GroundTruthError,
    build_network,
    default_truth,
    load_truth,
    save_truth,
    synth_days,
)

_VALIDATION_ERRORS = (
    NetworkError,
    IngestError,
    ScenarioError,
    GroundTruthError,
    NoDataError,
    CoordinateDomainError,
    KpiError,
    InsufficientDataError,
    FileNotFoundError,
    json.JSONDecodeError,
)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="buslinesim",
        description="Simulate a two-direction high-frequency bus line from operational logs.",
    )
    parser.add_argument("--version", action="version", version=f"buslinesim {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic line and raw logs from ground truth")
    p.add_argument("--truth", help="ground-truth file (JSON); defaults to the built-in line")
    p.add_argument("--days", type=int, default=5, help="number of service days (default 5)")
    p.add_argument("--seed", type=int, default=1, help="master seed (default 1)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("ingest", help="build the total log from raw event and passenger files")
    p.add_argument("--events", required=True, help="event log (CSV)")
    p.add_argument("--passengers", required=True, help="passenger counts (CSV)")
    p.add_argument("--network", required=True, help="network definition (JSON)")
    p.add_argument("--out", required=True, help="total log output path (JSON lines)")
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("fit", help="fit empirical models from a total log")
    p.add_argument("--totallog", required=True, help="total log (JSON lines)")
    p.add_argument("--network", required=True, help="network definition (JSON)")
    p.add_argument("--out", required=True, help="model bundle output path (JSON)")
    p.add_argument(
        "--min-samples",
        type=int,
        default=5,
        help="per-trip observations required before pooling kicks in (default 5)",
    )
    p.add_argument(
        "--refit-door",
        action="store_true",
        help="refit door-time coefficients instead of using the published defaults",
    )
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("simulate", help="run Monte-Carlo replications of a service day")
    p.add_argument("--models", required=True, help="model bundle (JSON)")
    p.add_argument("--scenario", help="passenger-growth scenario (JSON); default: baseline")
    p.add_argument("--runs", type=int, default=100, help="replication count (default 100)")
    p.add_argument("--seed", type=int, default=1, help="master seed (default 1)")
    p.add_argument("--jobs", type=int, default=1, help="parallel worker processes (default 1)")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="compare two KPI sources (simulation summaries or total logs)")
    p.add_argument("--model", required=True, help="summary.json or total log (.jsonl)")
    p.add_argument("--reference", required=True, help="summary.json or total log (.jsonl)")
    p.add_argument("--network", help="network definition; required when a side is a total log")
    p.add_argument("--charts", action="store_true", help="also emit SVG charts per trip-level table")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_compare)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _VALIDATION_ERRORS as exc:
        print(f"buslinesim: input validation failed: {exc}", file=sys.stderr)
        return 3
    except Exception as exc:  # noqa: BLE001 - the CLI boundary reports and exits
        print(f"buslinesim: runtime failure: {exc!r}", file=sys.stderr)
        return 4


def _outdir(path: str) -> Path:
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_synth(args) -> int:
    truth = load_truth(args.truth) if args.truth else default_truth()
    inputs = {"truth": args.truth} if args.truth else {}
    manifest = build_manifest(
        "synth",
        inputs,
        {"days": args.days},
        outputs=[
            "network.json",
            "truth.json",
            "events.csv",
            "passengers.csv",
            "expected_total_log.jsonl",
            "expected_rejections.json",
        ],
        master_seed=args.seed,
    )
    network = build_network(truth)
    days = synth_days(truth, network, args.days, args.seed)
    out = _outdir(args.out)
    save_network(network, out / "network.json")
    save_truth(truth, out / "truth.json")
    events = [e for day in days for e in day.events]
    counts = {}
    for day in days:
        counts.update(day.counts)
    write_events_csv(events, out / "events.csv")
    write_counts_csv(counts, out / "passengers.csv")
    write_total_log(
        [r for day in days for r in day.expected_records], out / "expected_total_log.jsonl"
    )
    rejections = [
        {"service_date": d, "trip_id": t, "reason": r}
        for day in days
        for d, t, r in day.expected_rejections
    ]
    (out / "expected_rejections.json").write_text(
        json.dumps({"rejections": rejections}, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    write_manifest(manifest, out / MANIFEST_NAME)
    print(
        f"synth: {args.days} day(s), {len(network.trips)} trips/day, "
        f"{len(events)} events, {len(rejections)} injected corruptions -> {out}"
    )
    return 0


def cmd_ingest(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    rejections_path = out.with_name(out.stem + ".rejections.json")
    manifest = build_manifest(
        "ingest",
        {"events": args.events, "passengers": args.passengers, "network": args.network},
        {},
        outputs=[out.name, rejections_path.name],
    )
    network = load_network(args.network)
    events, kar, unattributed = read_events_csv(args.events)
    counts = read_counts_csv(args.passengers)
    records, report = build_total_log(events, counts, network)
    report.dropped_kar_events = kar
    report.dropped_unattributed_events = unattributed
    write_total_log(records, out)
    write_rejection_report(report, rejections_path)
    write_manifest(manifest, out.with_name(out.stem + ".manifest.json"))
    flags = f" flags={report.flags()}" if report.flags() else ""
    print(
        f"ingest: accepted {report.accepted}, rejected {report.rejected} "
        f"({report.rejection_rate:.1%}){flags} -> {out}"
    )
    return 0


def cmd_fit(args) -> int:
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    manifest = build_manifest(
        "fit",
        {"totallog": args.totallog, "network": args.network},
        {"min_samples": args.min_samples, "refit_door": args.refit_door},
        outputs=[out.name],
    )
    network = load_network(args.network)
    records = read_total_log(args.totallog)
    model = fit_models(records, network, min_samples=args.min_samples, refit_door=args.refit_door)
    save_model(model, out)
    write_manifest(manifest, out.with_name(out.stem + ".manifest.json"))
    print(
        f"fit: {len(records)} records -> {len(model.travel_time)} travel-time distributions, "
        f"{len(model.rates.rates)} boarding rates -> {out}"
    )
    return 0


def cmd_simulate(args) -> int:
    inputs = {"models": args.models}
    if args.scenario:
        inputs["scenario"] = args.scenario
    manifest = build_manifest(
        "simulate",
        inputs,
        {"jobs": args.jobs},
        outputs=["summary.json"],
        master_seed=args.seed,
        replications=args.runs,
    )
    models = load_model(args.models)
    scenario = load_scenario(args.scenario) if args.scenario else IDENTITY_SCENARIO
    result = simulate_runs(models, scenario, args.runs, args.seed, jobs=args.jobs)
    out = _outdir(args.out)
    summary = result.to_summary_dict()
    summary["scenario"] = scenario_to_dict(scenario)
    save_summary(summary, out / "summary.json")
    tables = write_series_tables(result.kpi, out)
    manifest["outputs"] = sorted(["summary.json"] + [t.name for t in tables])
    write_manifest(manifest, out / MANIFEST_NAME)
    violations = len(result.audit_violations)
    print(
        f"simulate: {args.runs} run(s), seed {args.seed}, "
        f"{result.boardings_total} boardings, {violations} audit violation(s) -> {out}"
    )
    if violations:
        print("buslinesim: invariant violations detected, see summary.json", file=sys.stderr)
        return 4
    return 0


def _load_kpi_bundle(path: str, network_path: str | None):
    source = Path(path)
    if source.suffix == ".jsonl":
        if not network_path:
            raise KpiError(f"{path}: comparing a total log requires --network")
        network = load_network(network_path)
        records = read_total_log(source)
        observations = log_observations(records, network)
        bundle: dict = {"per_stop": {}, "per_trip": {}}
        for direction in DIRECTIONS:
            bundle["per_stop"][direction] = compute_stop_series(observations, direction)
            bundle["per_trip"][direction] = compute_trip_series(observations, direction)
        return bundle
    doc = json.loads(source.read_text(encoding="utf-8"))
    if "kpi" not in doc:
        raise KpiError(f"{path}: not a simulation summary (missing 'kpi')")
    return series_bundle_from_dict(doc["kpi"])


def cmd_compare(args) -> int:
    inputs = {"model": args.model, "reference": args.reference}
    if args.network:
        inputs["network"] = args.network
    manifest = build_manifest("compare", inputs, {"charts": args.charts}, outputs=[])
    model_bundle = _load_kpi_bundle(args.model, args.network)
    reference_bundle = _load_kpi_bundle(args.reference, args.network)
    tables = []
    for axis, by_direction in sorted(model_bundle.items()):
        for direction, by_indicator in sorted(by_direction.items()):
            for indicator, model_series in sorted(by_indicator.items()):
                try:
                    reference_series = reference_bundle[axis][direction][indicator]
                except KeyError:
                    continue
                aligned_model, aligned_ref = align(model_series, reference_series)
                if not aligned_model.values:
                    continue
                tables.append(compare(aligned_model, aligned_ref))
    if not tables:
        raise KpiError("no shared indicators between the two sources")
    out = _outdir(args.out)
    written = write_comparison_tables(tables, out)
    combined = {}
    for table in tables:
        combined.setdefault(table.axis, {}).setdefault(table.direction, {})[table.indicator] = {
            "mae": table.mae,
            "mean_abs_diff_pct": table.mean_abs_diff_pct,
            "rows": {
                str(row.key): {
                    "reference": row.reference,
                    "model": row.model,
                    "abs_diff": row.abs_diff,
                    "abs_diff_pct": row.abs_diff_pct,
                }
                for row in table.rows
            },
        }
    save_summary(combined, out / "comparison.json")
    outputs = ["comparison.json"] + [t.name for t in written]
    if args.charts:
        from .kpi import write_comparison_charts

        charts_dir = out / "charts"
        charts_dir.mkdir(exist_ok=True)
        charts = write_comparison_charts(tables, charts_dir)
        outputs.extend(f"charts/{c.name}" for c in charts)
    manifest["outputs"] = sorted(outputs)
    write_manifest(manifest, out / MANIFEST_NAME)
    print(f"compare: {len(tables)} table(s) -> {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

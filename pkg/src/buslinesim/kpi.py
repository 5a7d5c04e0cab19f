"""Performance indicators over simulation traces or ingested total logs.

Punctuality is the signed deviation of actual from scheduled departure
(positive = late); because early and late cancel, the mean-absolute form
is reported alongside.  Regularity is the relative deviation of actual
headway from scheduled headway, with the absolute form as the headline
number and the signed form as a companion.  Occupancy counts passengers
on board after leaving a stop.  Final stops report no punctuality, dwell
or occupancy, and first stops no travel time.
"""

from __future__ import annotations

import csv
import json
import statistics
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .engine import ReplicationTrace
from .network import RouteNetwork

PER_STOP = "per_stop"
PER_TRIP = "per_trip"

PUNCTUALITY = "punctuality_s"
PUNCTUALITY_ABS = "punctuality_abs_s"
REGULARITY = "regularity"
REGULARITY_SIGNED = "regularity_signed"
OCCUPANCY = "occupancy_pax"
TRAVEL_TIME = "travel_time_s"
DWELL_TIME = "dwell_time_s"
WAITING_TIME = "waiting_time_s"

STOP_INDICATORS = (
    PUNCTUALITY,
    PUNCTUALITY_ABS,
    REGULARITY,
    REGULARITY_SIGNED,
    OCCUPANCY,
    TRAVEL_TIME,
    DWELL_TIME,
)


class KpiError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class StopObs:
    """One (trip, stop) observation, from either a trace or a total log."""

    direction: str
    trip_id: int
    stop_index: int
    scheduled_departure_s: float
    departure_s: float | None
    travel_time_s: float | None
    dwell_time_s: float | None
    occupancy_after: float | None
    boardings: float
    alightings: float
    #: Groups one service day (or one replication): headways only pair
    #: departures within the same block.
    block: int = 0


@dataclass(frozen=True, slots=True)
class Stat:
    mean: float
    n: int
    std: float


@dataclass(frozen=True)
class KpiSeries:
    indicator: str
    direction: str
    axis: str
    values: dict[object, Stat]


def trace_observations(trace: ReplicationTrace) -> list[StopObs]:
    obs = []
    for v in trace.visits:
        final = v.departure_s is None
        obs.append(
            StopObs(
                direction=v.direction,
                trip_id=v.trip_id,
                stop_index=v.stop_index,
                scheduled_departure_s=v.scheduled_departure_s,
                departure_s=v.departure_s,
                travel_time_s=v.travel_time_s,
                dwell_time_s=v.dwell_time_s,
                occupancy_after=None if final else float(v.onboard_after),
                boardings=v.boardings,
                alightings=v.alightings,
                block=trace.replication,
            )
        )
    return obs


def log_observations(records: Iterable, network: RouteNetwork) -> list[StopObs]:
    """Adapt ingested trip records to KPI observations.

    Final-stop departure-based fields are masked so the log side matches
    what a trace reports (the simulated trip ends on arrival there).
    """
    obs = []
    for record in records:
        if record.trip_id not in network.trips:
            raise KpiError(f"trip {record.trip_id} not in the network schedule")
        trip = network.trips[record.trip_id]
        direction = trip.direction
        last = trip.n_stops - 1
        onboard = 0.0
        for i, stop in enumerate(record.stops):
            onboard += stop.check_ins - stop.check_outs
            final = i == last
            scheduled = trip.scheduled_departures[i]
            departure = None
            if not final and stop.punctuality_s is not None:
                departure = scheduled + stop.punctuality_s
            obs.append(
                StopObs(
                    direction=direction,
                    trip_id=record.trip_id,
                    stop_index=i,
                    scheduled_departure_s=scheduled,
                    departure_s=departure,
                    travel_time_s=stop.travel_time_s if i > 0 else None,
                    dwell_time_s=stop.dwell_time_s if 0 < i < last else None,
                    occupancy_after=None if final else onboard,
                    boardings=stop.check_ins,
                    alightings=stop.check_outs,
                    block=record.service_date.toordinal(),
                )
            )
    return obs


# --- scalar per-stop operations ------------------------------------------------


def punctuality_per_stop(
    observations: Sequence[StopObs], direction: str, stop_index: int
) -> tuple[float, float]:
    """Mean signed and mean absolute departure deviation at one stop."""
    deviations = [
        o.departure_s - o.scheduled_departure_s
        for o in observations
        if o.direction == direction and o.stop_index == stop_index and o.departure_s is not None
    ]
    if not deviations:
        raise KpiError(f"no-departures: direction {direction} stop {stop_index}")
    return statistics.fmean(deviations), statistics.fmean(map(abs, deviations))


def _headway_deviations(
    observations: Sequence[StopObs], direction: str, stop_index: int
) -> list[tuple[int, float, float]]:
    """(trip_id, absolute, signed) relative headway deviations at a stop.

    Departures are paired in scheduled order within each block (service day
    or replication); each deviation is attributed to the later trip.
    """
    blocks: dict[int, list[StopObs]] = {}
    for o in observations:
        if o.direction == direction and o.stop_index == stop_index and o.departure_s is not None:
            blocks.setdefault(o.block, []).append(o)
    out = []
    for _block, at_stop in sorted(blocks.items()):
        at_stop.sort(key=lambda o: (o.scheduled_departure_s, o.trip_id))
        for prev, cur in zip(at_stop, at_stop[1:]):
            h_sched = cur.scheduled_departure_s - prev.scheduled_departure_s
            if h_sched <= 0:
                raise KpiError(
                    f"zero-scheduled-headway: direction {direction} stop {stop_index} "
                    f"trips {prev.trip_id}->{cur.trip_id}"
                )
            h_act = cur.departure_s - prev.departure_s
            rel = (h_act - h_sched) / h_sched
            out.append((cur.trip_id, abs(rel), rel))
    return out


def regularity_per_stop(
    observations: Sequence[StopObs], direction: str, stop_index: int
) -> tuple[float, float]:
    """Mean absolute and mean signed relative headway deviation at one stop."""
    deviations = _headway_deviations(observations, direction, stop_index)
    if not deviations:
        raise KpiError(f"no-departures: fewer than 2 departures at stop {stop_index}")
    return (
        statistics.fmean(d[1] for d in deviations),
        statistics.fmean(d[2] for d in deviations),
    )


def occupancy_per_stop(
    observations: Sequence[StopObs], direction: str, stop_index: int
) -> float:
    """Mean passengers on board after departing one stop."""
    values = [
        o.occupancy_after
        for o in observations
        if o.direction == direction and o.stop_index == stop_index
    ]
    if values and all(v is None for v in values):
        raise KpiError(f"final-stop-undefined: occupancy at stop {stop_index}")
    values = [v for v in values if v is not None]
    if not values:
        raise KpiError(f"no-departures: direction {direction} stop {stop_index}")
    return statistics.fmean(values)


# --- series --------------------------------------------------------------------


def _stat(values: Sequence[float]) -> Stat:
    n = len(values)
    mean = statistics.fmean(values)
    std = statistics.stdev(values) if n >= 2 else 0.0
    return Stat(mean, n, std)


def _series_from_groups(indicator, direction, axis, groups: dict) -> KpiSeries:
    return KpiSeries(
        indicator,
        direction,
        axis,
        {key: _stat(vals) for key, vals in sorted(groups.items()) if vals},
    )


def compute_stop_series(
    observations: Sequence[StopObs], direction: str
) -> dict[str, KpiSeries]:
    """All per-stop indicator series for one direction."""
    punct: dict[int, list[float]] = {}
    punct_abs: dict[int, list[float]] = {}
    occ: dict[int, list[float]] = {}
    tt: dict[int, list[float]] = {}
    dt: dict[int, list[float]] = {}
    stops = set()
    for o in observations:
        if o.direction != direction:
            continue
        stops.add(o.stop_index)
        if o.departure_s is not None:
            dev = o.departure_s - o.scheduled_departure_s
            punct.setdefault(o.stop_index, []).append(dev)
            punct_abs.setdefault(o.stop_index, []).append(abs(dev))
        if o.occupancy_after is not None:
            occ.setdefault(o.stop_index, []).append(o.occupancy_after)
        if o.travel_time_s is not None:
            tt.setdefault(o.stop_index, []).append(o.travel_time_s)
        if o.dwell_time_s is not None:
            dt.setdefault(o.stop_index, []).append(o.dwell_time_s)
    reg_abs: dict[int, list[float]] = {}
    reg_signed: dict[int, list[float]] = {}
    for stop_index in sorted(stops):
        for _trip, abs_dev, signed_dev in _headway_deviations(observations, direction, stop_index):
            reg_abs.setdefault(stop_index, []).append(abs_dev)
            reg_signed.setdefault(stop_index, []).append(signed_dev)
    return {
        PUNCTUALITY: _series_from_groups(PUNCTUALITY, direction, PER_STOP, punct),
        PUNCTUALITY_ABS: _series_from_groups(PUNCTUALITY_ABS, direction, PER_STOP, punct_abs),
        REGULARITY: _series_from_groups(REGULARITY, direction, PER_STOP, reg_abs),
        REGULARITY_SIGNED: _series_from_groups(REGULARITY_SIGNED, direction, PER_STOP, reg_signed),
        OCCUPANCY: _series_from_groups(OCCUPANCY, direction, PER_STOP, occ),
        TRAVEL_TIME: _series_from_groups(TRAVEL_TIME, direction, PER_STOP, tt),
        DWELL_TIME: _series_from_groups(DWELL_TIME, direction, PER_STOP, dt),
    }


def compute_trip_series(
    observations: Sequence[StopObs], direction: str
) -> dict[str, KpiSeries]:
    """Per-trip series: each trip averaged over all its stops."""
    punct: dict[int, list[float]] = {}
    punct_abs: dict[int, list[float]] = {}
    occ: dict[int, list[float]] = {}
    tt: dict[int, list[float]] = {}
    dt: dict[int, list[float]] = {}
    stops = set()
    for o in observations:
        if o.direction != direction:
            continue
        stops.add(o.stop_index)
        if o.departure_s is not None:
            dev = o.departure_s - o.scheduled_departure_s
            punct.setdefault(o.trip_id, []).append(dev)
            punct_abs.setdefault(o.trip_id, []).append(abs(dev))
        if o.occupancy_after is not None:
            occ.setdefault(o.trip_id, []).append(o.occupancy_after)
        if o.travel_time_s is not None:
            tt.setdefault(o.trip_id, []).append(o.travel_time_s)
        if o.dwell_time_s is not None:
            dt.setdefault(o.trip_id, []).append(o.dwell_time_s)
    reg_abs: dict[int, list[float]] = {}
    reg_signed: dict[int, list[float]] = {}
    for stop_index in sorted(stops):
        for trip_id, abs_dev, signed_dev in _headway_deviations(observations, direction, stop_index):
            reg_abs.setdefault(trip_id, []).append(abs_dev)
            reg_signed.setdefault(trip_id, []).append(signed_dev)
    return {
        PUNCTUALITY: _series_from_groups(PUNCTUALITY, direction, PER_TRIP, punct),
        PUNCTUALITY_ABS: _series_from_groups(PUNCTUALITY_ABS, direction, PER_TRIP, punct_abs),
        REGULARITY: _series_from_groups(REGULARITY, direction, PER_TRIP, reg_abs),
        REGULARITY_SIGNED: _series_from_groups(REGULARITY_SIGNED, direction, PER_TRIP, reg_signed),
        OCCUPANCY: _series_from_groups(OCCUPANCY, direction, PER_TRIP, occ),
        TRAVEL_TIME: _series_from_groups(TRAVEL_TIME, direction, PER_TRIP, tt),
        DWELL_TIME: _series_from_groups(DWELL_TIME, direction, PER_TRIP, dt),
    }


def waiting_series(trace: ReplicationTrace) -> dict[str, KpiSeries]:
    """Per-stop waiting time of boarded passengers, simulation-only."""
    groups: dict[str, dict[int, list[float]]] = {"A": {}, "B": {}}
    for p in trace.passengers:
        wait = p.waiting_time_s
        if wait is not None:
            groups[p.direction].setdefault(p.origin, []).append(wait)
    return {
        d: _series_from_groups(WAITING_TIME, d, PER_STOP, g) for d, g in groups.items()
    }


def aggregate_runs(series_list: Sequence[KpiSeries]) -> KpiSeries:
    """Pool runs of one series: per-key mean weighted by sample counts,
    with the across-run standard deviation of run means."""
    if not series_list:
        raise KpiError("nothing to aggregate")
    head = series_list[0]
    for s in series_list[1:]:
        if (s.indicator, s.direction, s.axis) != (head.indicator, head.direction, head.axis):
            raise KpiError(
                f"mixed-axis: cannot pool {s.indicator}/{s.direction}/{s.axis} "
                f"with {head.indicator}/{head.direction}/{head.axis}"
            )
    sums: dict[object, float] = {}
    counts: dict[object, int] = {}
    run_means: dict[object, list[float]] = {}
    for s in series_list:
        for key, stat in s.values.items():
            sums[key] = sums.get(key, 0.0) + stat.mean * stat.n
            counts[key] = counts.get(key, 0) + stat.n
            run_means.setdefault(key, []).append(stat.mean)
    values = {}
    for key in sorted(sums):
        means = run_means[key]
        across = statistics.stdev(means) if len(means) >= 2 else 0.0
        values[key] = Stat(sums[key] / counts[key], counts[key], across)
    return KpiSeries(head.indicator, head.direction, head.axis, values)


# --- comparison -----------------------------------------------------------------


@dataclass(frozen=True)
class ComparisonRow:
    key: object
    reference: float
    model: float
    abs_diff: float
    abs_diff_pct: float | None


@dataclass(frozen=True)
class ComparisonTable:
    indicator: str
    direction: str
    axis: str
    rows: tuple[ComparisonRow, ...]
    mae: float
    mean_abs_diff_pct: float | None


def compare(model: KpiSeries, reference: KpiSeries) -> ComparisonTable:
    """Reference vs model per key, with |diff|, |diff|% and summary rows."""
    if (model.indicator, model.direction, model.axis) != (
        reference.indicator,
        reference.direction,
        reference.axis,
    ):
        raise KpiError("mixed-axis: comparison inputs must share indicator, direction and axis")
    if set(model.values) != set(reference.values):
        missing = set(reference.values) ^ set(model.values)
        raise KpiError(f"key-mismatch: {sorted(missing, key=str)}")
    rows = []
    for key in sorted(model.values):
        ref = reference.values[key].mean
        mod = model.values[key].mean
        diff = abs(mod - ref)
        pct = 100.0 * diff / abs(ref) if ref != 0 else None
        rows.append(ComparisonRow(key, ref, mod, diff, pct))
    if not rows:
        raise KpiError("key-mismatch: empty comparison")
    mae = statistics.fmean(r.abs_diff for r in rows)
    pcts = [r.abs_diff_pct for r in rows if r.abs_diff_pct is not None]
    mean_pct = statistics.fmean(pcts) if pcts else None
    return ComparisonTable(model.indicator, model.direction, model.axis, tuple(rows), mae, mean_pct)


# --- serialization ---------------------------------------------------------------


def series_bundle_to_dict(bundle: dict[str, dict[str, dict[str, KpiSeries]]]) -> dict:
    """Nested {axis: {direction: {indicator: series}}} to plain JSON data."""
    out: dict = {}
    for axis, by_direction in sorted(bundle.items()):
        out[axis] = {}
        for direction, by_indicator in sorted(by_direction.items()):
            out[axis][direction] = {}
            for indicator, series in sorted(by_indicator.items()):
                out[axis][direction][indicator] = {
                    str(key): {"mean": stat.mean, "n": stat.n, "std": stat.std}
                    for key, stat in sorted(series.values.items())
                }
    return out


def series_bundle_from_dict(doc: dict) -> dict[str, dict[str, dict[str, KpiSeries]]]:
    bundle: dict = {}
    for axis, by_direction in doc.items():
        bundle[axis] = {}
        for direction, by_indicator in by_direction.items():
            bundle[axis][direction] = {}
            for indicator, values in by_indicator.items():
                parsed = {
                    int(key): Stat(cell["mean"], cell["n"], cell["std"])
                    for key, cell in values.items()
                }
                bundle[axis][direction][indicator] = KpiSeries(indicator, direction, axis, parsed)
    return bundle


def align(model: KpiSeries, reference: KpiSeries) -> tuple[KpiSeries, KpiSeries]:
    """Restrict both series to their shared keys (for pipeline comparisons
    where one side is missing trips, e.g. rejected log records)."""
    shared = sorted(set(model.values) & set(reference.values), key=str)
    return (
        KpiSeries(model.indicator, model.direction, model.axis, {k: model.values[k] for k in shared}),
        KpiSeries(
            reference.indicator,
            reference.direction,
            reference.axis,
            {k: reference.values[k] for k in shared},
        ),
    )


def write_series_tables(bundle: dict, out_dir: str | Path) -> list[Path]:
    """One delimited table per indicator per axis, both directions stacked."""
    out_dir = Path(out_dir)
    by_file: dict[tuple[str, str], list[KpiSeries]] = {}
    for axis, by_direction in sorted(bundle.items()):
        for _direction, by_indicator in sorted(by_direction.items()):
            for indicator, series in sorted(by_indicator.items()):
                by_file.setdefault((axis, indicator), []).append(series)
    written = []
    for (axis, indicator), series_list in sorted(by_file.items()):
        path = out_dir / f"{axis}_{indicator}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["direction", "key", "mean", "n", "std"])
            for series in series_list:
                for key, stat in sorted(series.values.items()):
                    writer.writerow(
                        [series.direction, key, f"{stat.mean:.6f}", stat.n, f"{stat.std:.6f}"]
                    )
        written.append(path)
    return written


def write_comparison_tables(
    tables: Sequence[ComparisonTable], out_dir: str | Path
) -> list[Path]:
    """One delimited table per indicator per axis, with per-direction
    MAE and mean-|diff|% summary rows."""
    out_dir = Path(out_dir)
    by_file: dict[tuple[str, str], list[ComparisonTable]] = {}
    for table in tables:
        by_file.setdefault((table.axis, table.indicator), []).append(table)
    written = []
    for (axis, indicator), group in sorted(by_file.items()):
        path = out_dir / f"compare_{axis}_{indicator}.csv"
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(
                ["direction", "key", "reference", "model", "abs_diff", "abs_diff_pct"]
            )
            for table in sorted(group, key=lambda t: t.direction):
                for row in table.rows:
                    writer.writerow(
                        [
                            table.direction,
                            row.key,
                            f"{row.reference:.6f}",
                            f"{row.model:.6f}",
                            f"{row.abs_diff:.6f}",
                            "NA" if row.abs_diff_pct is None else f"{row.abs_diff_pct:.6f}",
                        ]
                    )
                writer.writerow([table.direction, "MAE", "", "", f"{table.mae:.6f}", ""])
                writer.writerow(
                    [
                        table.direction,
                        "AVG_PCT",
                        "",
                        "",
                        "",
                        "NA"
                        if table.mean_abs_diff_pct is None
                        else f"{table.mean_abs_diff_pct:.6f}",
                    ]
                )
        written.append(path)
    return written


def write_comparison_charts(
    tables: Sequence[ComparisonTable], out_dir: str | Path
) -> list[Path]:
    """Optional SVG line charts for per-trip comparison tables."""
    import matplotlib

    matplotlib.use("svg")
    import matplotlib.pyplot as plt

    plt.rcParams["svg.hashsalt"] = "buslinesim"
    written = []
    for table in tables:
        if table.axis != PER_TRIP:
            continue
        keys = [row.key for row in table.rows]
        fig, ax = plt.subplots(figsize=(8, 4))
        ax.plot(keys, [row.reference for row in table.rows], label="reference", marker="o", ms=3)
        ax.plot(keys, [row.model for row in table.rows], label="model", marker="s", ms=3)
        ax.set_xlabel("trip id")
        ax.set_ylabel(table.indicator)
        ax.set_title(f"{table.indicator} by trip, direction {table.direction}")
        ax.legend()
        path = Path(out_dir) / f"{table.indicator}_{table.direction}_{table.axis}.svg"
        fig.savefig(path, metadata={"Date": None})
        plt.close(fig)
        written.append(path)
    return written


def load_summary(path: str | Path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))


def save_summary(doc: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")

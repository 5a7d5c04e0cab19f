"""Raw operational logs to the unified per-trip total log.

Reads the delimited event log and passenger counts, joins them with the
network schedule and circulations, computes per-stop travel time, dwell
time, door open time and punctuality, and rejects whole trips whose data
is inconsistent.  A trip is identified by (trip id, service date); the
service date of an event is the calendar date of (timestamp - 5 h), so
post-midnight activity belongs to the day whose service started at 05:00.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from datetime import date, datetime, time, timedelta
from pathlib import Path
from typing import Iterable, Sequence

from .coords import rd_to_wgs84
from .network import DAY_START_HOUR, RouteNetwork

EVENT_KINDS = ("stop_arrival", "stop_departure", "door_open", "door_closed")
#: Traffic-light radio events appear in real logs; they are recognized and
#: dropped during parsing.
KAR_KINDS = ("kar_in", "kar_out")

EVENT_COLUMNS = (
    "event_kind",
    "datetime",
    "coord_system",
    "coord_x",
    "coord_y",
    "bus_id",
    "trip_id",
    "driver_id",
    "stop_id",
)
COUNT_COLUMNS = ("service_date", "trip_id", "stop_id", "check_ins", "check_outs")


class IngestError(ValueError):
    pass


@dataclass(frozen=True, slots=True)
class RawBusEvent:
    kind: str
    timestamp: datetime
    coord_system: str  # "RD" (metres) or "WGS84" (degrees)
    x: float  # RD x or latitude
    y: float  # RD y or longitude
    bus_id: str
    trip_id: int
    driver_id: str
    stop_id: str

    def wgs84(self) -> tuple[float, float]:
        if self.coord_system == "RD":
            return rd_to_wgs84(self.x, self.y)
        return (self.x, self.y)


def service_date_of(timestamp: datetime) -> date:
    return (timestamp - timedelta(hours=DAY_START_HOUR)).date()


def service_seconds(timestamp: datetime, service_date: date) -> float:
    day_start = datetime.combine(service_date, time(hour=DAY_START_HOUR))
    return (timestamp - day_start).total_seconds()


@dataclass(frozen=True, slots=True)
class TripStop:
    stop_id: str
    lat: float
    lon: float
    travel_time_s: float | None
    dwell_time_s: float | None
    door_open_time_s: float | None
    punctuality_s: float | None
    check_ins: int
    check_outs: int


@dataclass(frozen=True, slots=True)
class TripRecord:
    service_date: date
    trip_id: int
    bus_id: str
    circulation_id: str | None
    driver_id: str
    stops: tuple[TripStop, ...]


@dataclass
class RejectionReport:
    accepted: int = 0
    rejected_trips: list[tuple[str, int, str]] = None  # (service_date, trip_id, reason)
    orphan_counts: list[tuple[str, int]] = None
    dropped_kar_events: int = 0
    dropped_unattributed_events: int = 0
    stray_events: int = 0

    def __post_init__(self):
        if self.rejected_trips is None:
            self.rejected_trips = []
        if self.orphan_counts is None:
            self.orphan_counts = []

    @property
    def rejected(self) -> int:
        return len(self.rejected_trips)

    @property
    def rejection_rate(self) -> float:
        total = self.accepted + self.rejected
        return self.rejected / total if total else 0.0

    def reason_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for _date, _tid, reason in self.rejected_trips:
            counts[reason] = counts.get(reason, 0) + 1
        return counts

    def flags(self) -> list[str]:
        out = []
        if self.rejection_rate > 0.20:
            out.append("rejection-rate-above-20-percent")
        return out

    def to_dict(self) -> dict:
        return {
            "accepted": self.accepted,
            "rejected": self.rejected,
            "rejection_rate": self.rejection_rate,
            "reason_counts": self.reason_counts(),
            "rejected_trips": [
                {"service_date": d, "trip_id": t, "reason": r} for d, t, r in self.rejected_trips
            ],
            "orphan_counts": [
                {"service_date": d, "trip_id": t} for d, t in self.orphan_counts
            ],
            "dropped_kar_events": self.dropped_kar_events,
            "dropped_unattributed_events": self.dropped_unattributed_events,
            "stray_events": self.stray_events,
            "flags": self.flags(),
        }


# --- delimited inputs ----------------------------------------------------------


def read_events_csv(path: str | Path) -> tuple[list[RawBusEvent], int, int]:
    """Parse the event log; returns (events, dropped KAR, dropped unattributed)."""
    events: list[RawBusEvent] = []
    kar = 0
    unattributed = 0
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != EVENT_COLUMNS:
            raise IngestError(
                f"{path}: expected header {','.join(EVENT_COLUMNS)}, got "
                f"{','.join(header) if header else 'empty file'}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(EVENT_COLUMNS):
                raise IngestError(f"{path}:{line_no}: expected {len(EVENT_COLUMNS)} columns")
            kind = row[0]
            if kind in KAR_KINDS:
                kar += 1
                continue
            if kind not in EVENT_KINDS:
                raise IngestError(f"{path}:{line_no}: unknown event kind {kind!r}")
            if not row[8]:
                # No stop attribution; never guessed from geometry.
                unattributed += 1
                continue
            try:
                events.append(
                    RawBusEvent(
                        kind=kind,
                        timestamp=datetime.fromisoformat(row[1]),
                        coord_system=row[2],
                        x=float(row[3]),
                        y=float(row[4]),
                        bus_id=row[5],
                        trip_id=int(row[6]),
                        driver_id=row[7],
                        stop_id=row[8],
                    )
                )
            except ValueError as exc:
                raise IngestError(f"{path}:{line_no}: {exc}") from exc
            if events[-1].coord_system not in ("RD", "WGS84"):
                raise IngestError(f"{path}:{line_no}: unknown coordinate system {row[2]!r}")
    return events, kar, unattributed


def write_events_csv(events: Iterable[RawBusEvent], path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(EVENT_COLUMNS)
        for e in events:
            writer.writerow(
                [
                    e.kind,
                    e.timestamp.isoformat(),
                    e.coord_system,
                    repr(e.x),
                    repr(e.y),
                    e.bus_id,
                    e.trip_id,
                    e.driver_id,
                    e.stop_id,
                ]
            )


def read_counts_csv(path: str | Path) -> dict[tuple[str, int, str], tuple[int, int]]:
    """Passenger counts keyed by (service_date ISO, trip_id, stop_id)."""
    counts: dict[tuple[str, int, str], tuple[int, int]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or tuple(header) != COUNT_COLUMNS:
            raise IngestError(
                f"{path}: expected header {','.join(COUNT_COLUMNS)}, got "
                f"{','.join(header) if header else 'empty file'}"
            )
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            try:
                key = (row[0], int(row[1]), row[2])
                ci, co = int(row[3]), int(row[4])
            except (ValueError, IndexError) as exc:
                raise IngestError(f"{path}:{line_no}: {exc}") from exc
            if ci < 0 or co < 0:
                raise IngestError(f"{path}:{line_no}: negative passenger count")
            if key in counts:
                raise IngestError(f"{path}:{line_no}: duplicate count row for {key}")
            counts[key] = (ci, co)
    return counts


def write_counts_csv(
    counts: dict[tuple[str, int, str], tuple[int, int]], path: str | Path
) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COUNT_COLUMNS)
        for (service_date, trip_id, stop_id), (ci, co) in sorted(counts.items()):
            writer.writerow([service_date, trip_id, stop_id, ci, co])


# --- total log construction ------------------------------------------------------


def build_total_log(
    events: Sequence[RawBusEvent],
    counts: dict[tuple[str, int, str], tuple[int, int]],
    network: RouteNetwork,
) -> tuple[list[TripRecord], RejectionReport]:
    """Join events, counts, schedule and circulations into trip records.

    Malformed trips are never fatal: each lands in the rejection report
    with the first reason found, scanning stops in route order.
    """
    report = RejectionReport()
    groups: dict[tuple[date, int], list[RawBusEvent]] = {}
    for event in events:
        key = (service_date_of(event.timestamp), event.trip_id)
        groups.setdefault(key, []).append(event)

    matched_count_keys: set[tuple[str, int]] = set()
    records: list[TripRecord] = []
    for (svc_date, trip_id) in sorted(groups, key=lambda k: (k[0].isoformat(), k[1])):
        group = sorted(groups[(svc_date, trip_id)], key=lambda e: e.timestamp)
        date_iso = svc_date.isoformat()
        template = network.trips.get(trip_id)
        if template is None:
            report.rejected_trips.append((date_iso, trip_id, "unknown-trip"))
            continue
        matched_count_keys.add((date_iso, trip_id))
        outcome = _build_record(group, counts, network, template, svc_date, date_iso, report)
        if isinstance(outcome, str):
            report.rejected_trips.append((date_iso, trip_id, outcome))
        else:
            records.append(outcome)
            report.accepted += 1

    for (date_iso, trip_id, _stop), _ in sorted(counts.items()):
        if (date_iso, trip_id) not in matched_count_keys:
            if (date_iso, trip_id) not in report.orphan_counts:
                report.orphan_counts.append((date_iso, trip_id))
    return records, report


def _build_record(
    group: list[RawBusEvent],
    counts,
    network: RouteNetwork,
    template,
    svc_date: date,
    date_iso: str,
    report: RejectionReport,
) -> TripRecord | str:
    by_stop: dict[str, dict[str, list[RawBusEvent]]] = {}
    stop_set = set(template.stops)
    for event in group:
        if event.stop_id not in stop_set:
            report.stray_events += 1
            continue
        by_stop.setdefault(event.stop_id, {}).setdefault(event.kind, []).append(event)

    stops: list[TripStop] = []
    prev_departure: datetime | None = None
    onboard = 0
    last_index = template.n_stops - 1
    for i, stop_id in enumerate(template.stops):
        stop_events = by_stop.get(stop_id, {})
        arrivals = stop_events.get("stop_arrival", [])
        departures = stop_events.get("stop_departure", [])
        if not arrivals:
            return "missing-arrival"
        if not departures:
            return "missing-departure"
        arrival_dt = arrivals[0]
        departure_dt = departures[0]
        if departure_dt.timestamp < arrival_dt.timestamp:
            return "timestamp-inversion"

        ci, co = counts.get((date_iso, template.trip_id, stop_id), (0, 0))

        door_events = sorted(
            stop_events.get("door_open", []) + stop_events.get("door_closed", []),
            key=lambda e: e.timestamp,
        )
        door_total = 0.0
        open_since: datetime | None = None
        dangling = False
        for event in door_events:
            if event.kind == "door_open":
                if open_since is not None:
                    dangling = True
                    break
                open_since = event.timestamp
            else:
                if open_since is None:
                    dangling = True
                    break
                door_total += (event.timestamp - open_since).total_seconds()
                open_since = None
        if open_since is not None:
            dangling = True
        has_pairs = door_total > 0.0 or (door_events and not dangling)
        if (ci > 0 or co > 0) and (dangling or not door_events or not has_pairs):
            return "missing-door"
        if dangling:
            # Counts are zero; keep the complete pairs and drop the rest.
            pass

        # Differences are taken between datetimes, not day offsets, so the
        # values are exact at microsecond resolution.
        travel = None
        if i > 0:
            travel = (arrival_dt.timestamp - prev_departure).total_seconds()
            if travel <= 0:
                return "timestamp-inversion"
        dwell = (departure_dt.timestamp - arrival_dt.timestamp).total_seconds()
        if door_total > dwell:
            return "door-outside-dwell"
        day_start = datetime.combine(svc_date, time(hour=DAY_START_HOUR))
        scheduled_dt = day_start + timedelta(seconds=template.scheduled_departures[i])
        punctuality = (departure_dt.timestamp - scheduled_dt).total_seconds()

        if i == 0 and co != 0:
            return "counts-inconsistent"
        if i == last_index and ci != 0:
            return "counts-inconsistent"
        onboard += ci - co
        if onboard < 0:
            return "counts-inconsistent"
        if i == last_index and onboard != 0:
            return "counts-inconsistent"

        lat, lon = arrival_dt.wgs84()
        stops.append(
            TripStop(
                stop_id=stop_id,
                lat=lat,
                lon=lon,
                travel_time_s=travel,
                dwell_time_s=dwell,
                door_open_time_s=door_total,
                punctuality_s=punctuality,
                check_ins=ci,
                check_outs=co,
            )
        )
        prev_departure = departure_dt.timestamp

    circulation = network.circulation_of(template.trip_id)
    return TripRecord(
        service_date=svc_date,
        trip_id=template.trip_id,
        bus_id=group[0].bus_id,
        circulation_id=circulation.circulation_id if circulation else None,
        driver_id=group[0].driver_id,
        stops=tuple(stops),
    )


# --- total log file ---------------------------------------------------------------


def write_total_log(records: Iterable[TripRecord], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(record_to_dict(r), sort_keys=True) + "\n")


def read_total_log(path: str | Path) -> list[TripRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(record_from_dict(json.loads(line)))
    return records


def record_to_dict(record: TripRecord) -> dict:
    return {
        "service_date": record.service_date.isoformat(),
        "trip_id": record.trip_id,
        "bus_id": record.bus_id,
        "circulation_id": record.circulation_id,
        "driver_id": record.driver_id,
        "stops": [
            {
                "stop_id": s.stop_id,
                "lat": s.lat,
                "lon": s.lon,
                "travel_time_s": s.travel_time_s,
                "dwell_time_s": s.dwell_time_s,
                "door_open_time_s": s.door_open_time_s,
                "punctuality_s": s.punctuality_s,
                "check_ins": s.check_ins,
                "check_outs": s.check_outs,
            }
            for s in record.stops
        ],
    }


def record_from_dict(doc: dict) -> TripRecord:
    return TripRecord(
        service_date=date.fromisoformat(doc["service_date"]),
        trip_id=doc["trip_id"],
        bus_id=doc["bus_id"],
        circulation_id=doc.get("circulation_id"),
        driver_id=doc["driver_id"],
        stops=tuple(
            TripStop(
                stop_id=s["stop_id"],
                lat=s["lat"],
                lon=s["lon"],
                travel_time_s=s["travel_time_s"],
                dwell_time_s=s["dwell_time_s"],
                door_open_time_s=s["door_open_time_s"],
                punctuality_s=s["punctuality_s"],
                check_ins=s["check_ins"],
                check_outs=s["check_outs"],
            )
            for s in doc["stops"]
        ),
    )


def write_rejection_report(report: RejectionReport, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

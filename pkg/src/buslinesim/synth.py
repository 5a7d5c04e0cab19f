"""Synthetic bus line and raw-log generator with known ground truth.

Builds a two-direction line (11 stops per direction, shared terminals,
12 buses) plus a full day of raw bus events and passenger counts drawn
from explicit generators.  Because every generator parameter is known,
ingest, fitting and simulation can all be validated by round-trip tests.
The generator is deliberately independent of the simulation engine: trips
are synthesized stop by stop with plain arithmetic, without event-loop
machinery, so it can serve as an oracle for it.
"""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass, field, replace
from datetime import date, datetime, time, timedelta
from pathlib import Path

from .coords import rd_to_wgs84
from .distributions import BoardingRates, EmpiricalDistribution, EmpiricalModel, ODMatrix
from .dwell import DoorTimeModel, door_open_time
from .ingest import RawBusEvent, TripRecord, TripStop
from .network import (
    DAY_START_HOUR,
    Circulation,
    RouteNetwork,
    Segment,
    Stop,
    TripTemplate,
)
from .streams import TAG_SYNTH, poisson_draw, substream

CORRUPTION_CLASSES = (
    "missing-arrival",
    "missing-departure",
    "missing-door",
    "timestamp-inversion",
)

#: Corruption mix summing to roughly the error rate seen in real logs.
DEFAULT_CORRUPTION_MIX = {
    "missing-arrival": 0.03,
    "missing-departure": 0.02,
    "missing-door": 0.03,
    "timestamp-inversion": 0.03,
}


class GroundTruthError(ValueError):
    pass


@dataclass(frozen=True)
class GroundTruth:
    """All generator parameters for the synthetic line.

    Time-valued samples should sit on a 0.1 s grid so that raw-log
    timestamps (microsecond resolution) reproduce them exactly.
    """

    n_stops: int = 11
    n_buses: int = 12
    #: Per direction: one sample multiset per stop index (index 0 unused);
    #: entry i is the travel time onto stop i.
    segment_tt_s: dict[str, tuple[tuple[float, ...], ...]] = field(default_factory=dict)
    #: Per direction: one multiset per stop index (0 unused, last used only
    #: by the log generator); drive-through dwell with no passenger flow.
    zero_dwell_s: dict[str, tuple[tuple[float, ...], ...]] = field(default_factory=dict)
    #: Per direction: first-stop departure offsets versus schedule.
    first_departure_offset_s: dict[str, tuple[float, ...]] = field(default_factory=dict)
    #: Per direction: boarding rate per stop for a rush-hour trip.
    lambda_profile: dict[str, tuple[float, ...]] = field(default_factory=dict)
    offpeak_factor: float = 0.4
    rush_windows: tuple[tuple[float, float], ...] = ((7200.0, 14400.0), (39600.0, 46800.0))
    headway_rush_s: float = 300.0
    headway_offpeak_s: float = 720.0
    service_span_s: tuple[float, float] = (1800.0, 66600.0)
    schedule_dwell_s: float = 30.0
    layover_s: float = 200.0
    door_model: DoorTimeModel = field(default_factory=DoorTimeModel)
    #: Extra pull of the final stop in destination weights.
    od_terminal_weight: float = 3.0
    corruption_rates: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        problems = []
        if self.n_stops < 2:
            problems.append("n_stops must be >= 2")
        if self.n_buses < 1:
            problems.append("n_buses must be >= 1")
        for name in ("segment_tt_s", "zero_dwell_s", "first_departure_offset_s", "lambda_profile"):
            table = getattr(self, name)
            for d in ("A", "B"):
                if d not in table:
                    problems.append(f"{name} missing direction {d}")
        for reason, rate in self.corruption_rates.items():
            if reason not in CORRUPTION_CLASSES:
                problems.append(f"unknown corruption class {reason!r}")
            if rate < 0:
                problems.append(f"corruption rate for {reason} must be >= 0")
        if sum(self.corruption_rates.values()) >= 1.0:
            problems.append("total corruption rate must be < 1")
        for d, profile in self.lambda_profile.items():
            if profile and profile[-1] != 0.0:
                problems.append(f"lambda_profile[{d}]: final stop must have rate 0")
            if any(v < 0 for v in profile):
                problems.append(f"lambda_profile[{d}]: rates must be >= 0")
        if problems:
            raise GroundTruthError("; ".join(problems))


def _jittered(mean: float) -> tuple[float, ...]:
    return tuple(round(mean * f, 1) for f in (0.92, 0.96, 1.0, 1.04, 1.08))


def default_truth(**overrides) -> GroundTruth:
    """The stock synthetic line: rush-hour 300 s headways, terminal-heavy
    demand and mildly noisy travel times."""
    segment_means = {
        "A": (0, 213, 28, 112, 240, 53, 183, 138, 38, 42, 89),
        "B": (0, 100, 52, 30, 144, 187, 54, 225, 105, 28, 220),
    }
    fields: dict = {
        "segment_tt_s": {
            d: tuple(() if m == 0 else _jittered(m) for m in means)
            for d, means in segment_means.items()
        },
        "zero_dwell_s": {
            d: tuple(
                () if i == 0 else (4.0, 6.0, 8.0, 10.0, 12.0) for i in range(len(segment_means[d]))
            )
            for d in segment_means
        },
        "first_departure_offset_s": {
            "A": (-20.0, 0.0, 20.0, 50.0, 110.0),
            "B": (-10.0, 0.0, 10.0, 40.0, 80.0),
        },
        "lambda_profile": {
            "A": (8.0, 5.0, 4.0, 3.0, 2.5, 2.0, 1.5, 1.0, 0.5, 0.3, 0.0),
            "B": (6.0, 4.0, 3.5, 3.0, 2.5, 2.0, 1.5, 1.0, 0.5, 0.3, 0.0),
        },
    }
    fields.update(overrides)
    return GroundTruth(**fields)


# --- network construction -------------------------------------------------------

_RD_START = (93000.0, 463800.0)
_RD_END = (90800.0, 452600.0)
TERMINAL_A_START = "TLD"
TERMINAL_B_START = "TZM"


def _rd_point(fraction: float, offset_m: float = 0.0) -> tuple[float, float]:
    x = _RD_START[0] + fraction * (_RD_END[0] - _RD_START[0]) + offset_m
    y = _RD_START[1] + fraction * (_RD_END[1] - _RD_START[1])
    return (x, y)


def stop_rd_coords(truth: GroundTruth) -> dict[str, tuple[float, float]]:
    """RD positions for every stop id of the synthetic line."""
    last = truth.n_stops - 1
    coords = {
        TERMINAL_A_START: _rd_point(0.0),
        TERMINAL_B_START: _rd_point(1.0),
    }
    for k in range(1, last):
        coords[f"A{k:02d}"] = _rd_point(k / last)
        coords[f"B{k:02d}"] = _rd_point(1.0 - k / last, offset_m=12.0)
    return coords


def _stop_ids(truth: GroundTruth, direction: str) -> list[str]:
    last = truth.n_stops - 1
    if direction == "A":
        return [TERMINAL_A_START] + [f"A{k:02d}" for k in range(1, last)] + [TERMINAL_B_START]
    return [TERMINAL_B_START] + [f"B{k:02d}" for k in range(1, last)] + [TERMINAL_A_START]


def _headway_at(truth: GroundTruth, t: float) -> float:
    for start, end in truth.rush_windows:
        if start <= t < end:
            return truth.headway_rush_s
    return truth.headway_offpeak_s


def _multiset_mean(values: tuple[float, ...]) -> float:
    return sum(values) / len(values)


def _trip_departures(truth: GroundTruth, direction: str, start_s: float) -> tuple[float, ...]:
    deps = [start_s]
    for i in range(1, truth.n_stops):
        seg_mean = _multiset_mean(truth.segment_tt_s[direction][i])
        deps.append(deps[-1] + seg_mean + truth.schedule_dwell_s)
    return tuple(deps)


def build_network(truth: GroundTruth) -> RouteNetwork:
    """Stops, segments, schedules and greedy bus circulations for the truth."""
    coords = stop_rd_coords(truth)
    last = truth.n_stops - 1
    stops = []
    for stop_id, rd in sorted(coords.items()):
        lat, lon = rd_to_wgs84(*rd)
        paired = None
        if stop_id.startswith("A"):
            paired = f"B{last - int(stop_id[1:]):02d}"
        elif stop_id.startswith("B"):
            paired = f"A{last - int(stop_id[1:]):02d}"
        stops.append(Stop(stop_id=stop_id, name=stop_id, lat=lat, lon=lon, paired_with=paired))

    segments = []
    trips = []
    for direction, first_id in (("A", 1001), ("B", 1002)):
        ids = _stop_ids(truth, direction)
        segments.extend(Segment(a, b) for a, b in zip(ids, ids[1:]))
        t = truth.service_span_s[0]
        trip_id = first_id
        while t <= truth.service_span_s[1]:
            trips.append(
                TripTemplate(
                    trip_id=trip_id,
                    direction=direction,
                    stops=tuple(ids),
                    scheduled_departures=_trip_departures(truth, direction, t),
                )
            )
            t += _headway_at(truth, t)
            trip_id += 2

    circulations = _assign_circulations(truth, trips)
    return RouteNetwork.build("synthetic-line", stops, segments, trips, circulations)


def _assign_circulations(truth: GroundTruth, trips: list[TripTemplate]) -> list[Circulation]:
    """Chronological greedy assignment of trips to a fixed fleet."""
    buses: list[dict] = []  # {"available": t, "terminal": stop_id, "trips": [...]}
    for trip in sorted(trips, key=lambda t: (t.first_departure_s, t.trip_id)):
        start_terminal = trip.stops[0]
        candidates = [
            b for b in buses if b["terminal"] == start_terminal and b["available"] <= trip.first_departure_s
        ]
        if candidates:
            bus = min(candidates, key=lambda b: b["available"])
        elif len(buses) < truth.n_buses:
            bus = {"available": 0.0, "terminal": start_terminal, "trips": []}
            buses.append(bus)
        else:
            raise GroundTruthError(
                f"timetable infeasible with {truth.n_buses} buses: no bus free at "
                f"{start_terminal} for trip {trip.trip_id} (t={trip.first_departure_s:.0f})"
            )
        arrival_last = trip.scheduled_departures[-1] - truth.schedule_dwell_s
        bus["available"] = arrival_last + truth.layover_s
        bus["terminal"] = trip.stops[-1]
        bus["trips"].append(trip.trip_id)
    return [
        Circulation(
            circulation_id=f"C{idx:02d}", bus_id=f"BUS{idx:02d}", trip_ids=tuple(bus["trips"])
        )
        for idx, bus in enumerate(buses, start=1)
    ]


# --- ground-truth demand --------------------------------------------------------


def trip_lambdas(truth: GroundTruth, trip: TripTemplate) -> tuple[float, ...]:
    factor = 1.0 if _headway_at(truth, trip.first_departure_s) == truth.headway_rush_s else truth.offpeak_factor
    return tuple(lam * factor for lam in truth.lambda_profile[trip.direction])


def od_weight_rows(truth: GroundTruth) -> tuple[tuple[float, ...], ...]:
    """Forward destination weights: farther stops pull more, the terminal most."""
    n = truth.n_stops
    rows = []
    for i in range(n):
        row = []
        for j in range(n):
            if j <= i:
                row.append(0.0)
            else:
                row.append(float(j - i) * (truth.od_terminal_weight if j == n - 1 else 1.0))
        rows.append(tuple(row))
    return tuple(rows)


def exact_model(truth: GroundTruth, network: RouteNetwork) -> EmpiricalModel:
    """The model bundle a perfect fit on infinite data would produce."""
    travel_time = {}
    first_departure = {}
    rates: dict[tuple[int, int], float] = {}
    for trip in network.trips.values():
        direction = trip.direction
        first_departure[trip.trip_id] = EmpiricalDistribution(
            truth.first_departure_offset_s[direction]
        )
        lambdas = trip_lambdas(truth, trip)
        for i in range(trip.n_stops):
            if i > 0:
                travel_time[(trip.trip_id, i)] = EmpiricalDistribution(
                    truth.segment_tt_s[direction][i]
                )
            rates[(trip.trip_id, i)] = lambdas[i]
    zero_dwell = {
        (d, i): EmpiricalDistribution(truth.zero_dwell_s[d][i])
        for d in ("A", "B")
        for i in range(1, truth.n_stops - 1)
    }
    weights = od_weight_rows(truth)
    od = {}
    for direction in ("A", "B"):
        daily = [0.0] * truth.n_stops
        for trip in network.trips_in_direction(direction):
            for i, lam in enumerate(trip_lambdas(truth, trip)):
                daily[i] += lam
        rows = []
        for i in range(truth.n_stops):
            total_w = sum(weights[i])
            rows.append(
                tuple(daily[i] * w / total_w if total_w else 0.0 for w in weights[i])
            )
        od[direction] = ODMatrix(direction, tuple(rows))
    return EmpiricalModel(
        network=network,
        door_model=truth.door_model,
        travel_time=travel_time,
        zero_boarding_dwell=zero_dwell,
        first_departure=first_departure,
        od=od,
        rates=BoardingRates(rates),
    )


def schedule_exact_model(network: RouteNetwork) -> EmpiricalModel:
    """Degenerate bundle: travel times equal scheduled gaps, zero dwell
    overhead, zero punctuality offsets and no passengers.  A simulation of
    this bundle departs exactly on schedule everywhere."""
    travel_time = {}
    first_departure = {}
    rates: dict[tuple[int, int], float] = {}
    zero_dwell = {}
    od = {}
    for trip in network.trips.values():
        first_departure[trip.trip_id] = EmpiricalDistribution((0.0,))
        for i in range(1, trip.n_stops):
            gap = trip.scheduled_departures[i] - trip.scheduled_departures[i - 1]
            travel_time[(trip.trip_id, i)] = EmpiricalDistribution((gap,))
        for i in range(trip.n_stops):
            rates[(trip.trip_id, i)] = 0.0
    for direction in ("A", "B"):
        n = network.n_stops(direction)
        for i in range(1, n - 1):
            zero_dwell[(direction, i)] = EmpiricalDistribution((0.0,))
        od[direction] = ODMatrix(direction, tuple(tuple(0.0 for _ in range(n)) for _ in range(n)))
    return EmpiricalModel(
        network=network,
        door_model=DoorTimeModel(),
        travel_time=travel_time,
        zero_boarding_dwell=zero_dwell,
        first_departure=first_departure,
        od=od,
        rates=BoardingRates(rates),
    )


# --- raw-log generation -----------------------------------------------------------


@dataclass
class SynthDay:
    service_date: date
    events: list[RawBusEvent]
    counts: dict[tuple[str, int, str], tuple[int, int]]
    expected_records: list[TripRecord]
    #: (service_date ISO, trip_id, reason) for every injected corruption.
    expected_rejections: list[tuple[str, int, str]]


def _choice(rng, values: tuple[float, ...]) -> float:
    return values[rng.randrange(len(values))]


def synth_day(
    truth: GroundTruth,
    network: RouteNetwork,
    service_date: date,
    seed: int,
) -> SynthDay:
    """Generate one day of raw logs plus the records ingest must rebuild.

    Trips are generated independently (no delay propagation between
    circulated trips); expected record values are recomputed from the
    microsecond-rounded event timestamps so the round trip is bit-exact.
    """
    day_start = datetime.combine(service_date, time(hour=DAY_START_HOUR))
    date_iso = service_date.isoformat()
    day_key = service_date.toordinal()
    coords = stop_rd_coords(truth)
    weights = od_weight_rows(truth)
    total_corruption = sum(truth.corruption_rates.get(c, 0.0) for c in CORRUPTION_CLASSES)

    events: list[RawBusEvent] = []
    counts: dict[tuple[str, int, str], tuple[int, int]] = {}
    expected_records: list[TripRecord] = []
    expected_rejections: list[tuple[str, int, str]] = []

    for trip in sorted(network.trips.values(), key=lambda t: t.trip_id):
        rng = substream(seed, TAG_SYNTH, day_key, trip.trip_id)
        direction = trip.direction
        circulation = network.circulation_of(trip.trip_id)
        bus_id = circulation.bus_id
        driver_id = bus_id.replace("BUS", "DRV")
        n = trip.n_stops
        last = n - 1

        # Passenger flows.
        lambdas = trip_lambdas(truth, trip)
        check_ins = [0] * n
        check_outs = [0] * n
        for i in range(last):
            k = poisson_draw(lambdas[i], rng.random())
            check_ins[i] = k
            if k == 0:
                continue
            cum = []
            total = 0.0
            for w in weights[i]:
                total += w
                cum.append(total)
            for _ in range(k):
                j = bisect_left(cum, rng.random() * total)
                while weights[i][j] == 0.0:
                    j += 1
                check_outs[j] += 1

        # Stop-by-stop timing on the 0.1 s grid, then datetimes.
        arrivals: list[datetime] = []
        departures: list[datetime] = []
        door_pairs: list[tuple[datetime, datetime] | None] = []
        offset = _choice(rng, truth.first_departure_offset_s[direction])
        dep0 = trip.scheduled_departures[0] + offset
        cursor: float = dep0
        for i in range(n):
            if i == 0:
                # The bus idles at the terminal long enough for any door
                # activity to fit inside the stop radius window.
                lead = 60.0
                if check_ins[0]:
                    lead = max(lead, door_open_time(truth.door_model, check_ins[0], 0) + 10.0)
                arr_s = min(dep0, trip.scheduled_departures[0]) - lead
                dep_s = dep0
            else:
                tt = _choice(rng, truth.segment_tt_s[direction][i])
                arr_s = cursor + tt
                dt0 = _choice(rng, truth.zero_dwell_s[direction][i])
                if check_ins[i] + check_outs[i] > 0:
                    dot = door_open_time(truth.door_model, check_ins[i], check_outs[i])
                    dep_s = arr_s + dt0 + dot
                else:
                    dep_s = arr_s + dt0
            arrival = day_start + timedelta(seconds=arr_s)
            departure = day_start + timedelta(seconds=dep_s)
            arrivals.append(arrival)
            departures.append(departure)
            if check_ins[i] + check_outs[i] > 0:
                dot = door_open_time(truth.door_model, check_ins[i], check_outs[i])
                door_open = arrival + (departure - arrival - timedelta(seconds=dot)) / 2
                door_pairs.append((door_open, door_open + timedelta(seconds=dot)))
            else:
                door_pairs.append(None)
            cursor = (departure - day_start).total_seconds()

        # Corruption decision (one class per corrupted trip).
        corruption_rng = substream(seed, TAG_SYNTH, day_key, trip.trip_id, 0xC0)
        reason = None
        u = corruption_rng.random()
        if u < total_corruption:
            acc = 0.0
            for candidate in CORRUPTION_CLASSES:
                acc += truth.corruption_rates.get(candidate, 0.0)
                if u < acc:
                    reason = candidate
                    break
        drop_arrival_at = drop_departure_at = drop_door_at = invert_at = None
        if reason == "missing-arrival":
            drop_arrival_at = corruption_rng.randrange(n)
        elif reason == "missing-departure":
            drop_departure_at = corruption_rng.randrange(n)
        elif reason == "missing-door":
            with_flow = [i for i in range(n) if door_pairs[i] is not None]
            if with_flow:
                drop_door_at = with_flow[corruption_rng.randrange(len(with_flow))]
            else:
                reason = "timestamp-inversion"
                invert_at = corruption_rng.randrange(n)
        elif reason == "timestamp-inversion":
            invert_at = corruption_rng.randrange(n)

        # Emit events and bookkeeping.
        for i, stop_id in enumerate(trip.stops):
            x, y = coords[stop_id]
            arr_dt, dep_dt = arrivals[i], departures[i]
            if invert_at == i:
                arr_dt, dep_dt = dep_dt, arr_dt
            if drop_arrival_at != i:
                events.append(
                    RawBusEvent(
                        "stop_arrival", arr_dt, "RD", x, y, bus_id, trip.trip_id, driver_id, stop_id
                    )
                )
            if door_pairs[i] is not None and drop_door_at != i:
                d_open, d_closed = door_pairs[i]
                events.append(
                    RawBusEvent(
                        "door_open", d_open, "RD", x, y, bus_id, trip.trip_id, driver_id, stop_id
                    )
                )
                events.append(
                    RawBusEvent(
                        "door_closed", d_closed, "RD", x, y, bus_id, trip.trip_id, driver_id, stop_id
                    )
                )
            if drop_departure_at != i:
                events.append(
                    RawBusEvent(
                        "stop_departure", dep_dt, "RD", x, y, bus_id, trip.trip_id, driver_id, stop_id
                    )
                )
            if check_ins[i] or check_outs[i]:
                counts[(date_iso, trip.trip_id, stop_id)] = (check_ins[i], check_outs[i])

        if reason is not None:
            expected_rejections.append((date_iso, trip.trip_id, reason))
            continue

        stops = []
        for i, stop_id in enumerate(trip.stops):
            lat, lon = rd_to_wgs84(*coords[stop_id])
            travel = None
            if i > 0:
                travel = (arrivals[i] - departures[i - 1]).total_seconds()
            dwell = (departures[i] - arrivals[i]).total_seconds()
            if door_pairs[i] is not None:
                d_open, d_closed = door_pairs[i]
                door_s = (d_closed - d_open).total_seconds()
            else:
                door_s = 0.0
            punctuality = (
                departures[i] - (day_start + timedelta(seconds=trip.scheduled_departures[i]))
            ).total_seconds()
            stops.append(
                TripStop(
                    stop_id=stop_id,
                    lat=lat,
                    lon=lon,
                    travel_time_s=travel,
                    dwell_time_s=dwell,
                    door_open_time_s=door_s,
                    punctuality_s=punctuality,
                    check_ins=check_ins[i],
                    check_outs=check_outs[i],
                )
            )
        expected_records.append(
            TripRecord(
                service_date=service_date,
                trip_id=trip.trip_id,
                bus_id=bus_id,
                circulation_id=circulation.circulation_id,
                driver_id=driver_id,
                stops=tuple(stops),
            )
        )

    events.sort(key=lambda e: (e.timestamp, e.trip_id, e.kind))
    expected_records.sort(key=lambda r: (r.service_date, r.trip_id))
    return SynthDay(service_date, events, counts, expected_records, expected_rejections)


def synth_days(
    truth: GroundTruth,
    network: RouteNetwork,
    n_days: int,
    seed: int,
    start_date: date = date(2024, 3, 4),
) -> list[SynthDay]:
    return [
        synth_day(truth, network, start_date + timedelta(days=k), seed) for k in range(n_days)
    ]


# --- ground-truth file -------------------------------------------------------------

_TRUTH_KEYS = {
    "n_stops",
    "n_buses",
    "segment_tt_s",
    "zero_dwell_s",
    "first_departure_offset_s",
    "lambda_profile",
    "offpeak_factor",
    "rush_windows",
    "headway_rush_s",
    "headway_offpeak_s",
    "service_span_s",
    "schedule_dwell_s",
    "layover_s",
    "door_model",
    "od_terminal_weight",
    "corruption_rates",
}


def truth_to_dict(truth: GroundTruth) -> dict:
    return {
        "n_stops": truth.n_stops,
        "n_buses": truth.n_buses,
        "segment_tt_s": {d: [list(m) for m in t] for d, t in sorted(truth.segment_tt_s.items())},
        "zero_dwell_s": {d: [list(m) for m in t] for d, t in sorted(truth.zero_dwell_s.items())},
        "first_departure_offset_s": {
            d: list(t) for d, t in sorted(truth.first_departure_offset_s.items())
        },
        "lambda_profile": {d: list(t) for d, t in sorted(truth.lambda_profile.items())},
        "offpeak_factor": truth.offpeak_factor,
        "rush_windows": [list(w) for w in truth.rush_windows],
        "headway_rush_s": truth.headway_rush_s,
        "headway_offpeak_s": truth.headway_offpeak_s,
        "service_span_s": list(truth.service_span_s),
        "schedule_dwell_s": truth.schedule_dwell_s,
        "layover_s": truth.layover_s,
        "door_model": {
            "intercept_s": truth.door_model.intercept_s,
            "board_coef_s": truth.door_model.board_coef_s,
            "alight_coef_s": truth.door_model.alight_coef_s,
        },
        "od_terminal_weight": truth.od_terminal_weight,
        "corruption_rates": dict(sorted(truth.corruption_rates.items())),
    }


def truth_from_dict(doc: dict) -> GroundTruth:
    unknown = [k for k in doc if k not in _TRUTH_KEYS]
    if unknown:
        raise GroundTruthError(f"unknown keys: {', '.join(sorted(unknown))}")
    kwargs: dict = {}
    for key in _TRUTH_KEYS:
        if key not in doc:
            continue
        value = doc[key]
        if key in ("segment_tt_s", "zero_dwell_s"):
            kwargs[key] = {d: tuple(tuple(m) for m in t) for d, t in value.items()}
        elif key in ("first_departure_offset_s", "lambda_profile"):
            kwargs[key] = {d: tuple(t) for d, t in value.items()}
        elif key == "rush_windows":
            kwargs[key] = tuple((float(a), float(b)) for a, b in value)
        elif key == "service_span_s":
            kwargs[key] = (float(value[0]), float(value[1]))
        elif key == "door_model":
            kwargs[key] = DoorTimeModel(**value)
        elif key == "corruption_rates":
            kwargs[key] = {str(k): float(v) for k, v in value.items()}
        else:
            kwargs[key] = value
    return GroundTruth(**kwargs)


def load_truth(path: str | Path) -> GroundTruth:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GroundTruthError(f"{path}: not valid JSON ({exc})") from exc
    return truth_from_dict(doc)


def save_truth(truth: GroundTruth, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(truth_to_dict(truth), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


def with_corruption(truth: GroundTruth, rates: dict[str, float] | None = None) -> GroundTruth:
    """The same truth with corruption injection switched on."""
    return replace(truth, corruption_rates=dict(DEFAULT_CORRUPTION_MIX if rates is None else rates))

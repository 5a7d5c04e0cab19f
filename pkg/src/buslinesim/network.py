"""Static topology of the bus line: stops, segments, trips, circulations.

All times of day are stored as seconds since the service-day start
(05:00), so the 01:00-next-day horizon is 72000 s and no date arithmetic
is needed inside the simulator.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

DIRECTIONS = ("A", "B")

#: Hour of day at which the service day starts.
DAY_START_HOUR = 5
#: Length of the service day in seconds (05:00 until 01:00 the next day).
HORIZON_S = 72_000
DEFAULT_GPS_RADIUS_M = 35.0


class NetworkError(ValueError):
    """Invalid network definition; carries one diagnostic per violation."""

    def __init__(self, diagnostics: Sequence[str]):
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


def direction_of_trip_id(trip_id: int) -> str:
    """A-direction trips carry odd ids (1001, 1003, ...), B-direction even."""
    return "A" if trip_id % 2 == 1 else "B"


@dataclass(frozen=True)
class Stop:
    stop_id: str
    name: str
    lat: float
    lon: float
    gps_radius_m: float = DEFAULT_GPS_RADIUS_M
    #: Physically paired stop on the other side of the road, reporting only.
    paired_with: str | None = None

    def __post_init__(self):
        problems = []
        if not -90.0 <= self.lat <= 90.0:
            problems.append(f"stop {self.stop_id}: latitude {self.lat} out of range")
        if not -180.0 <= self.lon <= 180.0:
            problems.append(f"stop {self.stop_id}: longitude {self.lon} out of range")
        if self.gps_radius_m <= 0:
            problems.append(f"stop {self.stop_id}: gps_radius_m must be > 0")
        if problems:
            raise NetworkError(problems)


@dataclass(frozen=True)
class Segment:
    from_stop: str
    to_stop: str
    polyline: tuple[tuple[float, float], ...] = ()

    @property
    def key(self) -> tuple[str, str]:
        return (self.from_stop, self.to_stop)


@dataclass(frozen=True)
class TripTemplate:
    trip_id: int
    direction: str
    stops: tuple[str, ...]
    scheduled_departures: tuple[float, ...]

    def __post_init__(self):
        problems = []
        if self.trip_id <= 0:
            problems.append(f"trip {self.trip_id}: trip_id must be positive")
        if self.direction not in DIRECTIONS:
            problems.append(f"trip {self.trip_id}: direction must be one of {DIRECTIONS}")
        if len(self.stops) < 2:
            problems.append(f"trip {self.trip_id}: needs at least 2 stops")
        if len(self.scheduled_departures) != len(self.stops):
            problems.append(
                f"trip {self.trip_id}: {len(self.scheduled_departures)} departure times "
                f"for {len(self.stops)} stops"
            )
        if problems:
            raise NetworkError(problems)

    @property
    def n_stops(self) -> int:
        return len(self.stops)

    @property
    def first_departure_s(self) -> float:
        return self.scheduled_departures[0]


@dataclass(frozen=True)
class Circulation:
    circulation_id: str
    bus_id: str
    trip_ids: tuple[int, ...]


@dataclass(frozen=True)
class TripViolation:
    """First condition violated by a trip, with the offending stop indices."""

    kind: str  # "repeated-stop" | "missing-segment" | "non-monotone-schedule"
    indices: tuple[int, ...]

    def __str__(self) -> str:
        return f"{self.kind}({', '.join(map(str, self.indices))})"


def validate_trip(trip: TripTemplate, segments: Iterable[tuple[str, str]]) -> TripViolation | None:
    """Check a trip against the trip formalism; None means valid.

    Conditions, in the order they are reported: no stop may repeat except
    first = last (circular line), every consecutive stop pair must be a
    declared segment, and scheduled departures must be strictly increasing.
    """
    n = trip.n_stops - 1
    seen: dict[str, int] = {}
    for i, stop_id in enumerate(trip.stops):
        if stop_id in seen:
            h = seen[stop_id]
            if (h, i) != (0, n):
                return TripViolation("repeated-stop", (h, i))
        else:
            seen[stop_id] = i
    segment_set = set(segments)
    for i in range(1, trip.n_stops):
        if (trip.stops[i - 1], trip.stops[i]) not in segment_set:
            return TripViolation("missing-segment", (i,))
    for i in range(1, trip.n_stops):
        if trip.scheduled_departures[i] <= trip.scheduled_departures[i - 1]:
            return TripViolation("non-monotone-schedule", (i,))
    return None


def scheduled_headway(trips: Sequence[TripTemplate], stop_index: int) -> list[float]:
    """Scheduled headways at one stop: departure gaps between consecutive trips.

    Trips must share a direction and be sorted by scheduled departure at
    ``stop_index``; returns an empty list for fewer than two trips.
    """
    if len({t.direction for t in trips}) > 1:
        raise NetworkError(["mixed-direction: trips span both directions"])
    departures = [t.scheduled_departures[stop_index] for t in trips]
    for j in range(1, len(departures)):
        if departures[j] < departures[j - 1]:
            raise NetworkError([f"unsorted-input: trip at position {j} departs before its predecessor"])
    return [departures[j] - departures[j - 1] for j in range(1, len(departures))]


@dataclass(frozen=True)
class RouteNetwork:
    """Validated, immutable network; safe to share across replications."""

    name: str
    stops: dict[str, Stop]
    segments: dict[tuple[str, str], Segment]
    trips: dict[int, TripTemplate]
    circulations: dict[str, Circulation]
    _by_direction: dict[str, tuple[TripTemplate, ...]] = field(default_factory=dict, repr=False)

    @classmethod
    def build(
        cls,
        name: str,
        stops: Iterable[Stop],
        segments: Iterable[Segment],
        trips: Iterable[TripTemplate],
        circulations: Iterable[Circulation],
    ) -> "RouteNetwork":
        stop_map = {s.stop_id: s for s in stops}
        seg_map = {s.key: s for s in segments}
        trip_map = {t.trip_id: t for t in trips}
        circ_map = {c.circulation_id: c for c in circulations}
        diagnostics = _check_network(stop_map, seg_map, trip_map, circ_map)
        if diagnostics:
            raise NetworkError(diagnostics)
        by_direction = {
            d: tuple(
                sorted(
                    (t for t in trip_map.values() if t.direction == d),
                    key=lambda t: (t.first_departure_s, t.trip_id),
                )
            )
            for d in DIRECTIONS
        }
        return cls(name, stop_map, seg_map, trip_map, circ_map, by_direction)

    def trips_in_direction(self, direction: str) -> tuple[TripTemplate, ...]:
        return self._by_direction[direction]

    def stop_sequence(self, direction: str) -> tuple[str, ...]:
        trips = self._by_direction[direction]
        return trips[0].stops if trips else ()

    def n_stops(self, direction: str) -> int:
        return len(self.stop_sequence(direction))

    def headway_window(self, trip: TripTemplate, stop_index: int) -> tuple[float, float]:
        """Boarding window at a stop for one trip: (previous scheduled
        departure, this trip's scheduled departure].  The first trip of the
        day opens at service start (t = 0)."""
        siblings = self._by_direction[trip.direction]
        pos = siblings.index(trip)
        start = 0.0 if pos == 0 else siblings[pos - 1].scheduled_departures[stop_index]
        return (start, trip.scheduled_departures[stop_index])

    def circulation_of(self, trip_id: int) -> Circulation | None:
        for circ in self.circulations.values():
            if trip_id in circ.trip_ids:
                return circ
        return None


def _check_network(stops, segments, trips, circulations) -> list[str]:
    diags: list[str] = []
    for seg in segments.values():
        if seg.from_stop == seg.to_stop:
            diags.append(f"segment {seg.key}: from_stop equals to_stop")
        for s in seg.key:
            if s not in stops:
                diags.append(f"segment {seg.key}: unknown stop {s!r}")
    for trip in trips.values():
        for s in trip.stops:
            if s not in stops:
                diags.append(f"trip {trip.trip_id}: unknown stop {s!r}")
        violation = validate_trip(trip, segments.keys())
        if violation is not None:
            diags.append(f"trip {trip.trip_id}: {violation}")

    # Per direction: a common stop sequence and the odd/even id convention
    # (A-direction ids 1001, 1003, ...; B-direction 1002, 1004, ...)
    # in order of first scheduled departure.
    for direction, start in (("A", 1001), ("B", 1002)):
        dir_trips = sorted(
            (t for t in trips.values() if t.direction == direction),
            key=lambda t: (t.first_departure_s, t.trip_id),
        )
        sequences = {t.stops for t in dir_trips}
        if len(sequences) > 1:
            diags.append(f"direction {direction}: trips do not share one stop sequence")
        for k, trip in enumerate(dir_trips):
            expected = start + 2 * k
            if trip.trip_id != expected:
                diags.append(
                    f"direction {direction}: trip #{k} has id {trip.trip_id}, expected {expected}"
                )
                break

    for circ in circulations.values():
        for tid in circ.trip_ids:
            if tid not in trips:
                diags.append(f"circulation {circ.circulation_id}: unknown trip {tid}")
        chain = [trips[tid] for tid in circ.trip_ids if tid in trips]
        for prev, nxt in zip(chain, chain[1:]):
            if prev.stops[-1] != nxt.stops[0]:
                diags.append(
                    f"circulation {circ.circulation_id}: trip {nxt.trip_id} does not start "
                    f"where trip {prev.trip_id} ends"
                )
    assigned: dict[int, str] = {}
    for circ in circulations.values():
        for tid in circ.trip_ids:
            if tid in assigned:
                diags.append(
                    f"circulation {circ.circulation_id}: trip {tid} already in {assigned[tid]}"
                )
            assigned[tid] = circ.circulation_id
    for tid in trips:
        if tid not in assigned:
            diags.append(f"trip {tid}: not covered by any circulation")
    return diags


# --- network definition file -------------------------------------------------

_STOP_KEYS = {"stop_id", "name", "lat", "lon", "gps_radius_m", "paired_with"}
_SEGMENT_KEYS = {"from_stop", "to_stop", "polyline"}
_TRIP_KEYS = {"trip_id", "direction", "stops", "scheduled_departures"}
_CIRC_KEYS = {"circulation_id", "bus_id", "trip_ids"}
_TOP_KEYS = {"name", "stops", "segments", "trips", "circulations"}


def _reject_unknown(obj: dict, allowed: set[str], where: str, diags: list[str]) -> None:
    for key in obj:
        if key not in allowed:
            diags.append(f"{where}: unknown key {key!r}")


def load_network(path: str | Path) -> RouteNetwork:
    """Load and validate a network definition file (JSON).

    Raises NetworkError with one diagnostic per violation, each naming the
    offending element.
    """
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise NetworkError([f"{path}: not valid JSON ({exc})"]) from exc
    if not isinstance(doc, dict):
        raise NetworkError([f"{path}: top level must be an object"])
    return network_from_dict(doc)


def network_from_dict(doc: dict) -> RouteNetwork:
    """Build and validate a network from a parsed definition document."""
    diags: list[str] = []
    _reject_unknown(doc, _TOP_KEYS, "top level", diags)
    for section in ("stops", "segments", "trips", "circulations"):
        if section not in doc:
            diags.append(f"top level: missing section {section!r}")
    if diags:
        raise NetworkError(diags)

    stops: list[Stop] = []
    for i, raw in enumerate(doc["stops"]):
        where = f"stops[{i}]"
        _reject_unknown(raw, _STOP_KEYS, where, diags)
        try:
            stops.append(
                Stop(
                    stop_id=str(raw["stop_id"]),
                    name=str(raw.get("name", raw["stop_id"])),
                    lat=float(raw["lat"]),
                    lon=float(raw["lon"]),
                    gps_radius_m=float(raw.get("gps_radius_m", DEFAULT_GPS_RADIUS_M)),
                    paired_with=raw.get("paired_with"),
                )
            )
        except NetworkError as exc:
            diags.extend(f"{where}: {d}" for d in exc.diagnostics)
        except (KeyError, TypeError, ValueError) as exc:
            diags.append(f"{where}: {exc!r}")

    segments: list[Segment] = []
    for i, raw in enumerate(doc["segments"]):
        where = f"segments[{i}]"
        _reject_unknown(raw, _SEGMENT_KEYS, where, diags)
        try:
            polyline = tuple((float(p[0]), float(p[1])) for p in raw.get("polyline", []))
            segments.append(Segment(str(raw["from_stop"]), str(raw["to_stop"]), polyline))
        except (KeyError, TypeError, ValueError, IndexError) as exc:
            diags.append(f"{where}: {exc!r}")

    trips: list[TripTemplate] = []
    for i, raw in enumerate(doc["trips"]):
        where = f"trips[{i}]"
        _reject_unknown(raw, _TRIP_KEYS, where, diags)
        try:
            trips.append(
                TripTemplate(
                    trip_id=int(raw["trip_id"]),
                    direction=str(raw["direction"]),
                    stops=tuple(str(s) for s in raw["stops"]),
                    scheduled_departures=tuple(float(t) for t in raw["scheduled_departures"]),
                )
            )
        except NetworkError as exc:
            diags.extend(f"{where}: {d}" for d in exc.diagnostics)
        except (KeyError, TypeError, ValueError) as exc:
            diags.append(f"{where}: {exc!r}")

    circulations: list[Circulation] = []
    for i, raw in enumerate(doc["circulations"]):
        where = f"circulations[{i}]"
        _reject_unknown(raw, _CIRC_KEYS, where, diags)
        try:
            circulations.append(
                Circulation(
                    circulation_id=str(raw["circulation_id"]),
                    bus_id=str(raw["bus_id"]),
                    trip_ids=tuple(int(t) for t in raw["trip_ids"]),
                )
            )
        except (KeyError, TypeError, ValueError) as exc:
            diags.append(f"{where}: {exc!r}")

    if diags:
        raise NetworkError(diags)
    return RouteNetwork.build(str(doc.get("name", "unnamed")), stops, segments, trips, circulations)


def network_to_dict(network: RouteNetwork) -> dict:
    return {
        "name": network.name,
        "stops": [
            {
                "stop_id": s.stop_id,
                "name": s.name,
                "lat": s.lat,
                "lon": s.lon,
                "gps_radius_m": s.gps_radius_m,
                **({"paired_with": s.paired_with} if s.paired_with else {}),
            }
            for s in network.stops.values()
        ],
        "segments": [
            {
                "from_stop": seg.from_stop,
                "to_stop": seg.to_stop,
                **({"polyline": [list(p) for p in seg.polyline]} if seg.polyline else {}),
            }
            for seg in network.segments.values()
        ],
        "trips": [
            {
                "trip_id": t.trip_id,
                "direction": t.direction,
                "stops": list(t.stops),
                "scheduled_departures": list(t.scheduled_departures),
            }
            for t in sorted(network.trips.values(), key=lambda t: t.trip_id)
        ],
        "circulations": [
            {"circulation_id": c.circulation_id, "bus_id": c.bus_id, "trip_ids": list(c.trip_ids)}
            for c in network.circulations.values()
        ],
    }


def save_network(network: RouteNetwork, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(network_to_dict(network), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

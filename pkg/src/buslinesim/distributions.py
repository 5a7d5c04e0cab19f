"""Empirical sampling models fitted from the total log.

Travel times, zero-boarding dwell and first-stop departure punctuality are
kept as resampled multisets of observed values; demand is an O-D matrix
per direction plus Poisson boarding rates per (trip, stop).  Sparse
per-trip multisets delegate to coarser pools (same direction and
hour-of-day bucket, then direction-wide).
"""

from __future__ import annotations

import json
import random
import statistics
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence, TYPE_CHECKING

from .dwell import DoorTimeModel
from .network import RouteNetwork, direction_of_trip_id, network_from_dict, network_to_dict

if TYPE_CHECKING:
    from .ingest import TripRecord

DEFAULT_MIN_SAMPLES = 5


class NoDataError(ValueError):
    """No observations in the requested pool or any fallback pool."""


@dataclass(frozen=True)
class EmpiricalDistribution:
    """Multiset of observed values, resampled uniformly.

    When a fallback is attached (the primary multiset was too sparse to
    trust), draws delegate to the fallback's samples.
    """

    samples: tuple[float, ...]
    fallback: "EmpiricalDistribution | None" = None

    def __post_init__(self):
        if not self.samples:
            raise ValueError("empirical distribution needs at least one sample")

    def sample(self, rng: random.Random) -> float:
        if self.fallback is not None:
            return self.fallback.sample(rng)
        return self.samples[rng.randrange(len(self.samples))]

    @property
    def effective_samples(self) -> tuple[float, ...]:
        return self.fallback.samples if self.fallback is not None else self.samples

    def mean(self) -> float:
        return statistics.fmean(self.effective_samples)


@dataclass(frozen=True)
class ODMatrix:
    """Mean daily passenger counts between stop pairs of one direction."""

    direction: str
    counts: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        n = len(self.counts)
        for i, row in enumerate(self.counts):
            if len(row) != n:
                raise ValueError("O-D matrix must be square")
            for j, value in enumerate(row):
                if value < 0:
                    raise ValueError(f"negative O-D count at ({i}, {j})")
                if j <= i and value != 0:
                    raise ValueError(f"backward travel at ({i}, {j}): counts must be 0 for j <= i")

    @property
    def n_stops(self) -> int:
        return len(self.counts)

    def row_total(self, origin: int) -> float:
        return sum(self.counts[origin])

    def total(self) -> float:
        return sum(map(sum, self.counts))


@dataclass(frozen=True)
class BoardingRates:
    """Expected boardings within the scheduled headway, per (trip, stop index)."""

    rates: dict[tuple[int, int], float] = field(default_factory=dict)

    def __post_init__(self):
        for key, lam in self.rates.items():
            if lam < 0:
                raise ValueError(f"negative boarding rate at {key}")

    def get(self, trip_id: int, stop_index: int) -> float:
        return self.rates.get((trip_id, stop_index), 0.0)


def _trip_hour_bucket(network: RouteNetwork | None, trip_id: int) -> int | None:
    if network is None or trip_id not in network.trips:
        return None
    return int(network.trips[trip_id].first_departure_s // 3600)


def _with_fallback(primary: list[float], pools: list[list[float]], min_samples: int, what: str):
    """Assemble a distribution from a primary multiset and coarser pools.

    Sparse primaries (fewer than min_samples) keep their samples but
    delegate draws to the first non-empty pool; an empty primary collapses
    to that pool directly.
    """
    pool_samples = next((p for p in pools if p), None)
    if len(primary) >= min_samples:
        return EmpiricalDistribution(tuple(primary))
    if primary and pool_samples:
        return EmpiricalDistribution(tuple(primary), EmpiricalDistribution(tuple(pool_samples)))
    if primary:
        return EmpiricalDistribution(tuple(primary))
    if pool_samples:
        return EmpiricalDistribution(tuple(pool_samples))
    raise NoDataError(f"no-data: {what} never observed in any pool")


def fit_travel_time(
    total_log: Sequence["TripRecord"],
    trip_id: int,
    segment_index: int,
    network: RouteNetwork | None = None,
    min_samples: int = DEFAULT_MIN_SAMPLES,
) -> EmpiricalDistribution:
    """Observed travel times onto stop ``segment_index`` for one trip.

    Falls back to pooling all trips of the same direction (and, when a
    network with schedules is supplied, the same hour-of-day bucket) when
    fewer than ``min_samples`` observations exist.
    """
    direction = direction_of_trip_id(trip_id)
    hour = _trip_hour_bucket(network, trip_id)
    primary: list[float] = []
    hour_pool: list[float] = []
    direction_pool: list[float] = []
    for record in total_log:
        if direction_of_trip_id(record.trip_id) != direction:
            continue
        if segment_index >= len(record.stops):
            continue
        value = record.stops[segment_index].travel_time_s
        if value is None:
            continue
        if record.trip_id == trip_id:
            primary.append(value)
        direction_pool.append(value)
        if hour is not None and _trip_hour_bucket(network, record.trip_id) == hour:
            hour_pool.append(value)
    return _with_fallback(
        primary,
        [hour_pool, direction_pool],
        min_samples,
        f"travel time for trip {trip_id} segment {segment_index}",
    )


def fit_zero_boarding_dwell(
    total_log: Sequence["TripRecord"],
    stop_index: int,
    direction: str,
) -> EmpiricalDistribution:
    """Dwell-minus-door-time observations where nobody boarded.

    Subtracting the door time isolates drive-through and stop overhead so
    the dwell composition does not count door time twice.  Only
    intermediate stops contribute; terminal dwell is holding time, not
    drive-through.
    """
    primary: list[float] = []
    pool: list[float] = []
    for record in total_log:
        if direction_of_trip_id(record.trip_id) != direction:
            continue
        for i in range(1, len(record.stops) - 1):
            stop = record.stops[i]
            if stop.check_ins != 0:
                continue
            if stop.dwell_time_s is None or stop.door_open_time_s is None:
                continue
            value = stop.dwell_time_s - stop.door_open_time_s
            pool.append(value)
            if i == stop_index:
                primary.append(value)
    if primary:
        return EmpiricalDistribution(tuple(primary))
    if pool:
        return EmpiricalDistribution(tuple(pool))
    raise NoDataError(f"no-data: zero-boarding dwell never observed in direction {direction}")


def fit_first_departure(
    total_log: Sequence["TripRecord"],
    trip_id: int,
    network: RouteNetwork | None = None,
    min_samples: int = DEFAULT_MIN_SAMPLES,
) -> EmpiricalDistribution:
    """Departure punctuality offsets observed at the first stop of one trip."""
    direction = direction_of_trip_id(trip_id)
    hour = _trip_hour_bucket(network, trip_id)
    primary: list[float] = []
    hour_pool: list[float] = []
    direction_pool: list[float] = []
    for record in total_log:
        if direction_of_trip_id(record.trip_id) != direction or not record.stops:
            continue
        value = record.stops[0].punctuality_s
        if value is None:
            continue
        if record.trip_id == trip_id:
            primary.append(value)
        direction_pool.append(value)
        if hour is not None and _trip_hour_bucket(network, record.trip_id) == hour:
            hour_pool.append(value)
    return _with_fallback(
        primary,
        [hour_pool, direction_pool],
        min_samples,
        f"first-stop departure punctuality for trip {trip_id}",
    )


def fit_od_matrix(
    total_log: Sequence["TripRecord"],
    direction: str,
    n_stops: int | None = None,
) -> ODMatrix:
    """Mean daily origin-destination counts for one direction.

    Check-out counts are attributed to boarding stops proportionally to
    each origin's share of the passengers still on board, which is the
    maximum-entropy allocation consistent with the per-stop marginals.
    """
    records = [r for r in total_log if direction_of_trip_id(r.trip_id) == direction]
    if not records:
        raise NoDataError(f"no-data: no trips in direction {direction}")
    if n_stops is None:
        n_stops = len(records[0].stops)
    totals = [[0.0] * n_stops for _ in range(n_stops)]
    days = set()
    for record in records:
        days.add(record.service_date)
        onboard_from = [0.0] * n_stops
        for j, stop in enumerate(record.stops):
            if stop.check_outs > 0:
                carried = sum(onboard_from)
                if carried <= 0:
                    raise ValueError(
                        f"trip {record.trip_id} {record.service_date}: check-outs at stop {j} "
                        "exceed passengers on board"
                    )
                share = stop.check_outs / carried
                for i in range(j):
                    alighting = onboard_from[i] * share
                    totals[i][j] += alighting
                    onboard_from[i] -= alighting
            onboard_from[j] += stop.check_ins
    n_days = len(days)
    counts = tuple(tuple(value / n_days for value in row) for row in totals)
    return ODMatrix(direction, counts)


def compute_lambdas(total_log: Sequence["TripRecord"], network: RouteNetwork) -> BoardingRates:
    """Mean observed boardings per (trip, stop): the Poisson rate within
    the scheduled headway window of that trip."""
    sums: dict[tuple[int, int], float] = {}
    counts: dict[tuple[int, int], int] = {}
    for record in total_log:
        for i, stop in enumerate(record.stops):
            key = (record.trip_id, i)
            sums[key] = sums.get(key, 0.0) + stop.check_ins
            counts[key] = counts.get(key, 0) + 1
    rates: dict[tuple[int, int], float] = {}
    for trip in network.trips.values():
        last = trip.n_stops - 1
        for i in range(trip.n_stops):
            key = (trip.trip_id, i)
            if i == last:
                rates[key] = 0.0
            elif key in sums:
                rates[key] = sums[key] / counts[key]
    return BoardingRates(rates)


@dataclass(frozen=True)
class EmpiricalModel:
    """Everything the simulator samples from, bundled with its network."""

    network: RouteNetwork
    door_model: DoorTimeModel
    travel_time: dict[tuple[int, int], EmpiricalDistribution]
    zero_boarding_dwell: dict[tuple[str, int], EmpiricalDistribution]
    first_departure: dict[int, EmpiricalDistribution]
    od: dict[str, ODMatrix]
    rates: BoardingRates


def fit_models(
    total_log: Sequence["TripRecord"],
    network: RouteNetwork,
    min_samples: int = DEFAULT_MIN_SAMPLES,
    refit_door: bool = False,
) -> EmpiricalModel:
    """Fit the full model bundle from a total log.

    Equivalent to calling the individual fit operations per trip and stop,
    but indexes the log in one pass instead of rescanning it.
    """
    if refit_door:
        from .dwell import refit_door_model

        door = refit_door_model(total_log).model
    else:
        door = DoorTimeModel()

    tt_primary: dict[tuple[int, int], list[float]] = {}
    tt_hour_pool: dict[tuple[str, int, int], list[float]] = {}
    tt_dir_pool: dict[tuple[str, int], list[float]] = {}
    fd_primary: dict[int, list[float]] = {}
    fd_hour_pool: dict[tuple[str, int], list[float]] = {}
    fd_dir_pool: dict[str, list[float]] = {}
    dt0_primary: dict[tuple[str, int], list[float]] = {}
    dt0_dir_pool: dict[str, list[float]] = {}
    for record in total_log:
        direction = direction_of_trip_id(record.trip_id)
        hour = _trip_hour_bucket(network, record.trip_id)
        last = len(record.stops) - 1
        for i, stop in enumerate(record.stops):
            if i > 0 and stop.travel_time_s is not None:
                tt_primary.setdefault((record.trip_id, i), []).append(stop.travel_time_s)
                tt_dir_pool.setdefault((direction, i), []).append(stop.travel_time_s)
                if hour is not None:
                    tt_hour_pool.setdefault((direction, hour, i), []).append(stop.travel_time_s)
            if (
                0 < i < last
                and stop.check_ins == 0
                and stop.dwell_time_s is not None
                and stop.door_open_time_s is not None
            ):
                value = stop.dwell_time_s - stop.door_open_time_s
                dt0_primary.setdefault((direction, i), []).append(value)
                dt0_dir_pool.setdefault(direction, []).append(value)
        if record.stops and record.stops[0].punctuality_s is not None:
            value = record.stops[0].punctuality_s
            fd_primary.setdefault(record.trip_id, []).append(value)
            fd_dir_pool.setdefault(direction, []).append(value)
            if hour is not None:
                fd_hour_pool.setdefault((direction, hour), []).append(value)

    travel_time = {}
    first_departure = {}
    for trip in network.trips.values():
        direction = trip.direction
        hour = _trip_hour_bucket(network, trip.trip_id)
        first_departure[trip.trip_id] = _with_fallback(
            fd_primary.get(trip.trip_id, []),
            [fd_hour_pool.get((direction, hour), []), fd_dir_pool.get(direction, [])],
            min_samples,
            f"first-stop departure punctuality for trip {trip.trip_id}",
        )
        for seg in range(1, trip.n_stops):
            travel_time[(trip.trip_id, seg)] = _with_fallback(
                tt_primary.get((trip.trip_id, seg), []),
                [
                    tt_hour_pool.get((direction, hour, seg), []),
                    tt_dir_pool.get((direction, seg), []),
                ],
                min_samples,
                f"travel time for trip {trip.trip_id} segment {seg}",
            )
    zero_boarding = {}
    od = {}
    for direction in ("A", "B"):
        n = network.n_stops(direction)
        if n == 0:
            continue
        for stop_index in range(1, n - 1):
            primary = dt0_primary.get((direction, stop_index), [])
            pool = dt0_dir_pool.get(direction, [])
            if primary:
                zero_boarding[(direction, stop_index)] = EmpiricalDistribution(tuple(primary))
            elif pool:
                zero_boarding[(direction, stop_index)] = EmpiricalDistribution(tuple(pool))
            else:
                raise NoDataError(
                    f"no-data: zero-boarding dwell never observed in direction {direction}"
                )
        od[direction] = fit_od_matrix(total_log, direction, n)
    rates = compute_lambdas(total_log, network)
    return EmpiricalModel(network, door, travel_time, zero_boarding, first_departure, od, rates)


# --- model bundle file --------------------------------------------------------


def _dist_to_dict(dist: EmpiricalDistribution) -> dict:
    doc = {"samples": list(dist.samples)}
    if dist.fallback is not None:
        doc["fallback"] = list(dist.fallback.samples)
    return doc


def _dist_from_dict(doc: dict) -> EmpiricalDistribution:
    fallback = None
    if "fallback" in doc:
        fallback = EmpiricalDistribution(tuple(doc["fallback"]))
    return EmpiricalDistribution(tuple(doc["samples"]), fallback)


def model_to_dict(model: EmpiricalModel) -> dict:
    return {
        "version": 1,
        "network": network_to_dict(model.network),
        "door_model": {
            "intercept_s": model.door_model.intercept_s,
            "board_coef_s": model.door_model.board_coef_s,
            "alight_coef_s": model.door_model.alight_coef_s,
        },
        "travel_time": [
            {"trip_id": tid, "segment_index": seg, **_dist_to_dict(dist)}
            for (tid, seg), dist in sorted(model.travel_time.items())
        ],
        "zero_boarding_dwell": [
            {"direction": d, "stop_index": i, **_dist_to_dict(dist)}
            for (d, i), dist in sorted(model.zero_boarding_dwell.items())
        ],
        "first_departure": [
            {"trip_id": tid, **_dist_to_dict(dist)}
            for tid, dist in sorted(model.first_departure.items())
        ],
        "od": {d: [list(row) for row in m.counts] for d, m in sorted(model.od.items())},
        "rates": [
            {"trip_id": tid, "stop_index": i, "lambda": lam}
            for (tid, i), lam in sorted(model.rates.rates.items())
        ],
    }


def model_from_dict(doc: dict) -> EmpiricalModel:
    network = network_from_dict(doc["network"])
    door = DoorTimeModel(**doc["door_model"])
    travel_time = {
        (entry["trip_id"], entry["segment_index"]): _dist_from_dict(entry)
        for entry in doc["travel_time"]
    }
    zero_boarding = {
        (entry["direction"], entry["stop_index"]): _dist_from_dict(entry)
        for entry in doc["zero_boarding_dwell"]
    }
    first_departure = {entry["trip_id"]: _dist_from_dict(entry) for entry in doc["first_departure"]}
    od = {
        d: ODMatrix(d, tuple(tuple(float(v) for v in row) for row in rows))
        for d, rows in doc["od"].items()
    }
    rates = BoardingRates(
        {(entry["trip_id"], entry["stop_index"]): float(entry["lambda"]) for entry in doc["rates"]}
    )
    return EmpiricalModel(network, door, travel_time, zero_boarding, first_departure, od, rates)


def save_model(model: EmpiricalModel, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(model_to_dict(model), sort_keys=True) + "\n", encoding="utf-8"
    )


def load_model(path: str | Path) -> EmpiricalModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))

"""Passenger generation: growth scenarios, Poisson boardings per (stop,
trip), arrival timing inside headway windows and O-D destination draws."""

from __future__ import annotations

import json
from bisect import bisect_left
from dataclasses import dataclass, field
from pathlib import Path

from .distributions import BoardingRates, ODMatrix
from .dwell import DoorTimeModel
from .network import RouteNetwork, DIRECTIONS, direction_of_trip_id
from .streams import TAG_DEMAND, poisson_draw, substream


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class StopGrowth:
    direction: str
    stop_index: int
    multiplier: float
    #: None spreads the extra passengers over subsequent stops following the
    #: historical distribution; an index sends all of them to that stop.
    destination: int | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    """Passenger-growth overlay; all multipliers default to the identity."""

    global_growth: float = 1.0
    per_direction: dict[str, float] = field(default_factory=dict)
    per_trip: dict[int, float] = field(default_factory=dict)
    per_stop: tuple[StopGrowth, ...] = ()
    #: Optional door-time coefficient override for what-if runs.
    door_model: DoorTimeModel | None = None

    def __post_init__(self):
        problems = []
        if self.global_growth < 0:
            problems.append("global_growth must be >= 0")
        for d, m in self.per_direction.items():
            if d not in DIRECTIONS:
                problems.append(f"per_direction: unknown direction {d!r}")
            if m < 0:
                problems.append(f"per_direction[{d}] must be >= 0")
        for tid, m in self.per_trip.items():
            if m < 0:
                problems.append(f"per_trip[{tid}] must be >= 0")
        seen = set()
        for entry in self.per_stop:
            key = (entry.direction, entry.stop_index)
            if key in seen:
                problems.append(f"per_stop: duplicate entry for {key}")
            seen.add(key)
            if entry.direction not in DIRECTIONS:
                problems.append(f"per_stop: unknown direction {entry.direction!r}")
            if entry.multiplier < 0:
                problems.append(f"per_stop{key}: multiplier must be >= 0")
            if entry.destination is not None and entry.destination <= entry.stop_index:
                problems.append(
                    f"per_stop{key}: destination-not-after-origin "
                    f"(destination {entry.destination} must exceed origin {entry.stop_index})"
                )
        if problems:
            raise ScenarioError("; ".join(problems))

    def stop_factor(self, direction: str, stop_index: int) -> float:
        for entry in self.per_stop:
            if entry.direction == direction and entry.stop_index == stop_index:
                return entry.multiplier
        return 1.0

    def stop_destination(self, direction: str, stop_index: int) -> int | None:
        for entry in self.per_stop:
            if entry.direction == direction and entry.stop_index == stop_index:
                return entry.destination
        return None


IDENTITY_SCENARIO = ScenarioConfig()


def apply_scenario(
    od: dict[str, ODMatrix],
    rates: BoardingRates,
    config: ScenarioConfig,
) -> tuple[dict[str, ODMatrix], BoardingRates]:
    """Scale boarding rates and O-D matrices by the scenario multipliers.

    Rates compose multiplicatively: global x direction x trip x stop.  O-D
    rows are rescaled by the day-level factors (everything except the
    per-trip multiplier); a fixed-destination policy puts the whole added
    row mass in the target column instead of scaling proportionally.
    """
    new_rates: dict[tuple[int, int], float] = {}
    for (trip_id, stop_index), lam in rates.rates.items():
        direction = direction_of_trip_id(trip_id)
        factor = (
            config.global_growth
            * config.per_direction.get(direction, 1.0)
            * config.per_trip.get(trip_id, 1.0)
            * config.stop_factor(direction, stop_index)
        )
        new_rates[(trip_id, stop_index)] = lam * factor

    new_od: dict[str, ODMatrix] = {}
    for direction, matrix in od.items():
        rows = []
        for i, row in enumerate(matrix.counts):
            factor = (
                config.global_growth
                * config.per_direction.get(direction, 1.0)
                * config.stop_factor(direction, i)
            )
            target = config.stop_destination(direction, i)
            if target is None or factor == 1.0:
                rows.append(tuple(v * factor for v in row))
            else:
                if target >= matrix.n_stops:
                    raise ScenarioError(
                        f"per_stop({direction}, {i}): destination {target} beyond the line"
                    )
                added = (factor - 1.0) * sum(row)
                rows.append(
                    tuple(v + added if j == target else v for j, v in enumerate(row))
                )
        new_od[direction] = ODMatrix(direction, tuple(rows))
    return new_od, BoardingRates(new_rates)


@dataclass(frozen=True, slots=True)
class PassengerPlan:
    passenger_id: int
    direction: str
    origin: int
    destination: int
    arrival_time_s: float
    intended_trip_id: int


def generate_passengers(
    rates: BoardingRates,
    od: dict[str, ODMatrix],
    network: RouteNetwork,
    master_seed: int,
    replication: int = 0,
) -> list[PassengerPlan]:
    """Generate one replication's passenger plans.

    Per (trip, stop) the boarding count is Poisson with the scenario-
    adjusted rate, arrival times are uniform over the trip's headway
    window at that stop, and destinations follow the normalized forward
    part of the O-D row.  Each (trip, stop) cell draws from its own
    substream of (master_seed, replication) so plans are reproducible and
    comparable across scenarios.
    """
    plans: list[PassengerPlan] = []
    next_id = 0
    for direction in DIRECTIONS:
        trips = network.trips_in_direction(direction)
        if not trips:
            continue
        matrix = od.get(direction)
        cumulative_rows: dict[int, tuple[list[float], float]] = {}
        for trip in trips:
            for stop_index in range(trip.n_stops - 1):
                lam = rates.get(trip.trip_id, stop_index)
                if lam <= 0.0:
                    continue
                rng = substream(master_seed, replication, TAG_DEMAND, trip.trip_id, stop_index)
                count = poisson_draw(lam, rng.random())
                if count == 0:
                    continue
                if matrix is None:
                    raise ScenarioError(f"no O-D matrix for direction {direction}")
                if stop_index not in cumulative_rows:
                    cum: list[float] = []
                    total = 0.0
                    for value in matrix.counts[stop_index]:
                        total += value
                        cum.append(total)
                    cumulative_rows[stop_index] = (cum, total)
                cum, total = cumulative_rows[stop_index]
                if total <= 0.0:
                    raise ScenarioError(
                        f"direction {direction} stop {stop_index}: boardings expected but the "
                        "O-D row has no forward mass"
                    )
                window_start, window_end = network.headway_window(trip, stop_index)
                span = window_end - window_start
                for _ in range(count):
                    arrival = window_end - rng.random() * span
                    destination = bisect_left(cum, rng.random() * total)
                    # Guard against landing exactly on a zero-mass boundary.
                    while matrix.counts[stop_index][destination] == 0.0:
                        destination += 1
                    plans.append(
                        PassengerPlan(
                            passenger_id=next_id,
                            direction=direction,
                            origin=stop_index,
                            destination=destination,
                            arrival_time_s=arrival,
                            intended_trip_id=trip.trip_id,
                        )
                    )
                    next_id += 1
    return plans


# --- scenario file ------------------------------------------------------------

_SCENARIO_KEYS = {"global_growth", "per_direction", "per_trip", "per_stop", "door_model"}
_STOP_GROWTH_KEYS = {"direction", "stop_index", "multiplier", "destination"}
_DOOR_KEYS = {"intercept_s", "board_coef_s", "alight_coef_s"}


def scenario_from_dict(doc: dict) -> ScenarioConfig:
    problems = [f"unknown key {k!r}" for k in doc if k not in _SCENARIO_KEYS]
    if problems:
        raise ScenarioError("; ".join(problems))
    door_model = None
    if "door_model" in doc:
        for k in doc["door_model"]:
            if k not in _DOOR_KEYS:
                raise ScenarioError(f"door_model: unknown key {k!r}")
        try:
            door_model = DoorTimeModel(**{k: float(v) for k, v in doc["door_model"].items()})
        except (TypeError, ValueError) as exc:
            raise ScenarioError(f"door_model: {exc}") from exc
    per_stop = []
    for i, raw in enumerate(doc.get("per_stop", [])):
        for k in raw:
            if k not in _STOP_GROWTH_KEYS:
                raise ScenarioError(f"per_stop[{i}]: unknown key {k!r}")
        destination = raw.get("destination")
        if destination is not None and destination != "historical":
            destination = int(destination)
        elif destination == "historical":
            destination = None
        per_stop.append(
            StopGrowth(
                direction=str(raw["direction"]),
                stop_index=int(raw["stop_index"]),
                multiplier=float(raw["multiplier"]),
                destination=destination,
            )
        )
    try:
        return ScenarioConfig(
            global_growth=float(doc.get("global_growth", 1.0)),
            per_direction={str(k): float(v) for k, v in doc.get("per_direction", {}).items()},
            per_trip={int(k): float(v) for k, v in doc.get("per_trip", {}).items()},
            per_stop=tuple(per_stop),
            door_model=door_model,
        )
    except (TypeError, KeyError) as exc:
        raise ScenarioError(f"malformed scenario: {exc!r}") from exc


def scenario_to_dict(config: ScenarioConfig) -> dict:
    doc: dict = {"global_growth": config.global_growth}
    if config.door_model is not None:
        doc["door_model"] = {
            "intercept_s": config.door_model.intercept_s,
            "board_coef_s": config.door_model.board_coef_s,
            "alight_coef_s": config.door_model.alight_coef_s,
        }
    if config.per_direction:
        doc["per_direction"] = dict(sorted(config.per_direction.items()))
    if config.per_trip:
        doc["per_trip"] = {str(k): v for k, v in sorted(config.per_trip.items())}
    if config.per_stop:
        doc["per_stop"] = [
            {
                "direction": e.direction,
                "stop_index": e.stop_index,
                "multiplier": e.multiplier,
                **({"destination": e.destination} if e.destination is not None else {}),
            }
            for e in config.per_stop
        ]
    return doc


def load_scenario(path: str | Path) -> ScenarioConfig:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: not valid JSON ({exc})") from exc
    return scenario_from_dict(doc)


def save_scenario(config: ScenarioConfig, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(scenario_to_dict(config), indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )

"""Discrete-event kernel and the bus / passenger / stop agent machinery.

One replication executes a full service day on a serial event loop.
Events are ordered by (time, rank, sequence number); bus events rank
before passenger arrivals at equal times, so a passenger arriving exactly
when a bus departs misses it.  All sampling runs on substreams derived
from (master seed, replication, trip), keeping draw sequences aligned
between scenario runs that share a master seed.
"""

from __future__ import annotations

import heapq
from collections import deque
from dataclasses import dataclass
from typing import Sequence

from .demand import PassengerPlan
from .distributions import EmpiricalModel
from .dwell import door_open_time
from .network import HORIZON_S, TripTemplate
from .streams import TAG_BUS, substream

SEAT_CAPACITY = 44
CRUSH_CAPACITY = 60
#: Buses appear at the first stop this long before their first departure,
#: standing in for the deadhead from the garage.
SPAWN_LEAD_S = 120.0

# Event ranks: bus activity resolves before passenger arrivals at ties.
_RANK_BUS = 0
_RANK_PASSENGER = 1

# Event kinds.
BUS_SPAWN = "bus_spawn"
TRIP_START = "trip_start"
BUS_ARRIVE = "bus_arrive"
BUS_DEPART = "bus_depart"
PASSENGER_ARRIVE = "passenger_arrive"

# Bus agent states.
HOLDING = "holding"
LOADING = "loading"
MOVING = "moving"
UNLOADING = "unloading"
_BUS_NEXT = {
    None: (HOLDING,),  # spawn enters at holding
    HOLDING: (LOADING,),
    LOADING: (MOVING,),
    MOVING: (UNLOADING,),
    UNLOADING: (HOLDING, LOADING),
}

# Passenger agent states.
WAITING = "waiting"
BOARDING = "boarding"
TRAVELLING = "travelling"
ALIGHTING = "alighting"
ARRIVED = "arrived"
_PASSENGER_CHAIN = (WAITING, BOARDING, TRAVELLING, ALIGHTING, ARRIVED)


@dataclass(slots=True)
class StopVisit:
    """One bus servicing one stop: the per-(trip, stop) trace record."""

    trip_id: int
    direction: str
    stop_index: int
    stop_id: str
    scheduled_departure_s: float
    arrival_s: float
    departure_s: float | None
    travel_time_s: float | None
    dwell_time_s: float | None
    boardings: int
    alightings: int
    onboard_after: int
    boarded_ids: tuple[int, ...]
    past_horizon: bool


@dataclass(slots=True)
class PassengerOutcome:
    passenger_id: int
    direction: str
    origin: int
    destination: int
    arrival_time_s: float
    board_time_s: float | None = None
    alight_time_s: float | None = None
    boarded_trip_id: int | None = None
    state: str = WAITING

    @property
    def waiting_time_s(self) -> float | None:
        if self.board_time_s is None:
            return None
        return self.board_time_s - self.arrival_time_s


@dataclass
class ReplicationTrace:
    replication: int
    visits: list[StopVisit]
    passengers: list[PassengerOutcome]
    #: (agent kind, agent id, state entered, time), in execution order.
    transitions: list[tuple[str, object, str, float]]
    stranded_ids: list[int]
    overrun_trips: int

    @property
    def total_boardings(self) -> int:
        return sum(v.boardings for v in self.visits)

    @property
    def total_alightings(self) -> int:
        return sum(v.alightings for v in self.visits)


class _Bus:
    __slots__ = (
        "bus_id",
        "circulation_id",
        "trip_ids",
        "trip_pos",
        "trip",
        "stop_index",
        "ready_time",
        "rng",
        "by_dest",
        "onboard",
        "pending_tt",
        "state",
    )

    def __init__(self, circulation):
        self.bus_id = circulation.bus_id
        self.circulation_id = circulation.circulation_id
        self.trip_ids = circulation.trip_ids
        self.trip_pos = -1
        self.trip: TripTemplate | None = None
        self.stop_index = 0
        self.ready_time = 0.0
        self.rng = None
        self.by_dest: dict[int, list[int]] = {}
        self.onboard = 0
        self.pending_tt: float | None = None
        self.state: str | None = None


class Replication:
    """Single seeded execution of a service day."""

    def __init__(
        self,
        models: EmpiricalModel,
        plans: Sequence[PassengerPlan],
        master_seed: int,
        replication: int = 0,
    ):
        self.models = models
        self.network = models.network
        self.plans = plans
        self.master_seed = master_seed
        self.replication = replication
        self._heap: list = []
        self._seq = 0
        self._queues: dict[tuple[str, int], deque[PassengerPlan]] = {}
        self._visits: list[StopVisit] = []
        self._transitions: list[tuple[str, object, str, float]] = []
        self._outcomes = [
            PassengerOutcome(p.passenger_id, p.direction, p.origin, p.destination, p.arrival_time_s)
            for p in plans
        ]
        self._overruns = 0

    # -- event plumbing ---------------------------------------------------

    def _push(self, time_s: float, rank: int, kind: str, payload) -> None:
        self._seq += 1
        heapq.heappush(self._heap, (time_s, rank, self._seq, kind, payload))

    def _enter(self, agent_kind: str, agent_id, state: str, time_s: float) -> None:
        self._transitions.append((agent_kind, agent_id, state, time_s))

    # -- run ----------------------------------------------------------------

    def run(self) -> ReplicationTrace:
        for plan in self.plans:
            self._push(plan.arrival_time_s, _RANK_PASSENGER, PASSENGER_ARRIVE, plan)
        for circulation in self.network.circulations.values():
            bus = _Bus(circulation)
            first_trip = self.network.trips[circulation.trip_ids[0]]
            self._push(
                first_trip.first_departure_s - SPAWN_LEAD_S, _RANK_BUS, BUS_SPAWN, bus
            )
        while self._heap:
            time_s, _rank, _seq, kind, payload = heapq.heappop(self._heap)
            if kind == PASSENGER_ARRIVE:
                self._handle_passenger_arrive(payload, time_s)
            elif kind == BUS_ARRIVE:
                self._handle_arrive(payload, time_s)
            elif kind == BUS_DEPART:
                self._handle_depart(payload, time_s)
            elif kind in (BUS_SPAWN, TRIP_START):
                self._start_trip(payload, time_s)
        stranded = [
            plan.passenger_id for queue in self._queues.values() for plan in queue
        ]
        stranded.sort()
        return ReplicationTrace(
            replication=self.replication,
            visits=self._visits,
            passengers=self._outcomes,
            transitions=self._transitions,
            stranded_ids=stranded,
            overrun_trips=self._overruns,
        )

    # -- handlers -----------------------------------------------------------

    def _handle_passenger_arrive(self, plan: PassengerPlan, t: float) -> None:
        self._queues.setdefault((plan.direction, plan.origin), deque()).append(plan)
        self._enter("passenger", plan.passenger_id, WAITING, t)

    def _start_trip(self, bus: _Bus, t: float) -> None:
        bus.trip_pos += 1
        trip_id = bus.trip_ids[bus.trip_pos]
        bus.trip = self.network.trips[trip_id]
        bus.stop_index = 0
        bus.ready_time = t
        bus.rng = substream(self.master_seed, self.replication, TAG_BUS, trip_id)
        # Drawn unconditionally to keep the trip's draw sequence aligned
        # across scenarios; only used when the bus is ready before schedule.
        offset = self.models.first_departure[trip_id].sample(bus.rng)
        scheduled = bus.trip.scheduled_departures[0]
        if t <= scheduled:
            departure = max(t, scheduled + offset)
            bus.state = HOLDING
            self._enter("bus", bus.bus_id, HOLDING, t)
        else:
            departure = t  # late handoff: no holding, leave once loaded
        self._push(departure, _RANK_BUS, BUS_DEPART, (bus, None))

    def _board(self, bus: _Bus, t: float) -> tuple[int, tuple[int, ...]]:
        queue = self._queues.get((bus.trip.direction, bus.stop_index))
        if not queue:
            return 0, ()
        count = min(len(queue), CRUSH_CAPACITY - bus.onboard)
        boarded = []
        for _ in range(count):
            plan = queue.popleft()
            outcome = self._outcomes[plan.passenger_id]
            outcome.board_time_s = t
            outcome.boarded_trip_id = bus.trip.trip_id
            outcome.state = BOARDING
            self._enter("passenger", plan.passenger_id, BOARDING, t)
            bus.by_dest.setdefault(plan.destination, []).append(plan.passenger_id)
            boarded.append(plan.passenger_id)
        bus.onboard += count
        return count, tuple(boarded)

    def _unload(self, bus: _Bus, t: float) -> int:
        arriving = bus.by_dest.pop(bus.stop_index, [])
        for pid in arriving:
            outcome = self._outcomes[pid]
            outcome.alight_time_s = t
            outcome.state = ARRIVED
            self._enter("passenger", pid, ALIGHTING, t)
            self._enter("passenger", pid, ARRIVED, t)
        bus.onboard -= len(arriving)
        return len(arriving)

    def _depart_to_moving(self, bus: _Bus, t: float, new_boarders: tuple[int, ...]) -> None:
        bus.state = MOVING
        self._enter("bus", bus.bus_id, MOVING, t)
        for pid in new_boarders:
            self._outcomes[pid].state = TRAVELLING
            self._enter("passenger", pid, TRAVELLING, t)
        next_index = bus.stop_index + 1
        tt = self.models.travel_time[(bus.trip.trip_id, next_index)].sample(bus.rng)
        bus.pending_tt = tt
        bus.stop_index = next_index
        self._push(t + tt, _RANK_BUS, BUS_ARRIVE, bus)

    def _handle_depart(self, payload: tuple, t: float) -> None:
        bus, boarded = payload
        if boarded is not None:
            # Intermediate stop: passengers boarded at arrival, the dwell has
            # elapsed and the bus rolls on.
            self._depart_to_moving(bus, t, boarded)
            return
        # First stop of a trip: loading happens at the departure instant.
        trip = bus.trip
        ci, boarded = self._board(bus, t)
        bus.state = LOADING
        self._enter("bus", bus.bus_id, LOADING, t)
        self._visits.append(
            StopVisit(
                trip_id=trip.trip_id,
                direction=trip.direction,
                stop_index=0,
                stop_id=trip.stops[0],
                scheduled_departure_s=trip.scheduled_departures[0],
                arrival_s=bus.ready_time,
                departure_s=t,
                travel_time_s=None,
                dwell_time_s=None,
                boardings=ci,
                alightings=0,
                onboard_after=bus.onboard,
                boarded_ids=boarded,
                past_horizon=t > HORIZON_S,
            )
        )
        self._depart_to_moving(bus, t, boarded)

    def _handle_arrive(self, bus: _Bus, t: float) -> None:
        trip = bus.trip
        k = bus.stop_index
        last = trip.n_stops - 1
        bus.state = UNLOADING
        self._enter("bus", bus.bus_id, UNLOADING, t)
        co = self._unload(bus, t)
        if k == last:
            self._visits.append(
                StopVisit(
                    trip_id=trip.trip_id,
                    direction=trip.direction,
                    stop_index=k,
                    stop_id=trip.stops[k],
                    scheduled_departure_s=trip.scheduled_departures[k],
                    arrival_s=t,
                    departure_s=None,
                    travel_time_s=bus.pending_tt,
                    dwell_time_s=None,
                    boardings=0,
                    alightings=co,
                    onboard_after=bus.onboard,
                    boarded_ids=(),
                    past_horizon=t > HORIZON_S,
                )
            )
            if t > HORIZON_S:
                self._overruns += 1
            if bus.trip_pos + 1 < len(bus.trip_ids):
                self._push(t, _RANK_BUS, TRIP_START, bus)
            return
        ci, boarded = self._board(bus, t)
        bus.state = LOADING
        self._enter("bus", bus.bus_id, LOADING, t)
        dt0 = self.models.zero_boarding_dwell[(trip.direction, k)].sample(bus.rng)
        if ci + co > 0:
            dwell = dt0 + door_open_time(self.models.door_model, ci, co)
        else:
            # Nobody to serve: the doors stay shut and the bus only crosses
            # the stop radius, so the door-time term does not apply.
            dwell = dt0
        departure = t + dwell
        self._visits.append(
            StopVisit(
                trip_id=trip.trip_id,
                direction=trip.direction,
                stop_index=k,
                stop_id=trip.stops[k],
                scheduled_departure_s=trip.scheduled_departures[k],
                arrival_s=t,
                departure_s=departure,
                travel_time_s=bus.pending_tt,
                dwell_time_s=dwell,
                boardings=ci,
                alightings=co,
                onboard_after=bus.onboard,
                boarded_ids=boarded,
                past_horizon=departure > HORIZON_S,
            )
        )
        self._push(departure, _RANK_BUS, BUS_DEPART, (bus, boarded))


def run_replication(
    models: EmpiricalModel,
    plans: Sequence[PassengerPlan],
    master_seed: int,
    replication: int = 0,
) -> ReplicationTrace:
    """Execute one service day and return its trace."""
    return Replication(models, plans, master_seed, replication).run()


def audit_trace(trace: ReplicationTrace) -> list[str]:
    """Independently re-check the engine's invariants on a finished trace.

    Covers passenger conservation, occupancy bounds, FIFO boarding order
    (re-derived from queue-join order and recorded release times) and the
    legality of every bus and passenger state transition.  Returns one
    message per violation; an empty list means the trace is clean.
    """
    problems: list[str] = []

    boardings = trace.total_boardings
    alightings = trace.total_alightings
    boarded_outcomes = sum(1 for p in trace.passengers if p.board_time_s is not None)
    alighted_outcomes = sum(1 for p in trace.passengers if p.alight_time_s is not None)
    onboard_at_end = boarded_outcomes - alighted_outcomes
    if boardings != alightings + onboard_at_end:
        problems.append(
            f"conservation: {boardings} boardings != {alightings} alightings "
            f"+ {onboard_at_end} still on board"
        )
    if trace.overrun_trips == 0 and onboard_at_end != 0:
        problems.append(f"conservation: {onboard_at_end} passengers on board after all trips ended")
    waiting = sum(1 for p in trace.passengers if p.board_time_s is None)
    if waiting != len(trace.stranded_ids):
        problems.append(
            f"stranded bookkeeping: {waiting} never boarded vs {len(trace.stranded_ids)} recorded"
        )

    for visit in trace.visits:
        if not 0 <= visit.onboard_after <= CRUSH_CAPACITY:
            problems.append(
                f"occupancy: trip {visit.trip_id} stop {visit.stop_index} "
                f"onboard {visit.onboard_after} outside [0, {CRUSH_CAPACITY}]"
            )
        if visit.boardings < 0 or visit.alightings < 0:
            problems.append(
                f"counts: trip {visit.trip_id} stop {visit.stop_index} negative flow"
            )

    # FIFO: rebuild each stop queue from join order and recorded releases.
    joined: dict[tuple[str, int], list] = {}
    for outcome in sorted(trace.passengers, key=lambda p: (p.arrival_time_s, p.passenger_id)):
        joined.setdefault((outcome.direction, outcome.origin), []).append(outcome)
    releases: dict[tuple[str, int], list[StopVisit]] = {}
    for visit in trace.visits:
        if visit.departure_s is None:
            continue
        releases.setdefault((visit.direction, visit.stop_index), []).append(visit)
    for key, stop_visits in releases.items():
        pending = joined.get(key, [])
        for visit in stop_visits:
            release_t = visit.departure_s if visit.stop_index == 0 else visit.arrival_s
            eligible = [p for p in pending if p.arrival_time_s < release_t]
            onboard_before = visit.onboard_after - visit.boardings
            expected_count = max(0, min(len(eligible), CRUSH_CAPACITY - onboard_before))
            expected_ids = tuple(p.passenger_id for p in eligible[:expected_count])
            if expected_ids != visit.boarded_ids:
                problems.append(
                    f"fifo: trip {visit.trip_id} stop {key} boarded {visit.boarded_ids}, "
                    f"expected {expected_ids}"
                )
            taken = set(visit.boarded_ids)
            pending = [p for p in pending if p.passenger_id not in taken]
        joined[key] = pending

    # State-machine legality.
    bus_state: dict[object, str | None] = {}
    passenger_pos: dict[object, int] = {}
    last_time: dict[tuple[str, object], float] = {}
    for agent_kind, agent_id, state, time_s in trace.transitions:
        key = (agent_kind, agent_id)
        if key in last_time and time_s < last_time[key]:
            problems.append(f"clock: {agent_kind} {agent_id} moved backwards to {time_s}")
        last_time[key] = time_s
        if agent_kind == "bus":
            previous = bus_state.get(agent_id)
            if state not in _BUS_NEXT[previous]:
                problems.append(f"bus {agent_id}: illegal transition {previous} -> {state}")
            bus_state[agent_id] = state
        else:
            expected = passenger_pos.get(agent_id, 0)
            if expected >= len(_PASSENGER_CHAIN) or _PASSENGER_CHAIN[expected] != state:
                legal = _PASSENGER_CHAIN[expected] if expected < len(_PASSENGER_CHAIN) else "nothing"
                problems.append(f"passenger {agent_id}: entered {state}, expected {legal}")
                break
            passenger_pos[agent_id] = expected + 1
    return problems

from datetime import date

import pytest

from buslinesim.ingest import TripRecord, TripStop
from buslinesim.network import Circulation, RouteNetwork, Segment, Stop, TripTemplate


def make_line(n_stops=4, trip_ids=(1001,), departures_start=100.0, gap=120.0):
    """Single-direction line with `n_stops` stops and one trip per id.

    Scheduled departures at stop i are start + i*gap per trip, trips spaced
    by 600 s; each trip gets its own bus and circulation.
    """
    stops = [Stop(f"S{i}", f"Stop {i}", 52.0 + 0.01 * i, 4.5 + 0.01 * i) for i in range(n_stops)]
    segments = [Segment(f"S{i}", f"S{i+1}") for i in range(n_stops - 1)]
    trips = []
    for k, trip_id in enumerate(sorted(trip_ids)):
        start = departures_start + 600.0 * k
        trips.append(
            TripTemplate(
                trip_id=trip_id,
                direction="A",
                stops=tuple(f"S{i}" for i in range(n_stops)),
                scheduled_departures=tuple(start + gap * i for i in range(n_stops)),
            )
        )
    circulations = [
        Circulation(f"C{k+1}", f"BUS{k+1}", (trip.trip_id,)) for k, trip in enumerate(trips)
    ]
    return RouteNetwork.build("test-line", stops, segments, trips, circulations)


def make_record(trip_id, stops_data, service_date=date(2024, 3, 4), bus_id="BUS1"):
    """Trip record from (ci, co, tt, dt, dot, punctuality) tuples per stop."""
    stops = []
    for i, (ci, co, tt, dt, dot, punct) in enumerate(stops_data):
        stops.append(
            TripStop(
                stop_id=f"S{i}",
                lat=52.0,
                lon=4.5,
                travel_time_s=tt,
                dwell_time_s=dt,
                door_open_time_s=dot,
                punctuality_s=punct,
                check_ins=ci,
                check_outs=co,
            )
        )
    return TripRecord(
        service_date=service_date,
        trip_id=trip_id,
        bus_id=bus_id,
        circulation_id="C1",
        driver_id="DRV1",
        stops=tuple(stops),
    )


@pytest.fixture(scope="session")
def default_truth_network():
    from buslinesim import synth

    truth = synth.default_truth()
    return truth, synth.build_network(truth)

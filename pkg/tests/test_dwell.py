import random

import pytest
from hypothesis import given, strategies as st

from buslinesim.distributions import EmpiricalDistribution
from buslinesim.dwell import (
    DoorTimeModel,
    InsufficientDataError,
    dwell_time,
    door_open_time,
    fit_door_observations,
    refit_door_model,
)

from conftest import make_record

DEFAULT = DoorTimeModel()


def test_published_coefficients_are_default():
    assert DEFAULT == DoorTimeModel(6.4, 2.8, 1.3)


def test_door_open_time_intercept_only():
    assert door_open_time(DEFAULT, 0, 0) == pytest.approx(6.4)


def test_door_open_time_boarding_dominant():
    assert door_open_time(DEFAULT, 5, 2) == pytest.approx(6.4 + 14.0)


def test_door_open_time_alighting_dominant():
    assert door_open_time(DEFAULT, 1, 10) == pytest.approx(6.4 + 13.0)


def test_negative_counts_rejected():
    with pytest.raises(ValueError):
        door_open_time(DEFAULT, -1, 0)


@given(st.integers(0, 40), st.integers(0, 40), st.integers(0, 40), st.integers(0, 40))
def test_door_open_time_monotone(ci1, co1, d_ci, d_co):
    low = door_open_time(DEFAULT, ci1, co1)
    high = door_open_time(DEFAULT, ci1 + d_ci, co1 + d_co)
    assert high >= low


@given(st.integers(0, 40), st.integers(0, 40))
def test_door_open_time_regime_symmetry(ci, co):
    swapped = DoorTimeModel(DEFAULT.intercept_s, DEFAULT.alight_coef_s, DEFAULT.board_coef_s)
    assert door_open_time(DEFAULT, ci, co) == pytest.approx(door_open_time(swapped, co, ci))


def test_dwell_time_adds_seeded_draw():
    dist = EmpiricalDistribution((3.1,))
    total = dwell_time(DEFAULT, dist, 5, 2, random.Random(1))
    assert total == pytest.approx(20.4 + 3.1)


def test_dwell_time_zero_counts_degenerate():
    dist = EmpiricalDistribution((8.0,))
    assert dwell_time(DEFAULT, dist, 0, 0, random.Random(1)) == pytest.approx(14.4)


def test_dwell_time_never_below_intercept():
    dist = EmpiricalDistribution((0.0, 1.0, 4.0))
    rng = random.Random(3)
    for _ in range(50):
        assert dwell_time(DEFAULT, dist, 0, 0, rng) >= DEFAULT.intercept_s


def _noiseless_observations(model, grid=range(0, 11)):
    return [
        (ci, co, door_open_time(model, ci, co))
        for ci in grid
        for co in grid
        if ci + co > 0
    ]


def test_refit_recovers_published_coefficients_exactly():
    obs = _noiseless_observations(DoorTimeModel(6.4, 2.8, 1.3))
    result = fit_door_observations(obs)
    assert result.converged
    assert result.model.intercept_s == pytest.approx(6.4, abs=1e-6)
    assert result.model.board_coef_s == pytest.approx(2.8, abs=1e-6)
    assert result.model.alight_coef_s == pytest.approx(1.3, abs=1e-6)


def test_refit_converges_from_wrong_start():
    truth = DoorTimeModel(5.0, 3.5, 2.0)
    result = fit_door_observations(_noiseless_observations(truth))
    assert result.converged
    assert result.model.intercept_s == pytest.approx(5.0, abs=1e-6)
    assert result.model.board_coef_s == pytest.approx(3.5, abs=1e-6)
    assert result.model.alight_coef_s == pytest.approx(2.0, abs=1e-6)


def test_refit_alighting_only_leaves_board_coef_undetermined():
    obs = [(0, co, door_open_time(DEFAULT, 0, co)) for co in range(1, 15)]
    result = fit_door_observations(obs)
    assert "board_coef_s" in result.undetermined
    assert result.model.intercept_s == pytest.approx(6.4, abs=1e-6)
    assert result.model.alight_coef_s == pytest.approx(1.3, abs=1e-6)


def test_refit_requires_ten_observations():
    obs = [(1, 0, 9.2)] * 9
    with pytest.raises(InsufficientDataError):
        fit_door_observations(obs)


def test_refit_from_records_uses_intermediate_stops_only():
    # Terminal stops carry holding time, not the linear door model; the
    # huge first-stop value must not leak into the fit.
    stops = [(3, 0, None, 400.0, 399.0, 0.0)]
    for ci, co in [(1, 0), (2, 0), (3, 1), (0, 2), (0, 5), (4, 0), (1, 3), (2, 2), (5, 0), (0, 8), (2, 1), (3, 3)]:
        stops.append((ci, co, 50.0, 30.0, door_open_time(DEFAULT, ci, co), 0.0))
    stops.append((0, 10, 50.0, 30.0, 0.0, 0.0))
    record = make_record(1001, stops)
    result = refit_door_model([record])
    assert result.model.intercept_s == pytest.approx(6.4, abs=1e-6)
    assert result.model.board_coef_s == pytest.approx(2.8, abs=1e-6)
    assert result.model.alight_coef_s == pytest.approx(1.3, abs=1e-6)


def test_model_rejects_negative_coefficients():
    with pytest.raises(ValueError):
        DoorTimeModel(-1.0, 2.8, 1.3)

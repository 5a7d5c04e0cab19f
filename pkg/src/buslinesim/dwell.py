"""Door-open-time model and dwell-time composition for intermediate stops.

Door open time is a piecewise-linear function of boarding and alighting
counts: intercept + max(board_coef * check_ins, alight_coef * check_outs).
Dwell time adds a draw from the zero-boarding dwell distribution, which
captures drive-through and stop overhead.  Terminal stops never use this
model: first-stop departures sample the historical departure-punctuality
distribution and last-stop dwell is not simulated.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

DEFAULT_INTERCEPT_S = 6.4
DEFAULT_BOARD_COEF_S = 2.8
DEFAULT_ALIGHT_COEF_S = 1.3


class InsufficientDataError(ValueError):
    pass


@dataclass(frozen=True)
class DoorTimeModel:
    intercept_s: float = DEFAULT_INTERCEPT_S
    board_coef_s: float = DEFAULT_BOARD_COEF_S
    alight_coef_s: float = DEFAULT_ALIGHT_COEF_S

    def __post_init__(self):
        if min(self.intercept_s, self.board_coef_s, self.alight_coef_s) < 0:
            raise ValueError("door model coefficients must be non-negative")


def door_open_time(model: DoorTimeModel, check_ins: int, check_outs: int) -> float:
    """Seconds the doors stay open for the given passenger flows."""
    if check_ins < 0 or check_outs < 0:
        raise ValueError("passenger counts must be non-negative")
    return model.intercept_s + max(
        model.board_coef_s * check_ins, model.alight_coef_s * check_outs
    )


def dwell_time(
    model: DoorTimeModel,
    zero_boarding_dwell,
    check_ins: int,
    check_outs: int,
    rng: random.Random,
) -> float:
    """Door open time plus one draw from the zero-boarding dwell distribution."""
    return door_open_time(model, check_ins, check_outs) + zero_boarding_dwell.sample(rng)


@dataclass(frozen=True)
class DoorFitResult:
    model: DoorTimeModel
    converged: bool
    iterations: int
    #: Coefficients that could not be estimated (kept at their start value).
    undetermined: tuple[str, ...] = ()


def fit_door_observations(
    observations: Sequence[tuple[int, int, float]],
    start: DoorTimeModel | None = None,
    max_iterations: int = 20,
) -> DoorFitResult:
    """Least-squares fit of (intercept, board_coef, alight_coef) from
    (check_ins, check_outs, door_open_time) triples.

    The max() in the model is handled by iterating a regime partition:
    each observation is assigned to the boarding-dominant regime when
    board_coef*CI >= alight_coef*CO under the current coefficients, both
    slopes plus a shared intercept are refit, and the loop stops at a
    partition fixed point.
    """
    obs = [(ci, co, dot) for ci, co, dot in observations if dot > 0]
    if len(obs) < 10:
        raise InsufficientDataError(
            f"need at least 10 intermediate-stop observations with door time > 0, got {len(obs)}"
        )
    model = start if start is not None else DoorTimeModel()
    ci = np.array([o[0] for o in obs], dtype=float)
    co = np.array([o[1] for o in obs], dtype=float)
    dot = np.array([o[2] for o in obs], dtype=float)

    boarding = model.board_coef_s * ci >= model.alight_coef_s * co
    converged = False
    iterations = 0
    undetermined: tuple[str, ...] = ()
    previous = model
    for iterations in range(1, max_iterations + 1):
        design = np.column_stack([np.ones_like(dot), np.where(boarding, ci, 0.0), np.where(boarding, 0.0, co)])
        # Columns with no signal (e.g. every observation has CI = 0) make the
        # corresponding slope unidentifiable; fit the reduced system instead.
        active = [0] + [k for k in (1, 2) if design[:, k].any()]
        theta, *_ = np.linalg.lstsq(design[:, active], dot, rcond=None)
        coeffs = [model.intercept_s, model.board_coef_s, model.alight_coef_s]
        names = ("intercept_s", "board_coef_s", "alight_coef_s")
        undetermined_now = []
        for k in (1, 2):
            if k not in active:
                undetermined_now.append(names[k])
        for pos, k in enumerate(active):
            # A negative slope contradicts the model form; treat it as
            # unidentifiable and keep the start value.
            if k > 0 and theta[pos] < 0:
                undetermined_now.append(names[k])
            else:
                coeffs[k] = float(theta[pos])
        model = DoorTimeModel(max(coeffs[0], 0.0), coeffs[1], coeffs[2])
        undetermined = tuple(undetermined_now)
        new_boarding = model.board_coef_s * ci >= model.alight_coef_s * co
        drift = max(
            abs(model.intercept_s - previous.intercept_s),
            abs(model.board_coef_s - previous.board_coef_s),
            abs(model.alight_coef_s - previous.alight_coef_s),
        )
        # Fixed point: the partition stops moving, or only tie rows keep
        # flipping while the coefficients themselves have settled.
        if np.array_equal(new_boarding, boarding) or (iterations > 1 and drift < 1e-10):
            converged = True
            break
        boarding = new_boarding
        previous = model
    return DoorFitResult(model, converged, iterations, undetermined)


def refit_door_model(total_log: Iterable, start: DoorTimeModel | None = None) -> DoorFitResult:
    """Refit the door model from intermediate-stop observations in a total log."""
    observations = []
    for record in total_log:
        for stop in record.stops[1:-1]:
            if stop.door_open_time_s is not None and stop.door_open_time_s > 0:
                observations.append((stop.check_ins, stop.check_outs, stop.door_open_time_s))
    return fit_door_observations(observations, start=start)

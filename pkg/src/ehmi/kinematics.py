"""Constant-acceleration timing and collision-avoidance acceleration bounds.

Each vehicle is reduced to a point moving along its own path with constant
acceleration from the moment the interaction starts. Distances are measured
along the path: ``dist_to_conflict`` to the front bumper touching the conflict
zone, ``dist_through_conflict`` to the rear bumper leaving it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Tuple

import numpy as np

# below this the motion is treated as uniform
LINEAR_ACCEL_EPS = 1e-9


class KinematicsError(ValueError):
    """Base class for kinematic failures."""


class Unreachable(KinematicsError):
    """The vehicle comes to a standstill before covering the distance."""

    def __init__(self, distance: float, stop_distance: float):
        self.distance = distance
        self.stop_distance = stop_distance
        super().__init__(
            f"vehicle stops after {stop_distance:.3f} m, before reaching {distance:.3f} m"
        )


class OpponentNeverClears(KinematicsError):
    """The opponent never leaves the conflict zone, so no bound exists."""


@dataclass(frozen=True)
class VehicleState:
    """Kinematic state of one vehicle at interaction onset."""

    velocity: float
    acceleration: float
    dist_to_conflict: float
    dist_through_conflict: float

    def __post_init__(self):
        vals = (self.velocity, self.acceleration, self.dist_to_conflict, self.dist_through_conflict)
        if not all(math.isfinite(v) for v in vals):
            raise ValueError(f"non-finite vehicle state {vals}")
        if self.velocity < 0:
            raise ValueError(f"velocity must be >= 0, got {self.velocity}")
        if not 0 < self.dist_to_conflict < self.dist_through_conflict:
            raise ValueError(
                "need 0 < dist_to_conflict < dist_through_conflict, got "
                f"{self.dist_to_conflict}, {self.dist_through_conflict}"
            )

    def with_acceleration(self, acceleration: float) -> "VehicleState":
        return VehicleState(self.velocity, acceleration, self.dist_to_conflict, self.dist_through_conflict)

    def as_tuple(self) -> Tuple[float, float, float, float]:
        return (self.velocity, self.acceleration, self.dist_to_conflict, self.dist_through_conflict)


@dataclass(frozen=True)
class ConflictGeometry:
    """Where the two paths cross and where each vehicle entered the interaction."""

    conflict_point: Tuple[float, float]
    entry_a: Tuple[float, float]
    entry_b: Tuple[float, float]
    path_length_a: Optional[float] = None
    path_length_b: Optional[float] = None


@dataclass(frozen=True)
class Encounter:
    """A left-turn interaction: vehicle A turns left, vehicle B goes straight."""

    a_state: VehicleState
    b_state: VehicleState
    geometry: Optional[ConflictGeometry] = field(default=None, compare=False)
    encounter_id: str = ""

    def with_b_acceleration(self, acceleration: float) -> "Encounter":
        return Encounter(self.a_state, self.b_state.with_acceleration(acceleration), self.geometry, self.encounter_id)

    def as_row(self) -> np.ndarray:
        return np.array(self.a_state.as_tuple() + self.b_state.as_tuple(), dtype=float)


def travel_time(velocity: float, acceleration: float, distance: float) -> float:
    """Time to cover ``distance`` from speed ``velocity`` at constant ``acceleration``.

    Speed is floored at zero: a decelerating vehicle that stops short of the
    distance raises :class:`Unreachable`.
    """
    if distance <= 0:
        return 0.0
    if abs(acceleration) < LINEAR_ACCEL_EPS:
        if velocity <= 0:
            raise Unreachable(distance, 0.0)
        return distance / velocity
    if acceleration < 0:
        stop_distance = velocity * velocity / (-2.0 * acceleration)
        if stop_distance < distance:
            raise Unreachable(distance, stop_distance)
    disc = velocity * velocity + 2.0 * acceleration * distance
    root = math.sqrt(max(disc, 0.0))
    # smallest nonnegative root of 0.5 a t^2 + v t - d = 0, written to avoid cancellation
    return 2.0 * distance / (velocity + root)


def time_to_reach(state: VehicleState) -> float:
    """Time for the front bumper to reach the conflict zone."""
    return travel_time(state.velocity, state.acceleration, state.dist_to_conflict)


def time_to_clear(state: VehicleState) -> float:
    """Time for the rear bumper to leave the conflict zone."""
    return travel_time(state.velocity, state.acceleration, state.dist_through_conflict)


def collision_avoid_accel(own: VehicleState, opponent: VehicleState, *, literal_subscripts: bool = False) -> float:
    """Acceleration at which ``own`` reaches the zone exactly as ``opponent`` clears it.

    ``literal_subscripts`` reproduces the literal published subscripts, which plug the
    opponent's own distance and speed into the bound. It exists only for
    comparison runs; the default form satisfies the arrival round trip.
    """
    try:
        t_clear = time_to_clear(opponent)
    except Unreachable as exc:
        raise OpponentNeverClears(str(exc)) from exc
    src = opponent if literal_subscripts else own
    return 2.0 * (src.dist_to_conflict - src.velocity * t_clear) / (t_clear * t_clear)


def collision_bounds(encounter: Encounter, *, literal_subscripts: bool = False) -> Tuple[float, float]:
    """``(a_c^A, a_c^B)`` for an encounter."""
    ac_a = collision_avoid_accel(encounter.a_state, encounter.b_state, literal_subscripts=literal_subscripts)
    ac_b = collision_avoid_accel(encounter.b_state, encounter.a_state, literal_subscripts=literal_subscripts)
    return ac_a, ac_b


def integrate_arrival(velocity, acceleration, distance, dt: float = 1e-4, t_max: float = 600.0):
    """Forward-Euler reference for :func:`travel_time`, NaN where the vehicle never arrives.

    Accepts scalars or equal-shape arrays. Kept deliberately naive so it can
    serve as an independent check on the closed form.
    """
    v = np.array(velocity, dtype=float, copy=True)
    a = np.broadcast_to(np.asarray(acceleration, dtype=float), v.shape)
    d = np.broadcast_to(np.asarray(distance, dtype=float), v.shape)
    x = np.zeros_like(v)
    out = np.full(v.shape, np.nan)
    active = np.ones(v.shape, dtype=bool)
    t = 0.0
    while t < t_max and active.any():
        step = v * dt
        hit = active & (x + step >= d) & (step > 0)
        out[hit] = t + dt * (d[hit] - x[hit]) / step[hit]
        active &= ~hit
        active &= ~((v == 0.0) & (a <= 0))
        x += step
        v = np.maximum(v + a * dt, 0.0)
        t += dt
    return float(out) if out.ndim == 0 else out

"""Kinematic bicycle model driven by rear-wheel feedback steering."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .path import Path


class TrackingDiverged(RuntimeError):
    pass


@dataclass(frozen=True)
class ControllerGains:
    # per metre travelled; critically damped (k_heading**2 == 4 * k_lateral) and
    # still stable with 0.1 s zero-order-hold steering up to ~15 m/s
    k_heading: float = 1.0
    k_lateral: float = 0.25
    wheelbase: float = 2.7
    max_steer: float = math.radians(40.0)
    max_lateral_error: float = 2.0


@dataclass
class SimTrajectory:
    """Fixed-step samples of a simulated vehicle (rear-axle reference)."""

    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    heading: np.ndarray
    speed: np.ndarray
    lateral_error: np.ndarray = field(default=None)

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def reference_points(self, offset: float = 0.0) -> np.ndarray:
        """Points ``offset`` metres ahead of the rear axle along the heading."""
        return self.xy + offset * np.column_stack([np.cos(self.heading), np.sin(self.heading)])


@dataclass
class VehicleSim:
    """Mutable state of one vehicle during a stepped simulation."""

    path: Path
    gains: ControllerGains
    x: float
    y: float
    yaw: float
    v: float
    s: float = 0.0
    hint: int = 0
    log: List[tuple] = field(default_factory=list)

    @classmethod
    def at_path_start(cls, path: Path, v0: float, gains: ControllerGains = ControllerGains(),
                      offset: float = 0.0, s0: float = 0.0) -> "VehicleSim":
        p = path.position(s0)
        th = path.heading_at(s0)
        p = p + offset * np.array([-np.sin(th), np.cos(th)])
        sim = cls(path, gains, float(p[0]), float(p[1]), th, float(v0))
        sim.s, sim.hint = path.project(p)
        return sim

    def steer(self) -> float:
        s, self.hint = self.path.project((self.x, self.y), self.hint)
        self.s = s
        e = self.path.lateral_error((self.x, self.y), s)
        th_e = _wrap(self.yaw - self.path.heading_at(s))
        k = self.path.curvature_at(s)
        v = self.v
        if v <= 1e-6:
            return 0.0
        g = self.gains
        sinc = math.sin(th_e) / th_e if abs(th_e) > 1e-9 else 1.0
        omega = v * k * math.cos(th_e) / (1.0 - k * e) - g.k_heading * abs(v) * th_e - g.k_lateral * v * sinc * e
        delta = math.atan2(g.wheelbase * omega, v)
        return float(np.clip(delta, -g.max_steer, g.max_steer))

    def lateral_error(self) -> float:
        return self.path.lateral_error((self.x, self.y), self.s)

    def step(self, accel: float, dt: float, substeps: int = 10) -> None:
        """Hold steering and speed for ``dt`` (pose integrated in substeps), then update speed."""
        delta = self.steer()
        h = dt / substeps
        for _ in range(substeps):
            self.x += self.v * math.cos(self.yaw) * h
            self.y += self.v * math.sin(self.yaw) * h
            self.yaw += self.v * math.tan(delta) / self.gains.wheelbase * h
        self.v = max(self.v + accel * dt, 0.0)
        self.s, self.hint = self.path.project((self.x, self.y), self.hint)
        e = self.lateral_error()
        if abs(e) > self.gains.max_lateral_error:
            raise TrackingDiverged(f"lateral deviation {e:.2f} m exceeds {self.gains.max_lateral_error} m")


def _wrap(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


def track_path(path: Path, v0: float, accel: Callable[[float, "VehicleSim"], float],
               gains: ControllerGains = ControllerGains(), dt: float = 0.1, duration: Optional[float] = None,
               initial_offset: float = 0.0, stop_at_end: bool = True) -> SimTrajectory:
    """Follow ``path`` from its start; ``accel(t, vehicle)`` gives the longitudinal command.

    Stops when the vehicle reaches the end of the path or after ``duration``.
    """
    if abs(initial_offset) > 1.0:
        raise ValueError("initial position must be within 1 m of the path start")
    veh = VehicleSim.at_path_start(path, v0, gains, initial_offset)
    rows = []
    t = 0.0
    limit = duration if duration is not None else 600.0
    n_steps = int(round(limit / dt))
    for k in range(n_steps + 1):
        t = k * dt
        rows.append((t, veh.x, veh.y, veh.yaw, veh.v, veh.lateral_error()))
        if k == n_steps or (stop_at_end and veh.s >= path.length - 1e-6):
            break
        veh.step(accel(t, veh), dt)
    arr = np.array(rows)
    return SimTrajectory(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5])

"""Post-encroachment time between two simulated trajectories."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .tracking import SimTrajectory

DANGER_THRESHOLD = 3.0  # s


class NoCrossing(ValueError):
    pass


def crossing_time(points: np.ndarray, t: np.ndarray, conflict_point: Sequence[float], tol: float = 0.5) -> float:
    """Time of closest approach to ``conflict_point``, interpolated within a sample step."""
    cp = np.asarray(conflict_point, float)
    pts = np.asarray(points, float)
    if len(pts) == 0:
        raise NoCrossing("empty trajectory")
    best_d, best_t = np.inf, np.nan
    if len(pts) == 1:
        best_d, best_t = float(np.hypot(*(pts[0] - cp))), float(t[0])
    for k in range(len(pts) - 1):
        a, b = pts[k], pts[k + 1]
        seg = b - a
        L2 = seg @ seg
        f = 0.0 if L2 == 0 else float(np.clip((cp - a) @ seg / L2, 0.0, 1.0))
        d = float(np.hypot(*(a + f * seg - cp)))
        if d < best_d - 1e-12:
            best_d, best_t = d, float(t[k] + f * (t[k + 1] - t[k]))
    if best_d > tol:
        raise NoCrossing(f"closest approach {best_d:.2f} m exceeds {tol} m")
    return best_t


@dataclass(frozen=True)
class PETResult:
    pet: float           # absolute gap, s
    signed: float        # second argument's crossing minus the first's
    first: int           # 0 if the first trajectory crossed first, else 1
    t_cross: Tuple[float, float]

    @property
    def dangerous(self) -> bool:
        return self.pet < DANGER_THRESHOLD


def compute_pet(traj_first: SimTrajectory, traj_second: SimTrajectory, conflict_point: Sequence[float],
                offset_first: float = 0.0, offset_second: float = 0.0, tol: float = 0.5) -> PETResult:
    """Gap between the two reference points passing the conflict point.

    ``offset_*`` moves each reference point ahead of the rear axle (half the
    wheelbase gives the vehicle centre).
    """
    t1 = crossing_time(traj_first.reference_points(offset_first), traj_first.t, conflict_point, tol)
    t2 = crossing_time(traj_second.reference_points(offset_second), traj_second.t, conflict_point, tol)
    signed = t2 - t1
    return PETResult(abs(signed), signed, 0 if signed >= 0 else 1, (t1, t2))

"""Synthetic encounters and trajectories for tests, demos and recovery experiments."""
from __future__ import annotations

from typing import List, Optional, Tuple

import numpy as np

from .data_io import LEFT, STRAIGHT, LabeledEncounter, Trajectory
from .game import DeltaRule, GameForm, outcome_probs
from .kinematics import Encounter, KinematicsError, VehicleState, collision_bounds
from .payoff import OUTCOMES, PayoffParams, utilities

# ranges loosely matching urban left-turn approaches
DEFAULT_RANGES = {
    "v_a": (2.0, 10.0), "acc_a": (-1.5, 1.5), "d_a": (4.0, 25.0), "extra_a": (7.0, 10.0),
    "v_b": (5.0, 14.0), "acc_b": (-1.5, 1.5), "d_b": (8.0, 40.0), "extra_b": (7.0, 10.0),
}


def random_encounter(rng: np.random.Generator, ranges: Optional[dict] = None, encounter_id: str = "") -> Encounter:
    """Draw encounters until one has finite collision bounds for both players."""
    r = dict(DEFAULT_RANGES, **(ranges or {}))
    while True:
        u = {k: rng.uniform(*v) for k, v in r.items()}
        enc = Encounter(
            VehicleState(u["v_a"], u["acc_a"], u["d_a"], u["d_a"] + u["extra_a"]),
            VehicleState(u["v_b"], u["acc_b"], u["d_b"], u["d_b"] + u["extra_b"]),
            None, encounter_id,
        )
        try:
            collision_bounds(enc)
        except KinematicsError:
            continue
        return enc


def random_encounters(n: int, seed: int = 0, ranges: Optional[dict] = None) -> List[Encounter]:
    rng = np.random.default_rng(seed)
    return [random_encounter(rng, ranges, f"syn{i:05d}") for i in range(n)]


def sample_outcomes(encounters: List[Encounter], params: PayoffParams, form=GameForm.B_FIRST,
                    delta_rule: DeltaRule = DeltaRule(), seed: int = 0) -> List[LabeledEncounter]:
    """Label encounters by sampling from the model's outcome distribution."""
    rng = np.random.default_rng(seed)
    feats = np.array([[e.a_state.acceleration, e.b_state.acceleration, *collision_bounds(e)] for e in encounters])
    p = outcome_probs(utilities(feats, params), form, delta_rule.delta)
    p = p / p.sum(axis=1, keepdims=True)
    draws = (rng.random(len(encounters))[:, None] > np.cumsum(p, axis=1)).sum(axis=1)
    draws = np.minimum(draws, 3)
    return [LabeledEncounter(e, OUTCOMES[k], e.encounter_id) for e, k in zip(encounters, draws)]


def random_params(seed: int = 0, scale: float = 1.0) -> PayoffParams:
    rng = np.random.default_rng(seed)
    return PayoffParams(rng.normal(scale=scale, size=20))


# -- trajectories ---------------------------------------------------------------------

def _profile(v0: float, accel, t: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Arc length and speed under a piecewise acceleration ``accel(t)``, speed floored at 0."""
    s = np.zeros_like(t)
    v = np.zeros_like(t)
    v[0] = v0
    for k in range(1, len(t)):
        dt = t[k] - t[k - 1]
        a = accel(t[k - 1])
        v_new = max(v[k - 1] + a * dt, 0.0)
        if v[k - 1] + a * dt < 0 and a != 0:
            t_stop = v[k - 1] / -a
            s[k] = s[k - 1] + 0.5 * v[k - 1] * t_stop
        else:
            s[k] = s[k - 1] + 0.5 * (v[k - 1] + v_new) * dt
        v[k] = v_new
    return s, v


def left_turn_centerline(n: int = 400) -> np.ndarray:
    """Southbound approach at x=-1.75 turning left onto the eastbound lane y=-1.75."""
    approach = np.column_stack([np.full(60, -1.75), np.linspace(60.0, 8.0, 60)])
    r = 9.75
    ang = np.linspace(np.pi, 1.5 * np.pi, 80)[1:]
    arc = np.column_stack([8.0 + r * np.cos(ang), 8.0 + r * np.sin(ang)])
    exit_ = np.column_stack([np.linspace(8.0, 60.0, 60)[1:], np.full(59, -1.75)])
    return np.vstack([approach, arc, exit_])


def straight_centerline() -> np.ndarray:
    """Northbound lane x=+1.75."""
    return np.column_stack([np.full(2, 1.75), np.array([-60.0, 60.0])])


def _along(path: np.ndarray, s: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    seg = np.hypot(*np.diff(path, axis=0).T)
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    s = np.clip(s, 0.0, cum[-1])
    return np.interp(s, cum, path[:, 0]), np.interp(s, cum, path[:, 1])


def synthetic_pair(v_a: float, accel_a, v_b: float, accel_b, s0_a: float = 0.0, s0_b: float = 0.0,
                   duration: float = 8.0, rate: float = 10.0, ids=("A", "B"),
                   t0: float = 0.0) -> Tuple[Trajectory, Trajectory]:
    """Left-turn/straight trajectory pair with the given speed profiles.

    ``accel_*`` may be a constant or a function of time since the start.
    """
    t = t0 + np.arange(0.0, duration + 1e-9, 1.0 / rate)
    fa = accel_a if callable(accel_a) else (lambda _t, c=accel_a: c)
    fb = accel_b if callable(accel_b) else (lambda _t, c=accel_b: c)
    sa, va = _profile(v_a, lambda x: fa(x - t0), t)
    sb, vb = _profile(v_b, lambda x: fb(x - t0), t)
    xa, ya = _along(left_turn_centerline(), s0_a + sa)
    xb, yb = _along(straight_centerline(), s0_b + sb)
    return (Trajectory(ids[0], LEFT, t, xa, ya, va), Trajectory(ids[1], STRAIGHT, t, xb, yb, vb))

"""Deception on/off scenario runs and the initial-state sweep.

Protocol: each vehicle starts at its path start and keeps its initial
acceleration up to its stop line. Past the stop line the left-turning HV
switches to the average acceleration of the expected-outcome class (a
different value when it holds the false belief). Once either vehicle's
reference point passes the conflict point, both accelerate at the
post-conflict rate.
"""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path as FsPath
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

import numpy as np

from ..disclosure import BeliefModel, decide, deception_success
from ..game import DeltaRule
from ..kinematics import Encounter, KinematicsError, VehicleState
from ..payoff import Outcome, PayoffParams
from .path import Path, fit_path
from .pet import NoCrossing, PETResult, compute_pet
from .tracking import ControllerGains, SimTrajectory, VehicleSim

AV_FIRST = Outcome.O21   # HV yields, AV drives
AV_LATER = Outcome.O12   # HV turns, AV yields

DEFAULT_HV_AFTER_STOP = {
    "o21": {"no_deception": -1.5, "deception": -2.5},
    "o12": {"no_deception": -0.5, "deception": 0.0},
}


@dataclass(frozen=True)
class VehicleSpec:
    start: Tuple[float, float]
    end: Tuple[float, float]
    start_heading: float
    end_heading: float
    stop_line: Tuple[float, float]
    v0: float
    a0: float
    anchors: Tuple[Tuple[float, float], ...] = ()

    def __post_init__(self):
        if not (math.isfinite(self.v0) and self.v0 >= 0):
            raise ValueError(f"initial speed must be finite and >= 0, got {self.v0}")
        if not math.isfinite(self.a0):
            raise ValueError("initial acceleration must be finite")

    def with_state(self, v0: float, a0: float) -> "VehicleSpec":
        return replace(self, v0=float(v0), a0=float(a0))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["anchors"] = [list(p) for p in self.anchors]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "VehicleSpec":
        return cls(
            start=tuple(map(float, d["start"])), end=tuple(map(float, d["end"])),
            start_heading=float(d["start_heading"]), end_heading=float(d["end_heading"]),
            stop_line=tuple(map(float, d["stop_line"])), v0=float(d["v0"]), a0=float(d["a0"]),
            anchors=tuple(tuple(map(float, p)) for p in d.get("anchors", ())),
        )


@dataclass(frozen=True)
class ScenarioConfig:
    """Everything one paired simulation needs; serialisable to JSON."""

    hv: VehicleSpec
    av: VehicleSpec
    conflict_point: Tuple[float, float]
    expected: str = "o21"
    deception: bool = False
    post_conflict_accel: float = 2.0
    hv_after_stop: Dict[str, Dict[str, float]] = field(default_factory=lambda: json.loads(json.dumps(DEFAULT_HV_AFTER_STOP)))
    av_after_stop: Optional[float] = None   # None keeps the AV's initial acceleration
    dt: float = 0.1
    duration: float = 30.0
    wheelbase: float = 2.7
    vehicle_length: float = 4.5
    zone_extent: float = 3.5
    reference_offset: Optional[float] = None  # ahead of the rear axle; None means vehicle centre
    speed_bounds: Tuple[float, float] = (0.0, 20.0)
    name: str = ""

    def __post_init__(self):
        exp = Outcome.parse(self.expected)
        if exp not in (AV_FIRST, AV_LATER):
            raise ValueError(f"scenario expected outcome must be o21 or o12, got {exp}")
        lo, hi = self.speed_bounds
        for who, spec in (("hv", self.hv), ("av", self.av)):
            if not lo <= spec.v0 <= hi:
                raise ValueError(f"{who} initial speed {spec.v0} outside [{lo}, {hi}]")
        if self.dt <= 0 or self.duration <= 0:
            raise ValueError("dt and duration must be positive")

    @property
    def expected_outcome(self) -> Outcome:
        return Outcome.parse(self.expected)

    @property
    def offset(self) -> float:
        return 0.5 * self.wheelbase if self.reference_offset is None else float(self.reference_offset)

    @property
    def gains(self) -> ControllerGains:
        return ControllerGains(wheelbase=self.wheelbase)

    def hv_accel_after_stop(self) -> float:
        return float(self.hv_after_stop[self.expected_outcome.value]["deception" if self.deception else "no_deception"])

    def with_deception(self, flag: bool) -> "ScenarioConfig":
        return replace(self, deception=bool(flag))

    def to_dict(self) -> dict:
        d = asdict(self)
        d["hv"], d["av"] = self.hv.to_dict(), self.av.to_dict()
        d["conflict_point"] = list(self.conflict_point)
        d["speed_bounds"] = list(self.speed_bounds)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioConfig":
        d = dict(d)
        d["hv"], d["av"] = VehicleSpec.from_dict(d["hv"]), VehicleSpec.from_dict(d["av"])
        d["conflict_point"] = tuple(map(float, d["conflict_point"]))
        if "speed_bounds" in d:
            d["speed_bounds"] = tuple(map(float, d["speed_bounds"]))
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown scenario fields: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def load(cls, path: Union[str, FsPath]) -> "ScenarioConfig":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))

    def save(self, path: Union[str, FsPath]) -> None:
        with open(path, "w", newline="\n") as fh:
            fh.write(self.to_json())


def shipped_scenario(name: str) -> ScenarioConfig:
    """Bundled scenario file, e.g. ``"av_first"``."""
    text = resources.files("ehmi.data").joinpath(f"{name}.json").read_text()
    return ScenarioConfig.from_dict(json.loads(text))


# -- map -----------------------------------------------------------------------------

@dataclass(frozen=True)
class CrossingLayout:
    """Four-arm intersection: southbound HV turning left, northbound AV going straight.

    The box spans ``[-half_size, half_size]`` on both axes with stop lines on
    its edges. The HV runs ``straight_after_stop`` metres past its stop line,
    then follows a circular arc onto the eastbound lane at ``exit_lane_y``.
    """

    half_size: float = 20.0
    hv_lane_x: float = -1.75
    av_lane_x: float = 5.25
    exit_lane_y: float = -5.25
    straight_after_stop: float = 4.0
    n_arc_anchors: int = 4
    run_out: float = 40.0

    @property
    def radius(self) -> float:
        return self.half_size - self.straight_after_stop - self.exit_lane_y

    @property
    def centre(self) -> Tuple[float, float]:
        return (self.hv_lane_x + self.radius, self.half_size - self.straight_after_stop)

    def conflict_point(self) -> Tuple[float, float]:
        cx, cy = self.centre
        c = (cx - self.av_lane_x) / self.radius
        if not -1.0 < c < 1.0:
            raise ValueError("the AV lane does not cross the turning arc")
        return (self.av_lane_x, cy - self.radius * math.sqrt(1.0 - c * c))

    def specs(self, hv_start_gap: float, av_start_gap: float, hv_state=(5.0, 0.0),
              av_state=(10.0, 0.0)) -> Tuple["VehicleSpec", "VehicleSpec"]:
        """Vehicle specs starting ``*_start_gap`` metres upstream of their stop lines."""
        H, (cx, cy), r = self.half_size, self.centre, self.radius
        ang = np.linspace(math.pi, 1.5 * math.pi, self.n_arc_anchors + 2)
        arc = [(round(cx + r * math.cos(a), 6), round(cy + r * math.sin(a), 6)) for a in ang]
        hv = VehicleSpec(start=(self.hv_lane_x, H + hv_start_gap), end=(arc[-1][0] + self.run_out, self.exit_lane_y),
                         start_heading=-math.pi / 2, end_heading=0.0, stop_line=(self.hv_lane_x, H),
                         v0=float(hv_state[0]), a0=float(hv_state[1]), anchors=tuple(arc))
        av = VehicleSpec(start=(self.av_lane_x, -H - av_start_gap), end=(self.av_lane_x, H + self.run_out),
                         start_heading=math.pi / 2, end_heading=math.pi / 2, stop_line=(self.av_lane_x, -H),
                         v0=float(av_state[0]), a0=float(av_state[1]))
        return hv, av

    def scenario(self, hv_start_gap: float, av_start_gap: float, hv_state=(5.0, 0.0), av_state=(10.0, 0.0),
                 **kwargs) -> "ScenarioConfig":
        hv, av = self.specs(hv_start_gap, av_start_gap, hv_state, av_state)
        cp = tuple(round(c, 6) for c in self.conflict_point())
        return ScenarioConfig(hv, av, cp, **kwargs)


# -- paths and encounter ----------------------------------------------------------------

_PATH_CACHE: Dict[tuple, Path] = {}


def vehicle_path(spec: VehicleSpec, conflict_point: Sequence[float]) -> Path:
    """Clamped cubic spline through start, stop line, extra anchors, conflict point and end."""
    key = (spec.start, spec.end, spec.start_heading, spec.end_heading, spec.stop_line, spec.anchors,
           tuple(conflict_point))
    if key not in _PATH_CACHE:
        mids = [spec.stop_line, *spec.anchors]
        _PATH_CACHE[key] = fit_path(spec.start, conflict_point, spec.end, mids,
                                    start_heading=spec.start_heading, end_heading=spec.end_heading)
    return _PATH_CACHE[key]


def _arc_at(path: Path, point: Sequence[float]) -> float:
    return path.project(point)[0]


def encounter_from_scenario(config: ScenarioConfig) -> Encounter:
    """Initial-state encounter: distances measured from each vehicle centre at its start."""
    states = []
    for spec in (config.hv, config.av):
        path = vehicle_path(spec, config.conflict_point)
        s_c = _arc_at(path, config.conflict_point)
        d = s_c - config.offset - 0.5 * config.zone_extent - 0.5 * config.vehicle_length
        states.append(VehicleState(spec.v0, spec.a0, d, d + config.zone_extent + config.vehicle_length))
    return Encounter(states[0], states[1], None, config.name)


# -- one simulation -------------------------------------------------------------------

@dataclass
class SimulationResult:
    config: ScenarioConfig
    hv: SimTrajectory
    av: SimTrajectory
    pet: PETResult       # signed = t_av - t_hv
    outcome: Outcome     # realised passing order
    deadlock_release: bool = False

    def trajectory_rows(self) -> List[List[str]]:
        rows = []
        for name, tr in (("hv", self.hv), ("av", self.av)):
            for k in range(len(tr.t)):
                rows.append([f"{tr.t[k]:.1f}", name, f"{tr.x[k]:.3f}", f"{tr.y[k]:.3f}",
                             f"{tr.heading[k]:.4f}", f"{tr.speed[k]:.3f}"])
        return rows


TRAJECTORY_HEADER = ["t", "vehicle", "x", "y", "heading", "speed"]


def simulate_encounter(config: ScenarioConfig) -> SimulationResult:
    """Run both vehicles under the stop-line protocol and measure PET."""
    gains = config.gains
    off = config.offset
    paths = [vehicle_path(config.hv, config.conflict_point), vehicle_path(config.av, config.conflict_point)]
    specs = [config.hv, config.av]
    s_stop = [_arc_at(p, s.stop_line) for p, s in zip(paths, specs)]
    s_conf = [_arc_at(p, config.conflict_point) for p in paths]
    after_stop = [config.hv_accel_after_stop(),
                  config.av_after_stop if config.av_after_stop is not None else config.av.a0]
    first_idx = 1 if config.expected_outcome is AV_FIRST else 0
    vehs = [VehicleSim.at_path_start(p, s.v0, gains) for p, s in zip(paths, specs)]

    logs: List[list] = [[], []]
    active = [True, True]
    released = False
    n_steps = int(round(config.duration / config.dt))
    done_margin = 6.0 + off
    for k in range(n_steps + 1):
        t = k * config.dt
        ref = [v.s + off for v in vehs]
        for i, v in enumerate(vehs):
            if active[i]:
                logs[i].append((t, v.x, v.y, v.yaw, v.v, v.lateral_error()))
                # a vehicle well past the conflict point (or out of path) leaves the run
                if ref[i] >= s_conf[i] + done_margin or v.s >= paths[i].length - 0.5:
                    active[i] = False
        if not any(active) or k == n_steps:
            break
        passed = any(r >= sc for r, sc in zip(ref, s_conf))
        accels = []
        for i, spec in enumerate(specs):
            if passed:
                accels.append(config.post_conflict_accel)
            elif ref[i] >= s_stop[i]:
                accels.append(after_stop[i])
            else:
                accels.append(spec.a0)
        if not passed and all(v.v <= 1e-9 for v in vehs) and all(a <= 0 for a in accels):
            # both stopped short of the conflict point: the expected-first vehicle goes
            accels[first_idx] = config.post_conflict_accel
            released = True
        for i, (v, a) in enumerate(zip(vehs, accels)):
            if active[i]:
                v.step(a, config.dt)

    trajs = []
    for log in logs:
        arr = np.array(log)
        trajs.append(SimTrajectory(arr[:, 0], arr[:, 1], arr[:, 2], arr[:, 3], arr[:, 4], arr[:, 5]))
    pet = compute_pet(trajs[0], trajs[1], config.conflict_point, off, off)
    outcome = AV_LATER if pet.signed > 0 else AV_FIRST
    return SimulationResult(config, trajs[0], trajs[1], pet, outcome, released)


@dataclass
class PairReport:
    no_deception: SimulationResult
    deception: SimulationResult

    @property
    def increase(self) -> float:
        return self.deception.pet.pet - self.no_deception.pet.pet

    def summary(self) -> dict:
        out = {"scenario": self.no_deception.config.name,
               "expected": self.no_deception.config.expected_outcome.value}
        for key, res in (("no_deception", self.no_deception), ("deception", self.deception)):
            out[key] = {"pet": round(res.pet.pet, 3), "dangerous": res.pet.dangerous,
                        "first": "hv" if res.pet.first == 0 else "av", "outcome": res.outcome.value}
        out["pet_increase"] = round(self.increase, 3)
        return out


def run_pair(config: ScenarioConfig) -> PairReport:
    """The same scenario without and with the HV holding the false belief."""
    return PairReport(simulate_encounter(config.with_deception(False)),
                      simulate_encounter(config.with_deception(True)))


# -- sweep ----------------------------------------------------------------------------

@dataclass(frozen=True)
class Axis:
    lo: float
    hi: float
    n: int

    def values(self) -> np.ndarray:
        if self.n <= 0:
            return np.zeros(0)
        if self.n == 1:
            return np.array([self.lo])
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class GridSpec:
    """Initial-state grid over (v, a) of both vehicles on a fixed base scenario."""

    v_hv: Axis
    a_hv: Axis
    v_av: Axis
    a_av: Axis

    def cells(self) -> Iterable[Tuple[float, float, float, float]]:
        return itertools.product(self.v_hv.values(), self.a_hv.values(), self.v_av.values(), self.a_av.values())

    @property
    def size(self) -> int:
        return max(self.v_hv.n, 0) * max(self.a_hv.n, 0) * max(self.v_av.n, 0) * max(self.a_av.n, 0)

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        return cls(*(Axis(float(d[k][0]), float(d[k][1]), int(d[k][2])) for k in ("v_hv", "a_hv", "v_av", "a_av")))

    def to_dict(self) -> dict:
        return {k: [getattr(self, k).lo, getattr(self, k).hi, getattr(self, k).n]
                for k in ("v_hv", "a_hv", "v_av", "a_av")}


@dataclass
class SweepCell:
    v_hv: float
    a_hv: float
    v_av: float
    a_av: float
    status: str                     # "ok" or "skipped"
    expected: str = ""
    baseline: str = ""
    success: bool = False
    pet_no_deception: float = float("nan")
    pet_deception: float = float("nan")
    reason: str = ""

    @property
    def pet_increased(self) -> bool:
        return self.pet_deception > self.pet_no_deception


SWEEP_HEADER = ["v_hv", "a_hv", "v_av", "a_av", "status", "expected", "baseline", "success",
                "pet_no_deception", "pet_deception"]


@dataclass
class SweepReport:
    cells: List[SweepCell]

    @property
    def valid(self) -> List[SweepCell]:
        return [c for c in self.cells if c.status == "ok"]

    def proportions(self) -> Dict[str, float]:
        n = len(self.valid)
        if n == 0:
            return {"total": 0.0, "av_first": 0.0, "av_later": 0.0}
        succ = [c for c in self.valid if c.success]
        return {"total": len(succ) / n,
                "av_first": sum(c.expected == AV_FIRST.value for c in succ) / n,
                "av_later": sum(c.expected == AV_LATER.value for c in succ) / n}

    def summary(self) -> dict:
        succ = [c for c in self.valid if c.success]
        simulated = [c for c in succ if not math.isnan(c.pet_deception)]
        dist = {}
        for exp in (AV_FIRST, AV_LATER):
            sel = [c for c in succ if c.expected == exp.value]
            dist[exp.value] = {k: round(float(np.mean([getattr(c, k) for c in sel])), 3) if sel else None
                               for k in ("v_hv", "a_hv", "v_av", "a_av")}
        return {
            "n_cells": len(self.cells),
            "n_valid": len(self.valid),
            "n_skipped": len(self.cells) - len(self.valid),
            "n_success": len(succ),
            "proportion": {k: round(100.0 * v, 3) for k, v in self.proportions().items()},
            "success_state_means": dist,
            "n_simulated": len(simulated),
            "n_pet_increased": sum(c.pet_increased for c in simulated),
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(SWEEP_HEADER)
        for c in self.cells:
            w.writerow([f"{c.v_hv:.3f}", f"{c.a_hv:.3f}", f"{c.v_av:.3f}", f"{c.a_av:.3f}", c.status,
                        c.expected, c.baseline, int(c.success),
                        "" if math.isnan(c.pet_no_deception) else f"{c.pet_no_deception:.3f}",
                        "" if math.isnan(c.pet_deception) else f"{c.pet_deception:.3f}"])
        return buf.getvalue()


def evaluate_cell(base: ScenarioConfig, state: Tuple[float, float, float, float], params: PayoffParams,
                  beliefs: BeliefModel = BeliefModel(), delta_rule: DeltaRule = DeltaRule(),
                  simulate: bool = True) -> SweepCell:
    v_hv, a_hv, v_av, a_av = (float(x) for x in state)
    cell = SweepCell(v_hv, a_hv, v_av, a_av, "ok")
    try:
        cfg = replace(base, hv=base.hv.with_state(v_hv, a_hv), av=base.av.with_state(v_av, a_av))
        enc = encounter_from_scenario(cfg)
        plan = decide(enc, params, beliefs, delta_rule)
        cell.expected = plan.expected_outcome.value
        cell.baseline = plan.baseline_outcome.value if plan.baseline_outcome else ""
        if plan.expected_outcome in (AV_FIRST, AV_LATER):
            cell.success = deception_success(enc, params, plan.expected_outcome, beliefs, delta_rule)
    except (KinematicsError, ValueError) as exc:
        cell.status, cell.reason = "skipped", str(exc)
        return cell
    if cell.success and simulate:
        try:
            rep = run_pair(replace(cfg, expected=cell.expected))
            cell.pet_no_deception, cell.pet_deception = rep.no_deception.pet.pet, rep.deception.pet.pet
        except (NoCrossing, RuntimeError) as exc:
            cell.reason = f"simulation: {exc}"
    return cell


def sweep_initial_states(grid: GridSpec, base: ScenarioConfig, params: PayoffParams,
                         beliefs: BeliefModel = BeliefModel(), delta_rule: DeltaRule = DeltaRule(),
                         simulate: bool = True) -> SweepReport:
    """Evaluate every grid cell in grid order; kinematically invalid cells are kept as skipped."""
    return SweepReport([evaluate_cell(base, st, params, beliefs, delta_rule, simulate) for st in grid.cells()])

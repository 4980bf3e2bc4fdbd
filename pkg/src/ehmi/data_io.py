"""Trajectory ingest, encounter construction and the CSV interchange formats.

Two CSV layouts are understood:

* trajectories, one row per frame: ``t,x,y,v,vehicle_id,movement``
  (``v`` may be empty; ``movement`` is ``left-turn`` or ``straight``);
* encounters, one row per interaction, see :data:`ENCOUNTER_COLUMNS`.

Trajectory files that use other column names are mapped through
:data:`COLUMN_ALIASES` when every required field can be matched.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np
from scipy.spatial import cKDTree

from .kinematics import ConflictGeometry, Encounter, VehicleState
from .payoff import Outcome

logger = logging.getLogger(__name__)

CANONICAL_COLUMNS = ("t", "x", "y", "v", "vehicle_id", "movement")
ENCOUNTER_COLUMNS = ("encounter_id", "v_a", "acc_a", "d_a", "dthru_a",
                     "v_b", "acc_b", "d_b", "dthru_b", "outcome", "passed_first")

LEFT, STRAIGHT = "left-turn", "straight"
_MOVEMENTS = {
    "left-turn": LEFT, "left": LEFT, "l": LEFT, "lt": LEFT, "left_turn": LEFT, "turn": LEFT,
    "straight": STRAIGHT, "s": STRAIGHT, "through": STRAIGHT, "t": STRAIGHT, "st": STRAIGHT,
}

# alternative headers seen in extracted-trajectory releases
COLUMN_ALIASES = {
    "t": ("t", "time", "timestamp", "time_s", "sec", "frame_time"),
    "x": ("x", "pos_x", "x_m", "local_x", "xcenter", "x_center"),
    "y": ("y", "pos_y", "y_m", "local_y", "ycenter", "y_center"),
    "v": ("v", "speed", "velocity", "vel", "v_ms"),
    "vehicle_id": ("vehicle_id", "id", "track_id", "veh_id", "vehicleid", "car_id", "trackid"),
    "movement": ("movement", "type", "direction", "turn", "maneuver", "manoeuvre", "movement_type"),
    "frame": ("frame", "frame_id", "frameid", "frame_num"),
}


class DataError(ValueError):
    pass


class SchemaMismatch(DataError):
    pass


class EmptyFile(DataError):
    pass


class NoInteraction(DataError):
    pass


@dataclass(frozen=True)
class InteractionConfig:
    """Knobs for onset detection, labeling and distance bookkeeping."""

    radius: float = 30.0          # both vehicles within this of the conflict point
    label_window: float = 1.0     # seconds of the window used for intention labels
    yield_threshold: float = -0.3 # mean acceleration below this means "yield"
    vehicle_length: float = 4.5
    zone_extent: float = 3.5      # conflict-zone length along each path
    smoothing: int = 5            # moving-average width on acceleration, frames
    frame_rate: float = 10.0      # used when a file carries frames but no times


@dataclass
class Trajectory:
    vehicle_id: str
    movement: str
    t: np.ndarray
    x: np.ndarray
    y: np.ndarray
    v: np.ndarray  # NaN where the source had no speed

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float)
        self.x = np.asarray(self.x, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        self.v = np.asarray(self.v, dtype=float) if self.v is not None else np.full_like(self.t, np.nan)
        n = len(self.t)
        if not (len(self.x) == len(self.y) == len(self.v) == n):
            raise ValueError("trajectory columns differ in length")
        if n and np.any(np.diff(self.t) < 0):
            raise ValueError(f"time decreases in trajectory {self.vehicle_id}")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise ValueError(f"non-finite position in trajectory {self.vehicle_id}")

    def __len__(self):
        return len(self.t)

    @property
    def xy(self) -> np.ndarray:
        return np.column_stack([self.x, self.y])

    def arc_length(self) -> np.ndarray:
        seg = np.hypot(np.diff(self.x), np.diff(self.y))
        return np.concatenate([[0.0], np.cumsum(seg)])

    def speed(self, smoothing: int = 1) -> np.ndarray:
        """Recorded speed where present, otherwise differentiated arc length."""
        if np.all(np.isfinite(self.v)):
            return self.v.copy()
        s = self.arc_length()
        if len(s) < 2:
            return np.zeros_like(s)
        return np.gradient(s, self.t)

    def acceleration(self, smoothing: int = 5) -> np.ndarray:
        v = self.speed()
        if len(v) < 2:
            return np.zeros_like(v)
        return moving_average(np.gradient(v, self.t), smoothing)


def moving_average(values: np.ndarray, width: int) -> np.ndarray:
    """Centered moving average that shrinks at the edges (constants stay constant)."""
    values = np.asarray(values, dtype=float)
    if width <= 1 or len(values) == 0:
        return values.copy()
    half = width // 2
    c = np.concatenate([[0.0], np.cumsum(values)])
    n = len(values)
    idx = np.arange(n)
    lo = np.maximum(idx - half, 0)
    hi = np.minimum(idx + half + 1, n)
    return (c[hi] - c[lo]) / (hi - lo)


def normalize_movement(tag: str) -> str:
    key = str(tag).strip().lower()
    if key not in _MOVEMENTS:
        raise ValueError(f"unknown movement tag {tag!r}")
    return _MOVEMENTS[key]


# -- trajectory files ---------------------------------------------------------------

def _resolve_columns(header: Sequence[str]) -> Dict[str, int]:
    norm = [h.strip().lower() for h in header]
    found = {}
    for field_name, aliases in COLUMN_ALIASES.items():
        for alias in aliases:
            if alias in norm:
                found[field_name] = norm.index(alias)
                break
    required = {"x", "y", "vehicle_id", "movement"}
    missing = sorted(required - set(found))
    if missing or ("t" not in found and "frame" not in found):
        raise SchemaMismatch(f"cannot map header {list(header)}: missing {missing or ['t']}")
    return found


def _open_text(source) -> Tuple[TextIO, bool]:
    if hasattr(source, "read"):
        return source, False
    return open(source, newline=""), True


def parse_trajectories(source: Union[str, Path, TextIO], config: InteractionConfig = InteractionConfig()
                       ) -> List[Trajectory]:
    """Read a trajectory CSV into per-vehicle trajectories, in first-seen order."""
    fh, close = _open_text(source)
    try:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyFile(f"{getattr(source, 'name', source)} is empty") from None
        cols = _resolve_columns(header)
        rows: "OrderedDict[str, dict]" = OrderedDict()
        n_rows = 0
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            n_rows += 1
            try:
                if "t" in cols:
                    t = float(row[cols["t"]])
                else:
                    t = float(row[cols["frame"]]) / config.frame_rate
                x = float(row[cols["x"]])
                y = float(row[cols["y"]])
                v_txt = row[cols["v"]].strip() if "v" in cols else ""
                v = float(v_txt) if v_txt else math.nan
                vid = row[cols["vehicle_id"]].strip()
                mov = normalize_movement(row[cols["movement"]])
            except IndexError:
                raise SchemaMismatch(f"line {lineno}: expected {len(header)} fields, got {len(row)}") from None
            except ValueError as exc:
                raise SchemaMismatch(f"line {lineno}: {exc}") from None
            if not (math.isfinite(t) and math.isfinite(x) and math.isfinite(y)):
                raise SchemaMismatch(f"line {lineno}: non-finite value")
            if not math.isnan(v) and (not math.isfinite(v) or v < 0):
                raise SchemaMismatch(f"line {lineno}: invalid speed {v_txt!r}")
            rec = rows.setdefault(vid, {"movement": mov, "t": [], "x": [], "y": [], "v": [], "line": []})
            if rec["movement"] != mov:
                raise SchemaMismatch(f"line {lineno}: vehicle {vid} changes movement")
            if rec["t"] and t < rec["t"][-1]:
                raise SchemaMismatch(f"line {lineno}: time decreases for vehicle {vid}")
            for k, val in (("t", t), ("x", x), ("y", y), ("v", v)):
                rec[k].append(val)
        if n_rows == 0:
            raise EmptyFile(f"{getattr(source, 'name', source)} has a header but no rows")
    finally:
        if close:
            fh.close()
    return [Trajectory(vid, r["movement"], r["t"], r["x"], r["y"], r["v"]) for vid, r in rows.items()]


def _fmt(value: float) -> str:
    return "" if math.isnan(value) else repr(float(value))


def write_trajectories(trajectories: Iterable[Trajectory], target: Union[str, Path, TextIO]) -> None:
    """Write the canonical trajectory CSV; floats use repr so they read back bit-exactly."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CANONICAL_COLUMNS)
    for tr in trajectories:
        for i in range(len(tr)):
            w.writerow([_fmt(tr.t[i]), _fmt(tr.x[i]), _fmt(tr.y[i]), _fmt(tr.v[i]), tr.vehicle_id, tr.movement])
    _write_text(target, buf.getvalue())


def _write_text(target, text: str) -> None:
    if hasattr(target, "write"):
        target.write(text)
    else:
        Path(target).write_text(text)


# -- geometry -------------------------------------------------------------------

def _densify(xy: np.ndarray, step: float = 0.05) -> np.ndarray:
    out = [xy[:1]]
    for p, q in zip(xy[:-1], xy[1:]):
        n = max(int(np.ceil(np.hypot(*(q - p)) / step)), 1)
        f = np.arange(1, n + 1)[:, None] / n
        out.append(p + f * (q - p))
    return np.vstack(out)


def closest_approach(path_a: np.ndarray, path_b: np.ndarray) -> Tuple[np.ndarray, float]:
    """Point where two polylines come closest, and the gap there."""
    da, db = _densify(np.asarray(path_a, float)), _densify(np.asarray(path_b, float))
    dist, j = cKDTree(db).query(da)
    i = int(np.argmin(dist))
    return 0.5 * (da[i] + db[j[i]]), float(dist[i])


def _project_arclength(tr: Trajectory, point: np.ndarray) -> Tuple[float, float]:
    """Arc length along ``tr`` of the projection of ``point``, and the lateral gap."""
    xy = tr.xy
    s = tr.arc_length()
    if len(xy) == 1:
        return 0.0, float(np.hypot(*(xy[0] - point)))
    p, q = xy[:-1], xy[1:]
    seg = q - p
    L2 = np.einsum("ij,ij->i", seg, seg)
    with np.errstate(invalid="ignore", divide="ignore"):
        f = np.clip(np.einsum("ij,ij->i", point - p, seg) / L2, 0.0, 1.0)
    f = np.where(L2 > 0, f, 0.0)
    proj = p + f[:, None] * seg
    gap = np.hypot(*(proj - point).T)
    k = int(np.argmin(gap))
    return float(s[k] + f[k] * np.sqrt(L2[k])), float(gap[k])


@dataclass
class OnsetInfo:
    time: float
    index_a: int
    index_b: int
    conflict_point: np.ndarray
    s_conflict_a: float
    s_conflict_b: float


def _interp(t_new, t, values):
    return np.interp(t_new, t, values)


def find_onset(traj_a: Trajectory, traj_b: Trajectory, config: InteractionConfig = InteractionConfig(),
               conflict_point: Optional[Sequence[float]] = None) -> OnsetInfo:
    """First instant both vehicles are within ``radius`` of the conflict point and neither has passed it."""
    if conflict_point is None:
        cp, gap = closest_approach(traj_a.xy, traj_b.xy)
    else:
        cp = np.asarray(conflict_point, dtype=float)
    sa_c, _ = _project_arclength(traj_a, cp)
    sb_c, _ = _project_arclength(traj_b, cp)
    lo = max(traj_a.t[0], traj_b.t[0])
    hi = min(traj_a.t[-1], traj_b.t[-1])
    if hi < lo:
        raise NoInteraction(f"{traj_a.vehicle_id}/{traj_b.vehicle_id}: trajectories do not overlap in time")
    times = traj_a.t[(traj_a.t >= lo) & (traj_a.t <= hi)]
    if len(times) == 0:
        raise NoInteraction(f"{traj_a.vehicle_id}/{traj_b.vehicle_id}: no common frames")
    sa = _interp(times, traj_a.t, traj_a.arc_length())
    sb = _interp(times, traj_b.t, traj_b.arc_length())
    da = np.hypot(_interp(times, traj_a.t, traj_a.x) - cp[0], _interp(times, traj_a.t, traj_a.y) - cp[1])
    db = np.hypot(_interp(times, traj_b.t, traj_b.x) - cp[0], _interp(times, traj_b.t, traj_b.y) - cp[1])
    ok = (da <= config.radius) & (db <= config.radius) & (sa < sa_c) & (sb < sb_c)
    if not ok.any():
        raise NoInteraction(
            f"{traj_a.vehicle_id}/{traj_b.vehicle_id}: never both within {config.radius} m before the conflict point"
        )
    t0 = float(times[np.argmax(ok)])
    ia = int(np.argmin(np.abs(traj_a.t - t0)))
    ib = int(np.argmin(np.abs(traj_b.t - t0)))
    return OnsetInfo(t0, ia, ib, cp, sa_c, sb_c)


def _state_at(tr: Trajectory, t0: float, s_conflict: float, config: InteractionConfig) -> VehicleState:
    s = float(np.interp(t0, tr.t, tr.arc_length()))
    v = float(np.interp(t0, tr.t, tr.speed()))
    a = float(np.interp(t0, tr.t, tr.acceleration(config.smoothing)))
    d = s_conflict - s - 0.5 * config.zone_extent - 0.5 * config.vehicle_length
    if d <= 0:
        raise NoInteraction(f"vehicle {tr.vehicle_id} is already at the conflict zone at onset")
    return VehicleState(max(v, 0.0), a, d, d + config.zone_extent + config.vehicle_length)


def build_encounter(traj_a: Trajectory, traj_b: Trajectory, config: InteractionConfig = InteractionConfig(),
                    conflict_point: Optional[Sequence[float]] = None, encounter_id: str = "") -> Encounter:
    """Kinematic encounter at interaction onset; positions are taken as vehicle centres."""
    if traj_a.movement != LEFT or traj_b.movement != STRAIGHT:
        raise ValueError("build_encounter expects (left-turn, straight) trajectories")
    on = find_onset(traj_a, traj_b, config, conflict_point)
    a_state = _state_at(traj_a, on.time, on.s_conflict_a, config)
    b_state = _state_at(traj_b, on.time, on.s_conflict_b, config)
    geom = ConflictGeometry(
        conflict_point=(float(on.conflict_point[0]), float(on.conflict_point[1])),
        entry_a=(float(np.interp(on.time, traj_a.t, traj_a.x)), float(np.interp(on.time, traj_a.t, traj_a.y))),
        entry_b=(float(np.interp(on.time, traj_b.t, traj_b.x)), float(np.interp(on.time, traj_b.t, traj_b.y))),
        path_length_a=float(traj_a.arc_length()[-1]),
        path_length_b=float(traj_b.arc_length()[-1]),
    )
    return Encounter(a_state, b_state, geom, encounter_id or f"{traj_a.vehicle_id}-{traj_b.vehicle_id}")


def passage_time(tr: Trajectory, point: Sequence[float]) -> float:
    """Time the trajectory passes closest to ``point``, interpolated along arc length."""
    s_c, _ = _project_arclength(tr, np.asarray(point, float))
    s = tr.arc_length()
    return float(np.interp(s_c, s, tr.t)) if np.all(np.diff(s) > 0) else float(tr.t[np.searchsorted(s, s_c)])


def pair_trajectories(trajectories: Sequence[Trajectory], max_gap: float = 2.0,
                      config: InteractionConfig = InteractionConfig()) -> List[Tuple[Trajectory, Trajectory]]:
    """Match each left-turner with the straight vehicle it interacts with.

    Candidates must cross its path (closest approach within ``max_gap``) and
    share an interaction window; the one whose conflict-point passage is
    nearest in time wins. Each straight vehicle is used at most once.
    """
    lefts = [tr for tr in trajectories if tr.movement == LEFT]
    straights = [tr for tr in trajectories if tr.movement == STRAIGHT]
    used = set()
    pairs = []
    for a in lefts:
        best = None
        for b in straights:
            if b.vehicle_id in used or b.t[-1] < a.t[0] or a.t[-1] < b.t[0]:
                continue
            cp, gap = closest_approach(a.xy, b.xy)
            if gap > max_gap:
                continue
            try:
                find_onset(a, b, config, cp)
            except NoInteraction:
                continue
            dt = abs(passage_time(a, cp) - passage_time(b, cp))
            if best is None or dt < best[0]:
                best = (dt, b)
        if best is not None:
            used.add(best[1].vehicle_id)
            pairs.append((a, best[1]))
    return pairs


# -- labeled encounters -----------------------------------------------------------

@dataclass
class LabeledEncounter:
    encounter: Encounter
    observed_outcome: Outcome
    source_id: str = ""
    passed_first: Optional[str] = None  # "A" or "B" from the trajectories, when known


def passed_first(traj_a: Trajectory, traj_b: Trajectory, conflict_point: Sequence[float]) -> str:
    return "A" if passage_time(traj_a, conflict_point) <= passage_time(traj_b, conflict_point) else "B"


def _f(v: float) -> str:
    return repr(float(v))


def write_encounters(items: Sequence[Union[Encounter, LabeledEncounter]], target) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(ENCOUNTER_COLUMNS)
    for it in items:
        if isinstance(it, LabeledEncounter):
            enc, outcome, first = it.encounter, it.observed_outcome.value, it.passed_first or ""
            eid = it.source_id or enc.encounter_id
        else:
            enc, outcome, first, eid = it, "", "", it.encounter_id
        a, b = enc.a_state, enc.b_state
        w.writerow([eid, _f(a.velocity), _f(a.acceleration), _f(a.dist_to_conflict), _f(a.dist_through_conflict),
                    _f(b.velocity), _f(b.acceleration), _f(b.dist_to_conflict), _f(b.dist_through_conflict),
                    outcome, first])
    _write_text(target, buf.getvalue())


def read_encounters(source) -> List[LabeledEncounter]:
    """Read an encounter CSV. Rows without an outcome get ``observed_outcome=None``."""
    fh, close = _open_text(source)
    try:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyFile(f"{getattr(source, 'name', source)} is empty")
        missing = [c for c in ENCOUNTER_COLUMNS[:9] if c not in reader.fieldnames]
        if missing:
            raise SchemaMismatch(f"encounter file lacks columns {missing}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                a = VehicleState(float(row["v_a"]), float(row["acc_a"]), float(row["d_a"]), float(row["dthru_a"]))
                b = VehicleState(float(row["v_b"]), float(row["acc_b"]), float(row["d_b"]), float(row["dthru_b"]))
                label = (row.get("outcome") or "").strip()
                outcome = Outcome.parse(label) if label else None
            except (TypeError, ValueError) as exc:
                raise SchemaMismatch(f"line {lineno}: {exc}") from None
            first = (row.get("passed_first") or "").strip() or None
            eid = row["encounter_id"]
            out.append(LabeledEncounter(Encounter(a, b, None, eid), outcome, eid, first))
        if not out:
            raise EmptyFile(f"{getattr(source, 'name', source)} has a header but no rows")
        return out
    finally:
        if close:
            fh.close()


def is_encounter_file(path: Union[str, Path]) -> bool:
    with open(path, newline="") as fh:
        header = fh.readline().strip().split(",")
    return "encounter_id" in header and "v_a" in header


# -- beliefs from data -------------------------------------------------------------

FALLBACK_ACCEL = {"B": {"first": 0.0, "later": -1.5}, "A": {"first": 0.0, "later": -1.5}}


def _first_player(item: LabeledEncounter) -> Optional[str]:
    if item.passed_first in ("A", "B"):
        return item.passed_first
    if item.observed_outcome is Outcome.O12:
        return "A"
    if item.observed_outcome is Outcome.O21:
        return "B"
    return None


def average_accelerations(data: Sequence[LabeledEncounter], fallback: Optional[dict] = None) -> Dict[str, Dict[str, float]]:
    """Mean onset acceleration per movement when passing first vs later.

    Passage order comes from the trajectories when recorded, otherwise from an
    o12/o21 label; o11/o22 rows without recorded order are skipped. Empty
    categories fall back to ``fallback`` (default :data:`FALLBACK_ACCEL`).
    """
    fallback = fallback or FALLBACK_ACCEL
    acc = {"A": {"first": [], "later": []}, "B": {"first": [], "later": []}}
    for item in data:
        first = _first_player(item)
        if first is None:
            continue
        later = "B" if first == "A" else "A"
        state = {"A": item.encounter.a_state, "B": item.encounter.b_state}
        acc[first]["first"].append(state[first].acceleration)
        acc[later]["later"].append(state[later].acceleration)
    out = {}
    for player, cats in acc.items():
        out[player] = {}
        for cat, vals in cats.items():
            if vals:
                out[player][cat] = float(np.mean(vals))
            else:
                logger.warning("no %s-%s encounters; using fallback %.3f", player, cat, fallback[player][cat])
                out[player][cat] = float(fallback[player][cat])
    return out


def labeled_encounters(trajectories: Sequence[Trajectory], config: InteractionConfig = InteractionConfig(),
                       labeler=None) -> Tuple[List[LabeledEncounter], List[Tuple[str, str]]]:
    """Pair trajectories, build encounters and label them.

    ``labeler(traj_a, traj_b, conflict_point, config)`` returns the observed
    outcome. Pairs that fail (no onset, kinematic errors) come back in the
    second list as ``(pair id, reason)``.
    """
    out, failed = [], []
    for a, b in pair_trajectories(trajectories, config=config):
        pid = f"{a.vehicle_id}-{b.vehicle_id}"
        try:
            enc = build_encounter(a, b, config, encounter_id=pid)
            cp = enc.geometry.conflict_point
            outcome = labeler(a, b, cp, config) if labeler is not None else None
            out.append(LabeledEncounter(enc, outcome, pid, passed_first(a, b, cp)))
        except (DataError, ValueError) as exc:
            failed.append((pid, str(exc)))
    return out, failed

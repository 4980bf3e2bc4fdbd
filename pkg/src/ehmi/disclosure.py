"""Whether, when and what the straight-going AV should show on its EHMI.

The AV (player B) aims for the outcome with the largest total payoff. Without
a display the interaction follows the straight-first sequential game. A
displayed signal makes the human driver (player A) attribute a believed
acceleration to the AV; the driver then compares turning against yielding
given the collision-avoidance bound that belief implies.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence

import numpy as np

from .data_io import LabeledEncounter
from .game import DeltaRule, GameForm, predict_outcome
from .kinematics import (Encounter, KinematicsError, OpponentNeverClears, collision_avoid_accel, time_to_clear,
                         time_to_reach)
from .payoff import OUTCOMES, Outcome, PayoffParams, encounter_utilities, payoff_a, player_payoffs


class Signal(str, enum.Enum):
    RUSH = "rush"    # "I want to proceed first"
    YIELD = "yield"  # "I want to yield"

    @classmethod
    def for_b_strategy(cls, b: int) -> "Signal":
        return cls.RUSH if b == 1 else cls.YIELD

    @property
    def opposite(self) -> "Signal":
        return Signal.YIELD if self is Signal.RUSH else Signal.RUSH


class Timing(str, enum.Enum):
    LEADER = "leader"
    FOLLOWER = "follower"


@dataclass(frozen=True)
class BeliefModel:
    """Acceleration the driver attributes to the AV after each signal."""

    rush_accel: float = 0.0
    yield_accel: float = -1.5

    def __post_init__(self):
        if not self.yield_accel < self.rush_accel:
            raise ValueError(f"yield belief {self.yield_accel} must be below rush belief {self.rush_accel}")

    def accel_for(self, signal: Signal) -> float:
        return self.rush_accel if signal is Signal.RUSH else self.yield_accel

    @classmethod
    def from_averages(cls, averages: Dict[str, Dict[str, float]]) -> "BeliefModel":
        """Beliefs from :func:`ehmi.data_io.average_accelerations` of the AV (player B)."""
        return cls(rush_accel=averages["B"]["first"], yield_accel=averages["B"]["later"])


class NoEffectiveSignal(RuntimeError):
    pass


@dataclass
class DisclosurePlan:
    disclose: bool
    timing: Optional[Timing]
    signal: Optional[Signal]
    truthful: bool
    expected_outcome: Outcome
    predicted_actual_outcome: Outcome
    deception_success: bool
    baseline_outcome: Optional[Outcome] = None
    effective: bool = True

    def as_row(self) -> Dict[str, str]:
        return {
            "disclose": str(int(self.disclose)),
            "timing": self.timing.value if self.timing else "",
            "signal": self.signal.value if self.signal else "",
            "truthful": str(int(self.truthful)),
            "expected": self.expected_outcome.value,
            "baseline": self.baseline_outcome.value if self.baseline_outcome else "",
            "predicted_actual": self.predicted_actual_outcome.value,
            "deception_success": str(int(self.deception_success)),
            "effective": str(int(self.effective)),
        }


def expected_strategy(encounter: Encounter, params: PayoffParams) -> Outcome:
    """Outcome with the largest total payoff (earliest outcome on ties)."""
    u = encounter_utilities(encounter, params)
    totals = u[:4] + u[4:]
    return OUTCOMES[int(np.argmax(totals))]


def baseline_outcome(encounter: Encounter, params: PayoffParams, delta_rule: DeltaRule = DeltaRule()) -> Outcome:
    """No-display counterfactual: the straight-first sequential game prediction."""
    return predict_outcome(encounter, params, GameForm.B_FIRST, delta_rule)


def hv_best_response(encounter: Encounter, params: PayoffParams, believed_av_accel: float) -> int:
    """Driver's choice (1 turn, 2 yield) when crediting the AV with ``believed_av_accel``.

    The driver weighs turning against yielding in front of a proceeding AV,
    using the bound implied by the believed AV motion. If that motion never
    clears the conflict zone, nothing is left to wait for and the driver turns.
    """
    believed = encounter.with_b_acceleration(believed_av_accel)
    try:
        ac_a = collision_avoid_accel(believed.a_state, believed.b_state)
    except OpponentNeverClears:
        return 1
    a_A = encounter.a_state.acceleration
    turn = payoff_a(Outcome.O11, a_A, ac_a, params)
    wait = payoff_a(Outcome.O21, a_A, ac_a, params)
    return 1 if turn >= wait else 2


def deception_success(encounter: Encounter, params: PayoffParams, expected, beliefs: BeliefModel,
                      delta_rule: DeltaRule = DeltaRule()) -> bool:
    """Would the signal opposite to the AV's intent still produce the expected outcome?"""
    expected = Outcome.parse(expected)
    if expected not in (Outcome.O12, Outcome.O21):
        raise ValueError(f"deception is only defined for o12/o21 expectations, got {expected}")
    if baseline_outcome(encounter, params, delta_rule) is expected:
        return False
    lie = Signal.for_b_strategy(expected.b_strategy).opposite
    return hv_best_response(encounter, params, beliefs.accel_for(lie)) == expected.a_strategy


def decide(encounter: Encounter, params: PayoffParams, beliefs: BeliefModel = BeliefModel(),
           delta_rule: DeltaRule = DeltaRule(), *, strict: bool = False) -> DisclosurePlan:
    """Three-stage disclosure decision.

    1. disclose only if the display can change the no-display outcome;
    2. disclose as leader (before the driver acts);
    3. show the truthful signal if it works, otherwise the deceptive one if
       that works. Deception is only tried for the o12/o21 expectations. When neither works the plan keeps the truthful signal with
       ``effective=False``; ``strict=True`` raises :class:`NoEffectiveSignal`.
    """
    expected = expected_strategy(encounter, params)
    baseline = baseline_outcome(encounter, params, delta_rule)
    if expected is baseline:
        return DisclosurePlan(False, None, None, True, expected, baseline, False, baseline)

    honest = Signal.for_b_strategy(expected.b_strategy)
    candidates = (honest, honest.opposite) if expected in (Outcome.O12, Outcome.O21) else (honest,)
    for signal in candidates:
        reply = hv_best_response(encounter, params, beliefs.accel_for(signal))
        if reply == expected.a_strategy:
            truthful = signal is honest
            return DisclosurePlan(True, Timing.LEADER, signal, truthful, expected, expected,
                                  not truthful, baseline)
    if strict:
        raise NoEffectiveSignal(f"no signal realises {expected} for {encounter.encounter_id or 'encounter'}")
    reply = hv_best_response(encounter, params, beliefs.accel_for(honest))
    actual = Outcome.from_strategies(reply, expected.b_strategy)
    return DisclosurePlan(True, Timing.LEADER, honest, True, expected, actual, False, baseline, effective=False)


# -- dataset-level summaries -----------------------------------------------------------

@dataclass
class GainRow:
    encounter_id: str
    baseline: Outcome
    expected: Outcome
    baseline_a: float
    baseline_b: float
    ehmi_a: float
    ehmi_b: float

    @property
    def baseline_total(self) -> float:
        return self.baseline_a + self.baseline_b

    @property
    def ehmi_total(self) -> float:
        return self.ehmi_a + self.ehmi_b

    @property
    def improved(self) -> bool:
        return self.expected is not self.baseline and self.ehmi_total > self.baseline_total

    @property
    def category(self) -> str:
        da, db = self.ehmi_a - self.baseline_a, self.ehmi_b - self.baseline_b
        if da >= 0 and db >= 0:
            return "both_up"
        return "a_up_b_down" if da >= 0 else "a_down_b_up"


def _mean(vals: Sequence[float]) -> float:
    return float(np.mean(vals)) if len(vals) else 0.0


@dataclass
class GainCensus:
    rows: List[GainRow]
    skipped: List[str] = field(default_factory=list)

    @property
    def improved(self) -> List[GainRow]:
        return [r for r in self.rows if r.improved]

    def summary(self) -> dict:
        imp = self.improved
        cats = {}
        for name in ("a_up_b_down", "a_down_b_up", "both_up"):
            sel = [r for r in imp if r.category == name]
            cats[name] = {
                "count": len(sel),
                "mean_delta_a": round(_mean([r.ehmi_a - r.baseline_a for r in sel]), 3),
                "mean_delta_b": round(_mean([r.ehmi_b - r.baseline_b for r in sel]), 3),
            }
        return {
            "n_encounters": len(self.rows),
            "n_skipped": len(self.skipped),
            "n_improved": len(imp),
            "share_improved": round(len(imp) / len(self.rows), 3) if self.rows else 0.0,
            "mean_total": {"no_ehmi": round(_mean([r.baseline_total for r in imp]), 3),
                           "ehmi": round(_mean([r.ehmi_total for r in imp]), 3),
                           "increase": round(_mean([r.ehmi_total - r.baseline_total for r in imp]), 3)},
            "mean_a": {"no_ehmi": round(_mean([r.baseline_a for r in imp]), 3),
                       "ehmi": round(_mean([r.ehmi_a for r in imp]), 3)},
            "mean_b": {"no_ehmi": round(_mean([r.baseline_b for r in imp]), 3),
                       "ehmi": round(_mean([r.ehmi_b for r in imp]), 3)},
            "categories": cats,
        }


def _encounters(data) -> List[Encounter]:
    return [d.encounter if isinstance(d, LabeledEncounter) else d for d in data]


def ehmi_gain_census(data, params: PayoffParams, delta_rule: DeltaRule = DeltaRule()) -> GainCensus:
    """Per-encounter payoffs without display (baseline) and with the expected outcome."""
    rows, skipped = [], []
    for enc in _encounters(data):
        try:
            u = encounter_utilities(enc, params)
            base = baseline_outcome(enc, params, delta_rule)
        except KinematicsError:
            skipped.append(enc.encounter_id)
            continue
        exp = OUTCOMES[int(np.argmax(u[:4] + u[4:]))]
        ba, bb = player_payoffs(u, base)
        ea, eb = player_payoffs(u, exp)
        rows.append(GainRow(enc.encounter_id, base, exp, ba, bb, ea, eb))
    return GainCensus(rows, skipped)


@dataclass
class DeceptionCensus:
    plans: List[DisclosurePlan]
    ids: List[str]
    success: List[bool]
    skipped: List[str] = field(default_factory=list)

    def summary(self) -> dict:
        n = len(self.plans)
        by_expected = {o.value: 0 for o in (Outcome.O21, Outcome.O12)}
        for plan, ok in zip(self.plans, self.success):
            if ok:
                by_expected[plan.expected_outcome.value] += 1
        total = sum(self.success)
        return {
            "n_encounters": n,
            "n_skipped": len(self.skipped),
            "n_disclose": sum(p.disclose for p in self.plans),
            "n_truthful_effective": sum(p.disclose and p.truthful and p.effective for p in self.plans),
            "n_deceptive_chosen": sum(p.deception_success for p in self.plans),
            "n_no_effective_signal": sum(not p.effective for p in self.plans),
            "n_deception_success": total,
            "share_deception_success": round(total / n, 3) if n else 0.0,
            "deception_success_by_expected": by_expected,
        }


def deception_census(data, params: PayoffParams, beliefs: BeliefModel = BeliefModel(),
                     delta_rule: DeltaRule = DeltaRule()) -> DeceptionCensus:
    plans, ids, success, skipped = [], [], [], []
    for enc in _encounters(data):
        try:
            plan = decide(enc, params, beliefs, delta_rule)
            ok = (plan.expected_outcome in (Outcome.O12, Outcome.O21)
                  and deception_success(enc, params, plan.expected_outcome, beliefs, delta_rule))
        except KinematicsError:
            skipped.append(enc.encounter_id)
            continue
        plans.append(plan)
        ids.append(enc.encounter_id)
        success.append(ok)
    return DeceptionCensus(plans, ids, success, skipped)


# HV acceleration after the signal, per expected outcome, without and with the false belief
HV_CLASS_ACCEL = {"o21": (-1.5, -2.5), "o12": (-0.5, 0.0)}
DANGER_PET = 3.0


def kinematic_pet(encounter: Encounter, expected, hv_accel: float) -> float:
    """Zone PET under constant accelerations: HV at ``hv_accel``, AV at its own.

    The vehicle that ``expected`` lets through first must clear the zone
    before the other reaches it; the gap between those instants is returned
    (negative when they overlap). Raises ``Unreachable`` if the second
    vehicle stops short.
    """
    expected = Outcome.parse(expected)
    hv = encounter.a_state.with_acceleration(hv_accel)
    av = encounter.b_state
    first, second = (av, hv) if expected is Outcome.O21 else (hv, av)
    return time_to_reach(second) - time_to_clear(first)


@dataclass
class PetShiftCensus:
    rows: List[tuple]          # (encounter_id, expected, pet_no_deception, pet_deception)
    skipped: List[str] = field(default_factory=list)

    def summary(self, threshold: float = DANGER_PET) -> dict:
        out = {"n_success": len(self.rows), "n_skipped": len(self.skipped), "threshold": threshold}
        for exp in ("o21", "o12"):
            sel = [r for r in self.rows if r[1] == exp and r[2] < threshold]
            out[exp] = {"n_dangerous": len(sel),
                        "mean_pet_no_deception": round(_mean([r[2] for r in sel]), 3),
                        "mean_pet_deception": round(_mean([r[3] for r in sel]), 3)}
        return out


def pet_shift_census(data, params: PayoffParams, beliefs: BeliefModel = BeliefModel(),
                     delta_rule: DeltaRule = DeltaRule(), hv_class_accel: Optional[Dict[str, tuple]] = None
                     ) -> PetShiftCensus:
    """Kinematic PET without and with deception for every successful deception."""
    accel = hv_class_accel or HV_CLASS_ACCEL
    dc = deception_census(data, params, beliefs, delta_rule)
    encs = {e.encounter_id: e for e in _encounters(data)}
    rows, skipped = [], list(dc.skipped)
    for eid, plan, ok in zip(dc.ids, dc.plans, dc.success):
        if not ok:
            continue
        exp = plan.expected_outcome.value
        try:
            pets = [kinematic_pet(encs[eid], exp, a) for a in accel[exp]]
        except KinematicsError:
            skipped.append(eid)
            continue
        rows.append((eid, exp, pets[0], pets[1]))
    return PetShiftCensus(rows, skipped)


def summary_json(summary: dict) -> str:
    return json.dumps(summary, indent=2, sort_keys=True) + "\n"

import io

import numpy as np
import pytest

from ehmi.calibration import label_intention
from ehmi.data_io import (EmptyFile, InteractionConfig, LabeledEncounter, NoInteraction, SchemaMismatch, Trajectory,
                          build_encounter, closest_approach, find_onset, is_encounter_file, labeled_encounters,
                          moving_average, pair_trajectories, parse_trajectories, passed_first, read_encounters,
                          write_encounters, write_trajectories)
from ehmi.payoff import Outcome
from ehmi.synthetic import random_encounters, synthetic_pair


@pytest.fixture
def pair():
    return synthetic_pair(8.0, 0.0, 10.0, 0.0, s0_a=20, s0_b=20, duration=8)


def test_trajectory_round_trip(pair):
    buf = io.StringIO()
    write_trajectories(pair, buf)
    back = parse_trajectories(io.StringIO(buf.getvalue()))
    assert [t.vehicle_id for t in back] == ["A", "B"]
    for a, b in zip(pair, back):
        assert a.movement == b.movement
        for k in ("t", "x", "y", "v"):
            np.testing.assert_array_equal(getattr(a, k), getattr(b, k))


def test_aliases_and_frames():
    text = "Frame,Track_ID,X_Center,Y_Center,Direction\n0,7,1.0,2.0,L\n1,7,1.5,2.0,L\n2,9,0.0,0.0,through\n"
    trs = parse_trajectories(io.StringIO(text), InteractionConfig(frame_rate=25.0))
    assert [(t.vehicle_id, t.movement, len(t)) for t in trs] == [("7", "left-turn", 2), ("9", "straight", 1)]
    np.testing.assert_allclose(trs[0].t, [0.0, 0.04])
    assert np.isnan(trs[0].v).all()
    np.testing.assert_allclose(trs[0].speed(), [12.5, 12.5])


@pytest.mark.parametrize("text, err", [
    ("", EmptyFile),
    ("t,x,y,vehicle_id,movement\n", EmptyFile),
    ("t,x,vehicle_id,movement\n0,1,a,left\n", SchemaMismatch),
    ("t,x,y,vehicle_id,movement\n0,1,abc,a,left\n", SchemaMismatch),
    ("t,x,y,vehicle_id,movement\n0,1,2,a,reverse\n", SchemaMismatch),
    ("t,x,y,vehicle_id,movement\n1,1,2,a,left\n0,1,2,a,left\n", SchemaMismatch),
    ("t,x,y,vehicle_id,movement\n0,1,2,a,left\n1,1,2,a,straight\n", SchemaMismatch),
    ("t,x,y,v,vehicle_id,movement\n0,1,2,-3,a,left\n", SchemaMismatch),
    ("t,x,y,vehicle_id,movement\n0,1,2\n", SchemaMismatch),
])
def test_schema_errors(text, err):
    with pytest.raises(err):
        parse_trajectories(io.StringIO(text))


def test_moving_average_keeps_constants():
    np.testing.assert_allclose(moving_average(np.full(9, 2.5), 5), 2.5)
    np.testing.assert_allclose(moving_average(np.arange(5.0), 3), [0.5, 1, 2, 3, 3.5])


def test_trajectory_rejects_time_reversal():
    with pytest.raises(ValueError):
        Trajectory("a", "straight", [1.0, 0.0], [0, 1], [0, 0], None)


def test_conflict_point_and_encounter(pair):
    a, b = pair
    cp, gap = closest_approach(a.xy, b.xy)
    assert gap < 0.1
    enc = build_encounter(a, b)
    assert enc.a_state.velocity == pytest.approx(8.0, abs=0.05)
    assert enc.b_state.velocity == pytest.approx(10.0, abs=0.05)
    assert abs(enc.a_state.acceleration) < 0.05 and abs(enc.b_state.acceleration) < 0.05
    cfg = InteractionConfig()
    for st in (enc.a_state, enc.b_state):
        assert st.dist_through_conflict - st.dist_to_conflict == pytest.approx(cfg.zone_extent + cfg.vehicle_length)
    np.testing.assert_allclose(enc.geometry.conflict_point, cp, atol=0.1)


def test_onset_requires_both_near():
    a, b = synthetic_pair(8.0, 0.0, 10.0, 0.0, s0_a=0, s0_b=0, duration=1.0)
    with pytest.raises(NoInteraction):
        find_onset(a, b, InteractionConfig(radius=5.0))


def test_pairing_picks_the_concurrent_vehicle():
    a, b = synthetic_pair(8.0, 0.0, 10.0, 0.0, s0_a=20, s0_b=20, duration=8, ids=("A", "B"))
    _, late = synthetic_pair(8.0, 0.0, 10.0, 0.0, s0_a=20, s0_b=20, duration=8, ids=("A2", "C"), t0=30.0)
    pairs = pair_trajectories([a, late, b])
    assert [(x.vehicle_id, y.vehicle_id) for x, y in pairs] == [("A", "B")]


def test_labeled_encounters(pair):
    data, failed = labeled_encounters(list(pair), labeler=label_intention)
    assert failed == [] and len(data) == 1
    item = data[0]
    assert item.observed_outcome is Outcome.O11 and item.source_id == "A-B"
    assert item.passed_first == passed_first(*pair, item.encounter.geometry.conflict_point)


def test_encounter_csv_round_trip(tmp_path):
    encs = random_encounters(20, seed=5)
    items = [LabeledEncounter(e, Outcome.parse(["o11", "o12", "o21", "o22"][i % 4]), e.encounter_id,
                              "A" if i % 2 else None) for i, e in enumerate(encs)]
    path = tmp_path / "enc.csv"
    write_encounters(items, path)
    assert is_encounter_file(path)
    back = read_encounters(path)
    for x, y in zip(items, back):
        assert x.encounter.a_state == y.encounter.a_state and x.encounter.b_state == y.encounter.b_state
        assert x.observed_outcome is y.observed_outcome and x.passed_first == y.passed_first


def test_encounter_csv_errors():
    with pytest.raises(SchemaMismatch):
        read_encounters(io.StringIO("encounter_id,v_a\n1,2\n"))
    with pytest.raises(EmptyFile):
        read_encounters(io.StringIO(""))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehmi.kinematics import (Encounter, OpponentNeverClears, Unreachable, VehicleState, collision_avoid_accel,
                             collision_bounds, integrate_arrival, time_to_clear, time_to_reach, travel_time)


def test_constant_speed():
    assert travel_time(10.0, 0.0, 50.0) == pytest.approx(5.0)


def test_zero_distance_is_zero_time():
    assert travel_time(3.0, -1.0, 0.0) == 0.0


def test_from_rest_uniform_acceleration():
    # d = a t^2 / 2
    assert travel_time(0.0, 2.0, 16.0) == pytest.approx(4.0)


def test_stops_short_raises():
    with pytest.raises(Unreachable) as info:
        travel_time(4.0, -2.0, 10.0)
    assert info.value.stop_distance == pytest.approx(4.0)


def test_standing_still_raises():
    with pytest.raises(Unreachable):
        travel_time(0.0, 0.0, 1.0)


def test_just_reaches_at_stop():
    # stopping distance equals the distance: arrival at the stopping instant
    assert travel_time(4.0, -2.0, 4.0) == pytest.approx(2.0)


@pytest.mark.parametrize("bad", [
    dict(velocity=-1.0, acceleration=0.0, dist_to_conflict=1.0, dist_through_conflict=2.0),
    dict(velocity=1.0, acceleration=0.0, dist_to_conflict=0.0, dist_through_conflict=2.0),
    dict(velocity=1.0, acceleration=0.0, dist_to_conflict=3.0, dist_through_conflict=2.0),
    dict(velocity=float("nan"), acceleration=0.0, dist_to_conflict=1.0, dist_through_conflict=2.0),
])
def test_state_validation(bad):
    with pytest.raises(ValueError):
        VehicleState(**bad)


def test_reach_before_clear():
    s = VehicleState(8.0, 0.5, 10.0, 18.0)
    assert time_to_reach(s) < time_to_clear(s)


def test_euler_oracle_agrees_on_examples():
    v = np.array([5.0, 10.0, 0.5, 8.0])
    a = np.array([1.0, -1.0, 2.0, 0.0])
    d = np.array([20.0, 30.0, 5.0, 12.0])
    ref = integrate_arrival(v, a, d)
    got = [travel_time(*x) for x in zip(v, a, d)]
    np.testing.assert_allclose(got, ref, atol=1e-3)


def test_euler_oracle_nan_when_stopping():
    assert math.isnan(integrate_arrival(2.0, -2.0, 5.0))


def test_collision_bound_round_trip():
    own = VehicleState(6.0, 0.3, 12.0, 20.0)
    opp = VehicleState(9.0, -0.2, 15.0, 23.0)
    ac = collision_avoid_accel(own, opp)
    t_clear = time_to_clear(opp)
    # at a_c, own arrives at the zone exactly when the opponent leaves it
    assert own.velocity * t_clear + 0.5 * ac * t_clear ** 2 == pytest.approx(own.dist_to_conflict, abs=1e-9)


def test_collision_bound_negative_when_far_ahead_of_schedule():
    # own would overshoot at current speed, so it must brake
    own = VehicleState(15.0, 0.0, 5.0, 13.0)
    opp = VehicleState(5.0, 0.0, 10.0, 18.0)
    assert collision_avoid_accel(own, opp) < 0


def test_opponent_never_clears():
    own = VehicleState(5.0, 0.0, 10.0, 18.0)
    opp = VehicleState(2.0, -1.0, 1.0, 9.0)
    with pytest.raises(OpponentNeverClears):
        collision_avoid_accel(own, opp)


def test_verbatim_variant_uses_opponent_terms():
    own = VehicleState(6.0, 0.0, 12.0, 20.0)
    opp = VehicleState(9.0, 0.0, 15.0, 23.0)
    t = time_to_clear(opp)
    lit = collision_avoid_accel(own, opp, literal_subscripts=True)
    assert lit == pytest.approx(2 * (opp.dist_to_conflict - opp.velocity * t) / t ** 2)
    assert lit != pytest.approx(collision_avoid_accel(own, opp))


def test_collision_bounds_order():
    enc = Encounter(VehicleState(6.0, 0.3, 12.0, 20.0), VehicleState(9.0, -0.2, 15.0, 23.0))
    ac_a, ac_b = collision_bounds(enc)
    assert ac_a == collision_avoid_accel(enc.a_state, enc.b_state)
    assert ac_b == collision_avoid_accel(enc.b_state, enc.a_state)


def test_monotone_in_opponent_clear_time():
    own = VehicleState(6.0, 0.0, 12.0, 20.0)
    # clear times 23/v stay below 2 d / v_own = 4 s, where a_c decreases in t
    vals = [collision_avoid_accel(own, VehicleState(v, 0.0, 15.0, 23.0)) for v in (20.0, 12.0, 8.0, 6.0)]
    assert all(x > y for x, y in zip(vals, vals[1:]))


states = st.tuples(st.floats(0.5, 20.0), st.floats(-3.0, 3.0), st.floats(1.0, 60.0))


@settings(max_examples=200, deadline=None)
@given(states)
def test_closed_form_solves_the_motion_equation(s):
    v, a, d = s
    try:
        t = travel_time(v, a, d)
    except Unreachable:
        assert a < 0 and v * v / (-2 * a) < d
        return
    assert t >= 0
    assert v * t + 0.5 * a * t * t == pytest.approx(d, rel=1e-9, abs=1e-9)
    assert v + a * t >= -1e-9


@settings(max_examples=200, deadline=None)
@given(st.floats(0.5, 20.0), st.floats(-3.0, 3.0), st.floats(1.0, 30.0), st.floats(0.1, 20.0))
def test_travel_time_monotone_in_distance(v, a, d, extra):
    try:
        t2 = travel_time(v, a, d + extra)
    except Unreachable:
        return
    assert travel_time(v, a, d) < t2


def test_round_trip_domain_boundary():
    # opponent clears at exactly 3 s
    opp = VehicleState(5.0, 0.0, 7.0, 15.0)
    t1 = time_to_clear(opp)
    assert t1 == pytest.approx(3.0)
    own = VehicleState(12.0, 0.0, 15.0, 23.0)
    ac = collision_avoid_accel(own, opp)
    assert ac == pytest.approx(2 * (15 - 36) / 9)
    # speed would turn negative before t1, so the vehicle reaches the zone early
    assert 12.0 + ac * t1 < 0
    assert travel_time(12.0, ac, 15.0) < t1
    own = VehicleState(10.0, 0.0, 15.0, 23.0)  # d == v t1 / 2: arrives at t1 with zero speed
    assert travel_time(10.0, collision_avoid_accel(own, opp), 15.0) == pytest.approx(t1, abs=1e-6)

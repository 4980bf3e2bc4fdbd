import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehmi.kinematics import Encounter, VehicleState, collision_bounds
from ehmi.payoff import (OUTCOMES, PARAM_NAMES, MissingAccelBound, Outcome, PayoffParams, SpuriousAccelBound,
                         encounter_utilities, payoff_a, payoff_b, payoff_features, player_payoffs, total_payoff,
                         utilities)


def test_default_parameters_spot_values(table_params):
    assert table_params["alpha.11.0"] == 0.954
    assert table_params["alpha.11.1"] == 5.107
    assert table_params["beta.22.1"] == 1.030
    assert len(table_params.values) == 20


def test_outcome_strategies():
    assert Outcome.O12.a_strategy == 1 and Outcome.O12.b_strategy == 2
    assert Outcome.from_strategies(2, 1) is Outcome.O21
    assert Outcome.parse("O22") is Outcome.O22
    assert [o.index for o in OUTCOMES] == [0, 1, 2, 3]


def test_payoff_a_requires_bound_only_where_b_proceeds(table_params):
    with pytest.raises(MissingAccelBound):
        payoff_a("o11", 0.5, None, table_params)
    with pytest.raises(SpuriousAccelBound):
        payoff_a("o12", 0.5, 1.0, table_params)
    assert payoff_a("o22", 0.5, None, table_params) == pytest.approx(
        table_params["alpha.22.0"] + 0.5 * table_params["alpha.22.1"])


def test_payoff_b_requires_bound_only_where_a_proceeds(table_params):
    with pytest.raises(MissingAccelBound):
        payoff_b("o12", 0.5, None, table_params)
    with pytest.raises(SpuriousAccelBound):
        payoff_b("o21", 0.5, 1.0, table_params)


def test_linear_in_inputs(table_params):
    p = table_params
    got = payoff_a("o21", -0.4, 0.7, p)
    assert got == pytest.approx(p["alpha.21.0"] - 0.4 * p["alpha.21.1"] + 0.7 * p["alpha.21.2"])


def test_zero_parameters_give_zero_utilities(encounters):
    u = encounter_utilities(encounters[0], PayoffParams.zeros())
    assert np.all(u == 0)


def test_design_matches_scalar_payoffs(encounters, table_params):
    for enc in encounters[:20]:
        u = encounter_utilities(enc, table_params)
        a_A, a_B = enc.a_state.acceleration, enc.b_state.acceleration
        ac_a, ac_b = collision_bounds(enc)
        for o in OUTCOMES:
            ua = payoff_a(o, a_A, ac_a if o in (Outcome.O11, Outcome.O21) else None, table_params)
            ub = payoff_b(o, a_B, ac_b if o in (Outcome.O11, Outcome.O12) else None, table_params)
            assert player_payoffs(u, o) == pytest.approx((ua, ub))
            assert total_payoff(enc, o, table_params) == pytest.approx(ua + ub)


def test_params_text_round_trip_is_exact(tmp_path):
    p = PayoffParams(np.random.default_rng(0).normal(size=20))
    path = tmp_path / "p.params"
    p.save(path)
    assert PayoffParams.load(path) == p


def test_params_reject_bad_keys():
    with pytest.raises(KeyError):
        PayoffParams.from_mapping({k: 0.0 for k in PARAM_NAMES[:-1]})
    with pytest.raises(ValueError):
        PayoffParams.loads("alpha.11.0 = 1\nalpha.11.0 = 2\n")


def test_params_immutable(table_params):
    with pytest.raises(ValueError):
        table_params.values[0] = 1.0


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-5, 5), min_size=4, max_size=4), st.floats(0.1, 10.0))
def test_utilities_linear_in_params(feats, k):
    theta = np.random.default_rng(3).normal(size=20)
    f = np.array(feats)
    np.testing.assert_allclose(utilities(f, theta * k), k * utilities(f, theta), rtol=1e-9, atol=1e-9)


def test_features_order():
    enc = Encounter(VehicleState(6.0, 0.3, 12.0, 20.0), VehicleState(9.0, -0.2, 15.0, 23.0))
    f = payoff_features(enc)
    assert f[0] == 0.3 and f[1] == -0.2
    assert tuple(f[2:]) == collision_bounds(enc)

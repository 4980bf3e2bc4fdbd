import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ehmi.calibration import (Degenerate, EmptyDataset, FitOptions, LengthMismatch, accuracy, estimate_delta,
                              evaluate_forms, fit_mle, label_intention, log_likelihood, predict, predict_proba,
                              prepare, rmse, winning_probabilities)
from ehmi.data_io import LabeledEncounter
from ehmi.game import DeltaRule, GameForm
from ehmi.kinematics import Encounter, VehicleState
from ehmi.payoff import OUTCOMES, Outcome, PayoffParams
from ehmi.synthetic import random_encounters, sample_outcomes, synthetic_pair

outcome_lists = st.lists(st.sampled_from(OUTCOMES), min_size=1, max_size=60)


@pytest.fixture(scope="module")
def synthetic(table_params):
    encs = random_encounters(600, seed=3)
    return sample_outcomes(encs, table_params, GameForm.B_FIRST, seed=4)


def test_rmse_and_accuracy_examples():
    pred = ["o11", "o12", "o21", "o22"]
    obs = ["o11", "o12", "o22", "o22"]
    assert accuracy(pred, obs) == 0.75
    assert rmse(pred, obs) == pytest.approx(0.5)


@settings(max_examples=200, deadline=None)
@given(outcome_lists, st.randoms())
def test_rmse_squared_plus_accuracy_is_one(obs, rnd):
    pred = [rnd.choice(OUTCOMES) for _ in obs]
    assert rmse(pred, obs) ** 2 + accuracy(pred, obs) == pytest.approx(1.0, abs=1e-15)


def test_metric_errors():
    with pytest.raises(LengthMismatch):
        rmse(["o11"], ["o11", "o12"])
    with pytest.raises(EmptyDataset):
        accuracy([], [])


def test_prepare_skips_invalid_encounters():
    good = Encounter(VehicleState(6.0, 0.3, 12.0, 20.0), VehicleState(9.0, -0.2, 15.0, 23.0), None, "g")
    bad = Encounter(VehicleState(6.0, 0.0, 12.0, 20.0), VehicleState(2.0, -1.0, 1.0, 9.0), None, "b")
    prep = prepare([LabeledEncounter(good, Outcome.O11, "g"), LabeledEncounter(bad, Outcome.O12, "b")])
    assert prep.ids == ["g"] and [s[0] for s in prep.skipped] == ["b"]
    assert prep.design.shape == (1, 8, 20)


def test_log_likelihood_zero_params_is_uniform(synthetic):
    ll = log_likelihood(PayoffParams.zeros(), synthetic)
    assert ll == pytest.approx(len(prepare(synthetic)) * math.log(0.25))


def test_log_likelihood_batch_independent(synthetic, table_params):
    whole = log_likelihood(table_params, synthetic)
    parts = log_likelihood(table_params, synthetic[:300]) + log_likelihood(table_params, synthetic[300:])
    assert whole == pytest.approx(parts, rel=1e-12)


def test_predict_proba_rows_sum_to_one(synthetic, table_params):
    for form in GameForm:
        p = predict_proba(table_params, synthetic, form)
        np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-9)


def test_fit_improves_on_start(synthetic, table_params):
    res = fit_mle(synthetic, GameForm.B_FIRST, PayoffParams.zeros(), FitOptions(n_restarts=1, seed=0))
    assert res.log_likelihood > log_likelihood(PayoffParams.zeros(), synthetic)
    assert res.log_likelihood >= log_likelihood(table_params, synthetic) - 1e-3 * res.n_encounters
    assert set(res.rmse_per_form) == {"sim", "a-first", "b-first"}
    for form in res.rmse_per_form:
        assert res.rmse_per_form[form] ** 2 + res.accuracy_per_form[form] == pytest.approx(1.0)


def test_fit_is_deterministic(synthetic):
    opts = FitOptions(n_restarts=1, seed=7, max_iter=2000)
    a = fit_mle(synthetic[:200], "b-first", None, opts)
    b = fit_mle(synthetic[:200], "b-first", None, opts)
    assert a.params == b.params and a.to_json() == b.to_json()


def test_degenerate_labels_rejected():
    encs = random_encounters(30, seed=1)
    data = [LabeledEncounter(e, Outcome.O21, e.encounter_id) for e in encs]
    with pytest.raises(Degenerate) as info:
        fit_mle(data)
    assert "alpha.21.0" in info.value.direction


def test_empty_and_tiny_datasets():
    with pytest.raises(EmptyDataset):
        fit_mle([])
    encs = random_encounters(5, seed=1)
    with pytest.raises(ValueError):
        fit_mle([LabeledEncounter(e, OUTCOMES[i % 4], "") for i, e in enumerate(encs)])


def test_estimate_delta():
    encs = random_encounters(4, seed=2)
    labels = [Outcome.O11, Outcome.O11, Outcome.O22, Outcome.O12]
    data = [LabeledEncounter(e, o) for e, o in zip(encs, labels)]
    assert estimate_delta(data).delta == pytest.approx(2 / 3)
    assert estimate_delta(data[3:]).delta == 0.5


def test_evaluate_forms_consistent(synthetic, table_params):
    m = evaluate_forms(table_params, synthetic)
    obs = [OUTCOMES[i] for i in prepare(synthetic).labels]
    for form in GameForm:
        pred = predict(table_params, synthetic, form)
        assert m[form.value]["accuracy"] == accuracy(pred, obs)
        assert m[form.value]["n_correct"] == len(winning_probabilities(table_params, synthetic, form))


def test_delta_only_changes_simultaneous(synthetic, table_params):
    for form in (GameForm.A_FIRST, GameForm.B_FIRST):
        p0 = predict_proba(table_params, synthetic, form, DeltaRule(0.0))
        p1 = predict_proba(table_params, synthetic, form, DeltaRule(1.0))
        np.testing.assert_array_equal(p0, p1)


def test_label_intention_from_speed_change():
    a, b = synthetic_pair(8.0, 0.0, 10.0, 0.0, s0_a=20, s0_b=20, duration=8)
    assert label_intention(a, b) is Outcome.O11
    a, b = synthetic_pair(8.0, -1.0, 10.0, 0.5, s0_a=30, s0_b=20, duration=8)
    assert label_intention(a, b) is Outcome.O21
    a, b = synthetic_pair(8.0, 0.5, 10.0, -1.2, s0_a=30, s0_b=20, duration=8)
    assert label_intention(a, b) is Outcome.O12

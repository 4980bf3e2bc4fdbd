import numpy as np
import pytest
from sklearn.base import clone
from sklearn.pipeline import make_pipeline
from sklearn.linear_model import LogisticRegression

from ehmi.estimator import CLASSES, CollisionBoundFeatures, EquilibriumClassifier
from ehmi.game import GameForm
from ehmi.kinematics import collision_bounds
from ehmi.payoff import PayoffParams
from ehmi.synthetic import random_encounters, sample_outcomes


def _xy(n, seed):
    encs = random_encounters(n, seed=seed)
    data = sample_outcomes(encs, PayoffParams.default(), GameForm.B_FIRST, seed=seed + 1)
    X = np.array([[d.encounter.a_state.velocity, d.encounter.a_state.acceleration,
                   d.encounter.a_state.dist_to_conflict, d.encounter.a_state.dist_through_conflict,
                   d.encounter.b_state.velocity, d.encounter.b_state.acceleration,
                   d.encounter.b_state.dist_to_conflict, d.encounter.b_state.dist_through_conflict] for d in data])
    y = np.array([d.observed_outcome.value for d in data])
    return X, y, [d.encounter for d in data]


def test_params_and_clone():
    est = EquilibriumClassifier(form="sim", delta=0.3, n_restarts=0)
    p = est.get_params()
    assert p["form"] == "sim" and p["delta"] == 0.3
    c = clone(est)
    assert c.get_params() == p and c is not est
    est.set_params(delta="auto")
    assert est.delta == "auto"


def test_fit_predict():
    X, y, _ = _xy(300, 4)
    est = EquilibriumClassifier(n_restarts=0, max_iter=3000).fit(X, y)
    assert list(est.classes_) == list(CLASSES) and est.n_features_in_ == 8
    proba = est.predict_proba(X)
    np.testing.assert_allclose(proba.sum(axis=1), 1.0, atol=1e-12)
    pred = est.predict(X)
    assert set(pred) <= set(CLASSES)
    assert est.score(X, y) == pytest.approx(np.mean(pred == y))
    assert est.log_likelihood(X, y) == pytest.approx(est.result_.log_likelihood, rel=1e-6)


def test_delta_auto():
    X, y, _ = _xy(200, 8)
    est = EquilibriumClassifier(form="sim", delta="auto", n_restarts=0, max_iter=500).fit(X, y)
    n11, n22 = np.sum(y == "o11"), np.sum(y == "o22")
    assert est.delta_ == pytest.approx(n11 / (n11 + n22))


def test_unfitted_and_bad_input():
    est = EquilibriumClassifier()
    with pytest.raises(Exception):
        est.predict(np.zeros((1, 8)))
    with pytest.raises(ValueError):
        EquilibriumClassifier(init="nope", n_restarts=0).fit(*_xy(30, 1)[:2])
    with pytest.raises(ValueError):
        est.fit(np.zeros((3, 5)), ["o11"] * 3)


def test_feature_transformer():
    X, y, encs = _xy(20, 2)
    F = CollisionBoundFeatures().fit_transform(X)
    assert F.shape == (20, 4)
    for row, enc in zip(F, encs):
        np.testing.assert_allclose(row[2:], collision_bounds(enc))
        assert row[0] == enc.a_state.acceleration
    pipe = make_pipeline(CollisionBoundFeatures(), LogisticRegression(max_iter=500)).fit(X, y)
    assert pipe.predict(X).shape == (20,)

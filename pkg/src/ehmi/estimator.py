"""scikit-learn style wrapper around the equilibrium outcome model.

``X`` rows are encounter states ``[v_a, acc_a, d_a, dthru_a, v_b, acc_b, d_b,
dthru_b]`` (A turns left, B goes straight); ``y`` holds outcome labels
``"o11" .. "o22"``.
"""
from __future__ import annotations

from typing import List, Optional

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .calibration import FitOptions, estimate_delta, fit_mle
from .data_io import LabeledEncounter
from .game import DeltaRule, GameForm, outcome_probs
from .kinematics import Encounter, VehicleState, collision_bounds
from .payoff import OUTCOMES, Outcome, PayoffParams, design_matrix

CLASSES = np.array([o.value for o in OUTCOMES])


def rows_to_encounters(X) -> List[Encounter]:
    X = check_array(X, ensure_min_features=8)
    if X.shape[1] != 8:
        raise ValueError(f"expected 8 columns, got {X.shape[1]}")
    return [Encounter(VehicleState(*r[:4]), VehicleState(*r[4:]), None, str(i)) for i, r in enumerate(X)]


def _features(X) -> np.ndarray:
    """[a_A, a_B, ac_A, ac_B] per row; raises KinematicsError on invalid rows."""
    out = np.empty((len(X), 4))
    for i, enc in enumerate(rows_to_encounters(X)):
        out[i] = (enc.a_state.acceleration, enc.b_state.acceleration, *collision_bounds(enc))
    return out


class CollisionBoundFeatures(TransformerMixin, BaseEstimator):
    """Map encounter states to the payoff features ``[a_A, a_B, ac_A, ac_B]``."""

    def fit(self, X, y=None):
        X = check_array(X)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        return _features(X)


class EquilibriumClassifier(ClassifierMixin, BaseEstimator):
    """Predict interaction outcomes from a calibrated logit game.

    Parameters
    ----------
    form : {"sim", "a-first", "b-first"}
        Game structure used for fitting and prediction.
    delta : float or "auto"
        Probability of selecting o11 among the o11/o22 dual equilibrium.
        ``"auto"`` estimates it from the training labels.
    init : "zeros", "default" or array of 20
        Starting point of the likelihood search.
    n_restarts, restart_scale, max_iter, tol, random_state
        Optimizer settings (see :class:`ehmi.calibration.FitOptions`).
    """

    def __init__(self, form="b-first", delta=0.5, init="zeros", n_restarts=2, restart_scale=0.5,
                 max_iter=20000, tol=1e-8, random_state=0):
        self.form = form
        self.delta = delta
        self.init = init
        self.n_restarts = n_restarts
        self.restart_scale = restart_scale
        self.max_iter = max_iter
        self.tol = tol
        self.random_state = random_state

    def _init_params(self) -> Optional[PayoffParams]:
        if isinstance(self.init, str):
            if self.init == "zeros":
                return PayoffParams.zeros()
            if self.init == "default":
                return PayoffParams.default()
            raise ValueError(f"unknown init {self.init!r}")
        return PayoffParams(np.asarray(self.init, dtype=float))

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=float, y_numeric=False)
        labels = [Outcome.parse(v) for v in y]
        encs = rows_to_encounters(X)
        data = [LabeledEncounter(e, o, e.encounter_id) for e, o in zip(encs, labels)]
        if self.delta == "auto":
            rule = estimate_delta(data)
        else:
            rule = DeltaRule(float(self.delta))
        opts = FitOptions(n_restarts=self.n_restarts, restart_scale=self.restart_scale,
                          max_iter=self.max_iter, tol=self.tol, seed=self.random_state)
        result = fit_mle(data, GameForm.parse(self.form), self._init_params(), opts, rule)
        self.result_ = result
        self.params_ = result.params
        self.delta_ = rule.delta
        self.classes_ = CLASSES.copy()
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        u = design_matrix(_features(X)) @ self.params_.values
        p = outcome_probs(u, GameForm.parse(self.form), self.delta_)
        return p / p.sum(axis=1, keepdims=True)

    def predict(self, X):
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def log_likelihood(self, X, y) -> float:
        p = self.predict_proba(X)
        idx = np.array([Outcome.parse(v).index for v in y])
        return float(np.sum(np.log(np.maximum(p[np.arange(len(idx)), idx], 1e-12))))


__all__ = ["EquilibriumClassifier", "CollisionBoundFeatures", "rows_to_encounters", "CLASSES"]

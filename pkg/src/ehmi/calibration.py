"""Intention labels, likelihood and maximum-likelihood fitting of payoff coefficients."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize

from .data_io import InteractionConfig, LabeledEncounter, NoInteraction, Trajectory, find_onset
from .game import DeltaRule, GameForm, argmax_outcome, outcome_probs
from .kinematics import KinematicsError
from .payoff import N_PARAMS, OUTCOMES, Outcome, PayoffParams, design_matrix, payoff_features

logger = logging.getLogger(__name__)

PROB_FLOOR = 1e-12


class EmptyDataset(ValueError):
    pass


class LengthMismatch(ValueError):
    pass


class Degenerate(ValueError):
    """The likelihood has no finite maximiser for this dataset."""

    def __init__(self, message: str, direction: Dict[str, float]):
        super().__init__(message)
        self.direction = direction


# -- labeling -------------------------------------------------------------------------

def _window_mean_accel(tr: Trajectory, t0: float, window: float) -> float:
    t1 = min(t0 + window, tr.t[-1])
    if t1 <= t0:
        raise NoInteraction(f"vehicle {tr.vehicle_id} has no frames after onset")
    v = tr.speed()
    return float((np.interp(t1, tr.t, v) - np.interp(t0, tr.t, v)) / (t1 - t0))


def label_intention(traj_a: Trajectory, traj_b: Trajectory, geometry=None,
                    config: InteractionConfig = InteractionConfig()) -> Outcome:
    """Intention outcome from early speed change in the interaction window.

    A vehicle whose mean acceleration over the first ``config.label_window``
    seconds falls below ``config.yield_threshold`` is labeled as yielding.
    """
    cp = None
    if geometry is not None:
        cp = getattr(geometry, "conflict_point", geometry)
    on = find_onset(traj_a, traj_b, config, cp)
    acc_a = _window_mean_accel(traj_a, on.time, config.label_window)
    acc_b = _window_mean_accel(traj_b, on.time, config.label_window)
    a = 2 if acc_a < config.yield_threshold else 1
    b = 2 if acc_b < config.yield_threshold else 1
    return Outcome.from_strategies(a, b)


# -- data preparation -------------------------------------------------------------------

@dataclass
class PreparedData:
    """Design tensor and labels for vectorised likelihood evaluation."""

    design: np.ndarray        # (N, 8, 20)
    labels: np.ndarray        # (N,) outcome indices
    ids: List[str]
    skipped: List[Tuple[str, str]] = field(default_factory=list)

    def __len__(self):
        return len(self.labels)


def prepare(data: Sequence[LabeledEncounter], *, require_labels: bool = True) -> PreparedData:
    feats, labels, ids, skipped = [], [], [], []
    for item in data:
        eid = item.source_id or item.encounter.encounter_id
        try:
            f = payoff_features(item.encounter)
        except KinematicsError as exc:
            skipped.append((eid, str(exc)))
            continue
        if item.observed_outcome is None:
            if require_labels:
                raise ValueError(f"encounter {eid} has no observed outcome")
            labels.append(-1)
        else:
            labels.append(item.observed_outcome.index)
        feats.append(f)
        ids.append(eid)
    if skipped:
        logger.info("skipped %d encounters with kinematic errors", len(skipped))
    X = design_matrix(np.array(feats).reshape(-1, 4))
    return PreparedData(X, np.array(labels, dtype=int), ids, skipped)


def _as_prepared(data) -> PreparedData:
    return data if isinstance(data, PreparedData) else prepare(data)


def _theta(params) -> np.ndarray:
    return params.values if isinstance(params, PayoffParams) else np.asarray(params, dtype=float)


def predict_proba(params, data, form=GameForm.B_FIRST, delta_rule: DeltaRule = DeltaRule()) -> np.ndarray:
    prep = data if isinstance(data, PreparedData) else prepare(data, require_labels=False)
    return outcome_probs(prep.design @ _theta(params), form, delta_rule.delta)


def predict(params, data, form=GameForm.B_FIRST, delta_rule: DeltaRule = DeltaRule()) -> List[Outcome]:
    return [OUTCOMES[i] for i in argmax_outcome(predict_proba(params, data, form, delta_rule))]


# -- likelihood ---------------------------------------------------------------------

def log_likelihood(params, data, form=GameForm.B_FIRST, delta_rule: DeltaRule = DeltaRule()) -> float:
    """Sum over encounters of the log probability of the observed outcome."""
    prep = _as_prepared(data)
    if len(prep) == 0:
        raise EmptyDataset("log-likelihood needs at least one encounter")
    p = outcome_probs(prep.design @ _theta(params), form, delta_rule.delta)
    chosen = p[np.arange(len(prep)), prep.labels]
    # fixed-order reduction keeps the value independent of how it is batched
    return float(math.fsum(np.log(np.maximum(chosen, PROB_FLOOR))))


# -- validation metrics ----------------------------------------------------------------

def rmse(predictions: Sequence, observations: Sequence) -> float:
    """Root mean squared 0/1 error between predicted and observed outcomes."""
    if len(predictions) != len(observations):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(observations)} observations")
    if not predictions:
        raise EmptyDataset("rmse of nothing")
    wrong = sum(Outcome.parse(p) != Outcome.parse(o) for p, o in zip(predictions, observations))
    return math.sqrt(wrong / len(predictions))


def accuracy(predictions: Sequence, observations: Sequence) -> float:
    if len(predictions) != len(observations):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(observations)} observations")
    if not predictions:
        raise EmptyDataset("accuracy of nothing")
    right = sum(Outcome.parse(p) == Outcome.parse(o) for p, o in zip(predictions, observations))
    return right / len(predictions)


def estimate_delta(data: Sequence[LabeledEncounter]) -> DeltaRule:
    """Share of o11 among encounters labeled o11 or o22 (0.5 without any)."""
    n11 = sum(1 for d in data if d.observed_outcome is Outcome.O11)
    n22 = sum(1 for d in data if d.observed_outcome is Outcome.O22)
    if n11 + n22 == 0:
        return DeltaRule(0.5)
    return DeltaRule(n11 / (n11 + n22))


def winning_probabilities(params, data, form, delta_rule: DeltaRule = DeltaRule()) -> np.ndarray:
    """Probability of the predicted outcome for each correctly predicted encounter."""
    prep = _as_prepared(data)
    p = predict_proba(params, prep, form, delta_rule)
    pred = argmax_outcome(p)
    ok = pred == prep.labels
    return p[np.arange(len(prep)), pred][ok]


# -- fitting -----------------------------------------------------------------------

@dataclass
class FitOptions:
    n_restarts: int = 10
    restart_scale: float = 0.5
    max_iter: int = 20000
    tol: float = 1e-8
    patience: int = 3
    seed: int = 0


@dataclass
class CalibrationResult:
    params: PayoffParams
    log_likelihood: float
    iterations: int
    converged: bool
    form: GameForm = GameForm.B_FIRST
    delta: float = 0.5
    n_encounters: int = 0
    rmse_per_form: Dict[str, float] = field(default_factory=dict)
    accuracy_per_form: Dict[str, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "form": self.form.value,
            "delta": round(self.delta, 6),
            "n_encounters": self.n_encounters,
            "log_likelihood": round(self.log_likelihood, 6),
            "iterations": self.iterations,
            "converged": self.converged,
            "params": {k: round(v, 6) for k, v in self.params.to_mapping().items()},
            "rmse_per_form": {k: round(v, 6) for k, v in self.rmse_per_form.items()},
            "accuracy_per_form": {k: round(v, 6) for k, v in self.accuracy_per_form.items()},
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"


class _Stop(Exception):
    pass


def _nelder_mead(fun, x0: np.ndarray, opts: FitOptions) -> Tuple[np.ndarray, float, int, bool]:
    """One simplex run; stops after ``patience`` consecutive tiny improvements."""
    state = {"best": fun(x0), "streak": 0, "hit": False}

    def callback(intermediate_result):
        f = intermediate_result.fun
        gain = state["best"] - f
        if gain > 0:
            state["streak"] = state["streak"] + 1 if gain < opts.tol else 0
            state["best"] = f
            if state["streak"] >= opts.patience:
                state["hit"] = True
                raise StopIteration

    res = minimize(fun, x0, method="Nelder-Mead", callback=callback,
                   options={"maxiter": opts.max_iter, "maxfev": 4 * opts.max_iter,
                            "xatol": 1e-7, "fatol": opts.tol, "adaptive": True})
    converged = state["hit"] or bool(res.success)
    return res.x, float(res.fun), int(res.nit), converged


def _check_degenerate(labels: np.ndarray) -> None:
    present = sorted(set(int(i) for i in labels))
    if len(present) < 2:
        only = OUTCOMES[present[0]] if present else None
        direction = {}
        if only is not None:
            direction = {f"alpha.{only.value[1:]}.0": 1.0, f"beta.{only.value[1:]}.0": 1.0}
        raise Degenerate(
            f"all encounters share outcome {only}; the likelihood grows without bound along {direction}",
            direction,
        )


def fit_mle(data, form=GameForm.B_FIRST, init: Optional[PayoffParams] = None,
            opts: FitOptions = FitOptions(), delta_rule: DeltaRule = DeltaRule(),
            min_encounters: int = 20) -> CalibrationResult:
    """Maximise the log-likelihood with restarted Nelder-Mead.

    The first run starts at ``init``; each restart perturbs the best point so
    far by Gaussian noise of scale ``opts.restart_scale``.
    """
    form = GameForm.parse(form)
    prep = _as_prepared(data)
    if len(prep) == 0:
        raise EmptyDataset("nothing to calibrate")
    if len(prep) < min_encounters:
        raise ValueError(f"need at least {min_encounters} encounters, got {len(prep)}")
    _check_degenerate(prep.labels)
    theta0 = np.zeros(N_PARAMS) if init is None else _theta(init).copy()

    X2 = prep.design.reshape(-1, N_PARAMS)
    n = len(prep)
    rows = np.arange(n)

    def neg_ll(theta):
        u = (X2 @ theta).reshape(n, 8)
        p = outcome_probs(u, form, delta_rule.delta)[rows, prep.labels]
        return -float(np.sum(np.log(np.maximum(p, PROB_FLOOR))))

    rng = np.random.default_rng(opts.seed)
    best_x, best_f, iters, conv = _nelder_mead(neg_ll, theta0, opts)
    total_iters = iters
    for k in range(opts.n_restarts):
        start = best_x + rng.normal(scale=opts.restart_scale, size=N_PARAMS)
        x, f, it, c = _nelder_mead(neg_ll, start, opts)
        total_iters += it
        logger.debug("restart %d: -ll=%.6f", k, f)
        if f < best_f:
            best_x, best_f, conv = x, f, c
    # polishing run from the incumbent
    x, f, it, c = _nelder_mead(neg_ll, best_x, opts)
    total_iters += it
    if f <= best_f:
        best_x, best_f, conv = x, f, c

    params = PayoffParams(best_x)
    result = CalibrationResult(
        params=params,
        log_likelihood=log_likelihood(params, prep, form, delta_rule),
        iterations=total_iters,
        converged=conv,
        form=form,
        delta=delta_rule.delta,
        n_encounters=n,
    )
    obs = [OUTCOMES[i] for i in prep.labels]
    for f_ in GameForm:
        pred = predict(params, prep, f_, delta_rule)
        result.rmse_per_form[f_.value] = rmse(pred, obs)
        result.accuracy_per_form[f_.value] = accuracy(pred, obs)
    return result


def evaluate_forms(params, data, delta_rule: DeltaRule = DeltaRule()) -> Dict[str, Dict[str, float]]:
    """RMSE, accuracy and mean winning probability of each game form with fixed params."""
    prep = _as_prepared(data)
    obs = [OUTCOMES[i] for i in prep.labels]
    out = {}
    for form in GameForm:
        pred = predict(params, prep, form, delta_rule)
        win = winning_probabilities(params, prep, form, delta_rule)
        out[form.value] = {
            "rmse": rmse(pred, obs),
            "accuracy": accuracy(pred, obs),
            "mean_winning_prob": float(np.mean(win)) if len(win) else float("nan"),
            "n_correct": int(len(win)),
        }
    return out

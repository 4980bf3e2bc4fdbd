"""Equilibrium probabilities of the 2x2 game under logit errors.

Utilities are passed around as 8-vectors ``[A11, A12, A21, A22, B11, B12, B21,
B22]`` (or arrays with that trailing axis). With i.i.d. Gumbel errors per
(player, outcome), each pairwise comparison is a logistic function of the
utility difference, and every conjunction used below involves disjoint error
terms, so the products are exact.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, Optional, Union

import numpy as np
from scipy.special import expit

from .kinematics import Encounter
from .payoff import OUTCOMES, Outcome, PayoffParams, encounter_utilities

A11, A12, A21, A22, B11, B12, B21, B22 = range(8)

# share of the o12/o21 double equilibrium given to o12; no published rule exists
ANTI_DIAGONAL_SPLIT = 0.5


class GameForm(str, enum.Enum):
    SIMULTANEOUS = "sim"
    A_FIRST = "a-first"
    B_FIRST = "b-first"

    @classmethod
    def parse(cls, text) -> "GameForm":
        if isinstance(text, GameForm):
            return text
        aliases = {
            "simultaneous": "sim", "sequential_a_first": "a-first", "sequentialafirst": "a-first",
            "sequential_b_first": "b-first", "sequentialbfirst": "b-first", "a": "a-first", "b": "b-first",
        }
        t = str(text).strip().lower()
        return cls(aliases.get(t, t))


class Player(str, enum.Enum):
    A = "A"
    B = "B"


@dataclass(frozen=True)
class DeltaRule:
    """Probability that o11 is picked when o11 and o22 are both equilibria."""

    delta: float = 0.5

    def __post_init__(self):
        if not 0.0 <= self.delta <= 1.0:
            raise ValueError(f"delta must lie in [0, 1], got {self.delta}")


@dataclass(frozen=True)
class OutcomeDistribution:
    p: Dict[Outcome, float]

    def __getitem__(self, outcome) -> float:
        return self.p[Outcome.parse(outcome)]

    @property
    def total(self) -> float:
        return sum(self.p.values())

    def argmax(self) -> Outcome:
        # ties resolve to the earliest outcome in o11 < o12 < o21 < o22
        return max(OUTCOMES, key=lambda o: (self.p[o], -o.index))

    def as_array(self) -> np.ndarray:
        return np.array([self.p[o] for o in OUTCOMES])

    @classmethod
    def from_array(cls, arr) -> "OutcomeDistribution":
        return cls({o: float(v) for o, v in zip(OUTCOMES, arr)})


def pairwise_prob(v_i, v_j):
    """Logit probability that utility ``i`` beats utility ``j``.

    ``expit`` is overflow-free, and evaluating the smaller side as the
    complement keeps ``p(x, y) + p(y, x) == 1`` exact in floating point.
    """
    d = np.subtract(v_i, v_j, dtype=float)
    small = expit(-np.abs(d))
    out = np.where(d >= 0, 1.0 - small, small)
    return float(out) if out.ndim == 0 else out


def _pp(u, i, j):
    return pairwise_prob(u[..., i], u[..., j])


def simultaneous_probs(u: np.ndarray, delta: float = 0.5) -> np.ndarray:
    """Outcome probabilities ``(..., 4)`` of the simultaneous-move game.

    Each outcome collects the sign patterns in which it is a pure equilibrium.
    Double equilibria are split by ``delta`` (o11/o22) and by
    ``ANTI_DIAGONAL_SPLIT`` (o12/o21); the result is conditioned on at least one
    pure equilibrium existing, so it sums to one.
    """
    u = np.asarray(u, dtype=float)
    a1 = _pp(u, A11, A21)  # A's reply to B1 is A1
    a2 = _pp(u, A12, A22)  # A's reply to B2 is A1
    b1 = _pp(u, B11, B12)  # B's reply to A1 is B1
    b2 = _pp(u, B21, B22)  # B's reply to A2 is B1
    na1, na2, nb1, nb2 = (pairwise_prob(u[..., j], u[..., i]) for i, j in
                          ((A11, A21), (A12, A22), (B11, B12), (B21, B22)))
    ne11 = a1 * b1
    ne12 = a2 * nb1
    ne21 = na1 * b2
    ne22 = na2 * nb2
    both_diag = ne11 * ne22
    both_anti = ne12 * ne21
    p11 = ne11 - (1.0 - delta) * both_diag
    p22 = ne22 - delta * both_diag
    p12 = ne12 - (1.0 - ANTI_DIAGONAL_SPLIT) * both_anti
    p21 = ne21 - ANTI_DIAGONAL_SPLIT * both_anti
    p = np.stack([p11, p12, p21, p22], axis=-1)
    return p / p.sum(axis=-1, keepdims=True)


def stackelberg_probs(u: np.ndarray, leader: Union[Player, str] = Player.B) -> np.ndarray:
    """Outcome probabilities ``(..., 4)`` of the sequential game by backward induction.

    For every combination of follower replies, the leader compares the two
    induced outcomes. The result sums to one because the logit comparisons
    are complementary, but nothing here relies on that.
    """
    u = np.asarray(u, dtype=float)
    leader = Player(leader)
    p = np.zeros(u.shape[:-1] + (4,))
    idx = {o: o.index for o in OUTCOMES}
    if leader is Player.B:
        # follower A: reply to B1 is A1 w.p. r1, reply to B2 is A1 w.p. r2
        r1, nr1 = _pp(u, A11, A21), _pp(u, A21, A11)
        r2, nr2 = _pp(u, A12, A22), _pp(u, A22, A12)
        for a_vs_b1, w1 in ((1, r1), (2, nr1)):
            for a_vs_b2, w2 in ((1, r2), (2, nr2)):
                o_b1 = Outcome.from_strategies(a_vs_b1, 1)
                o_b2 = Outcome.from_strategies(a_vs_b2, 2)
                lead_b1 = _pp(u, 4 + o_b1.index, 4 + o_b2.index)
                lead_b2 = _pp(u, 4 + o_b2.index, 4 + o_b1.index)
                p[..., idx[o_b1]] += w1 * w2 * lead_b1
                p[..., idx[o_b2]] += w1 * w2 * lead_b2
    else:
        # follower B: reply to A1 is B1 w.p. r1, reply to A2 is B1 w.p. r2
        r1, nr1 = _pp(u, B11, B12), _pp(u, B12, B11)
        r2, nr2 = _pp(u, B21, B22), _pp(u, B22, B21)
        for b_vs_a1, w1 in ((1, r1), (2, nr1)):
            for b_vs_a2, w2 in ((1, r2), (2, nr2)):
                o_a1 = Outcome.from_strategies(1, b_vs_a1)
                o_a2 = Outcome.from_strategies(2, b_vs_a2)
                lead_a1 = _pp(u, o_a1.index, o_a2.index)
                lead_a2 = _pp(u, o_a2.index, o_a1.index)
                p[..., idx[o_a1]] += w1 * w2 * lead_a1
                p[..., idx[o_a2]] += w1 * w2 * lead_a2
    return p


def outcome_probs(u: np.ndarray, form: Union[GameForm, str], delta: float = 0.5) -> np.ndarray:
    form = GameForm.parse(form)
    if form is GameForm.SIMULTANEOUS:
        return simultaneous_probs(u, delta)
    return stackelberg_probs(u, Player.A if form is GameForm.A_FIRST else Player.B)


def argmax_outcome(p: np.ndarray) -> np.ndarray:
    """Index of the most probable outcome; ``np.argmax`` keeps the first on ties."""
    return np.argmax(np.asarray(p), axis=-1)


def simultaneous_distribution(encounter: Encounter, params: PayoffParams,
                              delta_rule: DeltaRule = DeltaRule()) -> OutcomeDistribution:
    u = encounter_utilities(encounter, params)
    return OutcomeDistribution.from_array(simultaneous_probs(u, delta_rule.delta))


def stackelberg_distribution(encounter: Encounter, params: PayoffParams,
                             leader: Union[Player, str] = Player.B) -> OutcomeDistribution:
    u = encounter_utilities(encounter, params)
    return OutcomeDistribution.from_array(stackelberg_probs(u, leader))


def distribution(encounter: Encounter, params: PayoffParams, form, delta_rule: DeltaRule = DeltaRule()):
    u = encounter_utilities(encounter, params)
    return OutcomeDistribution.from_array(outcome_probs(u, form, delta_rule.delta))


def predict_outcome(encounter: Encounter, params: PayoffParams, form=GameForm.B_FIRST,
                    delta_rule: DeltaRule = DeltaRule()) -> Outcome:
    return distribution(encounter, params, form, delta_rule).argmax()


# -- deterministic references -------------------------------------------------

def brute_force_equilibria(u: Iterable[float]) -> FrozenSet[Outcome]:
    """Pure Nash equilibria of the 2x2 game by exhaustive best-response check."""
    u = list(map(float, u))
    found = set()
    for o in OUTCOMES:
        i, j = o.a_strategy, o.b_strategy
        a_alt = Outcome.from_strategies(3 - i, j)
        b_alt = Outcome.from_strategies(i, 3 - j)
        if u[o.index] >= u[a_alt.index] and u[4 + o.index] >= u[4 + b_alt.index]:
            found.add(o)
    return frozenset(found)


def select_equilibrium(equilibria: FrozenSet[Outcome], delta: float = 0.5) -> Optional[Outcome]:
    """Deterministic pick from an equilibrium set, mirroring the probability splits."""
    if not equilibria:
        return None
    if len(equilibria) == 1:
        return next(iter(equilibria))
    if equilibria == {Outcome.O11, Outcome.O22}:
        return Outcome.O11 if delta >= 1.0 - delta else Outcome.O22
    if equilibria == {Outcome.O12, Outcome.O21}:
        return Outcome.O12 if ANTI_DIAGONAL_SPLIT >= 1.0 - ANTI_DIAGONAL_SPLIT else Outcome.O21
    return min(equilibria, key=lambda o: o.index)


def backward_induction(u: Iterable[float], leader: Union[Player, str] = Player.B) -> Outcome:
    """Subgame-perfect outcome of the sequential game (strict comparisons, ties to strategy 1)."""
    u = list(map(float, u))
    leader = Player(leader)
    if leader is Player.B:
        reply = {j: 1 if u[Outcome.from_strategies(1, j).index] >= u[Outcome.from_strategies(2, j).index] else 2
                 for j in (1, 2)}
        o1 = Outcome.from_strategies(reply[1], 1)
        o2 = Outcome.from_strategies(reply[2], 2)
        return o1 if u[4 + o1.index] >= u[4 + o2.index] else o2
    reply = {i: 1 if u[4 + Outcome.from_strategies(i, 1).index] >= u[4 + Outcome.from_strategies(i, 2).index] else 2
             for i in (1, 2)}
    o1 = Outcome.from_strategies(1, reply[1])
    o2 = Outcome.from_strategies(2, reply[2])
    return o1 if u[o1.index] >= u[o2.index] else o2


def monte_carlo_probs(u: np.ndarray, form, delta: float = 0.5, n: int = 1_000_000,
                      seed: Optional[int] = 0, chunk: int = 250_000) -> np.ndarray:
    """Sampling estimate of :func:`outcome_probs` for a single utility vector.

    Draws Gumbel errors for all eight utilities, then finds equilibria by
    direct comparison of the perturbed matrix. Draws without any pure
    equilibrium are dropped in the simultaneous form.
    """
    form = GameForm.parse(form)
    rng = np.random.default_rng(seed)
    u = np.asarray(u, dtype=float)
    weights = np.zeros(4)
    kept = 0.0
    left = n
    while left > 0:
        m = min(chunk, left)
        left -= m
        w = u + rng.gumbel(size=(m, 8))
        if form is GameForm.SIMULTANEOUS:
            ne = np.stack([
                (w[:, A11] >= w[:, A21]) & (w[:, B11] >= w[:, B12]),
                (w[:, A12] >= w[:, A22]) & (w[:, B12] >= w[:, B11]),
                (w[:, A21] >= w[:, A11]) & (w[:, B21] >= w[:, B22]),
                (w[:, A22] >= w[:, A12]) & (w[:, B22] >= w[:, B21]),
            ], axis=1).astype(float)
            diag = ne[:, 0] * ne[:, 3]
            anti = ne[:, 1] * ne[:, 2]
            ne[:, 0] -= (1.0 - delta) * diag
            ne[:, 3] -= delta * diag
            ne[:, 1] -= (1.0 - ANTI_DIAGONAL_SPLIT) * anti
            ne[:, 2] -= ANTI_DIAGONAL_SPLIT * anti
            weights += ne.sum(axis=0)
            kept += float((ne.sum(axis=1) > 0).sum())
        else:
            leader = Player.A if form is GameForm.A_FIRST else Player.B
            counts = np.zeros(4)
            if leader is Player.B:
                r1 = np.where(w[:, A11] > w[:, A21], 1, 2)
                r2 = np.where(w[:, A12] > w[:, A22], 1, 2)
                o1 = 2 * (r1 - 1)          # index of o_{r1,1}
                o2 = 2 * (r2 - 1) + 1      # index of o_{r2,2}
                rows = np.arange(m)
                pick = np.where(w[rows, 4 + o1] > w[rows, 4 + o2], o1, o2)
            else:
                r1 = np.where(w[:, B11] > w[:, B12], 1, 2)
                r2 = np.where(w[:, B21] > w[:, B22], 1, 2)
                o1 = r1 - 1                # index of o_{1,r1}
                o2 = 2 + r2 - 1            # index of o_{2,r2}
                rows = np.arange(m)
                pick = np.where(w[rows, o1] > w[rows, o2], o1, o2)
            counts += np.bincount(pick, minlength=4)
            weights += counts
            kept += m
    return weights / kept

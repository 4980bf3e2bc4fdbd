import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from ehmi.game import (ANTI_DIAGONAL_SPLIT, DeltaRule, GameForm, OutcomeDistribution, Player, backward_induction,
                       brute_force_equilibria, monte_carlo_probs, outcome_probs, pairwise_prob, predict_outcome,
                       select_equilibrium, simultaneous_probs, stackelberg_probs)
from ehmi.payoff import OUTCOMES, Outcome

utils8 = st.lists(st.floats(-20, 20), min_size=8, max_size=8).map(np.array)


def test_pairwise_prob_basic():
    assert pairwise_prob(0.0, 0.0) == 0.5
    assert pairwise_prob(1.0, 0.0) == pytest.approx(1 / (1 + np.exp(-1)))
    assert pairwise_prob(800.0, 0.0) == 1.0
    assert pairwise_prob(-800.0, 0.0) == 0.0


@settings(max_examples=300, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_pairwise_prob_complement_exact(x, y):
    assert pairwise_prob(x, y) + pairwise_prob(y, x) == 1.0


def test_pairwise_prob_vectorised():
    a = np.array([0.0, 1.0, -2.0])
    np.testing.assert_array_equal(pairwise_prob(a, -a) + pairwise_prob(-a, a), 1.0)


def test_zero_utilities_uniform():
    u = np.zeros(8)
    for form in GameForm:
        np.testing.assert_allclose(outcome_probs(u, form), 0.25)


@settings(max_examples=200, deadline=None)
@given(utils8, st.floats(0, 1))
def test_all_forms_are_distributions(u, delta):
    for form in GameForm:
        p = outcome_probs(u, form, delta)
        assert np.all(p >= 0)
        assert abs(p.sum() - 1.0) < 1e-9


def test_delta_splits_diagonal_double_equilibrium():
    # coordination game: o11 and o22 are both strict equilibria
    u = np.array([10, 0, 0, 10, 10, 0, 0, 10], dtype=float) * 5
    p1 = simultaneous_probs(u, 1.0)
    p0 = simultaneous_probs(u, 0.0)
    assert p1[0] == pytest.approx(1.0, abs=1e-6) and p0[3] == pytest.approx(1.0, abs=1e-6)
    assert simultaneous_probs(u, 0.3)[0] == pytest.approx(0.3, abs=1e-6)


def test_anti_diagonal_split():
    # o12 and o21 both strict equilibria
    u = np.array([0, 10, 10, 0, 0, 10, 10, 0], dtype=float) * 5
    p = simultaneous_probs(u, 0.5)
    assert p[1] == pytest.approx(ANTI_DIAGONAL_SPLIT, abs=1e-6)
    assert p[2] == pytest.approx(1 - ANTI_DIAGONAL_SPLIT, abs=1e-6)


def test_stackelberg_leader_advantage():
    # chicken: each prefers to go while the other yields
    u = np.array([-10, 5, 1, 0, -10, 1, 5, 0], dtype=float) * 10
    assert OUTCOMES[int(np.argmax(stackelberg_probs(u, Player.B)))] is Outcome.O21
    assert OUTCOMES[int(np.argmax(stackelberg_probs(u, Player.A)))] is Outcome.O12
    assert backward_induction(u, "B") is Outcome.O21
    assert backward_induction(u, "A") is Outcome.O12


def test_brute_force_equilibria_of_chicken():
    u = np.array([-10, 5, 1, 0, -10, 1, 5, 0], dtype=float)
    assert brute_force_equilibria(u) == {Outcome.O12, Outcome.O21}


def test_select_equilibrium():
    both = frozenset({Outcome.O11, Outcome.O22})
    assert select_equilibrium(both, 0.8) is Outcome.O11
    assert select_equilibrium(both, 0.2) is Outcome.O22
    assert select_equilibrium(frozenset(), 0.5) is None


def test_delta_rule_bounds():
    with pytest.raises(ValueError):
        DeltaRule(1.5)


def test_distribution_argmax_ties_to_first():
    d = OutcomeDistribution.from_array([0.25] * 4)
    assert d.argmax() is Outcome.O11
    assert d.total == pytest.approx(1.0)


def test_form_aliases():
    assert GameForm.parse("SequentialBFirst") is GameForm.B_FIRST
    assert GameForm.parse("simultaneous") is GameForm.SIMULTANEOUS
    with pytest.raises(ValueError):
        GameForm.parse("c-first")


def test_predict_outcome_uses_table(encounters, table_params):
    out = {predict_outcome(e, table_params) for e in encounters}
    assert out <= set(OUTCOMES)


@pytest.mark.parametrize("form", list(GameForm))
def test_monte_carlo_small(form):
    u = np.random.default_rng(5).normal(scale=1.5, size=8)
    mc = monte_carlo_probs(u, form, 0.4, n=200_000, seed=1)
    np.testing.assert_allclose(mc, outcome_probs(u, form, 0.4), atol=0.01)


@settings(max_examples=100, deadline=None)
@given(utils8)
def test_high_temperature_limit_matches_backward_induction(u):
    # distinct utilities everywhere, scaled up: probabilities collapse to the pure solution
    u = u + np.arange(8) * 1e-3
    gaps = np.abs(u[:, None] - u[None, :])[~np.eye(8, dtype=bool)]
    assume(gaps.min() > 1e-4)
    for leader, form in ((Player.B, GameForm.B_FIRST), (Player.A, GameForm.A_FIRST)):
        p = outcome_probs(u * 1e6, form)
        assert OUTCOMES[int(np.argmax(p))] is backward_induction(u, leader)

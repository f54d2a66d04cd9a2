import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from pidecision.core import (
    LOWEST_INDEX, ChoiceSet, DrawSet, ReducedForm, RiskEvaluationError, RiskProfile, TieRule,
    average_risks, averaged_decision, decide_from_risk_draws, excess_risk, oracle_decision,
    plugin_decision, select, select_rows, tied_choices,
)


def linear_profile(weights):
    W = np.asarray(weights, dtype=float)
    return RiskProfile(ChoiceSet(W.shape[0]), lambda P: np.asarray(P) @ W.T, "linear")


def test_choice_set_needs_two():
    with pytest.raises(ValueError):
        ChoiceSet(1)
    assert list(ChoiceSet(3)) == [0, 1, 2]


def test_reduced_form_validation():
    ReducedForm([0.0, 1.0], np.eye(2))
    with pytest.raises(ValueError):
        ReducedForm([0.0, 1.0], [[1.0, 0.5], [0.0, 1.0]])
    with pytest.raises(ValueError):
        ReducedForm([0.0], [[-1.0]])
    with pytest.raises(ValueError):
        ReducedForm([0.0, 1.0], np.eye(3))


def test_oracle_picks_smaller_risk():
    prof = RiskProfile(2, lambda P: np.stack([P[..., 0], P[..., 1]], axis=-1))
    rep = oracle_decision(prof, [0.3, 0.1])
    assert rep.chosen == 1 and not rep.tie_flag and rep.rule_name == "oracle"


def test_exact_tie_goes_to_lowest_index_and_flags():
    rep = decide_from_risk_draws(np.array([[1.0, 1.0, 2.0]]), "bayes")
    assert rep.chosen == 0 and rep.tie_flag


def test_tie_tolerance_is_relative():
    assert tied_choices([1e6, 1e6 * (1 + 5e-11)]) == [0, 1]
    assert tied_choices([1e6, 1e6 * (1 + 1e-9)]) == [0]
    assert tied_choices([0.0, 5e-11]) == [0, 1]


def test_tie_order_preference():
    chosen, tie = select([0.2, 0.2], order=(1, 0))
    assert (chosen, tie) == (1, True)


def test_randomized_tie_rule_is_seeded_and_uniform():
    picks = [select([1.0, 1.0, 1.0], TieRule.randomized(s))[0] for s in range(600)]
    assert select([1.0, 1.0, 1.0], TieRule.randomized(5)) == select([1.0, 1.0, 1.0], TieRule.randomized(5))
    counts = np.bincount(picks, minlength=3)
    assert counts.min() > 150
    with pytest.raises(ValueError):
        TieRule("randomized")


def test_degenerate_draws_equal_plugin():
    prof = linear_profile([[1.0, 0.0], [0.0, 1.0], [0.5, 0.5]])
    P = np.array([0.4, -0.2])
    rep = averaged_decision(prof, DrawSet(np.tile(P, (50, 1)), "posterior"))
    plug = plugin_decision(prof, ReducedForm(P, np.eye(2)))
    assert rep.chosen == plug.chosen
    np.testing.assert_array_equal(rep.averaged_risks, plug.averaged_risks)
    assert rep.rule_name == "bayes" and plug.rule_name == "plug-in"


def test_rule_names_follow_source():
    prof = linear_profile([[1.0], [-1.0]])
    names = {tag: averaged_decision(prof, DrawSet(np.ones((3, 1)), tag)).rule_name
             for tag in ("posterior", "quasi-posterior", "bootstrap", "dirichlet")}
    assert names == {"posterior": "bayes", "quasi-posterior": "quasi-bayes", "bootstrap": "bootstrap",
                     "dirichlet": "bayes-dirichlet"}
    with pytest.raises(ValueError):
        DrawSet(np.ones((3, 1)), "prior")


def test_non_finite_risk_reports_choice_and_draw():
    R = np.zeros((5, 3))
    R[3, 2] = np.nan
    with pytest.raises(RiskEvaluationError) as info:
        decide_from_risk_draws(R, "bayes")
    assert (info.value.choice, info.value.draw) == (2, 3)


def test_profile_shape_is_checked():
    prof = RiskProfile(3, lambda P: np.zeros(P.shape[:-1] + (2,)))
    with pytest.raises(ValueError):
        prof.risks(np.zeros(2))


def test_excess_risk_zero_for_oracle():
    prof = linear_profile([[1.0, 2.0], [2.0, -1.0]])
    P = [0.3, 0.7]
    assert excess_risk(prof, oracle_decision(prof, P).chosen, P) == 0.0
    assert excess_risk(prof, 0, P) > 0


finite = st.floats(-1e6, 1e6, allow_nan=False)


@given(arrays(float, st.tuples(st.integers(1, 40), st.integers(2, 5)), elements=finite), st.randoms())
def test_average_is_permutation_invariant(R, rnd):
    perm = list(range(R.shape[0]))
    rnd.shuffle(perm)
    np.testing.assert_array_equal(average_risks(R), average_risks(R[perm]))
    a = decide_from_risk_draws(R, "bayes")
    b = decide_from_risk_draws(R[perm], "bayes")
    assert (a.chosen, a.tie_flag) == (b.chosen, b.tie_flag)


@given(arrays(float, st.tuples(st.integers(1, 30), st.integers(2, 5)), elements=finite))
def test_chosen_attains_minimum_average(R):
    rep = decide_from_risk_draws(R, "bayes")
    assert rep.chosen in tied_choices(rep.averaged_risks)
    assert rep.averaged_risks[rep.chosen] <= rep.averaged_risks.min() + 1e-10 * max(1, abs(rep.averaged_risks.min()))


@given(arrays(float, st.tuples(st.integers(1, 30), st.integers(2, 4)), elements=st.floats(-5, 5)))
def test_select_rows_matches_scalar_select(R):
    np.testing.assert_array_equal(select_rows(R), [select(r)[0] for r in R])
    np.testing.assert_array_equal(select_rows(R, order=list(range(R.shape[1]))[::-1]),
                                  [select(r, LOWEST_INDEX, list(range(R.shape[1]))[::-1])[0] for r in R])


@given(arrays(float, 4, elements=st.floats(-3, 3)), arrays(float, 4, elements=st.floats(-3, 3)))
def test_oracle_never_worse_than_any_choice(P, Q):
    prof = linear_profile(np.vstack([P, Q, -P]))
    x = np.ones(4)
    rep = oracle_decision(prof, x)
    assert all(excess_risk(prof, d, x) >= excess_risk(prof, rep.chosen, x) for d in range(3))

import math

import numpy as np
import pytest

import oracles
from euler import environments
from euler.base import InvalidArgumentError, InvalidMDPError
from euler.mdp import (
    Bernoulli,
    Deterministic,
    PolicyTable,
    TabularMDP,
    ValueTable,
    diagnostics,
    environmental_norm,
    max_return,
    optimal_q_values,
    optimal_values,
    policy_values,
    relabel,
    start_value,
    successor_range,
    theoretical_bounds,
)

SMALL_SHAPES = [
    (1, 1, 1),
    (1, 12, 1),
    (2, 2, 3),
    (3, 2, 2),
    (2, 3, 2),
    (1, 4, 3),
    (6, 2, 1),
    (4, 3, 1),
    (3, 4, 1),
    (2, 2, 2),
]


def single_state(rewards, horizon):
    """One state looping on itself with one action per reward."""
    return TabularMDP(
        num_states=1,
        num_actions=len(rewards),
        horizon=horizon,
        transitions=np.ones((1, len(rewards), 1)),
        rewards=[rewards],
        start_states=[1.0],
    )


@pytest.mark.parametrize("index", range(20))
def test_optimal_values_match_enumeration(index):
    rng = np.random.default_rng(index)
    S, A, H = SMALL_SHAPES[index % len(SMALL_SHAPES)]
    mdp = oracles.random_mdp(rng, S, A, H)

    values, policy = optimal_values(mdp)
    expected = oracles.enumerate_optimal(mdp)

    np.testing.assert_allclose(values.values, np.array(expected), rtol=0, atol=1e-10)
    np.testing.assert_allclose(
        policy_values(mdp, policy).values, values.values, rtol=0, atol=1e-12
    )


def test_self_loop_counts_remaining_rewards():
    values, policy = optimal_values(single_state([Deterministic(1.0)], horizon=3))
    assert values.at(1)[0] == 3.0
    assert values.at(2)[0] == 2.0
    assert values.at(3)[0] == 1.0
    assert values.at(4)[0] == 0.0
    assert policy(0, 1) == 0


def test_one_step_values_are_best_mean_reward(rng):
    mdp = oracles.random_mdp(rng, 4, 3, 1)
    values, _ = optimal_values(mdp)
    np.testing.assert_array_equal(values.at(1), mdp.reward_means.max(axis=-1))


def test_ties_break_toward_lowest_action():
    mdp = single_state([Deterministic(0.5)] * 3, horizon=2)
    _, policy = optimal_values(mdp)
    assert np.all(policy.actions == 0)


def test_identical_actions_give_policy_independent_values(rng):
    mdp = oracles.random_mdp(rng, 3, 1, 3)
    twin = TabularMDP(
        num_states=3,
        num_actions=2,
        horizon=3,
        transitions=np.repeat(mdp.transitions, 2, axis=1),
        rewards=[[row[0], row[0]] for row in mdp.rewards],
        start_states=mdp.start_states,
    )
    first = policy_values(twin, PolicyTable(np.zeros((3, 3), dtype=int)))
    second = policy_values(twin, PolicyTable(np.ones((3, 3), dtype=int)))
    np.testing.assert_array_equal(first.values, second.values)


def test_always_left_on_chain_collects_left_reward():
    mdp = environments.build(environments.ChainSpec(3))
    values = policy_values(mdp, PolicyTable(np.zeros((3, 3), dtype=int)))
    assert values.at(1)[0] == pytest.approx(3 * (1.0 / 12.0), abs=1e-12)
    assert start_value(values, mdp) == pytest.approx(0.25, abs=1e-12)


def test_policy_values_never_exceed_optimal(rng):
    for _ in range(10):
        mdp = oracles.random_mdp(rng, 4, 3, 4)
        optimal, _ = optimal_values(mdp)
        policy = PolicyTable(rng.integers(3, size=(4, 4)))
        assert np.all(policy_values(mdp, policy).values <= optimal.values + 1e-12)


def test_policy_values_rejects_mismatched_policy(chain4):
    with pytest.raises(InvalidArgumentError):
        policy_values(chain4, PolicyTable(np.zeros((3, 4), dtype=int)))
    with pytest.raises(InvalidArgumentError):
        policy_values(chain4, PolicyTable(np.full((4, 4), 2)))


def test_optimal_q_values_agree_with_values(chain4):
    q_values = optimal_q_values(chain4)
    values, policy = optimal_values(chain4)
    assert q_values.shape == (4, 4, 2)
    np.testing.assert_allclose(q_values.max(axis=-1), values.values[:-1], atol=1e-12)
    np.testing.assert_array_equal(q_values.argmax(axis=-1), policy.actions)


def test_tables_are_read_only_and_one_based(chain4):
    values, policy = optimal_values(chain4)
    assert values.horizon == 4
    assert np.all(values.at(5) == 0.0)
    with pytest.raises(ValueError):
        values.values[0, 0] = 1.0
    with pytest.raises(InvalidArgumentError):
        values.at(0)
    with pytest.raises(InvalidArgumentError):
        policy(0, 5)
    with pytest.raises(InvalidArgumentError):
        policy(4, 1)


def test_invalid_mdps_are_rejected():
    with pytest.raises(InvalidMDPError):
        TabularMDP(1, 1, 1, np.full((1, 1, 1), 0.5), [[Deterministic(0.0)]], [1.0])
    with pytest.raises(InvalidMDPError):
        TabularMDP(1, 1, 0, np.ones((1, 1, 1)), [[Deterministic(0.0)]], [1.0])
    with pytest.raises(InvalidMDPError):
        TabularMDP(1, 1, 1, np.ones((1, 1, 1)), [[Deterministic(0.0)]], [0.5])
    with pytest.raises(InvalidMDPError):
        TabularMDP(1, 2, 1, np.ones((1, 2, 1)), [[Deterministic(0.0)]], [1.0])
    with pytest.raises(InvalidMDPError):
        Bernoulli(1.5)
    with pytest.raises(InvalidMDPError):
        Deterministic(-0.1)


def test_deterministic_domains_have_zero_environmental_norm(rng, det_chain5):
    assert environmental_norm(det_chain5) == 0.0
    mdp = oracles.random_mdp(rng, 4, 2, 5, deterministic=True)
    assert mdp.is_deterministic()
    assert environmental_norm(mdp) == 0.0
    assert successor_range(mdp) == 0.0


def test_bernoulli_half_reward_norm():
    mdp = single_state([Deterministic(1.0), Bernoulli(0.5)], horizon=1)
    assert environmental_norm(mdp) == 0.25


@pytest.mark.parametrize("n", [4, 8, 16])
def test_chain_environmental_norm_shrinks_with_length(n):
    mdp = environments.build(environments.ChainSpec(n))
    norm = environmental_norm(mdp)
    assert norm <= 2.0 / n
    optimal = oracles.enumerate_optimal(mdp) if n <= 4 else oracles.backward_induction(mdp)
    expected = oracles.enumerate_environmental_norm(mdp, optimal)
    assert norm == pytest.approx(expected, abs=1e-12)


def test_environmental_norm_matches_enumeration(rng):
    for _ in range(5):
        mdp = oracles.random_mdp(rng, 3, 2, 2)
        assert environmental_norm(mdp) == pytest.approx(
            oracles.enumerate_environmental_norm(mdp), abs=1e-12
        )


def test_successor_range_matches_enumeration():
    mdp = oracles.random_mdp(np.random.default_rng(3), 3, 2, 2)
    assert successor_range(mdp) == pytest.approx(
        oracles.enumerate_successor_range(mdp), abs=1e-12
    )


def test_environmental_norm_is_bounded_by_successor_range(rng):
    for _ in range(10):
        mdp = oracles.random_mdp(rng, 4, 2, 3)
        limit = 1.0 + successor_range(mdp) ** 2 + mdp.reward_variances.max()
        assert environmental_norm(mdp) <= limit


def test_bandit_successor_range_is_at_most_one():
    for seed in range(5):
        spec = environments.bandit_from_seed(4, 3, horizon=5, seed=seed)
        assert successor_range(environments.build(spec)) <= 1.0 + 1e-12


def test_max_return_of_constant_rewards_is_horizon():
    assert max_return(single_state([Deterministic(1.0)] * 2, horizon=7)) == 7.0


def test_max_return_matches_trajectory_search(chain4, rng):
    assert max_return(chain4) == oracles.search_max_return(chain4)
    mdp = oracles.random_mdp(rng, 3, 2, 3)
    assert max_return(mdp) == pytest.approx(oracles.search_max_return(mdp), abs=1e-12)


def test_max_return_bounds_optimal_values(rng, chain4, det_chain5):
    mdps = [chain4, det_chain5] + [oracles.random_mdp(rng, 4, 2, 5) for _ in range(5)]
    for mdp in mdps:
        values, _ = optimal_values(mdp)
        assert max_return(mdp) >= values.at(1).max() - 1e-12


def test_sparse_corridor_returns_at_most_one():
    for slip in (0.0, 0.3):
        spec = environments.SparseRewardSpec(horizon=10, states=5, actions=3, slip=slip)
        assert max_return(environments.build(spec)) == 1.0


def test_diagnostics_value_range(chain4):
    summary = diagnostics(chain4)
    values, _ = optimal_values(chain4)
    assert summary.value_range == pytest.approx(np.ptp(values.at(1)), abs=1e-15)
    assert summary.environmental_norm == environmental_norm(chain4)
    assert summary.max_return == max_return(chain4)


def test_bounds_vanish_without_episodes(chain4):
    bounds = theoretical_bounds(chain4, 0, 0.05)
    assert bounds.problem_dependent == 0.0
    assert bounds.max_return == 0.0
    assert bounds.worst_case == 0.0
    assert bounds.bounded_return == 0.0


def test_deterministic_problem_dependent_bound_is_zero(det_chain5):
    assert theoretical_bounds(det_chain5, 1000, 0.05).problem_dependent == 0.0


def test_chain_problem_dependent_bound_beats_worst_case():
    n = 8
    mdp = environments.build(environments.ChainSpec(n))
    bounds = theoretical_bounds(mdp, 10**4, 0.05)
    assert bounds.worst_case == pytest.approx(math.sqrt(n * n * 2 * 10**4 * n))
    assert bounds.worst_case / bounds.problem_dependent >= math.sqrt(n / 2)


def test_bounds_validate_arguments(chain4):
    with pytest.raises(InvalidArgumentError):
        theoretical_bounds(chain4, -1, 0.05)
    with pytest.raises(InvalidArgumentError):
        theoretical_bounds(chain4, 10, 1.0)


def test_relabeling_permutes_values(rng):
    mdp = oracles.random_mdp(rng, 4, 2, 3)
    permutation = [2, 0, 3, 1]
    renamed = relabel(mdp, permutation)

    values, _ = optimal_values(mdp)
    renamed_values, _ = optimal_values(renamed)
    np.testing.assert_allclose(
        renamed_values.values[:, permutation], values.values, rtol=0, atol=1e-12
    )
    assert environmental_norm(renamed) == pytest.approx(environmental_norm(mdp), abs=1e-12)
    assert max_return(renamed) == pytest.approx(max_return(mdp), abs=1e-12)


def test_relabel_rejects_non_permutations(chain4):
    with pytest.raises(InvalidArgumentError):
        relabel(chain4, [0, 0, 1, 2])


def test_value_table_is_copied():
    values = np.zeros((2, 1))
    table = ValueTable(values)
    values[0, 0] = 5.0
    assert table.at(1)[0] == 0.0

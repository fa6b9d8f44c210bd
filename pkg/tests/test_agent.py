import numpy as np
import pytest

import oracles
from euler import environments, misc
from euler.agent import (
    EulerAgent,
    SufficientStats,
    act,
    bracket_contains,
    bracket_width,
    caps,
    observe,
    plan,
)
from euler.base import InvalidArgumentError, InvalidStateError
from euler.concentration import BernsteinInterval, BonusConstants, HoeffdingInterval
from euler.environments import LEFT, RIGHT
from euler.mdp import Bernoulli, Deterministic, TabularMDP, optimal_q_values, optimal_values


def constants_for(mdp, episodes=1000, delta=0.05):
    return BonusConstants.for_problem(
        mdp.num_states, mdp.num_actions, mdp.horizon, episodes, delta
    )


def explored_stats(mdp, rng, steps):
    """Statistics from uniformly random transitions of ``mdp``."""
    stats = SufficientStats(mdp.num_states, mdp.num_actions)
    for _ in range(steps):
        s = int(rng.integers(mdp.num_states))
        a = int(rng.integers(mdp.num_actions))
        s_next, r, rng = environments.step(mdp, s, a, rng)
        stats.observe(s, a, r, s_next)
    return stats


def test_empty_stats_plan_full_caps(chain4):
    c = constants_for(chain4)
    bracket = plan(SufficientStats(4, 2), c, BernsteinInterval(c))
    for t in range(1, 5):
        assert np.all(bracket.upper.at(t) == 4 - t + 1)
        assert np.all(bracket.lower.at(t) == 0.0)
    assert np.all(bracket.policy.actions == 0)
    assert act(bracket, 2, 3) == 0
    assert bracket_width(bracket) == 4.0


def test_caps_count_remaining_rewards():
    np.testing.assert_array_equal(caps(3), [3.0, 2.0, 1.0])
    np.testing.assert_array_equal(caps(3, q_cap=1.0), [1.0, 1.0, 1.0])


def test_q_cap_limits_every_value(chain4):
    c = constants_for(chain4)
    bracket = plan(SufficientStats(4, 2), c, BernsteinInterval(c), q_cap=1.0)
    assert np.all(bracket.upper.values <= 1.0)
    with pytest.raises(InvalidArgumentError):
        plan(SufficientStats(4, 2), c, BernsteinInterval(c), q_cap=0.0)


def test_greedy_action_follows_larger_value():
    mdp = TabularMDP(
        num_states=1,
        num_actions=2,
        horizon=1,
        transitions=np.ones((1, 2, 1)),
        rewards=[[Deterministic(0.0), Deterministic(1.0)]],
        start_states=[1.0],
    )
    c = constants_for(mdp)
    stats = SufficientStats.from_model(mdp, 10**8)
    bracket = plan(stats, c, BernsteinInterval(c))
    assert act(bracket, 0, 1) == 1


@pytest.mark.parametrize("interval", [BernsteinInterval, HoeffdingInterval])
def test_bracket_is_ordered_for_any_stats(interval, rng):
    mdp = oracles.random_mdp(rng, 4, 3, 5)
    c = constants_for(mdp)
    for steps in (0, 7, 60, 2000):
        bracket = plan(explored_stats(mdp, rng, steps), c, interval(c))
        assert np.all(bracket.lower.values <= bracket.upper.values)
        assert np.all(bracket.lower.values >= 0.0)
        assert np.all(bracket.upper.values[:-1] <= caps(5)[:, np.newaxis])
        assert np.all(bracket.upper.at(6) == 0.0)


def test_exact_stats_converge_to_optimal_values(chain4):
    c = constants_for(chain4)
    bracket = plan(SufficientStats.from_model(chain4, 10**8), c, BernsteinInterval(c))
    optimal, _ = optimal_values(chain4)
    assert np.max(np.abs(bracket.upper.at(1) - optimal.at(1))) <= 0.05 * chain4.horizon
    assert bracket_contains(bracket, optimal, tol=1e-9)


def test_converged_chain_policy_plays_right(chain4):
    c = constants_for(chain4)
    bracket = plan(SufficientStats.from_model(chain4, 10**8), c, BernsteinInterval(c))
    _, optimal_policy = optimal_values(chain4)
    q_values = optimal_q_values(chain4)

    for t in range(1, 5):
        assert optimal_policy(t - 1, t) == RIGHT
        assert act(bracket, t - 1, t) == RIGHT
        gaps = np.abs(q_values[t - 1, :, RIGHT] - q_values[t - 1, :, LEFT])
        for s in np.flatnonzero(gaps > 0.1):
            assert act(bracket, int(s), t) == optimal_policy(int(s), t)


def test_plan_is_deterministic(rng):
    mdp = oracles.random_mdp(rng, 3, 2, 4)
    c = constants_for(mdp)
    stats = explored_stats(mdp, rng, 300)
    first = plan(stats, c, BernsteinInterval(c))
    second = plan(stats.copy(), c, BernsteinInterval(c))
    np.testing.assert_array_equal(first.upper.values, second.upper.values)
    np.testing.assert_array_equal(first.lower.values, second.lower.values)
    np.testing.assert_array_equal(first.policy.actions, second.policy.actions)


def test_plan_rejects_inconsistent_stats(constants):
    stats = SufficientStats(2, 2)
    stats.n[0, 0] = 3
    with pytest.raises(InvalidStateError):
        plan(stats, constants, BernsteinInterval(constants))


def test_single_observation():
    stats = observe(SufficientStats(3, 2), 0, 1, 0.25, 2)
    assert stats.n[0, 1] == 1
    np.testing.assert_array_equal(stats.p_hat()[0, 1], [0.0, 0.0, 1.0])
    assert stats.reward_mean()[0, 1] == 0.25
    assert np.all(stats.p_hat()[1] == 0.0)


def test_constant_rewards_have_zero_variance():
    stats = SufficientStats(1, 1)
    for _ in range(100):
        stats.observe(0, 0, 0.5, 0)
    assert stats.reward_variance()[0, 0] == 0.0
    assert stats.reward_mean()[0, 0] == 0.5


def test_sample_mean_tracks_bernoulli_source():
    rng = np.random.default_rng(11)
    stats = SufficientStats(2, 2)
    for _ in range(4000):
        a = int(rng.integers(2))
        stats.observe(0, a, Bernoulli(0.3 if a else 0.7).sample(rng), 1)
    for a, mean in ((0, 0.7), (1, 0.3)):
        sigma = np.sqrt(mean * (1 - mean) / stats.n[0, a])
        assert abs(stats.reward_mean()[0, a] - mean) <= 3 * sigma


def test_observe_rejects_bad_transitions():
    stats = SufficientStats(2, 2)
    with pytest.raises(InvalidArgumentError):
        stats.observe(0, 0, 1.5, 1)
    with pytest.raises(InvalidArgumentError):
        stats.observe(0, 2, 0.5, 1)
    with pytest.raises(InvalidArgumentError):
        stats.observe(0, 0, 0.5, 2)


def test_from_model_counts_sum_to_visits(chain4):
    stats = SufficientStats.from_model(chain4, 1001)
    stats.validate()
    assert np.all(stats.trans_counts.sum(axis=-1) == 1001)
    np.testing.assert_allclose(stats.p_hat(), chain4.transitions, atol=1e-3)


def test_collapsed_bracket_has_zero_width(chain4):
    c = constants_for(chain4)
    bracket = plan(SufficientStats(4, 2), c, BernsteinInterval(c))
    collapsed = type(bracket)(bracket.upper, bracket.upper, bracket.policy)
    assert bracket_width(collapsed) == 0.0
    assert bracket_width(bracket, weights=[1.0, 0.0, 0.0, 0.0]) == 4.0
    with pytest.raises(InvalidArgumentError):
        bracket_width(bracket, weights=[0.5, 0.5])


def test_width_defaults_to_start_distribution(chain4):
    c = constants_for(chain4)
    stats = SufficientStats.from_model(chain4, 10**6)
    bracket = plan(stats, c, BernsteinInterval(c), start_states=chain4.start_states)
    width = bracket.upper.at(1) - bracket.lower.at(1)
    assert bracket_width(bracket) == pytest.approx(width[0], rel=1e-12)
    assert bracket_width(bracket) != pytest.approx(width.mean(), rel=1e-3)

    agent = EulerAgent(4, 2, c, start_states=chain4.start_states)
    np.testing.assert_array_equal(agent.begin_episode().start_states, chain4.start_states)


def test_agent_plans_acts_and_learns(chain4):
    c = constants_for(chain4)
    agent = EulerAgent.for_algorithm("euler_hoeffding_baseline", 4, 2, c, q_cap=2.0)
    assert isinstance(agent.interval, HoeffdingInterval)
    assert agent.act(0, 1) == 0
    assert np.all(agent.bracket.upper.values <= 2.0)
    agent.observe(0, 0, 1.0 / 16.0, 0)
    assert agent.stats.n[0, 0] == 1
    agent.begin_episode()
    assert agent.bracket.upper.at(1)[0] <= 2.0


@pytest.mark.slow
def test_bracket_narrows_with_experience():
    mdp = environments.build(environments.ChainSpec(6))
    agent = EulerAgent(6, 2, constants_for(mdp, episodes=5000), start_states=mdp.start_states)
    widths = {}
    for k in range(1, 5001):
        rng = misc.stream(1, k)
        widths[k] = bracket_width(agent.begin_episode())
        s = environments.sample_start(mdp, rng)
        for t in range(1, mdp.horizon + 1):
            a = agent.act(s, t)
            s_next, r, rng = environments.step(mdp, s, a, rng)
            agent.observe(s, a, r, s_next)
            s = s_next
    assert widths[5000] < widths[500]

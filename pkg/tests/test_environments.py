import numpy as np
import pytest

from euler import misc
from euler.base import InvalidArgumentError
from euler.environments import (
    ADVANCE,
    LEFT,
    RETREAT,
    RIGHT,
    BanditSpec,
    ChainSpec,
    DeterministicChainSpec,
    RandomSpec,
    SparseRewardSpec,
    bandit_from_seed,
    build,
    sample_start,
    step,
)
from euler.mdp import optimal_values


def test_chain_layout():
    mdp = build(ChainSpec(4))
    assert (mdp.num_states, mdp.num_actions, mdp.horizon) == (4, 2, 4)
    assert mdp.transitions[1, RIGHT, 2] == 0.75
    assert mdp.transitions[1, RIGHT, 1] == 0.25
    assert mdp.transitions[1, LEFT, 0] == 1.0
    assert mdp.transitions[0, LEFT, 0] == 1.0
    assert mdp.transitions[3, RIGHT, 3] == 1.0
    assert mdp.reward_means[3, RIGHT] == 1.0
    assert mdp.reward_means[0, LEFT] == 1.0 / 16.0
    assert mdp.reward_means.sum() == 1.0 + 1.0 / 16.0
    assert mdp.start_states[0] == 1.0


def test_deterministic_chain_always_advances():
    mdp = build(DeterministicChainSpec(5))
    assert mdp.is_deterministic()
    assert all(mdp.transitions[s, RIGHT, s + 1] == 1.0 for s in range(4))


def test_bandit_ignores_actions():
    spec = BanditSpec(
        states=2,
        actions=3,
        mu=(0.25, 0.75),
        reward_means=((0.1, 0.2, 0.3), (1.0, 0.0, 0.5)),
        horizon=4,
    )
    mdp = build(spec)
    assert mdp.horizon == 4
    assert np.all(mdp.transitions == np.array([0.25, 0.75]))
    np.testing.assert_array_equal(mdp.start_states, [0.25, 0.75])
    np.testing.assert_array_equal(mdp.reward_means, spec.reward_means)


def test_bandit_horizon_defaults_to_states():
    mdp = build(bandit_from_seed(3, 2, seed=4))
    assert mdp.horizon == 3
    assert bandit_from_seed(3, 2, seed=4) == bandit_from_seed(3, 2, seed=4)


def test_sparse_corridor_pays_once_at_goal():
    mdp = build(SparseRewardSpec(horizon=6, states=5, actions=3, goal=3, slip=0.2))
    assert mdp.reward_means[2, ADVANCE] == 1.0
    assert mdp.reward_means.sum() == 1.0
    assert mdp.transitions[2, ADVANCE, 3] == 1.0
    assert mdp.transitions[0, ADVANCE, 1] == pytest.approx(0.8)
    assert mdp.transitions[1, RETREAT, 0] == 1.0
    assert np.all(mdp.transitions[3, :, 3] == 1.0)
    assert mdp.transitions[4, ADVANCE, 4] == 1.0
    assert mdp.transitions[4, 2, 4] == 1.0
    values, _ = optimal_values(mdp)
    assert 0.0 < values.at(1)[0] <= 1.0


def test_sparse_goal_defaults_to_last_state():
    assert SparseRewardSpec(horizon=3, states=4, actions=1).goal == 3
    mdp = build(SparseRewardSpec(horizon=3, states=4, actions=1))
    values, _ = optimal_values(mdp)
    assert values.at(1)[0] == 1.0


def test_random_mdps_are_reproducible():
    first = build(RandomSpec(3, 2, 4, seed=9))
    second = build(RandomSpec(3, 2, 4, seed=9))
    other = build(RandomSpec(3, 2, 4, seed=10))
    np.testing.assert_array_equal(first.transitions, second.transitions)
    np.testing.assert_array_equal(first.reward_means, second.reward_means)
    assert not np.array_equal(first.transitions, other.transitions)


@pytest.mark.parametrize(
    "make",
    [
        lambda: ChainSpec(1),
        lambda: DeterministicChainSpec(1),
        lambda: BanditSpec(2, 1, (0.5, 0.6), ((0.1,), (0.2,))),
        lambda: BanditSpec(2, 1, (0.5, 0.5), ((0.1,), (1.2,))),
        lambda: BanditSpec(2, 2, (0.5, 0.5), ((0.1,), (0.2,))),
        lambda: SparseRewardSpec(horizon=3, states=4, actions=2, goal=4),
        lambda: SparseRewardSpec(horizon=3, states=4, actions=2, slip=1.0),
        lambda: RandomSpec(3, 2, 4, alpha=0.0),
    ],
)
def test_invalid_specs_are_rejected(make):
    with pytest.raises(InvalidArgumentError):
        make()


def test_build_rejects_non_specs():
    with pytest.raises(InvalidArgumentError):
        build("chain")


def test_deterministic_steps_do_not_consume_randomness():
    mdp = build(DeterministicChainSpec(4))
    s_next, reward, rng = step(mdp, 3, RIGHT, misc.stream(3))
    assert (s_next, reward) == (3, 1.0)
    assert rng.random() == misc.stream(3).random()


def test_chain_advance_frequency():
    n = 8
    mdp = build(ChainSpec(n))
    rng = misc.stream(5)
    steps = 10**5
    advances = 0
    for _ in range(steps):
        s_next, _, rng = step(mdp, 1, RIGHT, rng)
        advances += s_next == 2
    p = 1.0 - 1.0 / n
    assert abs(advances / steps - p) <= 3 * np.sqrt(p * (1 - p) / steps)


def test_bernoulli_one_always_pays():
    mdp = build(BanditSpec(1, 1, (1.0,), ((1.0,),)))
    rng = misc.stream(0)
    for _ in range(100):
        _, reward, rng = step(mdp, 0, 0, rng)
        assert reward == 1.0


def test_sample_start_follows_distribution():
    mdp = build(BanditSpec(2, 1, (0.0, 1.0), ((0.5,), (0.5,))))
    rng = misc.stream(1)
    assert all(sample_start(mdp, rng) == 1 for _ in range(20))
    uniform = build(RandomSpec(4, 1, 2, seed=0))
    starts = {sample_start(uniform, rng) for _ in range(200)}
    assert starts == {0, 1, 2, 3}

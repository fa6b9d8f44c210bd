"""Benchmark MDPs and episode simulation.

Every benchmark is described by a small frozen spec dataclass and turned into
a :py:class:`euler.mdp.TabularMDP` by :py:func:`build`:

    * :py:class:`ChainSpec`, the hard-to-learn chain where each episode lasts
      as many steps as there are states,
    * :py:class:`BanditSpec`, a contextual bandit whose next state never
      depends on the agent,
    * :py:class:`DeterministicChainSpec`, the chain without any randomness,
    * :py:class:`SparseRewardSpec`, a corridor whose total reward per episode
      is at most 1,
    * :py:class:`RandomSpec`, seeded random MDPs.

Simulation goes through :py:func:`step`, which threads an explicit
:py:class:`numpy.random.Generator`; nothing here touches global randomness.

"""

# pylint: disable=invalid-name, too-few-public-methods

import typing
import functools
import dataclasses

import numpy as np

from . import misc
from .base import InvalidArgumentError
from .mdp import Bernoulli, Deterministic, TabularMDP

LEFT = 0
"""Chain action moving toward the first state."""

RIGHT = 1
"""Chain action moving toward the last state."""

ADVANCE = 0
"""Corridor action moving toward the goal."""

RETREAT = 1
"""Corridor action moving away from the goal."""


def _require(condition: bool, message: str):
    if not condition:
        raise InvalidArgumentError(message)


@dataclasses.dataclass(frozen=True)
class ChainSpec:
    """Chain of ``n`` states played for ``n`` steps, starting at the first state.

    RIGHT advances with probability ``1 - 1/n`` and otherwise stays; RIGHT in
    the last state stays there and pays 1. LEFT moves back deterministically;
    LEFT in the first state stays there and pays ``1/(4n)``.

    """

    n: int

    kind: typing.ClassVar[str] = "chain"

    def __post_init__(self):
        _require(self.n >= 2, f"chain needs at least 2 states, got {self.n}")


@dataclasses.dataclass(frozen=True)
class BanditSpec:
    """Contextual bandit: every (s, a) moves to a state drawn from ``mu``."""

    states: int
    actions: int
    mu: typing.Tuple[float, ...]
    reward_means: typing.Tuple[typing.Tuple[float, ...], ...]
    horizon: typing.Optional[int] = None
    """Episode length; the number of states when omitted."""

    kind: typing.ClassVar[str] = "bandit"

    def __post_init__(self):
        _require(self.states >= 1 and self.actions >= 1, "bandit needs states and actions")
        _require(self.horizon is None or self.horizon >= 1, "bandit horizon must be positive")
        object.__setattr__(self, "mu", tuple(float(p) for p in self.mu))
        object.__setattr__(
            self, "reward_means", tuple(tuple(float(r) for r in row) for row in self.reward_means)
        )
        _require(
            len(self.mu) == self.states and misc.is_simplex(np.array(self.mu)),
            "mu must be a probability vector over states",
        )
        means = np.array(self.reward_means, dtype=float)
        _require(
            means.shape == (self.states, self.actions),
            f"reward_means must be a {self.states} x {self.actions} table",
        )
        _require(bool(np.all((means >= 0.0) & (means <= 1.0))), "reward means must lie in [0, 1]")


@dataclasses.dataclass(frozen=True)
class DeterministicChainSpec:
    """:py:class:`ChainSpec` with RIGHT always advancing."""

    states: int

    kind: typing.ClassVar[str] = "det-chain"

    def __post_init__(self):
        _require(self.states >= 2, f"chain needs at least 2 states, got {self.states}")


@dataclasses.dataclass(frozen=True)
class SparseRewardSpec:
    """Corridor with an absorbing goal paying 1 on entry and 0 everywhere else.

    ADVANCE moves one state toward the goal, failing with probability
    ``slip`` except on the final approach; beyond the goal it stays put.
    RETREAT moves one state back and any further action stays put. ADVANCE
    from the state before the goal is the only rewarded pair and always
    enters the absorbing goal, so no episode returns more than 1.

    """

    horizon: int
    states: int
    actions: int
    goal: typing.Optional[int] = None
    """Goal state; the last state when omitted."""

    slip: float = 0.0

    kind: typing.ClassVar[str] = "sparse"

    def __post_init__(self):
        _require(self.horizon >= 1, "horizon must be positive")
        _require(self.states >= 2, "corridor needs at least 2 states")
        _require(self.actions >= 1, "corridor needs at least one action")
        goal = self.states - 1 if self.goal is None else self.goal
        _require(1 <= goal < self.states, f"goal must lie in [1, {self.states})")
        _require(0.0 <= self.slip < 1.0, "slip must lie in [0, 1)")
        object.__setattr__(self, "goal", goal)


@dataclasses.dataclass(frozen=True)
class RandomSpec:
    """Random MDP with Dirichlet(alpha) rows and Bernoulli rewards of uniform mean."""

    states: int
    actions: int
    horizon: int
    seed: int = 0
    alpha: float = 1.0

    kind: typing.ClassVar[str] = "random"

    def __post_init__(self):
        _require(min(self.states, self.actions, self.horizon) >= 1, "counts must be positive")
        _require(self.alpha > 0.0, "Dirichlet parameter must be positive")
        _require(self.seed >= 0, "seed must be non-negative")


EnvSpec = typing.Union[
    ChainSpec, BanditSpec, DeterministicChainSpec, SparseRewardSpec, RandomSpec
]
"""Any benchmark description accepted by :py:func:`build`."""

SPECS = {
    spec.kind: spec
    for spec in (ChainSpec, BanditSpec, DeterministicChainSpec, SparseRewardSpec, RandomSpec)
}
"""Spec class for every environment kind."""


def one_hot(size: int, index: int) -> np.ndarray:
    """Probability vector putting all mass on ``index``."""
    vector = np.zeros(size)
    vector[index] = 1.0
    return vector


def _chain(states: int, advance: float) -> TabularMDP:
    transitions = np.zeros((states, 2, states))
    rewards = [[Deterministic(0.0), Deterministic(0.0)] for _ in range(states)]
    last = states - 1

    for s in range(states):
        transitions[s, LEFT, max(s - 1, 0)] = 1.0
        if s < last:
            transitions[s, RIGHT, s + 1] += advance
            transitions[s, RIGHT, s] += 1.0 - advance

    transitions[last, RIGHT, last] = 1.0
    rewards[last][RIGHT] = Deterministic(1.0)
    rewards[0][LEFT] = Deterministic(1.0 / (4.0 * states))

    return TabularMDP(
        num_states=states,
        num_actions=2,
        horizon=states,
        transitions=transitions,
        rewards=rewards,
        start_states=one_hot(states, 0),
    )


@functools.singledispatch
def build(spec) -> TabularMDP:
    """Build the MDP described by an environment spec.

    :raises InvalidArgumentError: for anything that is not an environment spec.

    """
    raise InvalidArgumentError(f"not an environment spec: {spec!r}")


@build.register
def _(spec: ChainSpec) -> TabularMDP:
    return _chain(spec.n, 1.0 - 1.0 / spec.n)


@build.register
def _(spec: DeterministicChainSpec) -> TabularMDP:
    return _chain(spec.states, 1.0)


@build.register
def _(spec: BanditSpec) -> TabularMDP:
    mu = np.array(spec.mu)
    transitions = np.broadcast_to(mu, (spec.states, spec.actions, spec.states))
    rewards = [[Bernoulli(mean) for mean in row] for row in spec.reward_means]
    return TabularMDP(
        num_states=spec.states,
        num_actions=spec.actions,
        horizon=spec.horizon or spec.states,
        transitions=transitions,
        rewards=rewards,
        start_states=mu,
    )


@build.register
def _(spec: SparseRewardSpec) -> TabularMDP:
    S, A, goal = spec.states, spec.actions, spec.goal
    transitions = np.zeros((S, A, S))
    rewards = [[Deterministic(0.0)] * A for _ in range(S)]

    for s in range(S):
        if s == goal:
            transitions[s, :, s] = 1.0
            continue
        if s < goal - 1:
            transitions[s, ADVANCE, s + 1] += 1.0 - spec.slip
            transitions[s, ADVANCE, s] += spec.slip
        elif s == goal - 1:
            # The rewarded step never slips, so it can be taken only once.
            transitions[s, ADVANCE, goal] = 1.0
        else:
            transitions[s, ADVANCE, s] = 1.0
        if A > RETREAT:
            transitions[s, RETREAT, max(s - 1, 0)] = 1.0
        transitions[s, RETREAT + 1 :, s] = 1.0

    rewards[goal - 1][ADVANCE] = Deterministic(1.0)

    return TabularMDP(
        num_states=S,
        num_actions=A,
        horizon=spec.horizon,
        transitions=transitions,
        rewards=rewards,
        start_states=one_hot(S, 0),
    )


@build.register
def _(spec: RandomSpec) -> TabularMDP:
    rng = misc.stream(spec.seed)
    S, A = spec.states, spec.actions
    transitions = rng.dirichlet(np.full(S, spec.alpha), size=(S, A))
    means = rng.uniform(0.0, 1.0, size=(S, A))
    rewards = [[Bernoulli(float(mean)) for mean in row] for row in means]
    return TabularMDP(
        num_states=S,
        num_actions=A,
        horizon=spec.horizon,
        transitions=transitions,
        rewards=rewards,
        start_states=np.full(S, 1.0 / S),
    )


def bandit_from_seed(states: int, actions: int, horizon=None, seed: int = 0) -> BanditSpec:
    """Bandit with uniform context distribution and seeded uniform reward means."""
    rng = misc.stream(seed)
    means = rng.uniform(0.0, 1.0, size=(states, actions))
    return BanditSpec(
        states=states,
        actions=actions,
        mu=tuple([1.0 / states] * states),
        reward_means=tuple(tuple(float(mean) for mean in row) for row in means),
        horizon=horizon,
    )


def step(
    mdp: TabularMDP, s: int, a: int, rng: np.random.Generator
) -> typing.Tuple[int, float, np.random.Generator]:
    """Simulate one transition.

    :param mdp: Ground-truth model.
    :param s: Current state.
    :param a: Action taken.
    :param rng: Random stream; advanced in place and returned.

    :returns: tuple of (next state, reward, random stream).

    """
    row = mdp.transitions[s, a]
    successors = np.flatnonzero(row)
    if successors.size == 1:
        s_next = int(successors[0])
    else:
        s_next = int(rng.choice(mdp.num_states, p=row))
    reward = mdp.rewards[s][a].sample(rng)
    return s_next, reward, rng


def sample_start(mdp: TabularMDP, rng: np.random.Generator) -> int:
    """Draw the initial state of an episode."""
    starts = np.flatnonzero(mdp.start_states)
    if starts.size == 1:
        return int(starts[0])
    return int(rng.choice(mdp.num_states, p=mdp.start_states))

"""Tabular episodic MDPs, exact solvers and problem-dependent diagnostics.

The ground-truth model used throughout this package is a stationary,
finite-horizon :py:class:`TabularMDP`. This module provides:

    * exact backward induction for the optimal value function through
      :py:func:`optimal_values` and for a fixed policy through
      :py:func:`policy_values`,
    * the problem-dependent hardness measures :py:func:`environmental_norm`,
      :py:func:`max_return` and :py:func:`successor_range`,
    * the leading terms of the regret upper bounds through
      :py:func:`theoretical_bounds`, used as plotting overlays only.

Timesteps are 1-based as in the algorithm description: a
:py:class:`ValueTable` stores ``H + 1`` rows where row ``t - 1`` holds
:math:`V_t` and the last row is the terminal :math:`V_{H+1} = 0`.

"""

# pylint: disable=invalid-name

import math
import typing
import functools
import dataclasses

import numpy as np

from . import misc
from .base import InvalidArgumentError, InvalidMDPError
from .concentration import variance_under


@dataclasses.dataclass(frozen=True)
class Deterministic:
    """Reward that always pays ``value``."""

    value: float

    kind: typing.ClassVar[str] = "deterministic"

    def __post_init__(self):
        if not 0.0 <= self.value <= 1.0:
            raise InvalidMDPError(f"deterministic reward {self.value} outside [0, 1]")

    @property
    def mean(self) -> float:
        """Expected reward."""
        return float(self.value)

    @property
    def variance(self) -> float:
        """Reward variance."""
        return 0.0

    @property
    def support_max(self) -> float:
        """Largest reward with positive probability."""
        return float(self.value)

    def sample(self, rng: np.random.Generator) -> float:  # pylint: disable=unused-argument
        """Draw a reward; never consumes randomness."""
        return float(self.value)


@dataclasses.dataclass(frozen=True)
class Bernoulli:
    """Reward that pays 1 with probability ``mean`` and 0 otherwise."""

    mean: float

    kind: typing.ClassVar[str] = "bernoulli"

    def __post_init__(self):
        if not 0.0 <= self.mean <= 1.0:
            raise InvalidMDPError(f"bernoulli mean {self.mean} outside [0, 1]")

    @property
    def variance(self) -> float:
        """Reward variance."""
        return float(self.mean * (1.0 - self.mean))

    @property
    def support_max(self) -> float:
        """Largest reward with positive probability."""
        return 1.0 if self.mean > 0.0 else 0.0

    def sample(self, rng: np.random.Generator) -> float:
        """Draw a reward."""
        return 1.0 if rng.random() < self.mean else 0.0


RewardDistribution = typing.Union[Deterministic, Bernoulli]
"""Supported reward kinds.

Any further kind only needs ``mean``, ``variance``, ``support_max`` and
``sample(rng)``, plus a branch in :py:class:`euler.schemas.RewardSchema`.

"""


@dataclasses.dataclass(frozen=True, eq=False)
class TabularMDP:
    """Stationary finite-horizon MDP :math:`\\langle S, A, p, r, H \\rangle`.

    Arrays are copied into read-only numpy arrays on construction, so an
    instance can be shared between threads.

    """

    num_states: int
    """Number of states S."""

    num_actions: int
    """Number of actions A."""

    horizon: int
    """Episode length H."""

    transitions: np.ndarray
    """Transition kernel of shape (S, A, S); ``transitions[s, a]`` is p(.|s,a)."""

    rewards: typing.Tuple[typing.Tuple[RewardDistribution, ...], ...]
    """Reward distribution for every (s, a), indexed ``rewards[s][a]``."""

    start_states: np.ndarray
    """Distribution of the initial state of every episode."""

    def __post_init__(self):
        for name in ("num_states", "num_actions", "horizon"):
            value = getattr(self, name)
            if isinstance(value, bool) or int(value) != value or value < 1:
                raise InvalidMDPError(f"{name} must be a positive integer, got {value!r}")
            object.__setattr__(self, name, int(value))

        S, A = self.num_states, self.num_actions

        transitions = misc.readonly(self.transitions)
        if transitions.shape != (S, A, S):
            raise InvalidMDPError(
                f"transitions have shape {transitions.shape}, expected {(S, A, S)}"
            )
        if not misc.is_simplex(transitions):
            raise InvalidMDPError("every transition row must be a probability vector")
        object.__setattr__(self, "transitions", transitions)

        rewards = tuple(tuple(row) for row in self.rewards)
        if len(rewards) != S or any(len(row) != A for row in rewards):
            raise InvalidMDPError(f"rewards must be a {S} x {A} table")
        for row in rewards:
            for reward in row:
                if not isinstance(reward, (Deterministic, Bernoulli)):
                    raise InvalidMDPError(f"unsupported reward distribution {reward!r}")
        object.__setattr__(self, "rewards", rewards)

        start_states = misc.readonly(self.start_states)
        if start_states.shape != (S,) or not misc.is_simplex(start_states):
            raise InvalidMDPError("start_states must be a probability vector over states")
        object.__setattr__(self, "start_states", start_states)

    def _reward_table(self, attribute):
        table = [[getattr(reward, attribute) for reward in row] for row in self.rewards]
        return misc.readonly(table)

    @functools.cached_property
    def reward_means(self) -> np.ndarray:
        """Mean reward table of shape (S, A)."""
        return self._reward_table("mean")

    @functools.cached_property
    def reward_variances(self) -> np.ndarray:
        """Reward variance table of shape (S, A)."""
        return self._reward_table("variance")

    @functools.cached_property
    def reward_maxima(self) -> np.ndarray:
        """Reward support maximum table of shape (S, A)."""
        return self._reward_table("support_max")

    @functools.cached_property
    def support(self) -> np.ndarray:
        """Boolean mask of shape (S, A, S) of the successor states of every (s, a)."""
        mask = self.transitions > 0.0
        mask.setflags(write=False)
        return mask

    def is_deterministic(self) -> bool:
        """Check for deterministic transitions and deterministic rewards."""
        return bool(np.all(self.support.sum(axis=-1) == 1)) and not np.any(
            self.reward_variances > 0.0
        )


@dataclasses.dataclass(frozen=True, eq=False)
class ValueTable:
    """Value function :math:`V_t(s)` for ``t`` in ``1..H+1``."""

    values: np.ndarray
    """Array of shape (H + 1, S); row ``t - 1`` holds :math:`V_t`."""

    def __post_init__(self):
        object.__setattr__(self, "values", misc.readonly(self.values))

    @property
    def horizon(self) -> int:
        """Episode length H."""
        return self.values.shape[0] - 1

    def at(self, t: int) -> np.ndarray:
        """Values at timestep ``t`` (1-based, ``t = H + 1`` is terminal)."""
        if not 1 <= t <= self.horizon + 1:
            raise InvalidArgumentError(f"timestep {t} outside [1, {self.horizon + 1}]")
        return self.values[t - 1]


@dataclasses.dataclass(frozen=True, eq=False)
class PolicyTable:
    """Deterministic non-stationary policy :math:`\\pi(s, t)`."""

    actions: np.ndarray
    """Integer array of shape (H, S); row ``t - 1`` holds the actions at ``t``."""

    def __post_init__(self):
        object.__setattr__(self, "actions", misc.readonly(self.actions, dtype=np.int64))

    @property
    def horizon(self) -> int:
        """Episode length H."""
        return self.actions.shape[0]

    def __call__(self, s: int, t: int) -> int:
        """Action taken in state ``s`` at timestep ``t``."""
        if not 1 <= t <= self.horizon:
            raise InvalidArgumentError(f"timestep {t} outside [1, {self.horizon}]")
        if not 0 <= s < self.actions.shape[1]:
            raise InvalidArgumentError(f"state {s} outside [0, {self.actions.shape[1]})")
        return int(self.actions[t - 1, s])

    def same_as(self, other: typing.Optional["PolicyTable"]) -> bool:
        """Check whether ``other`` prescribes exactly the same actions."""
        return other is not None and np.array_equal(self.actions, other.actions)


@dataclasses.dataclass(frozen=True)
class Diagnostics:
    """Problem-dependent quantities of a :py:class:`TabularMDP`."""

    environmental_norm: float
    """Maximum per-step conditional variance."""

    max_return: float
    """Deterministic upper bound on the return of any episode."""

    successor_range: float
    """Maximum range of the optimal values among immediate successors."""

    value_range: float
    """Range of the optimal value function at the first timestep."""


@dataclasses.dataclass(frozen=True)
class TheoreticalBounds:
    """Leading terms of the regret upper bounds, polylog factors set to 1.

    These are plotting overlays, not certified bounds.

    """

    problem_dependent: float
    """:math:`\\sqrt{Q^* S A T}`."""

    max_return: float
    """:math:`\\mathcal{G} \\sqrt{S A T}`."""

    worst_case: float
    """:math:`\\sqrt{H S A T}`."""

    successor_range: float
    """:math:`\\Phi_{succ} \\sqrt{S A T}`."""

    bounded_return: float
    """:math:`\\sqrt{S A K}`, the leading term when every return is at most 1."""


def _backup(mdp: TabularMDP, next_values: np.ndarray) -> np.ndarray:
    """One-step Bellman backup :math:`\\bar r(s,a) + p(s,a)^\\top V_{t+1}`."""
    return mdp.reward_means + mdp.transitions @ next_values


def optimal_q_values(mdp: TabularMDP) -> np.ndarray:
    """Optimal action values of shape (H, S, A); row ``t - 1`` holds :math:`Q^*_t`."""
    H = mdp.horizon
    values = np.zeros((H + 1, mdp.num_states))
    q_values = np.zeros((H, mdp.num_states, mdp.num_actions))
    for row in reversed(range(H)):
        q_values[row] = _backup(mdp, values[row + 1])
        values[row] = q_values[row].max(axis=-1)
    return q_values


def optimal_values(mdp: TabularMDP) -> typing.Tuple[ValueTable, PolicyTable]:
    """Solve the MDP exactly by backward induction.

    Ties in the maximization are broken toward the lowest action index.

    :param mdp: Ground-truth model.

    :returns: tuple of (:py:class:`ValueTable`, :py:class:`PolicyTable`) for
              :math:`V^*` and :math:`\\pi^*`.

    """
    H, S = mdp.horizon, mdp.num_states
    states = np.arange(S)
    values = np.zeros((H + 1, S))
    actions = np.zeros((H, S), dtype=np.int64)

    for row in reversed(range(H)):
        q_values = _backup(mdp, values[row + 1])
        actions[row] = misc.argmax_lowest(q_values)
        values[row] = q_values[states, actions[row]]

    return ValueTable(values), PolicyTable(actions)


def policy_values(mdp: TabularMDP, policy: PolicyTable) -> ValueTable:
    """Evaluate a deterministic policy exactly by backward induction.

    :param mdp: Ground-truth model.
    :param policy: Policy to evaluate.

    :returns: :py:class:`ValueTable` for :math:`V^\\pi`.

    :raises InvalidArgumentError: if the policy does not fit the MDP.

    """
    H, S = mdp.horizon, mdp.num_states
    actions = policy.actions
    if actions.shape != (H, S):
        raise InvalidArgumentError(f"policy has shape {actions.shape}, expected {(H, S)}")
    if np.any(actions < 0) or np.any(actions >= mdp.num_actions):
        raise InvalidArgumentError(f"policy actions must lie in [0, {mdp.num_actions})")

    states = np.arange(S)
    values = np.zeros((H + 1, S))
    for row in reversed(range(H)):
        chosen = actions[row]
        values[row] = (
            mdp.reward_means[states, chosen]
            + mdp.transitions[states, chosen] @ values[row + 1]
        )
    return ValueTable(values)


def start_value(values: ValueTable, mdp: TabularMDP) -> float:
    """Expected first-timestep value under the start distribution."""
    return float(mdp.start_states @ values.at(1))


def _environmental_norm(mdp: TabularMDP, values: ValueTable) -> float:
    norm = 0.0
    for t in range(1, mdp.horizon + 1):
        variances = mdp.reward_variances + variance_under(mdp.transitions, values.at(t + 1))
        norm = max(norm, float(variances.max()))
    return norm


def environmental_norm(mdp: TabularMDP) -> float:
    """Maximum per-step conditional variance :math:`Q^*`.

    :math:`Q^* = \\max_{s,a,t} \\mathrm{Var}\\,R(s,a) +
    \\mathrm{Var}_{s^+ \\sim p(s,a)} V^*_{t+1}(s^+)` with :math:`V^*_{H+1} = 0`.

    """
    values, _ = optimal_values(mdp)
    return _environmental_norm(mdp, values)


def max_return(mdp: TabularMDP) -> float:
    """Deterministic upper bound :math:`\\mathcal{G}` on any realizable return.

    Computed by dynamic programming over support maxima:
    :math:`M_t(s) = \\max_a r_{max}(s,a) + \\max_{s' \\in supp\\, p(s,a)} M_{t+1}(s')`.

    """
    best = np.zeros(mdp.num_states)
    for _ in range(mdp.horizon):
        successors = np.where(mdp.support, best, -np.inf).max(axis=-1)
        best = (mdp.reward_maxima + successors).max(axis=-1)
    return float(best.max())


def _successor_range(mdp: TabularMDP, values: ValueTable) -> float:
    widest = 0.0
    for t in range(1, mdp.horizon + 1):
        following = values.at(t + 1)
        highest = np.where(mdp.support, following, -np.inf).max(axis=-1)
        lowest = np.where(mdp.support, following, np.inf).min(axis=-1)
        widest = max(widest, float((highest - lowest).max()))
    return widest


def successor_range(mdp: TabularMDP) -> float:
    """Largest range of :math:`V^*_{t+1}` over the successors of any (s, a, t)."""
    values, _ = optimal_values(mdp)
    return _successor_range(mdp, values)


def diagnostics(mdp: TabularMDP) -> Diagnostics:
    """Compute every problem-dependent diagnostic with a single solve."""
    values, _ = optimal_values(mdp)
    first = values.at(1)
    return Diagnostics(
        environmental_norm=_environmental_norm(mdp, values),
        max_return=max_return(mdp),
        successor_range=_successor_range(mdp, values),
        value_range=float(first.max() - first.min()),
    )


def theoretical_bounds(mdp: TabularMDP, episodes: int, delta: float) -> TheoreticalBounds:
    """Leading terms of the regret bounds after ``episodes`` episodes.

    :param mdp: Ground-truth model.
    :param episodes: Number of episodes K; T = K * H.
    :param delta: Failure probability; validated but unused since the
                  logarithmic factors are set to 1.

    :raises InvalidArgumentError: on negative K or delta outside (0, 1).

    """
    if episodes < 0:
        raise InvalidArgumentError(f"episodes must be non-negative, got {episodes}")
    if not 0.0 < delta < 1.0:
        raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")

    summary = diagnostics(mdp)
    S, A, H = mdp.num_states, mdp.num_actions, mdp.horizon
    T = episodes * H
    return TheoreticalBounds(
        problem_dependent=math.sqrt(summary.environmental_norm * S * A * T),
        max_return=summary.max_return * math.sqrt(S * A * T),
        worst_case=math.sqrt(H * S * A * T),
        successor_range=summary.successor_range * math.sqrt(S * A * T),
        bounded_return=math.sqrt(S * A * episodes),
    )


def relabel(mdp: TabularMDP, permutation: typing.Sequence[int]) -> TabularMDP:
    """Rename states so that old state ``s`` becomes ``permutation[s]``."""
    permutation = np.asarray(permutation, dtype=np.int64)
    S = mdp.num_states
    if sorted(permutation.tolist()) != list(range(S)):
        raise InvalidArgumentError(f"{permutation.tolist()} is not a permutation of {S} states")

    inverse = np.argsort(permutation)
    transitions = mdp.transitions[inverse][:, :, inverse]
    rewards = tuple(mdp.rewards[old] for old in inverse)
    return TabularMDP(
        num_states=S,
        num_actions=mdp.num_actions,
        horizon=mdp.horizon,
        transitions=transitions,
        rewards=rewards,
        start_states=mdp.start_states[inverse],
    )

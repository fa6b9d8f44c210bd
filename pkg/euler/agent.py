"""The EULER learner.

The agent keeps count-based :py:class:`SufficientStats` shared across
timesteps, plans once per episode with :py:func:`plan` and acts greedily with
respect to the resulting :py:class:`ValueBracket`. Planning is a backward
induction over the empirical model in which

    * every action's optimistic value is
      :math:`\\min\\{cap_t, \\hat r + b^r + \\hat p^\\top \\bar V_{t+1} + bb\\}`,
    * the greedy action defines :math:`\\bar V_t`, and
    * the same action defines the pessimistic :math:`\\underline V_t`.

Pairs that were never visited are maximally optimistic: their value is the
cap and their pessimistic contribution is zero.

"""

# pylint: disable=invalid-name

import typing
import logging
import dataclasses

import numpy as np

from . import misc
from .base import InvalidArgumentError, InvalidStateError
from .concentration import (
    BonusConstants,
    ConfidenceInterval,
    interval_for,
    reward_bonus,
    weighted_two_norm,
)
from .mdp import PolicyTable, TabularMDP, ValueTable

logger = logging.getLogger(__name__)


class SufficientStats:
    """Visit counts, transition counts and reward moments per (s, a).

    Counts are stationary: one table serves every timestep.

    """

    def __init__(self, num_states: int, num_actions: int):
        self.n = np.zeros((num_states, num_actions), dtype=np.int64)
        """Visits n(s, a)."""

        self.trans_counts = np.zeros((num_states, num_actions, num_states), dtype=np.int64)
        """Observed transitions (s, a, s')."""

        self.reward_sum = np.zeros((num_states, num_actions))
        """Sum of observed rewards."""

        self.reward_sq_sum = np.zeros((num_states, num_actions))
        """Sum of squared observed rewards."""

    @property
    def num_states(self) -> int:
        """Number of states."""
        return self.n.shape[0]

    @property
    def num_actions(self) -> int:
        """Number of actions."""
        return self.n.shape[1]

    @classmethod
    def from_model(cls, mdp: TabularMDP, visits: int) -> "SufficientStats":
        """Synthetic statistics with ``visits`` samples matching ``mdp`` exactly.

        Transition counts are rounded to integers and the remainder is put on
        the most likely successor, so row sums equal ``visits``.

        """
        stats = cls(mdp.num_states, mdp.num_actions)
        counts = np.floor(mdp.transitions * visits).astype(np.int64)
        most_likely = np.argmax(mdp.transitions, axis=-1)
        remainder = visits - counts.sum(axis=-1)
        np.put_along_axis(
            counts,
            most_likely[..., np.newaxis],
            np.take_along_axis(counts, most_likely[..., np.newaxis], axis=-1)
            + remainder[..., np.newaxis],
            axis=-1,
        )
        stats.n[:] = visits
        stats.trans_counts[:] = counts
        # Second moments of the supported kinds: E[R^2] = var + mean^2.
        stats.reward_sum[:] = mdp.reward_means * visits
        stats.reward_sq_sum[:] = (mdp.reward_variances + mdp.reward_means**2) * visits
        return stats

    def copy(self) -> "SufficientStats":
        """Independent snapshot of the statistics."""
        snapshot = SufficientStats(self.num_states, self.num_actions)
        snapshot.n[:] = self.n
        snapshot.trans_counts[:] = self.trans_counts
        snapshot.reward_sum[:] = self.reward_sum
        snapshot.reward_sq_sum[:] = self.reward_sq_sum
        return snapshot

    def observe(self, s: int, a: int, r: float, s_next: int) -> "SufficientStats":
        """Record one transition in place.

        :raises InvalidArgumentError: if ``r`` lies outside [0, 1] or an index
                                      is out of range.

        """
        if not 0.0 <= r <= 1.0:
            raise InvalidArgumentError(f"reward {r} outside [0, 1]")
        if not (0 <= s < self.num_states and 0 <= s_next < self.num_states):
            raise InvalidArgumentError(f"state out of range in ({s}, {s_next})")
        if not 0 <= a < self.num_actions:
            raise InvalidArgumentError(f"action {a} out of range")

        self.n[s, a] += 1
        self.trans_counts[s, a, s_next] += 1
        self.reward_sum[s, a] += r
        self.reward_sq_sum[s, a] += r * r
        return self

    def validate(self):
        """Check internal consistency.

        :raises InvalidStateError: if counts are negative, transition counts do
                                   not add up to visits or reward moments imply
                                   a negative variance.

        """
        if np.any(self.n < 0) or np.any(self.trans_counts < 0):
            raise InvalidStateError("negative visit or transition counts")
        if not np.array_equal(self.trans_counts.sum(axis=-1), self.n):
            raise InvalidStateError("transition counts do not sum to visit counts")
        visited = self.n > 0
        if np.any(self.reward_sum[~visited] != 0.0) or np.any(self.reward_sq_sum[~visited] != 0.0):
            raise InvalidStateError("reward sums recorded for unvisited pairs")
        n = np.maximum(self.n, 1)
        slack = 1e-9 * np.maximum(self.n, 1)
        if np.any(self.reward_sq_sum + slack < self.reward_sum**2 / n):
            raise InvalidStateError("reward moments imply a negative variance")

    def p_hat(self) -> np.ndarray:
        """Maximum likelihood transitions; rows of unvisited pairs are zero."""
        return self.trans_counts / np.maximum(self.n, 1)[..., np.newaxis]

    def reward_mean(self) -> np.ndarray:
        """Empirical mean reward; zero for unvisited pairs."""
        return self.reward_sum / np.maximum(self.n, 1)

    def reward_variance(self) -> np.ndarray:
        """Biased sample variance of the rewards, clamped at zero."""
        n = np.maximum(self.n, 1)
        return np.maximum((self.reward_sq_sum - self.reward_sum**2 / n) / n, 0.0)


@dataclasses.dataclass(frozen=True, eq=False)
class ValueBracket:
    """Optimistic and pessimistic value tables plus the greedy policy."""

    upper: ValueTable
    """Optimistic values :math:`\\bar V`."""

    lower: ValueTable
    """Pessimistic values :math:`\\underline V`."""

    policy: PolicyTable
    """Greedy policy with respect to the optimistic action values."""

    start_states: typing.Optional[np.ndarray] = None
    """Start distribution weighting :py:func:`bracket_width`; uniform when unknown."""


def caps(horizon: int, q_cap: typing.Optional[float] = None) -> np.ndarray:
    """Value caps :math:`H - t + 1` for ``t`` in ``1..H``, optionally clipped at ``q_cap``.

    The cap counts the rewards still to be collected: at ``t = H`` one reward
    remains, so the cap is 1 rather than 0.

    """
    remaining = np.arange(horizon, 0, -1, dtype=float)
    if q_cap is not None:
        remaining = np.minimum(remaining, q_cap)
    return remaining


def plan(
    stats: SufficientStats,
    c: BonusConstants,
    ci: ConfidenceInterval,
    q_cap: typing.Optional[float] = None,
    start_states=None,
) -> ValueBracket:
    """Compute the value bracket and greedy policy for the next episode.

    :param stats: Statistics snapshot; left untouched.
    :param c: Bonus constants of the experiment.
    :param ci: Confidence interval used for the transition bonus.
    :param q_cap: Optional cap on every value, for problems whose returns are
                  known to be bounded (e.g. by 1).
    :param start_states: Start distribution stored on the bracket.

    :returns: :py:class:`ValueBracket`.

    :raises InvalidStateError: if ``stats`` is inconsistent.

    """
    stats.validate()
    if q_cap is not None and q_cap <= 0.0:
        raise InvalidArgumentError(f"q_cap must be positive, got {q_cap}")

    H, S = c.horizon, stats.num_states
    states = np.arange(S)
    cap = caps(H, q_cap)

    visited = stats.n > 0
    n = np.maximum(stats.n, 1)
    p_hat = stats.p_hat()
    r_hat = stats.reward_mean()
    b_r = reward_bonus(stats.reward_variance(), n, c)

    upper = np.zeros((H + 1, S))
    lower = np.zeros((H + 1, S))
    actions = np.zeros((H, S), dtype=np.int64)

    for row in reversed(range(H)):
        upper_next, lower_next = upper[row + 1], lower[row + 1]
        bracket_norm = weighted_two_norm(p_hat, upper_next - lower_next)

        bonus = ci.transition_bonus(p_hat, upper_next, n, bracket_norm)
        q_values = np.minimum(cap[row], r_hat + b_r + p_hat @ upper_next + bonus)
        q_values[~visited] = cap[row]

        chosen = misc.argmax_lowest(q_values)
        actions[row] = chosen
        upper[row] = q_values[states, chosen]

        p_chosen = p_hat[states, chosen]
        n_chosen = n[states, chosen]
        bonus = ci.transition_bonus(p_chosen, lower_next, n_chosen, bracket_norm[states, chosen])
        pessimistic = (
            r_hat[states, chosen] - b_r[states, chosen] + p_chosen @ lower_next - bonus
        )
        pessimistic = np.clip(pessimistic, 0.0, cap[row])
        pessimistic[~visited[states, chosen]] = 0.0
        lower[row] = pessimistic

    return ValueBracket(ValueTable(upper), ValueTable(lower), PolicyTable(actions), start_states)


def act(bracket: ValueBracket, s: int, t: int) -> int:
    """Action of the bracket's greedy policy in state ``s`` at timestep ``t``."""
    return bracket.policy(s, t)


def observe(stats: SufficientStats, s: int, a: int, r: float, s_next: int) -> SufficientStats:
    """Record one transition; see :py:meth:`SufficientStats.observe`."""
    return stats.observe(s, a, r, s_next)


def bracket_width(bracket: ValueBracket, weights=None) -> float:
    """Mean first-timestep width :math:`\\bar V_1 - \\underline V_1` under ``weights``.

    :param bracket: Value bracket.
    :param weights: Distribution over states; the bracket's start distribution
                    when omitted, or uniform if the bracket has none.

    """
    width = bracket.upper.at(1) - bracket.lower.at(1)
    if weights is None:
        weights = bracket.start_states
    if weights is None:
        return float(width.mean())
    weights = np.asarray(weights, dtype=float)
    if weights.shape != width.shape or not misc.is_simplex(weights):
        raise InvalidArgumentError("weights must be a probability vector over states")
    return float(weights @ width)


def bracket_contains(bracket: ValueBracket, values: ValueTable, tol: float = 0.0) -> bool:
    """Check :math:`\\underline V_t \\le V_t \\le \\bar V_t` at every (t, s)."""
    inside_upper = np.all(values.values <= bracket.upper.values + tol)
    inside_lower = np.all(bracket.lower.values <= values.values + tol)
    return bool(inside_upper and inside_lower)


class EulerAgent:
    """Learner that plans with :py:func:`plan` once per episode.

    :param num_states: Number of states.
    :param num_actions: Number of actions.
    :param constants: Bonus constants of the experiment.
    :param interval: Confidence interval; Bernstein when omitted.
    :param q_cap: Optional cap on every value.
    :param start_states: Start distribution of the environment, if known.

    """

    def __init__(
        self,
        num_states: int,
        num_actions: int,
        constants: BonusConstants,
        interval: typing.Optional[ConfidenceInterval] = None,
        q_cap: typing.Optional[float] = None,
        start_states=None,
    ):
        self.stats = SufficientStats(num_states, num_actions)
        self.constants = constants
        self.interval = interval or interval_for("euler_bernstein", constants)
        self.q_cap = q_cap
        self.start_states = start_states
        self.bracket: typing.Optional[ValueBracket] = None

    @classmethod
    def for_algorithm(
        cls, algorithm, num_states, num_actions, constants, q_cap=None, start_states=None
    ):
        """Build an agent for an algorithm name such as ``euler_bernstein``."""
        interval = interval_for(algorithm, constants)
        return cls(
            num_states,
            num_actions,
            constants,
            interval=interval,
            q_cap=q_cap,
            start_states=start_states,
        )

    def begin_episode(self) -> ValueBracket:
        """Plan the policy of the coming episode."""
        self.bracket = plan(
            self.stats,
            self.constants,
            self.interval,
            q_cap=self.q_cap,
            start_states=self.start_states,
        )
        logger.debug(
            "planned with %d visits, mean first-step width %.4g",
            int(self.stats.n.sum()),
            bracket_width(self.bracket),
        )
        return self.bracket

    def act(self, s: int, t: int) -> int:
        """Greedy action; plans first if no bracket exists yet."""
        if self.bracket is None:
            self.begin_episode()
        return act(self.bracket, s, t)

    def observe(self, s: int, a: int, r: float, s_next: int):
        """Record one transition."""
        observe(self.stats, s, a, r, s_next)

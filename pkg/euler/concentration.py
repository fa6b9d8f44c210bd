"""Confidence intervals and exploration bonuses.

A confidence interval bounds the one-step estimation error
:math:`|(\\hat p - p)^\\top V|` by :math:`\\phi(p, V) = g(p, V)/\\sqrt{n} + j/n`.
It is *admissible* when :math:`g(p, \\alpha 1) = 0` for every scalar
:math:`\\alpha` and :math:`g` is :math:`B_v`-Lipschitz in :math:`V` under the
weighted norm :math:`\\|\\cdot\\|_{2,p}`; only admissible intervals receive
the correction bonus in :py:func:`transition_bonus`.

Every function here is vectorized: probability vectors and value vectors
broadcast against each other along their last axis, and counts broadcast
against the leading axes.

"""

# pylint: disable=invalid-name

import abc
import math
import typing
import dataclasses

import numpy as np

from . import misc
from .base import InvalidArgumentError


@dataclasses.dataclass(frozen=True)
class BonusConstants:
    """Constants shared by every bonus of one experiment.

    A single log factor :math:`\\hat L = \\ln(4 S A T / \\delta')` is used in
    every formula, with :math:`\\delta' = \\delta / 7` and :math:`T = K H`.

    """

    delta_prime: float
    """Per-event failure probability."""

    log_factor: float
    """:math:`\\hat L`."""

    b_p: float
    """:math:`B_p = H \\sqrt{2 \\hat L}`."""

    b_v: float
    """:math:`B_v = \\sqrt{2 \\hat L}`."""

    j: float
    """:math:`J = H \\hat L / 3`."""

    horizon: int
    """Episode length H."""

    total_steps: int
    """T = K * H."""

    def __post_init__(self):
        for field in dataclasses.fields(self):
            if not getattr(self, field.name) > 0:
                raise InvalidArgumentError(f"bonus constant {field.name} must be positive")
        if self.log_factor < math.log(4.0):
            raise InvalidArgumentError(f"log factor {self.log_factor} is below ln 4")

    @classmethod
    def for_problem(cls, num_states, num_actions, horizon, episodes, delta):
        """Derive the constants of an experiment.

        :param num_states: Number of states S.
        :param num_actions: Number of actions A.
        :param horizon: Episode length H.
        :param episodes: Configured number of episodes K; zero is treated
                         as one so the constants stay finite.
        :param delta: Total failure probability in (0, 1).

        """
        if not 0.0 < delta < 1.0:
            raise InvalidArgumentError(f"delta must lie in (0, 1), got {delta}")
        if min(num_states, num_actions, horizon) < 1 or episodes < 0:
            raise InvalidArgumentError("S, A and H must be positive and K non-negative")

        delta_prime = delta / 7.0
        total_steps = max(int(episodes), 1) * int(horizon)
        log_factor = math.log(4.0 * num_states * num_actions * total_steps / delta_prime)
        return cls(
            delta_prime=delta_prime,
            log_factor=log_factor,
            b_p=horizon * math.sqrt(2.0 * log_factor),
            b_v=math.sqrt(2.0 * log_factor),
            j=horizon * log_factor / 3.0,
            horizon=int(horizon),
            total_steps=total_steps,
        )


def _check_counts(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    if np.any(n < 1):
        raise InvalidArgumentError("visit counts must be at least 1")
    return n


def _check_dimensions(p, x):
    p = np.asarray(p, dtype=float)
    x = np.asarray(x, dtype=float)
    if p.ndim == 0 or x.ndim == 0 or p.shape[-1] != x.shape[-1]:
        raise InvalidArgumentError(
            f"dimension mismatch between distribution {p.shape} and values {x.shape}"
        )
    return p, x


def weighted_two_norm(p, x) -> np.ndarray:
    """Weighted 2-norm :math:`\\|x\\|_{2,p} = \\sqrt{\\sum_s p(s) x(s)^2}`."""
    p, x = _check_dimensions(p, x)
    return np.sqrt(np.sum(p * x**2, axis=-1))


def variance_under(p, x) -> np.ndarray:
    """Variance :math:`\\mathrm{Var}_p\\, x` of ``x`` under distribution ``p``.

    Values are shifted by ``x`` at the most likely state before the moments are
    taken, so ``x`` constant on the support of ``p`` gives exactly zero.

    """
    p, x = _check_dimensions(p, x)
    p, x = np.broadcast_arrays(p, x)
    anchor = np.take_along_axis(x, np.argmax(p, axis=-1)[..., np.newaxis], axis=-1)
    shifted = x - anchor
    mean = np.sum(p * shifted, axis=-1)
    variance = np.sum(p * shifted**2, axis=-1) - mean**2
    return np.maximum(variance, 0.0)


def bernstein_phi(p, v, n, c: BonusConstants) -> np.ndarray:
    """Bernstein interval :math:`\\sqrt{2 \\mathrm{Var}_p(v) \\hat L / n} + H \\hat L / (3n)`."""
    n = _check_counts(n)
    return np.sqrt(2.0 * variance_under(p, v) * c.log_factor / n) + c.j / n


def hoeffding_phi(n, c: BonusConstants) -> np.ndarray:
    """Worst-case interval :math:`H \\sqrt{\\hat L / (2n)}`, independent of p and V."""
    n = _check_counts(n)
    return c.horizon * np.sqrt(c.log_factor / (2.0 * n))


def reward_bonus(sample_variance, n, c: BonusConstants) -> np.ndarray:
    """Empirical Bernstein reward bonus :math:`\\sqrt{2 \\hat{Var} \\hat L / n} + 7 \\hat L / (3n)`.

    :raises InvalidArgumentError: on a negative variance or a count below 1.

    """
    n = _check_counts(n)
    sample_variance = np.asarray(sample_variance, dtype=float)
    if np.any(sample_variance < 0.0):
        raise InvalidArgumentError("sample variance must be non-negative")
    return np.sqrt(2.0 * sample_variance * c.log_factor / n) + 7.0 * c.log_factor / (3.0 * n)


def _corrected(phi_value, n, bracket_norm, j_max, b_p, b_v) -> np.ndarray:
    n = _check_counts(n)
    bracket_norm = np.asarray(bracket_norm, dtype=float)
    if np.any(bracket_norm < 0.0):
        raise InvalidArgumentError("bracket norm must be non-negative")
    return phi_value + (4.0 * j_max + b_p) / n + b_v * bracket_norm / np.sqrt(n)


def transition_bonus(phi_value, n, bracket_norm, c: BonusConstants) -> np.ndarray:
    """Transition bonus with correction terms.

    :math:`\\phi + (4J + B_p)/n + B_v \\|\\bar V_{t+1} - \\underline V_{t+1}\\|_{2,\\hat p} / \\sqrt{n}`

    :param phi_value: Interval value :math:`\\phi(\\hat p, V)`.
    :param n: Visit counts.
    :param bracket_norm: Weighted norm of the bracket width at ``t + 1``.
    :param c: Bonus constants.

    """
    return _corrected(phi_value, n, bracket_norm, c.j, c.b_p, c.b_v)


class ConfidenceInterval(abc.ABC):
    """Pluggable interval :math:`\\phi(p, V) = g(p, V)/\\sqrt{n} + j/n`."""

    admissible: typing.ClassVar[bool] = True
    """Whether the planner adds the correction bonus."""

    def __init__(self, constants: BonusConstants):
        self.constants = constants

    @property
    def b_v(self) -> float:
        """Lipschitz constant of ``g`` in the weighted norm."""
        return self.constants.b_v

    @property
    def b_p(self) -> float:
        """Bound on ``g`` over value vectors in [0, H]."""
        return self.constants.b_p

    @property
    def j_max(self) -> float:
        """Cap on the lower-order coefficient."""
        return self.constants.j

    @abc.abstractmethod
    def g(self, p, v) -> np.ndarray:
        """Leading coefficient of the interval."""

    @abc.abstractmethod
    def j(self) -> float:
        """Lower-order coefficient of the interval."""

    def phi(self, p, v, n) -> np.ndarray:
        """Interval width for ``n`` samples."""
        n = _check_counts(n)
        return self.g(p, v) / np.sqrt(n) + self.j() / n

    def transition_bonus(self, p, v, n, bracket_norm) -> np.ndarray:
        """Bonus added to :math:`\\hat p^\\top V` by the planner."""
        phi_value = self.phi(p, v, n)
        if not self.admissible:
            return phi_value
        return _corrected(phi_value, n, bracket_norm, self.j_max, self.b_p, self.b_v)


class BernsteinInterval(ConfidenceInterval):
    """Bernstein's inequality on the next-state values; admissible."""

    def g(self, p, v):
        return np.sqrt(2.0 * variance_under(p, v) * self.constants.log_factor)

    def j(self):
        return self.constants.j


class HoeffdingInterval(ConfidenceInterval):
    """Hoeffding's inequality over value vectors in [0, H].

    Not admissible: ``g`` does not vanish on constant value vectors, so the
    planner uses it without the correction bonus.

    """

    admissible = False

    def g(self, p, v):
        p, v = _check_dimensions(p, v)
        shape = np.broadcast_shapes(p.shape, v.shape)[:-1]
        return np.full(shape, self.constants.horizon * math.sqrt(self.constants.log_factor / 2.0))

    def j(self):
        return 0.0


INTERVALS = {
    "euler_bernstein": BernsteinInterval,
    "euler_hoeffding_baseline": HoeffdingInterval,
}
"""Confidence interval used by each algorithm name."""


def interval_for(algorithm: str, constants: BonusConstants) -> ConfidenceInterval:
    """Build the confidence interval of an algorithm."""
    try:
        return INTERVALS[algorithm](constants)
    except KeyError as exc:
        raise InvalidArgumentError(f"unknown algorithm '{algorithm}'") from exc


def coverage_probe(
    p,
    values,
    estimator: str,
    trials: int,
    n: int,
    constants: BonusConstants,
    seed: int = 0,
    width: typing.Optional[float] = None,
) -> float:
    """Estimate how often an interval fails to cover the true quantity.

    :param p: Distribution over ``values``.
    :param values: Next-state values (``"bernstein_phi"``) or reward values in
                   [0, 1] (``"reward_bonus"``).
    :param estimator: ``"bernstein_phi"`` checks :math:`|(\\hat p - p)^\\top V|`
                      against :py:func:`bernstein_phi`; ``"reward_bonus"``
                      checks the sample-mean error against
                      :py:func:`reward_bonus` with the biased sample variance.
    :param trials: Number of Monte-Carlo trials.
    :param n: Samples per trial.
    :param constants: Bonus constants.
    :param seed: Seed of the probe's random stream.
    :param width: Optional fixed interval half-width used instead of the bonus.

    :returns: Fraction of trials whose error exceeds the interval.

    """
    if trials < 1 or n < 1:
        raise InvalidArgumentError("trials and n must be at least 1")
    p, values = _check_dimensions(p, values)
    if p.ndim != 1 or values.ndim != 1 or not misc.is_simplex(p):
        raise InvalidArgumentError("coverage probes take one probability vector")

    rng = misc.stream(seed)
    truth = float(p @ values)

    if estimator == "bernstein_phi":
        counts = rng.multinomial(n, p / p.sum(), size=trials)
        error = np.abs((counts / n) @ values - truth)
        radius = bernstein_phi(p, values, n, constants) if width is None else width
    elif estimator == "reward_bonus":
        if np.any(values < 0.0) or np.any(values > 1.0):
            raise InvalidArgumentError("reward values must lie in [0, 1]")
        draws = rng.choice(values, size=(trials, n), p=p / p.sum())
        error = np.abs(draws.mean(axis=1) - truth)
        radius = reward_bonus(draws.var(axis=1), n, constants) if width is None else width
    else:
        raise InvalidArgumentError(f"unknown estimator '{estimator}'")

    return float(np.mean(error > radius))

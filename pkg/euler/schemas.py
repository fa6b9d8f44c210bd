""":py:mod:`marshmallow` schemas for the JSON surfaces of this package.

The following schema classes and their corresponding instances are used to
serialize Python objects to and from JSON representations:

    * MDP files through :py:class:`MDPSchema`,
    * environment specs through :py:class:`EnvSpecSchema`,
    * experiment config files through :py:class:`ExperimentConfigSchema`,
    * diagnostics documents through :py:class:`DiagnosticsSchema`,
    * comparison summaries through :py:class:`ComparisonEntrySchema`,
    * agent checkpoints through :py:class:`SufficientStatsSchema` and
      :py:class:`ValueBracketSchema`.

Loading validates every field and, except for experiment configs, constructs
the corresponding domain object in a ``post_load`` hook. Comparison entries
are only ever dumped. Floats are written as Python's shortest round-tripping
representation, so a dump followed by a load reproduces every probability bit
for bit.

:note: See :py:mod:`marshmallow` for more details on marshalling.

"""

# pylint: disable=invalid-name, too-few-public-methods, unused-argument

import dataclasses

import numpy as np
from marshmallow import (  # type: ignore
    Schema,
    ValidationError,
    fields,
    post_dump,
    post_load,
    pre_dump,
    validate,
    validates_schema,
)

from . import agent
from . import environments
from .base import EulerError, config
from .concentration import INTERVALS
from .mdp import Bernoulli, Deterministic, PolicyTable, TabularMDP, ValueTable

REWARD_KINDS = {kind.kind: kind for kind in (Deterministic, Bernoulli)}
"""Reward distribution class for every ``kind`` tag."""

REWARD_PARAMETER = {"deterministic": "value", "bernoulli": "mean"}
"""Name of the single parameter of every reward kind."""


def _matrix(inner, **kwargs):
    return fields.List(fields.List(inner), **kwargs)


class RewardSchema(Schema):
    """:py:mod:`marshmallow` schema for reward distributions."""

    kind = fields.Str(required=True, validate=validate.OneOf(list(REWARD_KINDS)))
    """Distribution kind, ``deterministic`` or ``bernoulli``."""

    value = fields.Float(validate=validate.Range(min=0.0, max=1.0))
    """Reward paid by a deterministic distribution."""

    mean = fields.Float(validate=validate.Range(min=0.0, max=1.0))
    """Success probability of a Bernoulli distribution."""

    @validates_schema
    def validate_parameter(self, data, **kwargs):
        """Require exactly the parameter that belongs to the kind."""
        kind = data.get("kind")
        if kind not in REWARD_PARAMETER:
            return
        expected = REWARD_PARAMETER[kind]
        present = {name for name in REWARD_PARAMETER.values() if name in data}
        if present != {expected}:
            raise ValidationError(f"'{kind}' rewards take exactly the field '{expected}'")

    @pre_dump
    def to_fields(self, reward, **kwargs):
        """Dump only the parameter of the reward's kind."""
        parameter = REWARD_PARAMETER[reward.kind]
        return {"kind": reward.kind, parameter: getattr(reward, parameter)}

    @post_load
    def make_reward(self, data, **kwargs):
        """Construct the reward distribution."""
        parameter = REWARD_PARAMETER[data["kind"]]
        return REWARD_KINDS[data["kind"]](data[parameter])


class MDPSchema(Schema):
    """:py:mod:`marshmallow` schema for :py:class:`euler.mdp.TabularMDP`."""

    S = fields.Int(attribute="num_states", required=True, validate=validate.Range(min=1))
    """Number of states."""

    A = fields.Int(attribute="num_actions", required=True, validate=validate.Range(min=1))
    """Number of actions."""

    H = fields.Int(attribute="horizon", required=True, validate=validate.Range(min=1))
    """Episode length."""

    transitions = fields.List(_matrix(fields.Float()), required=True)
    """Transition kernel indexed ``[s][a][s']``."""

    rewards = _matrix(fields.Nested(RewardSchema), required=True)
    """Reward distributions indexed ``[s][a]``."""

    start = fields.List(fields.Float(), attribute="start_states", required=True)
    """Initial state distribution."""

    @post_load
    def make_mdp(self, data, **kwargs):
        """Construct and validate the MDP."""
        try:
            return TabularMDP(**data)
        except (EulerError, ValueError, TypeError) as exc:
            raise ValidationError(str(exc)) from exc


ENV_FIELDS = {
    "chain": {"n"},
    "bandit": {"states", "actions", "mu", "reward_means", "horizon"},
    "det-chain": {"states"},
    "sparse": {"horizon", "states", "actions", "goal", "slip"},
    "random": {"states", "actions", "horizon", "seed", "alpha"},
}
"""Fields accepted by every environment kind."""


class EnvSpecSchema(Schema):
    """:py:mod:`marshmallow` schema for the specs of :py:mod:`euler.environments`."""

    kind = fields.Str(required=True, validate=validate.OneOf(list(environments.SPECS)))
    """Environment kind: ``chain``, ``bandit``, ``det-chain``, ``sparse`` or ``random``."""

    n = fields.Int(validate=validate.Range(min=2))
    """Chain length, which is also its horizon."""

    states = fields.Int(validate=validate.Range(min=1))
    """Number of states."""

    actions = fields.Int(validate=validate.Range(min=1))
    """Number of actions."""

    horizon = fields.Int(allow_none=True, validate=validate.Range(min=1))
    """Episode length."""

    mu = fields.List(fields.Float())
    """Bandit context distribution."""

    reward_means = _matrix(fields.Float())
    """Bandit Bernoulli reward means indexed ``[s][a]``."""

    goal = fields.Int(allow_none=True, validate=validate.Range(min=1))
    """Sparse-reward goal state."""

    slip = fields.Float(validate=validate.Range(min=0.0, max=1.0, max_inclusive=False))
    """Probability that a sparse-reward ADVANCE fails."""

    seed = fields.Int(validate=validate.Range(min=0))
    """Random MDP seed."""

    alpha = fields.Float(validate=validate.Range(min=0.0, min_inclusive=False))
    """Random MDP Dirichlet parameter."""

    @validates_schema
    def validate_kind_fields(self, data, **kwargs):
        """Reject fields that do not belong to the kind."""
        kind = data.get("kind")
        if kind not in ENV_FIELDS:
            return
        unexpected = sorted(set(data) - ENV_FIELDS[kind] - {"kind"})
        if unexpected:
            raise ValidationError(f"'{kind}' environments do not take {unexpected}")

    @pre_dump
    def to_fields(self, spec, **kwargs):
        """Flatten a spec dataclass and tag it with its kind."""
        return {"kind": spec.kind, **dataclasses.asdict(spec)}

    @post_dump
    def drop_defaults(self, data, **kwargs):
        """Leave unset optional fields out of the document."""
        return {key: value for key, value in data.items() if value is not None}

    @post_load
    def make_spec(self, data, **kwargs):
        """Construct the environment spec."""
        data = dict(data)
        kind = data.pop("kind")
        if kind == "bandit":
            data["mu"] = tuple(data.get("mu", ()))
            data["reward_means"] = tuple(tuple(row) for row in data.get("reward_means", ()))
        try:
            return environments.SPECS[kind](**data)
        except TypeError as exc:
            raise ValidationError(f"incomplete '{kind}' environment: {exc}") from exc
        except EulerError as exc:
            raise ValidationError(str(exc)) from exc


class ExperimentConfigSchema(Schema):
    """:py:mod:`marshmallow` schema for :py:class:`euler.harness.ExperimentConfig`.

    Loading returns a plain dictionary; defaults come from the
    ``[experiment]`` section of the configuration file.

    """

    env = fields.Nested(EnvSpecSchema, required=True)
    """Environment to learn."""

    algorithm = fields.Str(
        load_default=lambda: config.get("experiment", "algorithm"),
        validate=validate.OneOf(list(INTERVALS)),
    )
    """Learner, ``euler_bernstein`` or ``euler_hoeffding_baseline``."""

    episodes = fields.Int(required=True, validate=validate.Range(min=0))
    """Number of episodes K."""

    delta = fields.Float(
        load_default=lambda: config.getfloat("experiment", "delta"),
        validate=validate.Range(min=0.0, max=1.0, min_inclusive=False, max_inclusive=False),
    )
    """Total failure probability."""

    seed = fields.Int(
        load_default=lambda: config.getint("experiment", "seed"),
        validate=validate.Range(min=0),
    )
    """Experiment seed."""

    eval_stride = fields.Int(
        load_default=lambda: config.getint("experiment", "eval_stride"),
        validate=validate.Range(min=1),
    )
    """Episodes between exact re-evaluations of a changed policy."""

    q_cap = fields.Float(
        load_default=None,
        allow_none=True,
        validate=validate.Range(min=0.0, min_inclusive=False),
    )
    """Optional cap on every optimistic value."""

    output = fields.Str(load_default=None, allow_none=True)
    """CSV trace path; the diagnostics JSON goes next to it."""

    check_brackets = fields.Bool(
        load_default=lambda: config.getboolean("experiment", "check_brackets")
    )
    """Whether to compare the bracket against V* every episode."""


class BonusConstantsSchema(Schema):
    """:py:mod:`marshmallow` schema for :py:class:`euler.concentration.BonusConstants`."""

    delta_prime = fields.Float()
    """Per-event failure probability."""

    log_factor = fields.Float()
    """Logarithmic factor shared by every bonus."""

    b_p = fields.Float()
    """Bound on the interval's leading coefficient."""

    b_v = fields.Float()
    """Lipschitz constant of the interval's leading coefficient."""

    j = fields.Float()
    """Lower-order coefficient cap."""

    horizon = fields.Int()
    """Episode length."""

    total_steps = fields.Int()
    """Number of steps T the union bounds cover."""


class DiagnosticsSchema(Schema):
    """:py:mod:`marshmallow` schema for :py:class:`euler.harness.ExperimentReport`."""

    environmental_norm = fields.Float(attribute="diagnostics.environmental_norm")
    """Maximum per-step conditional variance."""

    max_return = fields.Float(attribute="diagnostics.max_return")
    """Deterministic upper bound on any episode's return."""

    successor_range = fields.Float(attribute="diagnostics.successor_range")
    """Maximum optimal-value range among immediate successors."""

    value_range = fields.Float(attribute="diagnostics.value_range")
    """Range of the optimal values at the first timestep."""

    bound_problem_dep = fields.Float(attribute="bounds.problem_dependent")
    """Environmental-norm leading term."""

    bound_max_return = fields.Float(attribute="bounds.max_return")
    """Max-return leading term."""

    bound_worst_case = fields.Float(attribute="bounds.worst_case")
    """Worst-case leading term."""

    bound_successor_range = fields.Float(attribute="bounds.successor_range")
    """Successor-range leading term."""

    bound_bounded_return = fields.Float(attribute="bounds.bounded_return")
    """Leading term when every return is at most 1."""

    constants = fields.Nested(BonusConstantsSchema)
    """Bonus constants of the experiment."""


class ComparisonEntrySchema(Schema):
    """:py:mod:`marshmallow` schema for :py:class:`euler.harness.ComparisonEntry`."""

    algorithm = fields.Str(validate=validate.OneOf(list(INTERVALS)))
    """Learner that was run."""

    episodes = fields.Int(validate=validate.Range(min=0))
    """Number of episodes K of every run."""

    seeds = fields.List(fields.Int(validate=validate.Range(min=0)))
    final_regrets = fields.List(fields.Float())
    """Final cumulative regret per seed, in ``seeds`` order."""

    median_regret = fields.Float()

    bound_problem_dep = fields.Float(attribute="bounds.problem_dependent")
    bound_max_return = fields.Float(attribute="bounds.max_return")
    bound_worst_case = fields.Float(attribute="bounds.worst_case")


class SufficientStatsSchema(Schema):
    """:py:mod:`marshmallow` schema for :py:class:`euler.agent.SufficientStats`."""

    n = _matrix(fields.Int(validate=validate.Range(min=0)), required=True)
    """Visit counts indexed ``[s][a]``."""

    trans_counts = fields.List(_matrix(fields.Int(validate=validate.Range(min=0))), required=True)
    """Transition counts indexed ``[s][a][s']``."""

    reward_sum = _matrix(fields.Float(), required=True)
    """Sum of observed rewards."""

    reward_sq_sum = _matrix(fields.Float(), required=True)
    """Sum of squared observed rewards."""

    @post_load
    def make_stats(self, data, **kwargs):
        """Construct and validate the statistics."""
        try:
            n = np.array(data["n"], dtype=np.int64)
            if n.ndim != 2:
                raise ValidationError("n must be a states x actions table")
            stats = agent.SufficientStats(*n.shape)
            stats.n[:] = n
            stats.trans_counts[:] = np.array(data["trans_counts"], dtype=np.int64)
            stats.reward_sum[:] = np.array(data["reward_sum"], dtype=float)
            stats.reward_sq_sum[:] = np.array(data["reward_sq_sum"], dtype=float)
            stats.validate()
        except (ValueError, TypeError, EulerError) as exc:
            raise ValidationError(str(exc)) from exc
        return stats


class ValueBracketSchema(Schema):
    """:py:mod:`marshmallow` schema for :py:class:`euler.agent.ValueBracket`."""

    upper = _matrix(fields.Float(allow_nan=False), required=True)
    """Optimistic values indexed ``[t - 1][s]``, terminal row included."""

    lower = _matrix(fields.Float(allow_nan=False), required=True)
    """Pessimistic values indexed ``[t - 1][s]``, terminal row included."""

    policy = _matrix(fields.Int(validate=validate.Range(min=0)), required=True)
    """Greedy actions indexed ``[t - 1][s]``."""

    @pre_dump
    def to_fields(self, bracket, **kwargs):
        """Expose the bracket's arrays."""
        return {
            "upper": bracket.upper.values,
            "lower": bracket.lower.values,
            "policy": bracket.policy.actions,
        }

    @post_load
    def make_bracket(self, data, **kwargs):
        """Construct the bracket."""
        try:
            return agent.ValueBracket(
                upper=ValueTable(np.array(data["upper"], dtype=float)),
                lower=ValueTable(np.array(data["lower"], dtype=float)),
                policy=PolicyTable(np.array(data["policy"], dtype=np.int64)),
            )
        except (ValueError, TypeError, EulerError) as exc:
            raise ValidationError(str(exc)) from exc


mdp = MDPSchema()
"""Schema object for marshalling :py:class:`euler.mdp.TabularMDP` objects."""

env_spec = EnvSpecSchema()
"""Schema object for marshalling environment specs."""

experiment_config = ExperimentConfigSchema()
"""Schema object for marshalling experiment configurations."""

diagnostics = DiagnosticsSchema()
"""Schema object for marshalling diagnostics documents."""

comparison_entries = ComparisonEntrySchema(many=True)
"""Schema object for marshalling the entries of a comparison."""

sufficient_stats = SufficientStatsSchema()
"""Schema object for marshalling :py:class:`euler.agent.SufficientStats` objects."""

value_bracket = ValueBracketSchema()
"""Schema object for marshalling :py:class:`euler.agent.ValueBracket` objects."""

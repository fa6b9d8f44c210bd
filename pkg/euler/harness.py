"""Seeded regret experiments.

:py:func:`run_experiment` plays an :py:class:`euler.agent.EulerAgent` against
an environment for K episodes and records, for every episode, the exact gap
between the optimal value and the value of the policy that was executed:

.. math::

    \\Delta_k = V^*_1(s_{1k}) - V^{\\pi_k}_1(s_{1k})

Both values come from backward induction on the true model, never from sampled
returns. Episode ``k`` draws all of its randomness from
``misc.stream(seed, k)``, so a run is reproducible bit for bit and independent
runs can be fanned out with :py:func:`run_batch` in any order.

"""

# pylint: disable=invalid-name

import csv
import json
import math
import typing
import logging
import dataclasses
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed  # type: ignore
from marshmallow import ValidationError  # type: ignore
from progressbar import ProgressBar  # type: ignore

from . import base
from . import misc
from . import schemas
from . import environments
from .agent import EulerAgent, bracket_contains
from .base import ConfigError
from .concentration import INTERVALS, BonusConstants
from .mdp import (
    Diagnostics,
    TheoreticalBounds,
    diagnostics,
    optimal_values,
    policy_values,
    theoretical_bounds,
)

logger = logging.getLogger(__name__)

TRACE_COLUMNS = (
    "episode",
    "start_state",
    "instant_regret",
    "cumulative_regret",
    "bracket_width",
    "violation",
)
"""Column order of every CSV trace."""


def _setting(getter, option):
    return dataclasses.field(default_factory=lambda: getter("experiment", option))


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines one run.

    Defaults for ``algorithm``, ``delta``, ``seed``, ``eval_stride`` and
    ``check_brackets`` come from the ``[experiment]`` section of the
    configuration file.

    :raises ConfigError: listing every invalid field.

    """

    env: environments.EnvSpec
    """Environment to learn."""

    episodes: int
    """Number of episodes K."""

    algorithm: str = _setting(base.config.get, "algorithm")
    """``euler_bernstein`` or ``euler_hoeffding_baseline``."""

    delta: float = _setting(base.config.getfloat, "delta")
    """Total failure probability."""

    seed: int = _setting(base.config.getint, "seed")
    """Experiment seed."""

    eval_stride: int = _setting(base.config.getint, "eval_stride")
    """Episodes between exact re-evaluations of a changed policy."""

    q_cap: typing.Optional[float] = None
    """Optional cap on every optimistic value."""

    output: typing.Optional[str] = None
    """CSV trace path; the diagnostics JSON is written next to it."""

    check_brackets: bool = _setting(base.config.getboolean, "check_brackets")
    """Whether to compare the bracket against V* every episode."""

    def __post_init__(self):
        errors = []
        if not isinstance(self.env, tuple(environments.SPECS.values())):
            errors.append(f"env: not an environment spec: {self.env!r}")
        if self.algorithm not in INTERVALS:
            errors.append(f"algorithm: must be one of {sorted(INTERVALS)}")
        if not _is_int(self.episodes) or self.episodes < 0:
            errors.append(f"episodes: must be a non-negative integer, got {self.episodes!r}")
        if not 0.0 < self.delta < 1.0:
            errors.append(f"delta: must lie in (0, 1), got {self.delta!r}")
        if not _is_int(self.seed) or self.seed < 0:
            errors.append(f"seed: must be a non-negative integer, got {self.seed!r}")
        if not _is_int(self.eval_stride) or self.eval_stride < 1:
            errors.append(f"eval_stride: must be a positive integer, got {self.eval_stride!r}")
        if self.q_cap is not None and not self.q_cap > 0.0:
            errors.append(f"q_cap: must be positive, got {self.q_cap!r}")
        if errors:
            raise ConfigError(errors)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        """Validate a JSON document and build the configuration.

        :raises ConfigError: if the document does not validate.

        """
        try:
            fields = schemas.experiment_config.load(data)
        except ValidationError as exc:
            raise ConfigError(exc.messages) from exc
        return cls(**fields)

    def to_dict(self) -> dict:
        """JSON document mirroring the field names."""
        return schemas.experiment_config.dump(self)


def _is_int(value) -> bool:
    return isinstance(value, (int, np.integer)) and not isinstance(value, bool)


def read_document(path) -> dict:
    """Read the JSON object of an experiment configuration file.

    :raises ConfigError: on malformed JSON or a document that is not an object.
    :raises OSError: if the file cannot be read.

    """
    with open(path, encoding="utf-8") as config_file:
        try:
            data = json.load(config_file)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a JSON object")
    return data


def load_config(path) -> ExperimentConfig:
    """Read an experiment configuration file.

    :raises ConfigError: on malformed JSON or invalid fields.
    :raises OSError: if the file cannot be read.

    """
    return ExperimentConfig.from_dict(read_document(path))


@dataclasses.dataclass(frozen=True)
class TraceRecord:
    """One episode of a :py:class:`RegretTrace`."""

    episode: int
    start_state: int
    instant_regret: float
    cumulative_regret: float
    bracket_width: float
    violation: bool


class RegretTrace:
    """Per-episode regret record of one run."""

    def __init__(self, records: typing.Iterable[TraceRecord] = ()):
        self.records: typing.List[TraceRecord] = list(records)

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def append(self, record: TraceRecord):
        """Add the next episode."""
        self.records.append(record)

    @property
    def instant_regrets(self) -> np.ndarray:
        """:math:`\\Delta_k` for every recorded episode."""
        return np.array([record.instant_regret for record in self.records])

    @property
    def violations(self) -> np.ndarray:
        """Bracket violation flag for every recorded episode."""
        return np.array([record.violation for record in self.records], dtype=bool)

    @property
    def cumulative_regret(self) -> float:
        """Final cumulative regret; zero for an empty trace."""
        return self.records[-1].cumulative_regret if self.records else 0.0

    def rows(self) -> typing.Iterator[typing.List[str]]:
        """CSV rows in :py:data:`TRACE_COLUMNS` order, floats at full precision."""
        for record in self.records:
            yield [
                str(record.episode),
                str(record.start_state),
                misc.format_float(record.instant_regret),
                misc.format_float(record.cumulative_regret),
                misc.format_float(record.bracket_width),
                str(int(record.violation)),
            ]


@dataclasses.dataclass(frozen=True)
class ExperimentReport:
    """Problem-dependent quantities of a run, written as the diagnostics JSON."""

    diagnostics: Diagnostics
    bounds: TheoreticalBounds
    constants: BonusConstants


@dataclasses.dataclass(frozen=True)
class TraceSummary:
    """Headline numbers of a :py:class:`RegretTrace`."""

    episodes: int
    final_regret: float
    tail_mean_regret: float
    """Mean :math:`\\Delta_k` over the last 10% of episodes."""

    settled_after: int
    """Last episode with a positive gap; zero if there is none."""


def summarize(trace: RegretTrace, tol: float = 1e-12) -> TraceSummary:
    """Summarize a trace.

    :param trace: Trace to summarize.
    :param tol: Gaps at or below this value count as zero.

    """
    gaps = trace.instant_regrets
    if gaps.size == 0:
        return TraceSummary(0, 0.0, 0.0, 0)
    tail = max(1, math.ceil(0.1 * gaps.size))
    positive = np.flatnonzero(gaps > tol)
    return TraceSummary(
        episodes=int(gaps.size),
        final_regret=trace.cumulative_regret,
        tail_mean_regret=float(gaps[-tail:].mean()),
        settled_after=int(positive[-1]) + 1 if positive.size else 0,
    )


def optimism_violation_rate(trace: RegretTrace) -> float:
    """Fraction of episodes whose bracket failed to contain V*."""
    if not len(trace):
        return 0.0
    return float(trace.violations.mean())


def dump_trace(trace: RegretTrace, stream: typing.TextIO):
    """Write a trace as CSV to an open text stream."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    writer.writerows(trace.rows())


def write_trace(trace: RegretTrace, path):
    """Write a trace as CSV."""
    with open(path, "w", encoding="utf-8", newline="") as trace_file:
        dump_trace(trace, trace_file)


def write_report(report: ExperimentReport, path):
    """Write the diagnostics JSON of a run."""
    with open(path, "w", encoding="utf-8") as report_file:
        json.dump(schemas.diagnostics.dump(report), report_file, indent=2)
        report_file.write("\n")


def report_path(output) -> Path:
    """Path of the diagnostics JSON that accompanies a CSV trace."""
    return Path(output).with_suffix(".json")


def env_label(spec: environments.EnvSpec) -> str:
    """Short name of an environment such as ``chain-n8``."""
    parts = [spec.kind]
    for field in dataclasses.fields(spec):
        value = getattr(spec, field.name)
        if value is not None and not isinstance(value, tuple):
            parts.append(f"{field.name}{value}")
    return "-".join(parts)


def run_name(index: int, config: ExperimentConfig) -> str:
    """File stem of the ``index``-th run of a batch."""
    return f"{index:03d}-{env_label(config.env)}-{config.algorithm}-seed{config.seed}"


def run_experiment(config: ExperimentConfig) -> typing.Tuple[RegretTrace, ExperimentReport]:
    """Run one seeded experiment.

    :param config: Experiment to run.

    :returns: tuple of (:py:class:`RegretTrace`, :py:class:`ExperimentReport`).

    :raises OSError: if the outputs cannot be written.

    """
    mdp = environments.build(config.env)
    S, A, H, K = mdp.num_states, mdp.num_actions, mdp.horizon, config.episodes

    constants = BonusConstants.for_problem(S, A, H, K, config.delta)
    agent = EulerAgent.for_algorithm(
        config.algorithm, S, A, constants, q_cap=config.q_cap, start_states=mdp.start_states
    )
    optimal, _ = optimal_values(mdp)
    report = ExperimentReport(
        diagnostics=diagnostics(mdp),
        bounds=theoretical_bounds(mdp, K, config.delta),
        constants=constants,
    )
    tol = base.config.getfloat("tolerance", "bracket")

    logger.info(
        "Starting %s on %s: K=%d, seed=%d", config.algorithm, config.env, K, config.seed
    )

    trace = RegretTrace()
    evaluated_policy, evaluated = None, None
    cumulative, violations = 0.0, 0

    for k in range(1, K + 1):
        rng = misc.stream(config.seed, k)
        bracket = agent.begin_episode()
        s = environments.sample_start(mdp, rng)

        stale = not bracket.policy.same_as(evaluated_policy)
        if evaluated is None or (stale and (k - 1) % config.eval_stride == 0):
            evaluated_policy, evaluated = bracket.policy, policy_values(mdp, bracket.policy)
            logger.debug("Episode %d: evaluated new policy", k)

        # Rounding can put V^pi a few ulps above V*.
        gap = max(float(optimal.at(1)[s] - evaluated.at(1)[s]), 0.0)
        cumulative += gap

        violation = config.check_brackets and not bracket_contains(bracket, optimal, tol)
        if violation:
            violations += 1
            if violations == 1:
                logger.warning("Episode %d: value bracket does not contain V*", k)

        width = float(bracket.upper.at(1)[s] - bracket.lower.at(1)[s])
        trace.append(TraceRecord(k, s, gap, cumulative, width, violation))

        for t in range(1, H + 1):
            a = agent.act(s, t)
            s_next, r, rng = environments.step(mdp, s, a, rng)
            agent.observe(s, a, r, s_next)
            s = s_next

    logger.info(
        "Finished %s on %s: regret=%s, violations=%d",
        config.algorithm,
        config.env,
        misc.format_float(cumulative),
        violations,
    )

    if config.output:
        write_trace(trace, config.output)
        write_report(report, report_path(config.output))

    return trace, report


def _run_detached(config: ExperimentConfig) -> typing.Tuple[RegretTrace, ExperimentReport]:
    return run_experiment(dataclasses.replace(config, output=None))


def run_batch(
    configs: typing.Sequence[ExperimentConfig],
    n_jobs: typing.Optional[int] = None,
    progress: bool = False,
) -> typing.List[RegretTrace]:
    """Run independent experiments in parallel.

    Workers only compute; the outputs named in the configs are written here,
    in submission order, once each result comes back.

    :param configs: Experiments to run.
    :param n_jobs: :py:class:`joblib.Parallel` worker count; the ``[parallel]``
                   setting when omitted.
    :param progress: Show a progress bar while collecting.

    :returns: one trace per config, in submission order.

    :raises OSError: if an output cannot be written.

    """
    if n_jobs is None:
        n_jobs = base.config.getint("parallel", "n_jobs")
    if not configs:
        return []

    parallel = Parallel(n_jobs=n_jobs, return_as="generator")
    results = parallel(delayed(_run_detached)(config) for config in configs)
    if progress:
        results = ProgressBar(max_value=len(configs))(results)

    traces = []
    for config, (trace, report) in zip(configs, results):
        if config.output:
            write_trace(trace, config.output)
            write_report(report, report_path(config.output))
        traces.append(trace)
    return traces


@dataclasses.dataclass(frozen=True)
class ComparisonEntry:
    """Result of one config of a :py:func:`compare` call."""

    algorithm: str
    episodes: int
    seeds: typing.Tuple[int, ...]
    final_regrets: typing.Tuple[float, ...]
    """Final cumulative regret per seed."""

    median_regret: float
    bounds: TheoreticalBounds
    """Leading terms of the regret bounds after ``episodes`` episodes."""


def compare(
    configs: typing.Sequence[ExperimentConfig],
    seeds: typing.Sequence[int],
    n_jobs: typing.Optional[int] = None,
    output_dir=None,
    progress: bool = False,
) -> typing.List[ComparisonEntry]:
    """Run several algorithms on one environment over a common seed set.

    The seed and output of every config are replaced by each seed in turn.

    :param configs: At least two configs sharing their environment.
    :param seeds: Seeds to run every config with.
    :param n_jobs: Worker count passed to :py:func:`run_batch`.
    :param output_dir: Directory receiving one trace per run, named by
                       :py:func:`run_name`; nothing is written when omitted.
    :param progress: Show a progress bar while collecting.

    :returns: one :py:class:`ComparisonEntry` per config, in order.

    :raises ConfigError: on fewer than two configs, mismatched environments
                         or an empty seed set.

    """
    if len(configs) < 2:
        raise ConfigError("compare needs at least two configs")
    if any(config.env != configs[0].env for config in configs):
        raise ConfigError("compared configs must share their environment")
    seeds = tuple(int(seed) for seed in seeds)
    if not seeds:
        raise ConfigError("compare needs at least one seed")

    runs = [
        dataclasses.replace(config, seed=seed, output=None)
        for config in configs
        for seed in seeds
    ]
    if output_dir is not None:
        runs = [
            dataclasses.replace(run, output=str(Path(output_dir) / f"{run_name(index, run)}.csv"))
            for index, run in enumerate(runs)
        ]
    traces = run_batch(runs, n_jobs=n_jobs, progress=progress)

    mdp = environments.build(configs[0].env)
    entries = []
    for index, config in enumerate(configs):
        batch = traces[index * len(seeds) : (index + 1) * len(seeds)]
        finals = tuple(trace.cumulative_regret for trace in batch)
        entries.append(
            ComparisonEntry(
                algorithm=config.algorithm,
                episodes=config.episodes,
                seeds=seeds,
                final_regrets=finals,
                median_regret=float(np.median(finals)),
                bounds=theoretical_bounds(mdp, config.episodes, config.delta),
            )
        )
    return entries

"""Command-line interface.

Four subcommands drive :py:mod:`euler.harness`:

    - ``euler run --env chain --n 8 --algo euler --episodes 1000 --out t.csv``

        Run one experiment; writes ``t.csv`` and ``t.json``.

    - ``euler diagnose --env bandit --states 4 --actions 3``

        Print the diagnostics JSON of an environment.

    - ``euler sweep --env chain --n 4 8 16 --episodes 5000 --seeds 1 2 3 --out runs/``

        Run every grid point, algorithm and seed; writes one trace per run
        and ``runs/summary.csv``.

    - ``euler compare --env chain --n 10 --algo euler hoeffding --seeds 1 2 --out runs/``

        Like ``sweep`` on a single environment, plus ``runs/comparison.json``
        with per-algorithm medians and regret-bound overlays.

An experiment config file (``--config``) may replace the environment and
experiment flags; a flag that contradicts the file is an error and a flag
for a field the file leaves out overrides the default with a warning. In ``sweep``
and ``compare`` the seeds and algorithms are batch axes that expand the file's
config instead. Configuration errors exit with status 2 and runtime failures
with status 1.

"""

import os
import csv
import sys
import json
import typing
import argparse
import itertools
import logging
import dataclasses

from . import base
from . import misc
from . import harness
from . import schemas
from . import environments
from .base import ConfigError, EulerError
from .concentration import BonusConstants
from .mdp import diagnostics, theoretical_bounds

logger = logging.getLogger(__name__)

ALGORITHMS = {
    "euler": "euler_bernstein",
    "hoeffding": "euler_hoeffding_baseline",
}
"""Algorithm name for every ``--algo`` choice."""

ENV_REQUIRED = {
    "chain": ("n",),
    "det-chain": ("states",),
    "bandit": ("states", "actions"),
    "sparse": ("horizon", "states", "actions"),
    "random": ("states", "actions", "horizon"),
}
"""Flags every ``--env`` needs."""

ENV_OPTIONAL = {
    "chain": (),
    "det-chain": (),
    "bandit": ("horizon", "env_seed"),
    "sparse": ("goal", "slip"),
    "random": ("alpha", "env_seed"),
}
"""Flags every ``--env`` accepts on top of the required ones."""

ENV_FLAGS = ("n", "states", "actions", "horizon", "alpha", "goal", "slip", "env_seed")
GRID_FLAGS = ("n", "states", "horizon")

SUMMARY_COLUMNS = ("env", "algorithm", "seed", "episodes", "final_cumulative_regret")
"""Column order of ``summary.csv``."""


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _number(text: str, kind, description: str, check):
    try:
        value = kind(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"invalid {description}: {text!r}") from exc
    if not check(value):
        raise argparse.ArgumentTypeError(f"must be a {description}, got {text}")
    return value


def non_negative_int(text: str) -> int:
    """Parse an integer >= 0."""
    return _number(text, int, "non-negative integer", lambda value: value >= 0)


def positive_int(text: str) -> int:
    """Parse an integer >= 1."""
    return _number(text, int, "positive integer", lambda value: value >= 1)


def positive_float(text: str) -> float:
    """Parse a real > 0."""
    return _number(text, float, "positive number", lambda value: value > 0.0)


def open_unit_float(text: str) -> float:
    """Parse a real in (0, 1)."""
    return _number(text, float, "number in (0, 1)", lambda value: 0.0 < value < 1.0)


def unit_float(text: str) -> float:
    """Parse a real in [0, 1)."""
    return _number(text, float, "number in [0, 1)", lambda value: 0.0 <= value < 1.0)


def env_parser(grid: bool) -> argparse.ArgumentParser:
    """Parent parser holding the environment flags."""
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("environment")
    many = {"nargs": "+"} if grid else {}
    group.add_argument("--env", choices=list(ENV_REQUIRED), help="environment family")
    group.add_argument("--n", type=positive_int, help="chain length", **many)
    group.add_argument("--states", type=positive_int, help="number of states", **many)
    group.add_argument("--actions", type=positive_int, help="number of actions")
    group.add_argument("--horizon", type=positive_int, help="episode length", **many)
    group.add_argument("--alpha", type=positive_float, help="random MDP Dirichlet parameter")
    group.add_argument("--goal", type=positive_int, help="sparse-reward goal state")
    group.add_argument("--slip", type=unit_float, help="sparse-reward advance failure probability")
    group.add_argument(
        "--env-seed", type=non_negative_int, help="seed of random MDPs and random bandits"
    )
    return parser


def experiment_parser(batch: bool) -> argparse.ArgumentParser:
    """Parent parser holding the experiment flags."""
    parser = argparse.ArgumentParser(add_help=False)
    group = parser.add_argument_group("experiment")
    if batch:
        group.add_argument("--algo", choices=list(ALGORITHMS), nargs="+", help="learners")
        group.add_argument("--seeds", type=non_negative_int, nargs="+", help="experiment seeds")
        group.add_argument("--jobs", type=int, help="parallel workers, -1 for every core")
        group.add_argument("--chart", help="write a Vega-Lite chart of the summary here")
        group.add_argument("--out", help="output directory", required=True)
    else:
        group.add_argument("--algo", choices=list(ALGORITHMS), help="learner")
        group.add_argument("--seed", type=non_negative_int, help="experiment seed")
        group.add_argument("--out", help="CSV trace path; standard output when omitted")
    group.add_argument("--episodes", type=non_negative_int, help="number of episodes K")
    group.add_argument("--delta", type=open_unit_float, help="failure probability")
    group.add_argument("--eval-stride", type=positive_int, help="episodes between evaluations")
    group.add_argument("--q-cap", type=positive_float, help="cap on every optimistic value")
    group.add_argument("--config", help="experiment config JSON file")
    return parser


def verbosity_parser() -> argparse.ArgumentParser:
    """Parent parser holding ``--verbose``."""
    parser = argparse.ArgumentParser(add_help=False)
    parser.add_argument("-v", "--verbose", action="store_true", help="log every evaluation")
    return parser


def build_parser() -> argparse.ArgumentParser:
    """Build the ``euler`` argument parser."""
    parser = argparse.ArgumentParser(prog="euler", description=__doc__.splitlines()[0])
    subparsers = parser.add_subparsers(dest="command", required=True)
    verbose = verbosity_parser()

    run = subparsers.add_parser(
        "run",
        help="run one experiment",
        parents=[env_parser(grid=False), experiment_parser(batch=False), verbose],
    )
    run.set_defaults(func=cmd_run)

    diagnose = subparsers.add_parser(
        "diagnose", help="print environment diagnostics", parents=[env_parser(grid=False), verbose]
    )
    diagnose.add_argument("--episodes", type=non_negative_int, help="K for the bound overlays")
    diagnose.add_argument("--delta", type=open_unit_float, help="failure probability")
    diagnose.add_argument("--config", help="experiment config JSON file")
    diagnose.set_defaults(func=cmd_diagnose)

    sweep = subparsers.add_parser(
        "sweep",
        help="run a grid of experiments",
        parents=[env_parser(grid=True), experiment_parser(batch=True), verbose],
    )
    sweep.set_defaults(func=cmd_sweep)

    compare = subparsers.add_parser(
        "compare",
        help="compare learners on one environment",
        parents=[env_parser(grid=False), experiment_parser(batch=True), verbose],
    )
    compare.set_defaults(func=cmd_compare)

    return parser


def build_spec(kind: str, params: dict) -> environments.EnvSpec:
    """Build an environment spec from flag values.

    :param kind: ``--env`` value.
    :param params: Flag values keyed by destination name; ``None`` means unset.

    :raises ConfigError: on missing, inapplicable or invalid flags.

    """
    given = {name for name, value in params.items() if value is not None}
    missing = [_flag(name) for name in ENV_REQUIRED[kind] if name not in given]
    if missing:
        raise ConfigError(f"--env {kind} requires {', '.join(missing)}")
    extra = sorted(given - set(ENV_REQUIRED[kind]) - set(ENV_OPTIONAL[kind]))
    if extra:
        flags = ", ".join(_flag(name) for name in extra)
        raise ConfigError(f"{flags} does not apply to --env {kind}")

    p = {name: params[name] for name in given}
    env_seed = p.pop("env_seed", 0)
    try:
        if kind == "chain":
            return environments.ChainSpec(p["n"])
        if kind == "det-chain":
            return environments.DeterministicChainSpec(p["states"])
        if kind == "bandit":
            return environments.bandit_from_seed(seed=env_seed, **p)
        if kind == "sparse":
            return environments.SparseRewardSpec(**p)
        return environments.RandomSpec(seed=env_seed, **p)
    except EulerError as exc:
        raise ConfigError(str(exc)) from exc


def _env_params(args) -> dict:
    return {name: getattr(args, name, None) for name in ENV_FLAGS}


def env_specs(args) -> typing.List[environments.EnvSpec]:
    """Every environment named by the flags, expanding grid flags.

    :returns: an empty list when ``--env`` is not given.

    :raises ConfigError: if environment parameters are given without ``--env``.

    """
    params = _env_params(args)
    if args.env is None:
        given = [_flag(name) for name, value in params.items() if value is not None]
        if given:
            raise ConfigError(f"{', '.join(given)} requires --env")
        return []

    axes = {
        name: value if isinstance(value, list) else [value] for name, value in params.items()
    }
    names = list(axes)
    return [
        build_spec(args.env, dict(zip(names, point)))
        for point in itertools.product(*(axes[name] for name in names))
    ]


def _explicit_fields(args) -> dict:
    fields = {
        "episodes": args.episodes,
        "delta": args.delta,
        "eval_stride": getattr(args, "eval_stride", None),
        "q_cap": getattr(args, "q_cap", None),
    }
    if hasattr(args, "seed"):
        fields["seed"] = args.seed
        fields["algorithm"] = ALGORITHMS[args.algo] if args.algo else None
        fields["output"] = args.out
    return {name: value for name, value in fields.items() if value is not None}


def base_configs(args) -> typing.List[harness.ExperimentConfig]:
    """Experiment configs from ``--config`` and the flags, one per environment.

    Flags may fill fields the file leaves out, with a warning; a flag that
    contradicts a field the file sets is a conflict.

    :raises ConfigError: on conflicts between the file and the flags, or when
                         neither defines the environment and K.

    """
    explicit = _explicit_fields(args)
    specs = env_specs(args)

    if args.config is None:
        if not specs:
            raise ConfigError("--env is required without --config")
        if "episodes" not in explicit:
            raise ConfigError("--episodes is required without --config")
        return [harness.ExperimentConfig(env=spec, **explicit) for spec in specs]

    document = harness.read_document(args.config)
    loaded = harness.ExperimentConfig.from_dict(document)
    changed = {name: value for name, value in explicit.items() if getattr(loaded, name) != value}
    conflicts = [_flag(name) for name in changed if name in document]
    if specs and (len(specs) != 1 or specs[0] != loaded.env):
        conflicts.append("--env")
    if conflicts:
        raise ConfigError(f"{', '.join(conflicts)} conflicts with {args.config}")
    for name, value in changed.items():
        logger.warning("%s=%s overrides the default left by %s", _flag(name), value, args.config)
    return [dataclasses.replace(loaded, **changed)]


def expand_batch(args, configs) -> typing.List[harness.ExperimentConfig]:
    """Cross configs with the ``--algo`` and ``--seeds`` batch axes."""
    algorithms = [ALGORITHMS[algo] for algo in args.algo] if args.algo else [None]
    seeds = args.seeds or [None]
    runs = []
    for config, algorithm, seed in itertools.product(configs, algorithms, seeds):
        changes = {}
        if algorithm is not None:
            changes["algorithm"] = algorithm
        if seed is not None:
            changes["seed"] = seed
        runs.append(dataclasses.replace(config, **changes))
    return runs


def _jobs(args) -> int:
    if args.jobs is None:
        return base.config.getint("parallel", "n_jobs")
    return args.jobs


def write_summary(path, rows):
    """Write ``summary.csv`` rows of (config, final regret)."""
    with open(path, "w", encoding="utf-8", newline="") as summary_file:
        writer = csv.writer(summary_file, lineterminator="\n")
        writer.writerow(SUMMARY_COLUMNS)
        for config, regret in rows:
            writer.writerow(
                [
                    harness.env_label(config.env),
                    config.algorithm,
                    config.seed,
                    config.episodes,
                    misc.format_float(regret),
                ]
            )


def write_chart(chart_path, summary_path):
    """Write a Vega-Lite box plot of the final regrets in ``summary_path``."""
    chart_dir = os.path.dirname(os.path.abspath(chart_path))
    chart = {
        "$schema": "https://vega.github.io/schema/vega-lite/v5.json",
        "data": {"url": os.path.relpath(os.path.abspath(summary_path), chart_dir)},
        "mark": "boxplot",
        "encoding": {
            "x": {"field": "env", "type": "nominal"},
            "y": {"field": "final_cumulative_regret", "type": "quantitative"},
            "color": {"field": "algorithm", "type": "nominal"},
        },
    }
    with open(chart_path, "w", encoding="utf-8") as chart_file:
        json.dump(chart, chart_file, indent=2)
        chart_file.write("\n")


def cmd_run(args) -> int:
    """Run one experiment."""
    (config,) = base_configs(args)
    trace, _ = harness.run_experiment(config)
    if config.output is None:
        harness.dump_trace(trace, sys.stdout)
    return 0


def cmd_diagnose(args) -> int:
    """Print the diagnostics JSON of one environment."""
    specs = env_specs(args)
    if args.config is not None:
        loaded = harness.load_config(args.config)
        conflicts = [
            _flag(name)
            for name in ("episodes", "delta")
            if getattr(args, name) is not None and getattr(args, name) != getattr(loaded, name)
        ]
        if specs and specs[0] != loaded.env:
            conflicts.append("--env")
        if conflicts:
            raise ConfigError(f"{', '.join(conflicts)} conflicts with {args.config}")
        spec, episodes, delta = loaded.env, loaded.episodes, loaded.delta
    elif specs:
        spec = specs[0]
        episodes = 1 if args.episodes is None else args.episodes
        delta = args.delta or base.config.getfloat("experiment", "delta")
    else:
        raise ConfigError("--env is required without --config")

    mdp = environments.build(spec)
    report = harness.ExperimentReport(
        diagnostics=diagnostics(mdp),
        bounds=theoretical_bounds(mdp, episodes, delta),
        constants=BonusConstants.for_problem(
            mdp.num_states, mdp.num_actions, mdp.horizon, episodes, delta
        ),
    )
    json.dump(schemas.diagnostics.dump(report), sys.stdout, indent=2)
    sys.stdout.write("\n")
    return 0


def cmd_sweep(args) -> int:
    """Run every grid point, algorithm and seed."""
    os.makedirs(args.out, exist_ok=True)
    runs = expand_batch(args, base_configs(args))
    runs = [
        dataclasses.replace(run, output=os.path.join(args.out, harness.run_name(index, run) + ".csv"))
        for index, run in enumerate(runs)
    ]
    traces = harness.run_batch(runs, n_jobs=_jobs(args), progress=sys.stderr.isatty())

    summary_path = os.path.join(args.out, "summary.csv")
    write_summary(summary_path, [(run, trace.cumulative_regret) for run, trace in zip(runs, traces)])
    if args.chart:
        write_chart(args.chart, summary_path)
    return 0


def cmd_compare(args) -> int:
    """Compare learners on one environment over a common seed set."""
    os.makedirs(args.out, exist_ok=True)
    (config,) = base_configs(args)
    algorithms = [ALGORITHMS[algo] for algo in args.algo] if args.algo else [config.algorithm]
    configs = [dataclasses.replace(config, algorithm=algorithm) for algorithm in algorithms]
    seeds = args.seeds or [config.seed]

    entries = harness.compare(
        configs, seeds, n_jobs=_jobs(args), output_dir=args.out, progress=sys.stderr.isatty()
    )

    summary_path = os.path.join(args.out, "summary.csv")
    rows = []
    for config, entry in zip(configs, entries):
        for seed, regret in zip(entry.seeds, entry.final_regrets):
            rows.append((dataclasses.replace(config, seed=seed), regret))
    write_summary(summary_path, rows)

    with open(os.path.join(args.out, "comparison.json"), "w", encoding="utf-8") as out_file:
        json.dump(schemas.comparison_entries.dump(entries), out_file, indent=2)
        out_file.write("\n")

    if args.chart:
        write_chart(args.chart, summary_path)
    return 0


def main(argv=None) -> int:
    """Entry point of the ``euler`` command.

    :returns: exit status: 0 on success, 2 on usage or configuration errors,
              1 on runtime failures.

    """
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code or 0

    base.configure_logging("DEBUG" if args.verbose else None)

    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (OSError, EulerError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1

import os
import sys
import argparse
import itertools

import numpy as np
from progressbar import ProgressBar

local_dir = os.path.dirname(os.path.realpath(__file__))  # noqa
os.sys.path.append(os.path.join(local_dir, os.path.pardir))  # noqa

from euler import environments, harness  # noqa: E402
from euler.base import configure_logging  # noqa: E402
from euler.concentration import BernsteinInterval, BonusConstants, coverage_probe  # noqa: E402
from euler.concentration import weighted_two_norm  # noqa: E402
from euler.mdp import environmental_norm, optimal_values, policy_values  # noqa: E402
from euler.mdp import PolicyTable, successor_range  # noqa: E402


def run_seeds(spec, episodes, seeds, algorithm="euler_bernstein", n_jobs=None):
    configs = [
        harness.ExperimentConfig(env=spec, episodes=episodes, seed=seed, algorithm=algorithm)
        for seed in seeds
    ]
    return harness.run_batch(configs, n_jobs=n_jobs, progress=True)


def random_instance(rng, S, A, H):
    spec = environments.RandomSpec(S, A, H, seed=int(rng.integers(2**31)))
    return environments.build(spec)


def brute_force_values(mdp):
    S, A, H = mdp.num_states, mdp.num_actions, mdp.horizon
    best = np.full(S, -np.inf)
    for flat in itertools.product(range(A), repeat=S * H):
        actions = np.array(flat).reshape(H, S)
        best = np.maximum(best, policy_values(mdp, PolicyTable(actions)).at(1))
    return best


def check_oracle(args):
    """Optimal values match policy enumeration on 20 small instances."""
    rng = np.random.default_rng(0)
    shapes = [(S, A, H) for S, A, H in itertools.product(range(1, 5), repeat=3) if S * A * H <= 12]
    worst = 0.0
    for index in ProgressBar(max_value=20)(range(20)):
        mdp = random_instance(rng, *shapes[index % len(shapes)])
        values, _ = optimal_values(mdp)
        worst = max(worst, float(np.max(np.abs(values.at(1) - brute_force_values(mdp)))))
    return worst <= 1e-10, f"max error {worst:.3g}"


def check_brackets(args):
    """At most 5% of random-MDP runs ever leave the bracket."""
    configs = [
        harness.ExperimentConfig(
            env=environments.RandomSpec(4, 2, 4, seed=seed), episodes=1000, seed=seed
        )
        for seed in range(args.runs)
    ]
    failed = 0
    for trace in harness.run_batch(configs, n_jobs=args.jobs, progress=True):
        failed += harness.optimism_violation_rate(trace) > 0.0
    rate = failed / args.runs
    return rate <= 0.05, f"violating runs {rate:.3f}"


def check_convergence(args):
    """Late-episode regret on the 6-chain is at most 5% of the optimal value."""
    spec = environments.ChainSpec(6)
    values, _ = optimal_values(environments.build(spec))
    traces = run_seeds(spec, 5000, range(1, 6), n_jobs=args.jobs)
    tail = np.mean([harness.summarize(trace).tail_mean_regret for trace in traces])
    limit = 0.05 * values.at(1)[0]
    return tail <= limit, f"tail regret {tail:.4g} vs {limit:.4g}"


def check_deterministic(args):
    """Regret on the deterministic 5-chain plateaus once K doubles.

    Every draw is deterministic, so one seed per horizon suffices. The lower
    order bonus decays like ``(4J + B_p) / n`` with both constants linear in the
    logarithmic factor, so the plateau grows only with ``log K``.

    """
    spec = environments.DeterministicChainSpec(5)
    short, doubled = (
        run_seeds(spec, episodes, [1], n_jobs=args.jobs)[0].cumulative_regret
        for episodes in (2000, 4000)
    )
    limit = 1.25 * short
    return doubled <= limit, f"regret {doubled:.6g} at K=4000 vs {limit:.6g}"



def check_hoeffding_contrast(args):
    """EULER's median regret on the 10-chain does not exceed the Hoeffding baseline's."""
    spec = environments.ChainSpec(10)
    configs = [
        harness.ExperimentConfig(env=spec, episodes=10**4, algorithm=algorithm)
        for algorithm in ("euler_bernstein", "euler_hoeffding_baseline")
    ]
    euler_entry, baseline = harness.compare(configs, range(10), n_jobs=args.jobs)
    return (
        euler_entry.median_regret <= baseline.median_regret,
        f"medians {euler_entry.median_regret:.4g} vs {baseline.median_regret:.4g}",
    )


def check_diagnostics(args):
    """Environmental norm and successor range stay within their bounds."""
    norms = {n: environmental_norm(environments.build(environments.ChainSpec(n))) for n in (4, 8, 16)}
    chain_ok = all(norm <= 2.0 / n for n, norm in norms.items())
    det_ok = environmental_norm(environments.build(environments.DeterministicChainSpec(5))) == 0.0
    bandit = environments.build(environments.bandit_from_seed(5, 3, seed=1))
    bandit_ok = successor_range(bandit) <= 1.0
    return chain_ok and det_ok and bandit_ok, f"chain norms {norms}"


def check_horizon(args):
    """Sparse-reward regret barely grows with the horizon."""
    finals = []
    for horizon in (5, 10, 20):
        spec = environments.SparseRewardSpec(horizon=horizon, states=5, actions=2, slip=0.1)
        configs = [
            harness.ExperimentConfig(env=spec, episodes=5000, seed=seed, q_cap=1.0)
            for seed in range(5)
        ]
        traces = harness.run_batch(configs, n_jobs=args.jobs, progress=True)
        finals.append(float(np.mean([trace.cumulative_regret for trace in traces])))
    ratio = max(finals) / max(min(finals), 1e-12)
    return ratio <= 2.0, f"final regrets {finals}"


def check_coverage(args):
    """Concentration intervals fail at most delta' of the time."""
    constants = BonusConstants.for_problem(5, 2, 5, 1000, 0.05)
    transition = coverage_probe([0.5, 0.5], [0.0, 5.0], "bernstein_phi", 10**4, 50, constants, 1)
    reward = coverage_probe([0.5, 0.5], [0.0, 1.0], "reward_bonus", 10**4, 50, constants, 2)

    interval = BernsteinInterval(constants)
    rng = np.random.default_rng(3)
    lipschitz = True
    for _ in range(1000):
        p = rng.dirichlet(np.ones(4))
        v, w = rng.uniform(0.0, 5.0, size=(2, 4))
        change = abs(interval.g(p, v) - interval.g(p, w))
        lipschitz &= bool(change <= interval.b_v * weighted_two_norm(p, v - w) + 1e-9)
    constant = interval.g(rng.dirichlet(np.ones(4)), np.full(4, 2.5)) == 0.0

    passed = max(transition, reward) <= constants.delta_prime and lipschitz and constant
    return passed, f"failure rates {transition:.4g}, {reward:.4g}"


def check_reproducibility(args):
    """Identical runs write identical traces for every environment family."""
    specs = [
        environments.ChainSpec(5),
        environments.DeterministicChainSpec(4),
        environments.bandit_from_seed(3, 2, seed=0),
        environments.SparseRewardSpec(horizon=5, states=4, actions=2, slip=0.1),
        environments.RandomSpec(3, 2, 4, seed=0),
    ]
    identical = True
    for spec in specs:
        contents = []
        for attempt in range(2):
            path = os.path.join(args.workdir, f"{spec.kind}-{attempt}.csv")
            config = harness.ExperimentConfig(env=spec, episodes=200, seed=7, output=path)
            harness.run_experiment(config)
            with open(path, "rb") as trace_file:
                contents.append(trace_file.read())
        identical &= contents[0] == contents[1]
    return identical, "byte-identical traces" if identical else "traces differ"


CHECKS = {
    "oracle": check_oracle,
    "brackets": check_brackets,
    "convergence": check_convergence,
    "deterministic": check_deterministic,
    "hoeffding": check_hoeffding_contrast,
    "diagnostics": check_diagnostics,
    "horizon": check_horizon,
    "coverage": check_coverage,
    "reproducibility": check_reproducibility,
}


def main():
    """Run the long acceptance experiments"""

    parser = argparse.ArgumentParser(description=main.__doc__)
    parser.add_argument("checks", nargs="*", help=f"checks to run, from {list(CHECKS)}")
    parser.add_argument("--jobs", type=int, default=-1, help="parallel workers")
    parser.add_argument("--runs", type=int, default=50, help="runs for the bracket check")
    parser.add_argument("--workdir", default=".", help="directory for reproducibility traces")
    args = parser.parse_args()
    unknown = sorted(set(args.checks) - set(CHECKS))
    if unknown:
        parser.error(f"unknown checks: {unknown}")

    configure_logging("WARNING")

    failures = 0
    for name in args.checks or list(CHECKS):
        check = CHECKS[name]
        print(f"Running {name}: {check.__doc__}")
        passed, detail = check(args)
        failures += not passed
        print(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    sys.exit(1 if failures else 0)


if __name__ == "__main__":
    main()

"""Command-line entry point: ``sliceserve {schedule,sweep,simulate,validate-profile}``."""

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

from sliceserve.config import load_sim_config
from sliceserve.profiles import ProfileError, load_profile_file, max_workload, profile_from_document
from sliceserve.reporting import parse_rates, run_report, run_sweep, write_sweep_csv
from sliceserve.scheduler import (
    SchedulerConfig,
    SchedulingInstance,
    schedule,
    schedule_branch_and_bound,
    schedule_brute_force,
    schedule_knapsack_dp,
)
from sliceserve.sim import ConfigError, run_simulation
from sliceserve.units import parse_duration, us_to_ms

DEFAULT_RATES = "4:3748:4,3750"

GLOBAL_DEFAULTS = {
    "profile": None,
    "deadline": "8s",
    "minibatches": None,
    "workers": 1,
    "seed": None,
    "out": None,
    "method": "auto",
    "dp_resolution": None,
    "node_budget": SchedulerConfig().node_budget,
}


class CliError(Exception):
    pass


def _global_flags():
    # SUPPRESS lets the flags appear before or after the subcommand
    p = argparse.ArgumentParser(add_help=False)
    s = argparse.SUPPRESS
    p.add_argument("--profile", default=s, help="profile JSON file")
    p.add_argument("--deadline", default=s, help="deadline with unit, e.g. 8s or 8000ms (default 8s)")
    p.add_argument("--minibatches", type=int, default=s, help="number of mini-batches N_mb")
    p.add_argument("--workers", type=int, default=s, help="number of inference workers")
    p.add_argument("--seed", type=int, default=s, help="sample per-instance correctness with this seed")
    p.add_argument("--out", default=s, help="output path")
    p.add_argument("--method", choices=["auto", "bnb", "dp", "brute"], default=s, help="solver (default auto)")
    p.add_argument("--dp-resolution", default=s, help="knapsack time resolution, e.g. 1ms")
    p.add_argument("--node-budget", type=int, default=s, help="branch-and-bound node budget")
    return p


def _opt(args, name):
    return getattr(args, name, GLOBAL_DEFAULTS[name])


def _duration(args, name):
    value = _opt(args, name)
    if value is None:
        return None
    try:
        us = parse_duration(value)
    except ValueError as exc:
        raise CliError(f"--{name.replace('_', '-')}: {exc}") from exc
    if us <= 0:
        raise CliError(f"--{name.replace('_', '-')}: must be positive")
    return us


def _profile(args):
    path = _opt(args, "profile")
    if path is None:
        raise CliError("--profile is required")
    return load_profile_file(path)


def _scheduler_config(args):
    budget = _opt(args, "node_budget")
    if budget < 0:
        raise CliError("--node-budget: must be >= 0")
    return SchedulerConfig(node_budget=budget, dp_resolution_us=_duration(args, "dp_resolution"))


def cmd_schedule(args):
    ps = _profile(args)
    n_mb = _opt(args, "minibatches")
    if n_mb is None or n_mb < 1:
        raise CliError("--minibatches must be a positive integer")
    instance = SchedulingInstance(ps, _duration(args, "deadline"), n_mb)
    cfg = _scheduler_config(args)
    method = _opt(args, "method")
    if method == "auto":
        policy = schedule(instance, cfg)
    elif method == "bnb":
        policy = schedule_branch_and_bound(instance, cfg.node_budget)
    elif method == "dp":
        policy = schedule_knapsack_dp(instance, cfg.dp_resolution_us)
    else:
        policy = schedule_brute_force(instance)

    print(f"profile: {ps.name} (S_mb={ps.mini_batch_size}, K={ps.K})")
    print(f"deadline: {us_to_ms(instance.deadline_us):g} ms, mini-batches: {n_mb}")
    print(f"{'slice_rate':>10} {'accuracy':>9} {'t_ms':>8} {'n':>6}")
    for sm, n in zip(ps.sub_models, policy.counts):
        print(f"{sm.slice_rate:>10g} {sm.accuracy:>9.4f} {sm.batch_latency_ms:>8.2f} {n:>6d}")
    eta = ",".join(str(n) for n in policy.counts)
    print(f"eta: [{eta}]")
    print(f"p_eff: {policy.theoretical_effective_accuracy:.6f}")
    print(f"solver: {policy.solver_used.value}")
    out = _opt(args, "out")
    if out:
        doc = {
            "counts": list(policy.counts),
            "theoretical_p_eff": policy.theoretical_effective_accuracy,
            "solver_used": policy.solver_used.value,
            "deadline_ms": us_to_ms(instance.deadline_us),
            "num_minibatches": n_mb,
        }
        _write_json(out, doc)
    return 0


def cmd_sweep(args):
    ps = _profile(args)
    out = _opt(args, "out")
    if not out:
        raise CliError("--out is required for sweep")
    try:
        rates = parse_rates(args.rates)
    except ValueError as exc:
        raise CliError(f"--rates: {exc}") from exc
    if not rates:
        raise CliError("--rates: must contain at least one rate")
    workers = _opt(args, "workers")
    if workers < 1:
        raise CliError("--workers: must be >= 1")
    try:
        rows = run_sweep(
            ps, _duration(args, "deadline"), rates, num_workers=workers, seed=_opt(args, "seed"),
            scheduler=_scheduler_config(args), baselines=not args.no_figures, parallel=args.parallel,
        )
    except ValueError as exc:
        raise CliError(str(exc)) from exc
    out = Path(out)
    try:
        write_sweep_csv(rows, ps, out)
    except OSError as exc:
        raise CliError(f"cannot write {out}: {exc.strerror or exc}") from exc
    print(f"wrote {len(rows)} rows to {out}")
    if not args.no_figures:
        from sliceserve.plots import render_sweep_figures

        fig_dir = Path(args.figures) if args.figures else out.parent
        for path in render_sweep_figures(rows, ps, fig_dir, stem=out.stem):
            print(f"wrote {path}")
    return 0


def cmd_simulate(args):
    doc, config = load_sim_config(args.config)
    workers = getattr(args, "workers", None)
    seed = getattr(args, "seed", None)
    if workers is not None or seed is not None:
        changes = {}
        if workers is not None:
            changes["num_workers"] = workers
        if seed is not None:
            changes.update(correctness="sampled", seed=seed)
        config = replace(config, **changes)
        config.validate()
    metrics = run_simulation(config)
    print(f"tasks: {metrics.num_tasks}, instances: {metrics.num_instances}, workers: {config.num_workers}")
    print(f"theoretical p_eff: {metrics.theoretical_p_eff:.6f}")
    print(f"measured p_eff:    {metrics.measured_p_eff:.6f}")
    print(f"drop rate:         {metrics.drop_rate:.6f}")
    print(f"throughput:        {metrics.throughput:.2f} instances/s")
    print(f"latency p50/p95/p99: {metrics.latency_p50_ms:.2f} / {metrics.latency_p95_ms:.2f} / "
          f"{metrics.latency_p99_ms:.2f} ms")
    out = _opt(args, "out")
    if out:
        _write_json(out, run_report(doc, config, metrics))
        print(f"wrote {out}")
    return 0


def validate_profile_document(path):
    """Return ``(profile_set or None, errors, warnings)`` for a profile file."""
    errors, warnings = [], []
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as exc:
        return None, [f"cannot read profile file {path}: {exc.strerror or exc}"], warnings
    except json.JSONDecodeError as exc:
        return None, [f"profile is not valid JSON: {exc}"], warnings

    if isinstance(doc, dict) and doc.get("accuracy_unit", "fraction") == "fraction":
        accs = [sm.get("accuracy") for sm in doc.get("sub_models", []) if isinstance(sm, dict)]
        accs = [a for a in accs if isinstance(a, (int, float))]
        if any(a > 1 for a in accs):
            warnings.append(
                "accuracy values look like percentages but accuracy_unit is not 'percent'"
            )
    try:
        ps = profile_from_document(doc)
    except ProfileError as exc:
        errors.append(str(exc))
        return None, errors, warnings

    by_rate = sorted(ps.sub_models, key=lambda sm: sm.slice_rate)
    if any(a.accuracy >= b.accuracy for a, b in zip(by_rate, by_rate[1:])):
        warnings.append("accuracy is not increasing in slice rate; the scheduler does not rely on it")
    if any(a.batch_latency_us >= b.batch_latency_us for a, b in zip(by_rate, by_rate[1:])):
        warnings.append("batch latency is not increasing in slice rate")
    return ps, errors, warnings


def cmd_validate_profile(args):
    path = args.path or _opt(args, "profile")
    if path is None:
        raise CliError("a profile path is required")
    ps, errors, warnings = validate_profile_document(path)
    for w in warnings:
        print(f"WARNING: {w}")
    for e in errors:
        print(f"ERROR: {e}")
    if ps is None:
        return 1
    print(f"profile: {ps.name} (S_mb={ps.mini_batch_size}, K={ps.K})")
    print(f"{'i':>2} {'slice_rate':>10} {'accuracy':>9} {'t_ms':>8} {'max_workload':>13}")
    w_hat = [max_workload(ps, sm.index) for sm in ps.sub_models]
    for sm, w in zip(ps.sub_models, w_hat):
        print(f"{sm.index:>2} {sm.slice_rate:>10g} {sm.accuracy:>9.4f} {sm.batch_latency_ms:>8.2f} {w:>13.2f}")
    print("W_hat = [" + ", ".join(f"{w:.2f}" for w in w_hat) + "]")
    print("OK")
    return 0


def _write_json(path, doc):
    try:
        with open(path, "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=False)
            fh.write("\n")
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}") from exc


def build_parser():
    flags = _global_flags()
    parser = argparse.ArgumentParser(prog="sliceserve", parents=[flags], description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("schedule", parents=[flags], help="compute the policy for one (D, N_mb)")
    p.set_defaults(func=cmd_schedule)

    p = sub.add_parser("sweep", parents=[flags], help="simulate an ingest-rate sweep and write CSV")
    p.add_argument("--rates", default=DEFAULT_RATES,
                   help=f"comma list of rates or start:stop:step ranges (default {DEFAULT_RATES})")
    p.add_argument("--figures", help="directory for figures (default: next to the CSV)")
    p.add_argument("--no-figures", action="store_true", help="skip figures and static baselines")
    p.add_argument("--parallel", action="store_true", help="run workers on a thread pool")
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", parents=[flags], help="run a simulation config document")
    p.add_argument("config", help="simulation config JSON")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("validate-profile", parents=[flags], help="check a profile file")
    p.add_argument("path", nargs="?", help="profile JSON (or use --profile)")
    p.set_defaults(func=cmd_validate_profile)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except (CliError, ProfileError, ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry points.

Subcommands share a config-file plan (TOML or JSON) plus a handful of
overriding flags; outputs go to --out (format inferred from the suffix) or
stdout. Exit codes: 0 success, 2 invalid configuration or input, 3 numerical
failure (search radius exhausted, singular channel, solver not converged).
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys

from .channels import load_complex_matrix, save_complex_matrix
from .errors import (
    DegenerateInputError,
    DomainError,
    RadiusExhaustedError,
    SingularChannelError,
    SrpmError,
)
from .harness import (
    FORMATS,
    SCHEMA_VERSION,
    ExperimentPlan,
    SweepResult,
    analyze_aber,
    analyze_capacity,
    bench_detectors,
    build_static_setup,
    parse_config,
    run_aber_sweep,
    run_capacity_sweep,
    sweep_to_csv,
    sweep_to_json,
    write_sweep,
)

NUMERICAL_ERRORS = (
    RadiusExhaustedError,
    SingularChannelError,
    DomainError,
    DegenerateInputError,
)


def _add_common(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--config", help="plan file (TOML or JSON)")
    sub.add_argument("--out", help="output path (default: stdout)")
    sub.add_argument(
        "--format", choices=FORMATS, help="output format (default: by suffix, csv)"
    )
    sub.add_argument("--seed", type=int, help="override the plan seed")
    sub.add_argument("--threads", type=int, help="worker threads per sweep point")
    sub.add_argument(
        "--timing",
        action="store_true",
        help="record wall-clock columns (breaks byte-for-byte reproducibility)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="srpm",
        description="RIS phase modulation simulation and analysis toolkit",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    specs = (
        ("simulate-aber", "Monte Carlo bit error sweep with analytical companion"),
        ("simulate-capacity", "capacity sweep with mutual-information estimate"),
        ("analyze-aber", "analytical bit error bound sweep (no simulation)"),
        ("analyze-capacity", "analytical capacity sweep (no simulation)"),
        ("optimize-precoder", "solve for the transmit precoder on a fixed link"),
        ("bench-detectors", "visited-node and timing comparison of detectors"),
    )
    for name, descr in specs:
        sub = subs.add_parser(name, help=descr, description=descr)
        _add_common(sub)
        if name == "optimize-precoder":
            sub.add_argument(
                "--g-matrix",
                help="binary dump of the transmitter-to-surface matrix to load",
            )
            sub.add_argument(
                "--dump-g",
                help="write the drawn transmitter-to-surface matrix here",
            )
    return parser


def _load_plan(args: argparse.Namespace) -> ExperimentPlan:
    plan = parse_config(args.config) if args.config else ExperimentPlan()
    overrides: dict = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.threads is not None:
        overrides["threads"] = args.threads
    if args.timing:
        overrides["timing"] = True
    if args.out is not None:
        overrides["out"] = args.out
    if args.format is not None:
        overrides["format"] = args.format
    if overrides:
        plan = dataclasses.replace(plan, **overrides)
    return plan


def _emit(result: SweepResult, plan: ExperimentPlan) -> None:
    if plan.out:
        write_sweep(result, plan.out, plan.format)
        return
    if plan.format == "json":
        sys.stdout.write(sweep_to_json(result))
    else:
        sys.stdout.write(sweep_to_csv(result))


def _run_sweep(args: argparse.Namespace, runner) -> int:
    plan = _load_plan(args)
    _emit(runner(plan), plan)
    return 0


def _run_optimize(args: argparse.Namespace) -> int:
    plan = _load_plan(args)
    plan = dataclasses.replace(plan, precoder="optimized")
    g = load_complex_matrix(args.g_matrix) if args.g_matrix else None
    setup = build_static_setup(plan, plan.config, g=g)
    if args.dump_g:
        save_complex_matrix(args.dump_g, setup.static.g)
    sol = setup.sdr
    payload = {
        "schema_version": SCHEMA_VERSION,
        "w": [[float(v.real), float(v.imag)] for v in sol.w],
        "objective": sol.objective,
        "extracted_objective": sol.extracted_objective,
        "rank_one_ratio": sol.rank_one_ratio,
        "iterations": sol.iterations,
        "converged": sol.converged,
        "weighting": plan.precoder_weighting,
        "snr_db": plan.precoder_snr_db,
        "seed": plan.seed,
    }
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if plan.out:
        with open(plan.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return 0 if sol.converged else 3


RUNNERS = {
    "simulate-aber": lambda a: _run_sweep(a, run_aber_sweep),
    "simulate-capacity": lambda a: _run_sweep(a, run_capacity_sweep),
    "analyze-aber": lambda a: _run_sweep(a, analyze_aber),
    "analyze-capacity": lambda a: _run_sweep(a, analyze_capacity),
    "optimize-precoder": _run_optimize,
    "bench-detectors": lambda a: _run_sweep(a, bench_detectors),
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return RUNNERS[args.command](args)
    except NUMERICAL_ERRORS as exc:
        print(f"srpm: numerical failure: {exc}", file=sys.stderr)
        return 3
    except SrpmError as exc:
        print(f"srpm: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"srpm: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

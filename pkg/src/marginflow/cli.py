"""Command-line entry point.

Subcommands: run, oracle, compare, selfcheck, version.
Exit codes: 0 success, 2 config error, 3 numeric failure, 4 assumption
violation.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import __version__
from .config import ExperimentConfig
from .errors import AssumptionError, ConfigError, DomainError, MarginflowError, NumericError


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="marginflow",
        description="Adaptive-optimizer trajectory simulator and max-margin certifier",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="execute one experiment")
    run_p.add_argument("--config", required=True, help="TOML experiment config")
    run_p.add_argument("--out", default=None,
                       help="output directory (default: [output].dir from the "
                            "config, else runs/latest)")
    run_p.add_argument("--seed", type=int, default=None, help="override init seed")
    budget = run_p.add_mutually_exclusive_group()
    budget.add_argument("--max-steps", type=int, default=None, help="discrete step budget")
    budget.add_argument("--flow-time", type=float, default=None, help="flow-time horizon")
    run_p.add_argument("--resume", default=None, help="state.json to resume from")
    run_p.add_argument("--allow-nonseparable", action="store_true",
                       help="run even if the dataset is not linearly separable")

    oracle_p = sub.add_parser("oracle", help="exact max-margin solution for a config")
    oracle_p.add_argument("--config", required=True)

    cmp_p = sub.add_parser("compare", help="compare two completed run directories")
    cmp_p.add_argument("dir_a")
    cmp_p.add_argument("dir_b")

    sub.add_parser("selfcheck", help="run the bundled invariant battery")
    sub.add_parser("version", help="print the package version")
    return parser


def _cmd_run(args) -> int:
    from .runner import run_experiment

    config = ExperimentConfig.load(args.config)
    out_dir = args.out or config.output.get("dir") or "runs/latest"
    resume_state = None
    if args.resume:
        with open(args.resume) as fh:
            resume_state = json.load(fh)
    summary = run_experiment(
        config,
        out_dir,
        seed=args.seed,
        max_steps=args.max_steps,
        flow_time=args.flow_time,
        allow_nonseparable=args.allow_nonseparable,
        resume_state=resume_state,
    )
    print(json.dumps({
        "out": out_dir,
        "t1": summary["t1"],
        "final_loss": summary["final"]["loss"] if summary["final"] else None,
        "oracle": summary["oracle"],
    }, indent=2))
    return 0


def _cmd_oracle(args) -> int:
    from .kkt import svm_oracle

    config = ExperimentConfig.load(args.config)
    data = config.build_dataset()
    model = config.build_model()
    if model.kind != "linear":
        raise ConfigError("the exact oracle supports only linear models")
    sol = svm_oracle(data)
    print(sol.to_json())
    return 0


def _cmd_compare(args) -> int:
    from .runner import compare_runs

    print(json.dumps(compare_runs(args.dir_a, args.dir_b), indent=2))
    return 0


def _cmd_selfcheck(_args) -> int:
    from .selfcheck import selfcheck

    results = selfcheck(verbose=True)
    failures = [k for k, v in results.items() if v != "pass"]
    if failures:
        print(f"FAILED: {', '.join(failures)}", file=sys.stderr)
        return 1
    print("all invariants pass")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "oracle":
            return _cmd_oracle(args)
        if args.command == "compare":
            return _cmd_compare(args)
        if args.command == "selfcheck":
            return _cmd_selfcheck(args)
        if args.command == "version":
            print(__version__)
            return 0
    except (ConfigError, DomainError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return 3
    except AssumptionError as exc:
        print(f"assumption violation: {exc}", file=sys.stderr)
        return 4
    except MarginflowError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

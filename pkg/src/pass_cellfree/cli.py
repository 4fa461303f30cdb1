"""Command line entry point: ``pass-cellfree {run,validate,demo}``."""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .harness import ExperimentSpec, demo_spec, run_and_write
from .numerics import NumericalError
from .scenario import ConfigError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2


def _parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pass-cellfree", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true", help="log solver progress")
    sub = p.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment spec and write CSVs")
    run.add_argument("spec", help="JSON experiment spec")
    run.add_argument("--output", help="override the spec's detail CSV path")

    val = sub.add_parser("validate", help="check an experiment spec without running it")
    val.add_argument("spec", help="JSON experiment spec")

    demo = sub.add_parser("demo", help="run the built-in reference setup")
    demo.add_argument("--output", default="demo_results.csv")
    demo.add_argument("--drops", type=int, default=2)
    demo.add_argument("--print-spec", action="store_true", help="print the demo spec as JSON and exit")
    return p


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.ERROR,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        if args.command == "demo":
            spec = demo_spec(args.output, args.drops)
            if args.print_spec:
                print(json.dumps(spec.model_dump(), indent=2))
                return EXIT_OK
        else:
            spec = ExperimentSpec.from_file(args.spec)
            if getattr(args, "output", None):
                spec = ExperimentSpec.from_dict({**spec.model_dump(), "output": args.output})
        if args.command == "validate":
            n = len(spec.sweep_values) * spec.n_drops * len(spec.schemes)
            print(f"ok: {n} runs ({spec.sweep_var} sweep, {len(spec.schemes)} schemes)")
            return EXIT_OK
        detail, agg = run_and_write(spec)
        print(f"wrote {detail} and {agg}")
        return EXIT_OK
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, FloatingPointError, ArithmeticError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())

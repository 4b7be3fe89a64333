"""Batch command-line interface for the acceptance experiments.

Subcommands mirror the experiments; each writes report.json and sample
CSVs under the output directory and prints one verdict line.  The exit
code is 0 only when every verdict passes and replica failure rates stay
below 5 percent.
"""

from __future__ import annotations

import argparse
import sys

from .experiments import _RUNNERS, ExperimentConfig, run_all

_SUBCOMMANDS = ("identity", "sup-localtime", "profile", "env-approx",
                "exponent", "position", "all")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="broxsim",
        description="Distributional experiments for a diffusion in a Brownian potential",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _SUBCOMMANDS:
        p = sub.add_parser(name, help=f"run the {name} experiment" if name != "all"
                           else "run every experiment, sharing replica work")
        p.add_argument("--config", help="JSON file of ExperimentConfig fields")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--workers", type=int, help="worker process count")
        p.add_argument("--out", help="output directory for report.json and CSVs")
    return parser


def _load_config(args):
    overrides = {"seed": args.seed, "workers": args.workers, "out": args.out}
    if args.config:
        return ExperimentConfig.from_json(args.config, **overrides)
    return ExperimentConfig(**{k: v for k, v in overrides.items() if v is not None})


def _verdict_line(report):
    status = "PASS" if report.overall_pass else "FAIL"
    details = " ".join(f"{k}={'ok' if v else 'FAIL'}" for k, v in report.verdicts.items())
    return f"[{status}] {report.experiment}: {details} ({report.wall_clock_seconds:.1f}s)"


def main(argv=None):
    args = _build_parser().parse_args(argv)
    config = _load_config(args)
    if args.command == "all":
        reports = run_all(config)
    else:
        reports = {args.command: _RUNNERS[args.command](config)}
    ok = True
    for report in reports.values():
        print(_verdict_line(report))
        ok = ok and report.overall_pass
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())

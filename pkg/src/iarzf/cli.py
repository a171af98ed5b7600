"""Command line entry point ``iarzf``.

::

    iarzf run <plan.json>
    iarzf fig <id> [--trials T] [--seed S] [--out DIR] [--de-only]
    iarzf optimize <plan.json>

``IARZF_THREADS`` caps the worker threads of the Monte-Carlo engine.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .experiments import FIGURES, ExperimentPlan, PlanError, optimize_plan, run_figure, run_plan
from .system_model import ConfigError

log = logging.getLogger("iarzf")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="iarzf", description="Multi-cell iaRZF precoding experiments")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run an experiment plan")
    r.add_argument("plan", type=Path)

    f = sub.add_parser("fig", help="run a built-in figure pipeline")
    f.add_argument("id", choices=sorted(FIGURES))
    f.add_argument("--trials", type=int, default=500)
    f.add_argument("--seed", type=int, default=0)
    f.add_argument("--out", type=Path, default=Path("results"))
    f.add_argument("--de-only", action="store_true", help="skip Monte-Carlo rows")

    o = sub.add_parser("optimize", help="grid-search precoder weights")
    o.add_argument("plan", type=Path)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.command == "run":
            paths = run_plan(ExperimentPlan.from_json(args.plan))
        elif args.command == "fig":
            if args.trials < 1:
                raise PlanError("trials must be positive")
            paths = run_figure(args.id, args.out, args.trials, args.seed, args.de_only)
        else:
            paths = optimize_plan(args.plan)
    except (PlanError, ConfigError, OSError, ValueError, RuntimeError) as exc:
        print(f"iarzf: error: {exc}", file=sys.stderr)
        return 1
    for p in paths:
        print(p)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

"""Solve an LP file with HiGHS (via scipy) and write an adapter solution file.

Usage::

    python -m pra.adapters.scipy_lp MODEL.lp SOLUTION.sol [--time-limit SECONDS]

Suitable as an external backend command:
``python -m pra.adapters.scipy_lp {model_path} {solution_path} --time-limit {time_limit}``
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from ..lpread import LpParseError, read_lp
from ..solver import BackendFailure, ScipyBackend, write_solution_file


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(prog="python -m pra.adapters.scipy_lp", description=__doc__.split("\n")[0])
    ap.add_argument("model")
    ap.add_argument("solution")
    ap.add_argument("--time-limit", type=float, default=None)
    args = ap.parse_args(argv)
    try:
        model = read_lp(Path(args.model).read_text())
    except (OSError, LpParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    try:
        out = ScipyBackend().solve_stage(model, 0, args.time_limit)
    except BackendFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    write_solution_file(args.solution, model, out.status, out.values)
    return 0


if __name__ == "__main__":
    sys.exit(main())

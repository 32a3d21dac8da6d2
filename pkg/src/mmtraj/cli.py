"""Command-line entry point: ``mmtraj {solve,cyclicity,robustness,gen-path}``.

Exit codes: 0 success (``solve``: converged), 2 iteration limit reached
(artifacts are still written), 1 hard error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .admm import SolverAbort, SolverConfig
from .bench import (DEFAULT_DELTAS, FLOAT_FORMAT, cyclicity_from_report, robustness_study, run)
from .scenario import BUNDLED_DIR, ScenarioError, generate_path, load_scenario

EXIT_OK, EXIT_ERROR, EXIT_ITER_LIMIT = 0, 1, 2

logger = logging.getLogger("mmtraj")


def resolve_scenario(ref: str):
    """A scenario file path, or the name of a bundled scenario."""
    path = Path(ref)
    if path.is_file():
        return load_scenario(path)
    bundled = BUNDLED_DIR / f"{ref}.json"
    if bundled.is_file():
        return load_scenario(bundled)
    raise FileNotFoundError(f"no scenario file or bundled scenario named {ref!r}")


def _load_config(path, overrides: dict) -> SolverConfig:
    data = json.loads(Path(path).read_text()) if path else {}
    data.update({k: v for k, v in overrides.items() if v is not None})
    try:
        return SolverConfig.from_dict(data)
    except TypeError as exc:
        raise ValueError(f"config: {exc}") from None


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def cmd_solve(args) -> int:
    scenario = resolve_scenario(args.scenario)
    config = _load_config(args.config, {"w1": args.w1, "w2": args.w2, "max_iter": args.max_iter})
    out_dir = Path(args.out_dir) if args.out_dir else Path("runs") / scenario.name
    report = run(scenario, config, out_dir)
    last = report.history[-1] if report.history else {}
    status = "converged" if report.converged else "iteration limit reached"
    print(f"{scenario.name}: {status} after {report.iterations} iterations "
          f"({report.wall_time:.2f} s); max ee error {report.metrics['ee_err_max']:.3e}; "
          f"f1 {last.get('f1', float('nan')):.2e}, f2 {last.get('f2', float('nan')):.2e}")
    print(f"artifacts written to {out_dir}")
    return EXIT_OK if report.converged else EXIT_ITER_LIMIT


def cmd_cyclicity(args) -> int:
    table = cyclicity_from_report(args.report)
    for key, val in table["groups"].items():
        print(f"{key:10s} {val:.3e}")
    print("closed" if table["closed"] else "not closed")
    if args.json:
        print(json.dumps(table, indent=2, sort_keys=True))
    return EXIT_OK


def cmd_robustness(args) -> int:
    scenario = resolve_scenario(args.scenario)
    config = _load_config(args.config, {"max_iter": args.max_iter})
    table = robustness_study(scenario, config, deltas=args.deltas, instances=args.instances,
                             seed=args.seed, workers=args.workers)
    print(f"{'row':10s} {'delta':>6s} {'avgmax %':>10s} {'std %':>8s} {'worst %':>8s} {'conv':>5s}")
    for row in table["rows"]:
        print(f"{row['label']:10s} {row['delta']:6.2f} {row['avgmax_pct']:10.4f} "
              f"{row['std_pct']:8.4f} {row['worst_pct']:8.4f} {row['converged']:5d}")
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(table, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_gen_path(args) -> int:
    params = {}
    for item in args.param:
        if "=" not in item:
            raise ValueError(f"--param expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        params[key.replace("-", "_")] = _parse_value(val)
    path = generate_path(args.kind, args.q, **params)
    lines = ["x,y,z"] + [",".join(FLOAT_FORMAT % v for v in row) for row in path]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mmtraj", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="solve one scenario and write artifacts")
    p.add_argument("scenario", help="scenario JSON file or bundled scenario name")
    p.add_argument("--config", help="solver config JSON")
    p.add_argument("--out-dir", help="artifact directory (default runs/<scenario>)")
    p.add_argument("--w1", type=float)
    p.add_argument("--w2", type=float)
    p.add_argument("--max-iter", type=int)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("cyclicity", help="endpoint residual table of a report.json")
    p.add_argument("report")
    p.add_argument("--json", action="store_true", help="also print the full table as JSON")
    p.set_defaults(func=cmd_cyclicity)

    p = sub.add_parser("robustness", help="AvgMax error versus initial-guess perturbation")
    p.add_argument("scenario")
    p.add_argument("--deltas", type=float, nargs="+", default=list(DEFAULT_DELTAS))
    p.add_argument("--instances", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--config")
    p.add_argument("--max-iter", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="write the table as JSON")
    p.set_defaults(func=cmd_robustness)

    p = sub.add_parser("gen-path", help="print a closed desired path as CSV")
    p.add_argument("kind", choices=["circle", "ellipse", "lemniscate", "random-fourier"])
    p.add_argument("--q", type=int, default=100)
    p.add_argument("--param", action="append", default=[], metavar="KEY=VALUE",
                   help="generator parameter, value parsed as JSON when possible")
    p.add_argument("--out")
    p.set_defaults(func=cmd_gen_path)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except (ScenarioError, SolverAbort, FileNotFoundError, ValueError, np.linalg.LinAlgError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())

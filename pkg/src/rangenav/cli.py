"""Command line entry point: ``rangenav {run,compare,validate}``.

Exit codes: 0 on success, 1 when the scenario cannot be loaded, 2 when a run
fails or a validation check does not pass.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from .harness import RunError, ScenarioError, load_scenario, monte_carlo, run_scenario
from .selection import SelectionPolicy
from .sim import write_streams_csv
from .validation import run_all

EXIT_OK, EXIT_SCENARIO, EXIT_FAILURE = 0, 1, 2


def _build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", default="paper.json", help="scenario JSON (default: bundled paper.json)")
    common.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    common.add_argument("--out", default=".", help="output directory (created if missing)")
    common.add_argument("--quiet", action="store_true", help="print nothing on success")

    parser = argparse.ArgumentParser(prog="rangenav", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="simulate one flight, write timeseries.csv")
    run.add_argument("--policy", choices=("sequential", "greedy"), default=None)
    run.add_argument("--no-streams", action="store_true", help="skip measurements.csv")

    cmp_ = sub.add_parser("compare", parents=[common], help="paired Monte Carlo of both policies, write summary.csv")
    cmp_.add_argument("--runs", type=int, default=10)

    val = sub.add_parser("validate", help="check closed-form code against dense-matrix oracles")
    val.add_argument("--quiet", action="store_true")
    return parser


def _scenario(args):
    sc = load_scenario(args.scenario)
    if args.seed is not None:
        sc = replace(sc, seed=args.seed)
    if getattr(args, "policy", None) == "sequential":
        sc = sc.with_policy(sc.sequential_policy())
    elif getattr(args, "policy", None) == "greedy":
        sc = sc.with_policy(SelectionPolicy.greedy())
    return sc


def _cmd_run(args, out: Path) -> int:
    sc = _scenario(args)
    metrics, log = run_scenario(sc, record_streams=not args.no_streams)
    log.to_csv(out / "timeseries.csv")
    if not args.no_streams:
        write_streams_csv(out / "measurements.csv", log.truth, log.imu, log.ranges)
    if not args.quiet:
        print(f"policy {sc.policy.kind}, seed {sc.seed}")
        print(f"rmse position {metrics.rmse_position:.4f} m")
        print(f"rmse velocity {metrics.rmse_velocity:.4f} m/s")
        print(f"rmse attitude {metrics.rmse_attitude:.3f} deg")
        print(f"wrote {out / 'timeseries.csv'}")
    return EXIT_OK


def _cmd_compare(args, out: Path) -> int:
    if args.runs < 1:
        print("error: --runs must be >= 1", file=sys.stderr)
        return EXIT_SCENARIO
    summary = monte_carlo(_scenario(args), args.runs)
    summary.to_csv(out / "summary.csv")
    for seed, policy, msg in summary.failures:
        print(f"run failed: seed {seed} ({policy}): {msg}", file=sys.stderr)
    if not args.quiet:
        print(summary.format_table())
        print(f"wrote {out / 'summary.csv'}")
    return EXIT_OK


def _cmd_validate(args) -> int:
    results = run_all()
    for res in results:
        if not args.quiet or not res.passed:
            print(res.line())
    return EXIT_OK if all(r.passed for r in results) else EXIT_FAILURE


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "validate":
        return _cmd_validate(args)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        if args.command == "run":
            return _cmd_run(args, out)
        return _cmd_compare(args, out)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SCENARIO
    except RunError as exc:
        print(f"run failed: {exc}", file=sys.stderr)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())

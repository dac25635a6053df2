"""Command line front end: `manetsim run ...` executes a scenario file or a
bundled preset and writes the results CSV."""

import argparse
import sys

from .runner import run_sweep
from .scenario import PRESET_NAMES, Scenario, load_preset


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="manetsim")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a scenario sweep and emit a CSV")
    run.add_argument("--scenario", help="path to a scenario YAML file")
    run.add_argument("--preset", choices=PRESET_NAMES,
                     help="bundled experiment preset")
    run.add_argument("--seed", type=int, help="restrict the sweep to one seed")
    run.add_argument("--out", default="results.csv", help="output CSV path")
    run.add_argument("--protocol", choices=("aodv", "dsr", "new"),
                     help="restrict the sweep to one protocol")
    run.add_argument("--include-hello-overhead", action="store_true",
                     help="count hello beacons in the overhead_per_req column")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "run":
        return _cmd_run(args)
    return 2


def _cmd_run(args) -> int:
    if bool(args.scenario) == bool(args.preset):
        print("error: provide exactly one of --scenario or --preset", file=sys.stderr)
        return 2
    try:
        scenario = (Scenario.from_yaml(args.scenario) if args.scenario
                    else load_preset(args.preset))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    rows, failures = run_sweep(
        scenario, args.out, include_hello=args.include_hello_overhead,
        protocol_filter=args.protocol, seed_filter=args.seed)
    print(f"wrote {len(rows)} rows to {args.out}")
    if failures:
        print(f"{len(failures)} cells failed:", file=sys.stderr)
        for protocol, value, seed, err in failures:
            print(f"  protocol={protocol} value={value} seed={seed}: {err}",
                  file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())

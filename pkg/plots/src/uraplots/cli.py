"""Command line figure generation from result CSV files."""

from __future__ import annotations

import argparse
import sys

from .figures import plot_miss_detection, plot_required_ebn0
from .io import load_results


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="uraplots",
        description="render figures from simulator result CSV files "
        "(each CSV needs its JSON config sidecar next to it)",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_miss = sub.add_parser("miss", help="miss-detection probability vs K_a")
    p_ebn0 = sub.add_parser("ebn0", help="required overall Eb/N0 vs K_a")
    for p in (p_miss, p_ebn0):
        p.add_argument("--csv", nargs="+", required=True, help="input CSV path(s)")
        p.add_argument("--out", required=True, help="output image path")
        p.add_argument(
            "--group-keys",
            help="comma list of dotted config keys that define the series",
        )
    p_ebn0.add_argument("--target-pe", type=float, default=0.05)

    args = parser.parse_args(argv)
    results = load_results(args.csv)
    keys = args.group_keys.split(",") if args.group_keys else None

    if args.command == "miss":
        out = plot_miss_detection(results, args.out, group_keys=keys)
    else:
        out = plot_required_ebn0(results, args.target_pe, args.out, group_keys=keys)
    print(f"wrote {out}")
    return 0


if __name__ == "__main__":
    sys.exit(main())

"""Command line entry points: run one configuration, sweep a grid, or
materialise the sensing-matrix file."""

from __future__ import annotations

import argparse
import json
import sys

from . import harness, txchain
from .config import SystemConfig


def _load_config(args) -> SystemConfig:
    cfg = SystemConfig.from_file(args.config) if args.config else SystemConfig()
    if args.set:
        cfg = cfg.with_overrides(args.set)
    if args.seed is not None:
        cfg = cfg.replace(master_seed=args.seed)
    return cfg


def _add_common(p):
    p.add_argument("--config", help="JSON config file (defaults mirror SystemConfig)")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override any config scalar, dotted keys for groups "
        "(e.g. polar.list_size=256)",
    )
    p.add_argument("--seed", type=int, help="master seed override")
    p.add_argument("--workers", type=int, default=1)


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="otfsura",
        description="Monte Carlo link simulator for unsourced random access "
        "over delay-Doppler channels",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one configuration point")
    _add_common(p_run)
    p_run.add_argument("--out", help="CSV output path (JSON sidecar written next to it)")

    p_sweep = sub.add_parser("sweep", help="sweep K_a and/or data-phase Eb/N0")
    _add_common(p_sweep)
    p_sweep.add_argument("--out", required=True, help="CSV output path")
    p_sweep.add_argument("--ka", help="comma list of K_a values, e.g. 50,100,150")
    p_sweep.add_argument("--ebn0-data", help="comma list of data Eb/N0 values in dB")
    p_sweep.add_argument(
        "--target-pupe",
        type=float,
        help="bisect the data Eb/N0 reaching this PUPE instead of sweeping it",
    )
    p_sweep.add_argument("--bisect-lo", type=float, default=-2.0)
    p_sweep.add_argument("--bisect-hi", type=float, default=20.0)
    p_sweep.add_argument("--bisect-tol-db", type=float, default=0.25)
    p_sweep.add_argument(
        "--checkpoint-every", type=int, default=0, help="trials between progress dumps"
    )

    p_gen = sub.add_parser("gen-sensing", help="write the sensing-matrix file")
    _add_common(p_gen)
    p_gen.add_argument("--out", required=True, help="binary output path")

    args = parser.parse_args(argv)
    cfg = _load_config(args)

    if args.command == "run":
        point = harness.run_point(cfg, workers=args.workers)
        row = point.row()
        if args.out:
            harness.write_rows(args.out, [row], cfg)
        json.dump(row, sys.stdout, indent=2)
        print()
        return 0

    if args.command == "sweep":
        ka = [int(v) for v in args.ka.split(",")] if args.ka else None
        ebn0 = (
            [float(v) for v in args.ebn0_data.split(",")] if args.ebn0_data else None
        )
        rows = harness.run_sweep(
            cfg,
            ka_values=ka,
            ebn0_values=ebn0,
            workers=args.workers,
            out_csv=args.out,
            target_pupe=args.target_pupe,
            bisect_lo=args.bisect_lo,
            bisect_hi=args.bisect_hi,
            bisect_tol_db=args.bisect_tol_db,
            checkpoint_every=args.checkpoint_every,
        )
        print(f"wrote {len(rows)} rows to {args.out}")
        return 0

    if args.command == "gen-sensing":
        sensing = txchain.build_sensing_matrix(
            cfg.preamble_bits, cfg.n_preamble, cfg.sensing_seed
        )
        txchain.save_sensing_matrix(sensing, args.out)
        print(
            f"wrote {sensing.num_columns} preambles of length "
            f"{sensing.preamble_len} to {args.out}"
        )
        return 0

    return 1


if __name__ == "__main__":
    sys.exit(main())

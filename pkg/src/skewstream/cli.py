"""Command line front end.

Start from a preset or the built-in default, override individual knobs,
run once, and print a one-line summary.  --out writes the per-iteration
CSV, --dump-assignment shows where every group ended up.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .balance import Policy
from .datagen import DatasetKind
from .errors import SkewStreamError
from .harness import PRESET_NAMES, Backend, preset, run, write_csv


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="skewstream",
        description="streaming group-by aggregation with partition "
                    "rebalancing")
    p.add_argument("--preset", choices=PRESET_NAMES,
                   help="named configuration to start from "
                        "(default ds1-desk)")
    p.add_argument("--dataset", choices=[k.value for k in DatasetKind],
                   help="distribution of group keys")
    p.add_argument("--tuples", type=int, help="stream length")
    p.add_argument("--groups", type=int, help="number of distinct groups")
    p.add_argument("--zipf-exp", type=float, help="zipf exponent")
    p.add_argument("--batch", type=int, help="tuples per iteration")
    p.add_argument("--window", type=int, help="sliding window capacity")
    p.add_argument("--grid", type=int, help="grid size (threads = grid*block)")
    p.add_argument("--block", type=int, help="block size")
    p.add_argument("--policy", choices=[pol.value for pol in Policy],
                   help="rebalancing policy")
    p.add_argument("--threshold", type=int,
                   help="per-thread load gap that triggers moves")
    p.add_argument("--pot", type=float,
                   help="share of the donor load a probed group must reach")
    p.add_argument("--max-moves", type=int,
                   help="move budget per invocation (default 4*threads)")
    p.add_argument("--passes", type=int, help="window passes charged per tuple")
    p.add_argument("--backend", choices=[b.value for b in Backend],
                   help="sim charges the cost model, parallel measures a "
                        "thread pool")
    p.add_argument("--pool", type=int, help="worker threads for parallel")
    p.add_argument("--seed", type=int, help="stream seed")
    p.add_argument("--out", metavar="CSV", help="write per-iteration rows")
    p.add_argument("--trace", action="store_true",
                   help="retain per-tuple aggregates (memory heavy)")
    p.add_argument("--dump-assignment", action="store_true",
                   help="print the final group placement per thread")
    return p


def config_from_args(args: argparse.Namespace):
    cfg = preset(args.preset if args.preset else "ds1-desk")
    spec = cfg.dataset
    if args.dataset is not None:
        spec = replace(spec, kind=DatasetKind(args.dataset))
    if args.tuples is not None:
        spec = replace(spec, n_tuples=args.tuples)
    if args.groups is not None:
        spec = replace(spec, n_groups=args.groups)
    if args.zipf_exp is not None:
        spec = replace(spec, zipf_exponent=args.zipf_exp)

    bal = cfg.balancer
    if args.policy is not None:
        bal = replace(bal, policy=Policy(args.policy))
    if args.threshold is not None:
        bal = replace(bal, thread_threshold=args.threshold)
    if args.pot is not None:
        bal = replace(bal, pot=args.pot)
    if args.max_moves is not None:
        bal = replace(bal, max_moves=args.max_moves)

    cost = cfg.cost
    if args.passes is not None:
        cost = replace(cost, window_passes=args.passes)

    overrides = {"dataset": spec, "balancer": bal, "cost": cost}
    for flag, name in (("batch", "batch_size"), ("window", "window"),
                       ("grid", "grid_size"), ("block", "block_size"),
                       ("pool", "pool_size"), ("seed", "seed")):
        value = getattr(args, flag)
        if value is not None:
            overrides[name] = value
    if args.backend is not None:
        overrides["backend"] = Backend(args.backend)
    if args.trace:
        overrides["trace"] = True
    return replace(cfg, **overrides)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(args)
        report = run(cfg)
    except SkewStreamError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    norm = report.normalized_throughput
    print(f"policy={report.policy_name} grid={cfg.grid_size} "
          f"backend={cfg.backend.value} tuples={report.total_tuples} "
          f"iterations={len(report.rows)} makespan={report.total_makespan} "
          f"moves={report.total_moves} scanned={report.total_scanned} "
          f"throughput={report.throughput:.6g}"
          + (f" normalized={norm:.6g}" if norm is not None else ""))
    if args.out:
        write_csv(report, args.out)
        print(f"wrote {args.out}")
    if args.dump_assignment:
        for line in report.final_assignment.dump_lines():
            print(line)
    return 0


if __name__ == "__main__":
    sys.exit(main())

#!/usr/bin/env python3
"""Run the bundled experiment presets end to end and drop one bundle per preset.

    python scripts/run_paper_experiments.py --out runs/ [--runs N] [--skip-scalability]

The stationary preset is also run through `compare` across all six policies
so the summary table mirrors the single-agent comparison set.
"""

import argparse
import sys
import time

from fogbandit.cli import main as fogbandit_main


def run(args: list[str]) -> None:
    print("::", "fogbandit", " ".join(args), flush=True)
    t0 = time.time()
    code = fogbandit_main(args)
    if code != 0:
        sys.exit(code)
    print(f":: done in {time.time() - t0:.0f}s", flush=True)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs")
    parser.add_argument("--runs", type=int, help="override Monte-Carlo count for every preset")
    parser.add_argument("--horizon", type=int, help="override the slot count (quick passes)")
    parser.add_argument("--workers", type=int)
    parser.add_argument("--skip-scalability", action="store_true",
                        help="skip the K in {20,100,500,1000} sweeps")
    args = parser.parse_args()

    extra: list[str] = []
    if args.runs is not None:
        extra += ["--runs", str(args.runs)]
    if args.horizon is not None:
        extra += ["--horizon", str(args.horizon)]
    if args.workers is not None:
        extra += ["--workers", str(args.workers)]

    run(["run", "--scenario", "single_stationary", "--out", f"{args.out}/single_stationary",
         *extra])
    run(["compare", "--scenario", "single_stationary",
         "--policies", "deb,exp3,qpmd,sdb,ducb,blot",
         "--out", f"{args.out}/single_stationary_compare", *extra])
    run(["run", "--scenario", "single_dynamic", "--out", f"{args.out}/single_dynamic", *extra])
    run(["run", "--scenario", "multi_agent_v4k10", "--out", f"{args.out}/multi_agent_v4k10",
         *extra])
    run(["ne-experiment", "--out", f"{args.out}/ne_two_agent", *extra])
    if not args.skip_scalability:
        for k in (20, 100, 500, 1000):
            run(["run", "--scenario", f"scalability_k{k}",
                 "--out", f"{args.out}/scalability_k{k}", *extra])


if __name__ == "__main__":
    main()

"""Sweep the PoA block interval and report submit vs view latency.

    python scripts/interval_sweep.py [--intervals 2 5 11 20] [--txs N]

Submit latency tracks the batching interval while view latency stays at one
network hop, so the submit/view ratio grows with the interval.
"""

import argparse
import sys

from blockcoldchain.sim import Scenario, WorkloadSpec, run_scenario


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--intervals", type=float, nargs="+", default=[2.0, 5.0, 11.0, 20.0])
    parser.add_argument("--txs", type=int, default=300)
    parser.add_argument("--seed", type=int, default=42)
    opts = parser.parse_args()
    print(f"{'interval s':>10} {'mean submit':>12} {'max submit':>11} {'mean view':>10} {'max view':>9} {'ratio':>7}")
    for interval in opts.intervals:
        scenario = Scenario(seed=opts.seed, block_interval=interval, workload=WorkloadSpec(txs=opts.txs))
        s = run_scenario(scenario).summary()
        print(
            f"{interval:>10.1f} {s['mean_submit_s']:>12.2f} {s['max_submit_s']:>11.2f} "
            f"{s['mean_view_s']:>10.3f} {s['max_view_s']:>9.3f} {s['submit_view_ratio']:>7.0f}"
        )
    return 0


if __name__ == "__main__":
    sys.exit(main())

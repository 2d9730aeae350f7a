"""Compare PoA and PoW on the same sensor workload, with and without faults.

    python scripts/consensus_compare.py [--txs N] [--seeds K] [--difficulty D]

Prints one row per (mode, fault) cell averaged over seeds: commit latency,
blocks produced, view changes, and how many runs ended with live replicas
disagreeing on the state root.
"""

import argparse
import statistics
import sys
from dataclasses import replace

from blockcoldchain.sim import FaultSpec, Scenario, WorkloadSpec, run_scenario

SPLIT = [["orderer0", "orderer1", "peer0"], ["orderer2", "orderer3", "peer1"]]

FAULTS = {
    "none": [],
    "crash": [FaultSpec(900, "crash", "@leader")],
    "partition": [FaultSpec(600, "partition", groups=SPLIT), FaultSpec(3000, "heal")],
}


def cell(mode: str, fault: str, opts) -> dict:
    base = Scenario(
        name=f"{mode}-{fault}",
        mode=mode,
        pow_difficulty=opts.difficulty,
        workload=WorkloadSpec(txs=opts.txs, locations=6),
        faults=FAULTS[fault],
    )
    rows = []
    for seed in range(opts.seeds):
        result = run_scenario(replace(base, seed=seed))
        s = result.summary()
        # crashed nodes that never recover are stale, not divergent
        roots = {n.state.state_root() for n in result.sim.nodes.values() if n.up}
        rows.append((s["mean_submit_s"], s["max_submit_s"], s["blocks"], s["view_changes"], len(roots) > 1, s["wall_s"]))
    mean = lambda i: statistics.fmean(r[i] for r in rows)
    return {
        "mode": mode,
        "fault": fault,
        "mean_submit_s": mean(0),
        "max_submit_s": max(r[1] for r in rows),
        "blocks": mean(2),
        "view_changes": mean(3),
        "diverged_runs": sum(r[4] for r in rows),
        "wall_s": mean(5),
    }


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    parser.add_argument("--txs", type=int, default=150)
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--difficulty", type=int, default=10)
    opts = parser.parse_args()
    header = f"{'mode':<5} {'fault':<10} {'mean s':>8} {'max s':>8} {'blocks':>7} {'views':>6} {'diverged':>9} {'wall s':>7}"
    print(header)
    print("-" * len(header))
    for mode in ("PoA", "PoW"):
        for fault in FAULTS:
            c = cell(mode, fault, opts)
            print(
                f"{c['mode']:<5} {c['fault']:<10} {c['mean_submit_s']:>8.2f} {c['max_submit_s']:>8.2f} "
                f"{c['blocks']:>7.1f} {c['view_changes']:>6.1f} {c['diverged_runs']:>9} {c['wall_s']:>7.2f}"
            )
    return 0


if __name__ == "__main__":
    sys.exit(main())

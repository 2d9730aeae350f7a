"""Discrete-event simulation of the ordering network."""

from .clock import SimClock
from .network import (
    DEFAULT_EPOCH,
    CommitEvent,
    ConsensusConfig,
    Simulation,
    TxReceipt,
    genesis_chain,
)
from .pow import fork_choice, mine_block, pow_mine
from .scenario import FaultSpec, RunResult, Scenario, WorkloadSpec, bench, load_scenario, run_scenario

__all__ = [
    "DEFAULT_EPOCH",
    "CommitEvent",
    "ConsensusConfig",
    "FaultSpec",
    "RunResult",
    "Scenario",
    "SimClock",
    "Simulation",
    "TxReceipt",
    "WorkloadSpec",
    "bench",
    "fork_choice",
    "genesis_chain",
    "load_scenario",
    "mine_block",
    "pow_mine",
    "run_scenario",
]

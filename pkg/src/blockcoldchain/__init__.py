"""Tamper-evident cold-chain custody and temperature ledger."""

from .contract import (
    ContractState,
    ItemReport,
    Verdict,
    deploy,
    detect_violations,
    process_tx,
    query_item_history,
    query_location_items,
    query_location_temps,
    replay_chain,
)
from .ledger import (
    Block,
    Chain,
    SignedTransaction,
    append_block,
    build_block,
    key_from_seed,
    key_id,
    read_ledger,
    sign_tx,
    validate_chain,
    verify_tx,
    write_ledger,
)
from .payloads import (
    AddAdmin,
    AddLocation,
    Deploy,
    ItemArrival,
    ItemDeparture,
    LocationKind,
    LoggerDumpRef,
    RegisterItem,
    RemoveLocation,
    TemperatureReading,
)
from .store import LoggerDump, PayloadStore

__version__ = "0.1.0"

__all__ = [
    "AddAdmin",
    "AddLocation",
    "Block",
    "Chain",
    "ContractState",
    "Deploy",
    "ItemArrival",
    "ItemDeparture",
    "ItemReport",
    "LocationKind",
    "LoggerDump",
    "LoggerDumpRef",
    "PayloadStore",
    "RegisterItem",
    "RemoveLocation",
    "SignedTransaction",
    "TemperatureReading",
    "Verdict",
    "append_block",
    "build_block",
    "deploy",
    "detect_violations",
    "key_from_seed",
    "key_id",
    "process_tx",
    "query_item_history",
    "query_location_items",
    "query_location_temps",
    "read_ledger",
    "replay_chain",
    "sign_tx",
    "validate_chain",
    "verify_tx",
    "write_ledger",
]

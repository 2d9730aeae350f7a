"""Scenario files, workload driver and latency benchmark output."""

from __future__ import annotations

import csv
import io
import json
import random
import statistics
import time
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Any

import yaml

from ..contract import query_location_temps
from ..errors import BCCError, NodeDown, ScenarioError
from ..ledger import key_from_seed, key_id, sign_tx, write_ledger
from ..payloads import AddLocation, ItemArrival, ItemDeparture, LocationKind, RegisterItem
from ..sensors import SensorProfile, generate_trace
from ..store import PayloadStore
from .network import DEFAULT_EPOCH, ConsensusConfig, Simulation, TxReceipt, genesis_chain

LATENCY_HEADER = ("tx_id", "kind", "accepted_ms", "committed_ms")
COMMIT_HEADER = ("height", "block_hash", "node", "committed_ms", "tx_count")

_STORAGE_KINDS = [
    LocationKind.Refrigerator,
    LocationKind.ColdRoom,
    LocationKind.Freezer,
    LocationKind.RefrigeratedTruck,
    LocationKind.ColdBox,
    LocationKind.VaccineCarrier,
]


@dataclass
class FaultSpec:
    at_s: float
    action: str
    node: str | None = None
    group: Any = None
    groups: list[list[str]] | None = None


@dataclass
class WorkloadSpec:
    txs: int = 500
    locations: int = 10
    cadence_s: int = 600
    items: int = 4
    views_per_tx: int = 1
    upload_jitter_s: int = 120
    base_temp: int = 500
    noise_amp: int = 150


@dataclass
class Scenario:
    name: str = "default"
    seed: int = 42
    mode: str = "PoA"
    orderers: int = 4
    peers: int = 2
    orgs: int = 2
    block_interval: float = 11.0
    batch_max: int = 100
    quorum: int | None = None
    pow_difficulty: int = 8
    latency_ms: tuple[int, int] = (5, 50)
    epoch: int = DEFAULT_EPOCH
    duration_s: float | None = None
    workload: WorkloadSpec = field(default_factory=WorkloadSpec)
    faults: list[FaultSpec] = field(default_factory=list)

    @property
    def orderer_ids(self) -> list[str]:
        return [f"orderer{i}" for i in range(self.orderers)]

    @property
    def peer_ids(self) -> list[str]:
        return [f"peer{i}" for i in range(self.peers)]

    def consensus_config(self) -> ConsensusConfig:
        return ConsensusConfig(
            mode=self.mode,
            orderers=self.orderer_ids,
            block_interval=self.block_interval,
            batch_max=self.batch_max,
            quorum=self.quorum,
            pow_difficulty=self.pow_difficulty,
        )

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        data = dict(data)
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ScenarioError(f"unknown scenario keys: {sorted(unknown)}")
        try:
            if "workload" in data:
                data["workload"] = WorkloadSpec(**(data["workload"] or {}))
            if "faults" in data:
                data["faults"] = [FaultSpec(**f) for f in data["faults"] or []]
            if "latency_ms" in data:
                lo, hi = data["latency_ms"]
                data["latency_ms"] = (int(lo), int(hi))
            scenario = cls(**data)
        except (TypeError, ValueError) as exc:
            raise ScenarioError(str(exc)) from exc
        scenario.validate()
        return scenario

    def to_dict(self) -> dict:
        out = asdict(self)
        out["latency_ms"] = list(self.latency_ms)
        return out

    def validate(self) -> None:
        if self.peers < 1:
            raise ScenarioError("need at least one peer")
        if self.workload.locations < 2:
            raise ScenarioError("workload needs at least two locations")
        lo, hi = self.latency_ms
        if not 0 <= lo <= hi:
            raise ScenarioError("latency_ms must be an ordered non-negative pair")
        self.consensus_config()


def load_scenario(path: str | Path) -> Scenario:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text) or {}
    except yaml.YAMLError as exc:
        raise ScenarioError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(data, dict):
        raise ScenarioError("scenario file must hold a mapping")
    return Scenario.from_dict(data)


@dataclass
class RunResult:
    scenario: Scenario
    sim: Simulation
    receipts: list[TxReceipt]
    failed_submits: list[tuple[int, str, str]]
    views: list[tuple[str, int, int]]
    wall_s: float = 0.0
    setup_count: int = 0

    @property
    def workload_receipts(self) -> list[TxReceipt]:
        return self.receipts[self.setup_count :]

    def latency_rows(self) -> list[tuple]:
        rows = [
            (r.tx_hash.hex(), r.kind, r.accepted_at, "" if r.committed_at is None else r.committed_at)
            for r in self.receipts
        ]
        rows += [(view_id, "view", at, at + lat) for view_id, at, lat in self.views]
        return rows

    def latency_csv(self) -> str:
        return _csv(LATENCY_HEADER, self.latency_rows())

    def commit_log_csv(self) -> str:
        rows = [
            (e.height, e.block_hash.hex(), e.node, e.at, e.tx_count) for e in self.sim.commit_log
        ]
        return _csv(COMMIT_HEADER, rows)

    def state_roots(self) -> dict[str, str]:
        return {nid: n.state.state_root().hex() for nid, n in self.sim.nodes.items()}

    def submit_latencies_s(self) -> list[float]:
        return [r.latency_ms / 1000 for r in self.workload_receipts if r.committed_at is not None]

    def view_latencies_s(self) -> list[float]:
        return [lat / 1000 for _, _, lat in self.views]

    def summary(self) -> dict:
        submit = self.submit_latencies_s()
        view = self.view_latencies_s()
        mean_submit = statistics.fmean(submit) if submit else float("nan")
        mean_view = statistics.fmean(view) if view else float("nan")
        return {
            "scenario": self.scenario.name,
            "seed": self.scenario.seed,
            "mode": self.scenario.mode,
            "setup_txs": self.setup_count,
            "submitted": len(self.workload_receipts),
            "committed": len(submit),
            "rejected": sum(1 for r in self.workload_receipts if r.error is not None),
            "failed_submits": len(self.failed_submits),
            "mean_submit_s": mean_submit,
            "max_submit_s": max(submit) if submit else float("nan"),
            "mean_view_s": mean_view,
            "max_view_s": max(view) if view else float("nan"),
            "submit_view_ratio": mean_submit / mean_view if view and mean_view else float("nan"),
            "blocks": max((e.height for e in self.sim.commit_log), default=0),
            "view_changes": len(self.sim.view_changes),
            "safety_violations": len(self.sim.safety_violations),
            "wall_s": self.wall_s,
        }


def _csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


class _Actor:
    def __init__(self, seed: int, name: str) -> None:
        self.key = key_from_seed(seed, name)
        self.id = key_id(self.key)
        self.nonce = 0

    def sign(self, payload):
        self.nonce += 1
        return sign_tx(self.key, payload, self.nonce)


def _location_ids(count: int) -> list[tuple[str, LocationKind]]:
    out = [("LOC-00", LocationKind.Manufacturer)]
    for i in range(1, count):
        out.append((f"LOC-{i:02d}", _STORAGE_KINDS[(i - 1) % len(_STORAGE_KINDS)]))
    return out


def run_scenario(scenario: Scenario, store: PayloadStore | None = None) -> RunResult:
    """Set up a network, drive the sensor workload, apply faults and drain."""
    started = time.perf_counter()
    seed = scenario.seed
    admin = _Actor(seed, "admin")
    admin.nonce = 1  # genesis deploy
    genesis = genesis_chain(admin.key, scenario.epoch)
    orgs = {o: "OrdererOrg" for o in scenario.orderer_ids}
    orgs.update({p: f"Org{i % max(1, scenario.orgs) + 1}" for i, p in enumerate(scenario.peer_ids)})
    sim = Simulation(
        scenario.consensus_config(),
        genesis,
        peers=scenario.peer_ids,
        orgs=orgs,
        seed=seed,
        epoch=scenario.epoch,
        store=store,
        latency_ms=scenario.latency_ms,
    )
    wl = scenario.workload
    locations = _location_ids(wl.locations)
    sensors = {loc: _Actor(seed, f"sensor:{loc}") for loc, _ in locations}
    receipts: list[TxReceipt] = []
    failed: list[tuple[int, str, str]] = []
    views: list[tuple[str, int, int]] = []
    peers = scenario.peer_ids
    counter = {"submit": 0, "view": 0}

    def ts_now() -> int:
        return scenario.epoch + sim.now // 1000

    def submit(tx) -> TxReceipt | None:
        via = peers[counter["submit"] % len(peers)]
        counter["submit"] += 1
        try:
            receipt = sim.submit(tx, via)
        except (BCCError,) as exc:
            failed.append((sim.now, tx.kind, exc.name))
            return None
        receipts.append(receipt)
        return receipt

    def phase(txs) -> None:
        pending = [r for r in (submit(tx) for tx in txs) if r is not None]
        limit = 40 * scenario.consensus_config().interval_ms
        if not sim.run_until_committed(pending, limit):
            raise ScenarioError("setup transactions did not commit")

    # -- setup: locations, items, initial custody --------------------------------------
    phase(admin.sign(AddLocation(loc, kind, sensors[loc].id)) for loc, kind in locations)
    items = [f"LOT-{i:03d}" for i in range(wl.items)]
    phase(admin.sign(RegisterItem(item, "LOC-00", 200, 800, ts_now())) for item in items)
    phase(admin.sign(ItemDeparture(item, "LOC-00", ts_now())) for item in items)
    homes = {item: locations[1 + i % (len(locations) - 1)][0] for i, item in enumerate(items)}
    phase(admin.sign(ItemArrival(item, homes[item], ts_now())) for item in items)

    setup_count = len(receipts)

    # -- workload: every location reports on its own cadence ----------------------------------
    wrng = random.Random(f"workload:{seed}")
    start_s = sim.now // 1000 + 1
    per_loc = -(-wl.txs // len(locations))
    readings = []
    for index, (loc, _) in enumerate(locations):
        offset = wrng.randrange(wl.cadence_s)
        profile = SensorProfile(loc, wl.base_temp, wl.noise_amp, min(wl.cadence_s, 600))
        t0 = scenario.epoch + start_s + offset
        trace = generate_trace(profile, t0, per_loc * profile.interval, seed * 1000 + index)
        readings.extend(trace)
    readings.sort(key=lambda r: (r.ts, r.location))
    readings = readings[: wl.txs]

    def fire_reading(reading) -> None:
        submit(sensors[reading.location].sign(reading))
        for _ in range(wl.views_per_tx):
            via = peers[counter["view"] % len(peers)]
            counter["view"] += 1
            try:
                _, latency = sim.query(
                    lambda st, r=reading: query_location_temps(st, r.location, r.ts - 3600, r.ts), via
                )
            except NodeDown:
                continue
            views.append((f"view-{len(views):05d}", sim.now, latency))

    # a logger uploads each reading some seconds after taking it
    uploads = []
    for reading in readings:
        delay = wrng.randint(0, wl.upload_jitter_s) if wl.upload_jitter_s else 0
        uploads.append(((reading.ts - scenario.epoch + delay) * 1000, reading))
    for at, reading in uploads:
        sim.clock.schedule(at, fire_reading, reading)

    for fault in scenario.faults:
        sim.clock.schedule(round(fault.at_s * 1000), _apply_fault, sim, fault)

    last_event = max(
        [max((at for at, _ in uploads), default=sim.now)]
        + [round(f.at_s * 1000) for f in scenario.faults]
    )
    if scenario.duration_s is not None:
        limit = round(scenario.duration_s * 1000)
    else:
        limit = last_event + 20 * scenario.consensus_config().interval_ms
    sim.run(limit)
    return RunResult(scenario, sim, receipts, failed, views, time.perf_counter() - started, setup_count)


def _apply_fault(sim: Simulation, fault: FaultSpec) -> None:
    action = fault.action.lower()
    if action == "partition" and fault.groups:
        sim.partition(fault.groups)
        return
    if action == "heal" and fault.node is None:
        sim.heal()
        return
    node = sim.current_leader() if fault.node == "@leader" else fault.node
    if node is None:
        raise ScenarioError(f"fault {action} needs a node")
    sim.inject_fault(node, action, fault.group)


def write_outputs(result: RunResult, out_dir: str | Path, tag: str = "") -> dict[str, Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "latency": out / f"latency{tag}.csv",
        "commits": out / f"commits{tag}.csv",
        "summary": out / f"summary{tag}.json",
    }
    paths["latency"].write_text(result.latency_csv())
    paths["commits"].write_text(result.commit_log_csv())
    summary = result.summary()
    summary["state_roots"] = result.state_roots()
    paths["summary"].write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    ledgers = out / f"ledgers{tag}"
    ledgers.mkdir(exist_ok=True)
    for node_id, node in result.sim.nodes.items():
        write_ledger(ledgers / f"{node_id}.bcc", node.chain)
    return paths


def bench(scenario: Scenario, runs: int = 1, store: PayloadStore | None = None) -> list[RunResult]:
    return [run_scenario(replace(scenario, seed=scenario.seed + r), store) for r in range(runs)]

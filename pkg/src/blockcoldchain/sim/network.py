"""Discrete-event consortium network: peers, orderers, PoA and toy PoW.

Nodes are plain message handlers. All randomness (link latency, mining
times) comes from the simulation's seeded RNG, and events are totally
ordered by the clock, so a run is a deterministic function of its inputs.
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable, Iterable, Sequence

from ..contract import ContractState, TxResult, check_admission, process_tx, replay_chain
from ..errors import (
    NodeDown,
    ReplayedNonce,
    ScenarioError,
    TxRejected,
    UnknownNode,
    UnknownSubmitter,
)
from ..ledger import (
    Block,
    Chain,
    SignedTransaction,
    block_problem,
    build_block,
    key_id,
    sign_tx,
)
from ..payloads import Deploy
from ..store import PayloadStore
from .clock import SimClock
from .pow import chain_rank, meets_difficulty, mine_block

DEFAULT_EPOCH = 1_640_995_200  # 2022-01-01T00:00:00Z


class NodeKind(Enum):
    PEER = "Peer"
    ORDERER = "Orderer"


class Status(Enum):
    UP = "Up"
    CRASHED = "Crashed"
    PARTITIONED = "Partitioned"


@dataclass
class ConsensusConfig:
    mode: str = "PoA"
    orderers: list[str] = field(default_factory=lambda: [f"orderer{i}" for i in range(4)])
    block_interval: float = 11.0
    batch_max: int = 100
    quorum: int | None = None
    pow_difficulty: int = 8

    def __post_init__(self) -> None:
        if self.mode not in ("PoA", "PoW"):
            raise ScenarioError(f"unknown consensus mode {self.mode!r}")
        if not self.orderers:
            raise ScenarioError("at least one orderer is required")
        majority = len(self.orderers) // 2 + 1
        if self.quorum is None:
            self.quorum = majority
        if not majority <= self.quorum <= len(self.orderers):
            raise ScenarioError(f"quorum {self.quorum} outside [{majority}, {len(self.orderers)}]")
        if self.block_interval <= 0:
            raise ScenarioError("block_interval must be positive")
        if self.batch_max < 1:
            raise ScenarioError("batch_max must be at least 1")

    @property
    def interval_ms(self) -> int:
        return round(self.block_interval * 1000)


@dataclass
class TxReceipt:
    tx_hash: bytes
    kind: str
    via: str
    accepted_at: int
    committed_at: int | None = None
    height: int | None = None
    error: str | None = None
    alarms: list = field(default_factory=list)

    @property
    def latency_ms(self) -> int | None:
        return None if self.committed_at is None else self.committed_at - self.accepted_at


# -- messages ---------------------------------------------------------------------


@dataclass(frozen=True)
class TxGossip:
    tx: SignedTransaction


@dataclass(frozen=True)
class Propose:
    block: Block
    view: int
    sender: str


@dataclass(frozen=True)
class Ack:
    height: int
    view: int
    block_hash: bytes
    sender: str


@dataclass(frozen=True)
class Commit:
    block: Block
    sender: str


@dataclass(frozen=True)
class SyncRequest:
    from_height: int
    sender: str


@dataclass(frozen=True)
class SyncReply:
    blocks: tuple[Block, ...]
    pending: tuple[SignedTransaction, ...] = ()
    view: int | None = None


@dataclass(frozen=True)
class PowBlock:
    block: Block
    sender: str


@dataclass(frozen=True)
class TipAnnounce:
    tip_hash: bytes
    sender: str


@dataclass(frozen=True)
class ChainRequest:
    sender: str


@dataclass(frozen=True)
class ChainReply:
    blocks: tuple[Block, ...]


def nonce_ordered(pending: dict[bytes, tuple[int, SignedTransaction]]) -> list[SignedTransaction]:
    """Arrival order, ties by tx hash; each submitter's slots refilled in nonce order."""
    ordered = sorted(pending.items(), key=lambda kv: (kv[1][0], kv[0]))
    txs = [tx for _, (_, tx) in ordered]
    slots: dict[bytes, list[int]] = {}
    for index, tx in enumerate(txs):
        slots.setdefault(tx.submitter, []).append(index)
    out = list(txs)
    for positions in slots.values():
        by_nonce = sorted((txs[i] for i in positions), key=lambda t: t.nonce)
        for pos, tx in zip(positions, by_nonce):
            out[pos] = tx
    return out


# -- nodes -----------------------------------------------------------------------------


class NodeSim:
    kind = NodeKind.PEER

    def __init__(self, node_id: str, org: str, chain: Chain, state: ContractState) -> None:
        self.id = node_id
        self.org = org
        self.chain = chain
        self.state = state
        self.inbox: deque = deque()
        self.crashed = False
        self.partition: Any = 0
        self.tx_hashes: set[bytes] = {tx.tx_hash for b in chain for tx in b.txs}
        self.inflight_nonce: dict[bytes, int] = {}

    @property
    def status(self) -> Status:
        if self.crashed:
            return Status.CRASHED
        return Status.PARTITIONED if self.partition != 0 else Status.UP

    @property
    def up(self) -> bool:
        return not self.crashed

    @property
    def next_height(self) -> int:
        return len(self.chain)

    def receive(self, msg: Any, sim: "Simulation") -> None:
        self.inbox.append(msg)
        while self.inbox and self.up:
            message = self.inbox.popleft()
            handler = getattr(self, "on_" + type(message).__name__, None)
            if handler is not None:
                handler(message, sim)

    def endorse(self, tx: SignedTransaction, store: PayloadStore | None) -> None:
        """Admission plus a dry run of the contract against local state."""
        check_admission(self.state, tx)
        if tx.nonce <= self.inflight_nonce.get(tx.submitter, 0):
            raise ReplayedNonce(f"nonce {tx.nonce} already in flight")
        self.state.apply(tx, store, dry_run=True)
        self.inflight_nonce[tx.submitter] = tx.nonce

    def _apply_block(self, block: Block, sim: "Simulation") -> list[TxResult]:
        self.chain._blocks.append(block)  # linkage already checked by caller
        results = []
        for tx in block.txs:
            try:
                results.append(process_tx(self.state, tx, sim.store))
            except (TxRejected, UnknownSubmitter) as exc:
                results.append(TxResult(tx.tx_hash, tx.kind, exc.name))
            self.tx_hashes.add(tx.tx_hash)
        sim.on_commit(self, block, results)
        return results

    def crash(self, sim: "Simulation") -> None:
        self.crashed = True
        self.inbox.clear()

    def recover(self, sim: "Simulation") -> None:
        self.crashed = False

    def healed(self, sim: "Simulation") -> None:
        pass


class PoaPeer(NodeSim):
    """Validates and stores committed blocks; never produces them."""

    def __init__(self, *args: Any) -> None:
        super().__init__(*args)
        self.future: dict[int, Block] = {}

    def commit(self, block: Block, sim: "Simulation") -> bool:
        if block.height != self.next_height:
            return False
        if block_problem(block, self.chain.tip, self.next_height, {}, check_txs=False) is not None:
            return False
        self._apply_block(block, sim)
        while self.next_height in self.future:
            nxt = self.future.pop(self.next_height)
            if block_problem(nxt, self.chain.tip, self.next_height, {}, check_txs=False) is not None:
                break
            self._apply_block(nxt, sim)
        self.after_commit(sim)
        return True

    def after_commit(self, sim: "Simulation") -> None:
        pass

    def _request_sync(self, sim: "Simulation", targets: Iterable[str]) -> None:
        for target in targets:
            if target != self.id:
                sim.send(self.id, target, SyncRequest(self.next_height, self.id))

    def on_Commit(self, msg: Commit, sim: "Simulation") -> None:
        block = msg.block
        if block.height > self.next_height:
            self.future[block.height] = block
            self._request_sync(sim, [msg.sender])
        elif block.height == self.next_height:
            self.commit(block, sim)

    def on_SyncRequest(self, msg: SyncRequest, sim: "Simulation") -> None:
        blocks = tuple(self.chain.blocks[msg.from_height :])
        sim.send(self.id, msg.sender, self.sync_reply(blocks))

    def sync_reply(self, blocks: tuple[Block, ...]) -> SyncReply:
        return SyncReply(blocks)

    def on_SyncReply(self, msg: SyncReply, sim: "Simulation") -> None:
        for block in msg.blocks:
            if block.height == self.next_height:
                self.commit(block, sim)

    def recover(self, sim: "Simulation") -> None:
        super().recover(sim)
        self._request_sync(sim, sim.config.orderers)

    def healed(self, sim: "Simulation") -> None:
        self._request_sync(sim, sim.config.orderers)


class PoaOrderer(PoaPeer):
    """Round-robin proof-of-authority orderer with quorum acknowledgements.

    A batch is cut ``block_interval`` after its oldest pending transaction
    arrived. If the round's leader produces nothing within a further interval
    every orderer moves to the next view, handing leadership to the next
    orderer in the rotation.
    """

    kind = NodeKind.ORDERER

    def __init__(self, *args: Any) -> None:
        super().__init__(*args)
        self.pending: dict[bytes, tuple[int, SignedTransaction]] = {}
        self.view = 0
        self.token = 0
        self.proposals: dict[tuple[int, int], Block] = {}
        self.acks: dict[tuple[int, int], set[str]] = {}

    def leader_for(self, height: int, view: int, sim: "Simulation") -> str:
        rotation = sim.config.orderers
        return rotation[(height + view) % len(rotation)]

    # -- pending pool ------------------------------------------------------------

    def on_TxGossip(self, msg: TxGossip, sim: "Simulation") -> None:
        self._add_pending(msg.tx, sim)

    def _add_pending(self, tx: SignedTransaction, sim: "Simulation") -> None:
        h = tx.tx_hash
        if h in self.tx_hashes or h in self.pending:
            return
        if tx.nonce <= self.state.last_nonce.get(tx.submitter, 0):
            return
        was_empty = not self.pending
        self.pending[h] = (sim.clock.now, tx)
        if was_empty:
            self.arm(sim, fresh=True)

    def _prune(self) -> None:
        stale = [
            h
            for h, (_, tx) in self.pending.items()
            if h in self.tx_hashes or tx.nonce <= self.state.last_nonce.get(tx.submitter, 0)
        ]
        for h in stale:
            del self.pending[h]

    def ordered_pending(self) -> list[SignedTransaction]:
        return nonce_ordered(self.pending)

    # -- timers -------------------------------------------------------------------

    def arm(self, sim: "Simulation", fresh: bool) -> None:
        self.token += 1
        if not self.pending or not self.up:
            return
        interval = sim.config.interval_ms
        if fresh:
            earliest = min(arrival for arrival, _ in self.pending.values())
            at, phase = max(sim.clock.now, earliest + interval), "cut"
        else:
            at, phase = sim.clock.now + interval, "timeout"
        sim.clock.schedule(at, self.on_timer, sim, self.token, phase)

    def on_timer(self, sim: "Simulation", token: int, phase: str) -> None:
        if token != self.token or not self.up:
            return
        self._prune()
        if not self.pending:
            return
        if phase == "timeout":
            self.view += 1
            self.token += 1
            sim.on_view_change(self)
        if self.leader_for(self.next_height, self.view, sim) == self.id:
            self.propose(sim)
        sim.clock.call_later(sim.config.interval_ms, self.on_timer, sim, self.token, "timeout")

    # -- proposing ----------------------------------------------------------------

    def select_batch(self, sim: "Simulation") -> list[SignedTransaction]:
        scratch = self.state.copy()
        batch: list[SignedTransaction] = []
        for tx in self.ordered_pending():
            if len(batch) >= sim.config.batch_max:
                break
            try:
                process_tx(scratch, tx, sim.store)
            except (TxRejected, UnknownSubmitter) as exc:
                del self.pending[tx.tx_hash]
                sim.reject(tx.tx_hash, exc.name)
                continue
            batch.append(tx)
        return batch

    def propose(self, sim: "Simulation") -> None:
        height, view = self.next_height, self.view
        if (height, view) in self.proposals:
            return
        batch = self.select_batch(sim)
        if not batch:
            return
        block = build_block(self.chain.tip, batch, sim.block_timestamp(self.chain.tip))
        self.proposals[(height, view)] = block
        self.acks[(height, view)] = {self.id}
        earliest = min(self.pending[tx.tx_hash][0] for tx in batch)
        sim.on_propose(self, block, view, earliest)
        for other in sim.config.orderers:
            if other != self.id:
                sim.send(self.id, other, Propose(block, view, self.id))
        self._maybe_commit(height, view, sim)

    def on_Propose(self, msg: Propose, sim: "Simulation") -> None:
        block = msg.block
        if block.height > self.next_height:
            self._request_sync(sim, [msg.sender])
            return
        if block.height < self.next_height:
            sim.send(self.id, msg.sender, SyncReply(tuple(self.chain.blocks[block.height :]), (), self.view))
            return
        if msg.view < self.view or self.leader_for(block.height, msg.view, sim) != msg.sender:
            return
        if msg.view > self.view:
            self.view = msg.view
            self.arm(sim, fresh=False)
        if block_problem(block, self.chain.tip, self.next_height, {}, check_txs=False) is not None:
            return
        scratch = self.state.copy()
        try:
            for tx in block.txs:
                process_tx(scratch, tx, sim.store)
        except (TxRejected, UnknownSubmitter):
            return
        self.proposals[(block.height, msg.view)] = block
        sim.send(self.id, msg.sender, Ack(block.height, msg.view, block.block_hash, self.id))

    def on_Ack(self, msg: Ack, sim: "Simulation") -> None:
        block = self.proposals.get((msg.height, msg.view))
        if block is None or block.block_hash != msg.block_hash or msg.height != self.next_height:
            return
        if self.leader_for(msg.height, msg.view, sim) != self.id:
            return
        self.acks.setdefault((msg.height, msg.view), set()).add(msg.sender)
        self._maybe_commit(msg.height, msg.view, sim)

    def _maybe_commit(self, height: int, view: int, sim: "Simulation") -> None:
        if len(self.acks.get((height, view), ())) < sim.config.quorum:
            return
        block = self.proposals[(height, view)]
        for node_id in sim.node_ids:
            if node_id != self.id:
                sim.send(self.id, node_id, Commit(block, self.id))
        self.commit(block, sim)

    def after_commit(self, sim: "Simulation") -> None:
        h = self.next_height
        self.proposals = {k: v for k, v in self.proposals.items() if k[0] >= h}
        self.acks = {k: v for k, v in self.acks.items() if k[0] >= h}
        self._prune()
        self.arm(sim, fresh=True)

    # -- sync / faults ------------------------------------------------------------

    def sync_reply(self, blocks: tuple[Block, ...]) -> SyncReply:
        pending = tuple(tx for _, tx in sorted(self.pending.values(), key=lambda p: (p[0], p[1].tx_hash)))
        return SyncReply(blocks, pending, self.view)

    def on_SyncReply(self, msg: SyncReply, sim: "Simulation") -> None:
        super().on_SyncReply(msg, sim)
        if msg.view is not None and msg.view > self.view:
            self.view = msg.view
        for tx in msg.pending:
            self._add_pending(tx, sim)
        self.arm(sim, fresh=True)

    def crash(self, sim: "Simulation") -> None:
        super().crash(sim)
        self.pending.clear()
        self.proposals.clear()
        self.acks.clear()
        self.token += 1


class PowNode(NodeSim):
    """Keeps every valid block it has seen and follows the preferred tip."""

    def __init__(self, *args: Any) -> None:
        super().__init__(*args)
        self.blocks: dict[bytes, Block] = {b.block_hash: b for b in self.chain}
        self.orphans: dict[bytes, list[Block]] = {}

    def on_PowBlock(self, msg: PowBlock, sim: "Simulation") -> None:
        self.accept_block(msg.block, sim, msg.sender)

    def accept_block(self, block: Block, sim: "Simulation", sender: str | None) -> None:
        if block.block_hash in self.blocks:
            return
        parent = self.blocks.get(block.prev_hash)
        if parent is None:
            self.orphans.setdefault(block.prev_hash, []).append(block)
            if sender is not None:
                sim.send(self.id, sender, ChainRequest(self.id))
            return
        if block_problem(block, parent, parent.height + 1, {}, sim.config.pow_difficulty, check_txs=False):
            return
        self.blocks[block.block_hash] = block
        if chain_rank(block.height + 1, block.block_hash) < chain_rank(len(self.chain), self.chain.tip_hash):
            self.switch_to(block, sim)
        for child in self.orphans.pop(block.block_hash, []):
            self.accept_block(child, sim, None)

    def switch_to(self, tip: Block, sim: "Simulation") -> None:
        if tip.prev_hash == self.chain.tip_hash:
            self._apply_block(tip, sim)
            self.on_new_tip(sim, [])
            return
        path = [tip]
        while path[-1].height > 0:
            path.append(self.blocks[path[-1].prev_hash])
        path.reverse()
        old = self.chain.blocks
        common = 0
        while common < min(len(old), len(path)) and old[common].block_hash == path[common].block_hash:
            common += 1
        abandoned = [tx for b in old[common:] for tx in b.txs]
        self.chain = Chain(list(path[:common]))
        self.state, _ = replay_chain(self.chain, sim.store)
        self.tx_hashes = {tx.tx_hash for b in self.chain for tx in b.txs}
        for block in path[common:]:
            self._apply_block(block, sim)
        self.on_new_tip(sim, abandoned)

    def on_new_tip(self, sim: "Simulation", abandoned: list[SignedTransaction]) -> None:
        pass

    def on_TipAnnounce(self, msg: TipAnnounce, sim: "Simulation") -> None:
        if msg.tip_hash not in self.blocks:
            sim.send(self.id, msg.sender, ChainRequest(self.id))

    def on_ChainRequest(self, msg: ChainRequest, sim: "Simulation") -> None:
        sim.send(self.id, msg.sender, ChainReply(tuple(self.chain.blocks[1:])))

    def on_ChainReply(self, msg: ChainReply, sim: "Simulation") -> None:
        for block in msg.blocks:
            self.accept_block(block, sim, None)

    def healed(self, sim: "Simulation") -> None:
        for node_id in sim.node_ids:
            if node_id != self.id:
                sim.send(self.id, node_id, TipAnnounce(self.chain.tip_hash, self.id))

    def recover(self, sim: "Simulation") -> None:
        super().recover(sim)
        self.healed(sim)


class PowMiner(PowNode):
    kind = NodeKind.ORDERER

    def __init__(self, *args: Any) -> None:
        super().__init__(*args)
        self.pending: dict[bytes, tuple[int, SignedTransaction]] = {}
        self.token = 0

    def on_TxGossip(self, msg: TxGossip, sim: "Simulation") -> None:
        h = msg.tx.tx_hash
        if h not in self.tx_hashes:
            self.pending.setdefault(h, (sim.clock.now, msg.tx))

    def start_mining(self, sim: "Simulation") -> None:
        self.token += 1
        if not self.up:
            return
        miners = len(sim.config.orderers)
        delay = sim.rng.expovariate(1.0 / (sim.config.interval_ms * miners))
        sim.clock.schedule(sim.clock.now + max(1, round(delay)), self.on_found, sim, self.token)

    def on_found(self, sim: "Simulation", token: int) -> None:
        if token != self.token or not self.up:
            return
        scratch = self.state.copy()
        batch = []
        for tx in nonce_ordered(self.pending):
            if len(batch) >= sim.config.batch_max:
                break
            try:
                process_tx(scratch, tx, sim.store)
            except (TxRejected, UnknownSubmitter) as exc:
                del self.pending[tx.tx_hash]
                sim.reject(tx.tx_hash, exc.name)
                continue
            batch.append(tx)
        template = build_block(
            self.chain.tip, batch, sim.block_timestamp(self.chain.tip), allow_empty=True
        )
        block = mine_block(template, sim.config.pow_difficulty)
        assert meets_difficulty(block.block_hash, sim.config.pow_difficulty)
        sim.blocks_mined += 1
        for node_id in sim.node_ids:
            if node_id != self.id:
                sim.send(self.id, node_id, PowBlock(block, self.id))
        self.accept_block(block, sim, None)
        if self.token == token:
            self.start_mining(sim)

    def on_new_tip(self, sim: "Simulation", abandoned: list[SignedTransaction]) -> None:
        for tx in abandoned:
            if tx.tx_hash not in self.tx_hashes:
                self.pending.setdefault(tx.tx_hash, (sim.clock.now, tx))
        for h in [h for h in self.pending if h in self.tx_hashes]:
            del self.pending[h]
        self.start_mining(sim)

    def crash(self, sim: "Simulation") -> None:
        super().crash(sim)
        self.pending.clear()
        self.token += 1

    def recover(self, sim: "Simulation") -> None:
        super().recover(sim)
        self.start_mining(sim)


# -- simulation ---------------------------------------------------------------------------


def genesis_chain(admin_key, epoch: int = DEFAULT_EPOCH) -> Chain:
    deploy_tx = sign_tx(admin_key, Deploy(key_id(admin_key)), 1)
    return Chain([build_block(None, [deploy_tx], epoch)])


@dataclass
class CommitEvent:
    at: int
    node: str
    height: int
    block_hash: bytes
    tx_count: int


class Simulation:
    def __init__(
        self,
        config: ConsensusConfig,
        genesis: Chain,
        *,
        peers: Sequence[str] = ("peer0",),
        orgs: dict[str, str] | None = None,
        seed: int = 42,
        epoch: int | None = None,
        store: PayloadStore | None = None,
        latency_ms: tuple[int, int] = (5, 50),
    ) -> None:
        if len(genesis) == 0:
            raise ScenarioError("simulation needs at least a genesis block")
        self.config = config
        self.clock = SimClock()
        self.rng = random.Random(seed)
        self.store = store
        self.latency_ms = latency_ms
        self.epoch = genesis.tip.timestamp if epoch is None else epoch
        self.receipts: dict[bytes, TxReceipt] = {}
        self.views: list[tuple[int, int]] = []
        self.commit_log: list[CommitEvent] = []
        self.proposals: list[tuple[int, str, int, int]] = []
        # (height, ms the oldest batched tx waited at the proposer)
        self.batch_waits: list[tuple[int, int]] = []
        self.view_changes: list[tuple[int, str, int]] = []
        self.committed: dict[int, bytes] = {}
        self.safety_violations: list[tuple[int, str, int]] = []
        self.blocks_mined = 0
        self.dropped = 0

        base_state, _ = replay_chain(genesis, store)
        for block in genesis:
            self.committed[block.height] = block.block_hash
        orgs = orgs or {}
        self.nodes: dict[str, NodeSim] = {}
        peer_cls, orderer_cls = (PoaPeer, PoaOrderer) if config.mode == "PoA" else (PowNode, PowMiner)
        for node_id in config.orderers:
            self.nodes[node_id] = orderer_cls(node_id, orgs.get(node_id, "OrdererOrg"), genesis.snapshot(), base_state.copy())
        for node_id in peers:
            if node_id in self.nodes:
                raise ScenarioError(f"duplicate node id {node_id}")
            self.nodes[node_id] = peer_cls(node_id, orgs.get(node_id, "Org1"), genesis.snapshot(), base_state.copy())
        self.node_ids = list(self.nodes)
        if config.mode == "PoW":
            for node_id in config.orderers:
                self.nodes[node_id].start_mining(self)

    # -- plumbing -----------------------------------------------------------------

    @property
    def now(self) -> int:
        return self.clock.now

    def node(self, node_id: str) -> NodeSim:
        try:
            return self.nodes[node_id]
        except KeyError:
            raise UnknownNode(node_id) from None

    def link_latency(self) -> int:
        lo, hi = self.latency_ms
        return self.rng.randint(lo, hi)

    def reachable(self, src: str, dst: str) -> bool:
        return self.nodes[src].partition == self.nodes[dst].partition

    def send(self, src: str, dst: str, msg: Any) -> None:
        if not self.nodes[src].up:
            return
        self.clock.call_later(self.link_latency(), self._deliver, src, dst, msg)

    def _deliver(self, src: str, dst: str, msg: Any) -> None:
        node = self.nodes[dst]
        if not node.up or not self.reachable(src, dst):
            self.dropped += 1
            return
        node.receive(msg, self)

    def block_timestamp(self, prev: Block | None) -> int:
        ts = self.epoch + self.clock.now // 1000
        return max(ts, prev.timestamp) if prev is not None else ts

    # -- hooks called by nodes ---------------------------------------------------------

    def on_commit(self, node: NodeSim, block: Block, results: list[TxResult]) -> None:
        now = self.clock.now
        self.commit_log.append(CommitEvent(now, node.id, block.height, block.block_hash, len(block.txs)))
        if self.config.mode == "PoA":
            canonical = self.committed.setdefault(block.height, block.block_hash)
            if canonical != block.block_hash:
                self.safety_violations.append((block.height, node.id, now))
        for tx, result in zip(block.txs, results):
            receipt = self.receipts.get(tx.tx_hash)
            if receipt is not None and receipt.via == node.id and receipt.committed_at is None:
                receipt.committed_at = now
                receipt.height = block.height
                receipt.error = result.error
                receipt.alarms = list(result.alarms)

    def on_propose(self, node: NodeSim, block: Block, view: int, earliest: int | None = None) -> None:
        self.proposals.append((self.clock.now, node.id, block.height, view))
        if earliest is not None:
            self.batch_waits.append((block.height, self.clock.now - earliest))

    def on_view_change(self, node: NodeSim) -> None:
        self.view_changes.append((self.clock.now, node.id, getattr(node, "view", 0)))

    def reject(self, tx_hash: bytes, error: str) -> None:
        receipt = self.receipts.get(tx_hash)
        if receipt is not None and receipt.committed_at is None and receipt.error is None:
            receipt.error = error

    # -- public operations --------------------------------------------------------------

    def submit(self, tx: SignedTransaction, via: str) -> TxReceipt:
        """Endorse ``tx`` at peer ``via`` and gossip it to every orderer.

        Raises NodeDown, TxRejected / UnknownSubmitter, or the ContractError
        from the dry run. The receipt completes when ``via`` commits the block.
        """
        node = self.node(via)
        if node.kind is not NodeKind.PEER:
            raise ScenarioError(f"{via} is not a peer")
        if not node.up:
            raise NodeDown(via)
        node.endorse(tx, self.store)
        receipt = TxReceipt(tx.tx_hash, tx.kind, via, self.clock.now)
        self.receipts[tx.tx_hash] = receipt
        for orderer in self.config.orderers:
            self.send(via, orderer, TxGossip(tx))
        return receipt

    def query(self, fn: Callable[[ContractState], Any], via: str) -> tuple[Any, int]:
        """Answer from the peer's local state; latency is one network hop."""
        node = self.node(via)
        if not node.up:
            raise NodeDown(via)
        latency = self.link_latency()
        self.views.append((self.clock.now, latency))
        return fn(node.state), latency

    def inject_fault(self, node_id: str, fault: str, group: Any = None) -> None:
        node = self.node(node_id)
        fault = fault.lower()
        if fault == "crash":
            node.crash(self)
        elif fault == "recover":
            if node.crashed:
                node.recover(self)
        elif fault == "partition":
            if group in (None, 0):
                raise ScenarioError("partition needs a non-default group label")
            node.partition = group
        elif fault == "heal":
            node.partition = 0
            if node.up:
                node.healed(self)
        else:
            raise ScenarioError(f"unknown fault {fault!r}")

    def partition(self, groups: Sequence[Sequence[str]]) -> None:
        for index, group in enumerate(groups, start=1):
            for node_id in group:
                self.inject_fault(node_id, "partition", index)

    def heal(self) -> None:
        for node_id in self.node_ids:
            self.nodes[node_id].partition = 0
        for node_id in self.node_ids:
            if self.nodes[node_id].up:
                self.nodes[node_id].healed(self)

    def current_leader(self) -> str:
        """The orderer the most advanced live orderer expects to lead next."""
        live = [self.nodes[o] for o in self.config.orderers if self.nodes[o].up]
        if not live or self.config.mode != "PoA":
            return self.config.orderers[0]
        best = max(live, key=lambda n: (n.next_height, n.view))
        return best.leader_for(best.next_height, best.view, self)

    def run(self, until_ms: int | None = None) -> None:
        self.clock.run(until_ms)

    def run_until_committed(self, receipts: Iterable[TxReceipt], limit_ms: int | None = None) -> bool:
        receipts = list(receipts)
        deadline = None if limit_ms is None else self.clock.now + limit_ms
        while any(r.committed_at is None and r.error is None for r in receipts):
            nxt = self.clock.peek()
            if nxt is None or (deadline is not None and nxt > deadline):
                return False
            self.clock.step()
        return True

    def tips(self, only_up: bool = True) -> dict[str, bytes]:
        return {
            node_id: node.chain.tip_hash
            for node_id, node in self.nodes.items()
            if node.up or not only_up
        }


__all__ = [
    "ConsensusConfig",
    "NodeKind",
    "NodeSim",
    "PoaOrderer",
    "PoaPeer",
    "PowMiner",
    "PowNode",
    "Simulation",
    "Status",
    "TxReceipt",
    "genesis_chain",
]

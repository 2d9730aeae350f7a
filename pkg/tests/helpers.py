"""Shared builders for tests."""

from __future__ import annotations

import random

from blockcoldchain.contract import ContractState, process_tx
from blockcoldchain.ledger import Chain, build_block, key_from_seed, key_id, sign_tx
from blockcoldchain.payloads import (
    AddLocation,
    Deploy,
    ItemArrival,
    ItemDeparture,
    LocationKind,
    RegisterItem,
    TemperatureReading,
)

T0 = 1_700_000_000


class Actor:
    def __init__(self, name: str, seed: int = 7) -> None:
        self.name = name
        self.key = key_from_seed(seed, name)
        self.id = key_id(self.key)
        self.nonce = 0

    def sign(self, payload, nonce: int | None = None):
        if nonce is None:
            self.nonce += 1
            nonce = self.nonce
        return sign_tx(self.key, payload, nonce)


def deployed(admin: Actor | None = None) -> tuple[ContractState, Actor]:
    admin = admin or Actor("admin")
    state = ContractState()
    result = process_tx(state, admin.sign(Deploy(admin.id)))
    assert result.ok
    return state, admin


def run(state: ContractState, tx, store=None):
    result = process_tx(state, tx, store)
    return result


def world(n_locations: int = 3, items: tuple[str, ...] = ("LOT-1",)):
    """Deployed state with a manufacturer, storage locations and registered items.

    Items start in custody at the manufacturer ``MFG`` from ``T0``.
    """
    state, admin = deployed()
    sensors = {"MFG": Actor("sensor-MFG")}
    assert run(state, admin.sign(AddLocation("MFG", LocationKind.Manufacturer, sensors["MFG"].id))).ok
    for i in range(n_locations):
        loc = f"L{i}"
        sensors[loc] = Actor(f"sensor-{loc}")
        assert run(state, admin.sign(AddLocation(loc, LocationKind.ColdRoom, sensors[loc].id))).ok
    for item in items:
        assert run(state, admin.sign(RegisterItem(item, "MFG", 200, 800, T0))).ok
    return state, admin, sensors


def random_chain(rng: random.Random, n_blocks: int, max_txs: int = 3) -> Chain:
    """A valid chain of ``n_blocks`` blocks with signed transactions in every block."""
    admin = Actor("admin", seed=rng.randrange(1 << 30))
    blocks = [build_block(None, [admin.sign(Deploy(admin.id))], T0)]
    for h in range(1, n_blocks):
        txs = []
        for _ in range(rng.randint(1, max_txs)):
            if rng.random() < 0.5:
                payload = AddLocation(f"LOC-{h}-{len(txs)}", LocationKind(rng.randrange(12)), None)
            else:
                payload = TemperatureReading("LOC", T0 + h * 60 + len(txs), rng.randint(-12000, 6000))
            txs.append(admin.sign(payload))
        ts = blocks[-1].timestamp + rng.randint(0, 20)
        blocks.append(build_block(blocks[-1], txs, ts))
    return Chain(blocks)


def move(state, item, src_actor, src, dst_actor, dst, depart_ts, arrive_ts):
    r1 = run(state, src_actor.sign(ItemDeparture(item, src, depart_ts)))
    r2 = run(state, dst_actor.sign(ItemArrival(item, dst, arrive_ts)))
    return r1, r2

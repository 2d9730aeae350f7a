"""Toy proof-of-work: nonce search and longest-chain fork choice."""

from __future__ import annotations

import hashlib
from dataclasses import replace
from typing import Sequence

from ..codec import Writer
from ..errors import InvalidCandidate
from ..ledger import Block, Chain, hash_bytes, header_bytes, leading_zero_bits, validate_chain

MAX_DIFFICULTY = 24
NONCE_LEN = 8


def meets_difficulty(block_hash: bytes, difficulty: int) -> bool:
    return leading_zero_bits(block_hash) >= difficulty


def pow_mine(template: Block, difficulty: int) -> int:
    """Smallest nonce whose 8-byte encoding in ``meta`` gives ``difficulty`` leading zero bits."""
    if not 0 <= difficulty <= MAX_DIFFICULTY:
        raise ValueError(f"difficulty must be in [0, {MAX_DIFFICULTY}]")
    # meta is the last header field: everything before it is fixed
    prefix = (
        Writer()
        .u64(template.height)
        .raw(template.prev_hash)
        .u64(template.timestamp)
        .raw(template.tx_root)
        .u32(NONCE_LEN)
        .getvalue()
    )
    shift = 256 - difficulty
    nonce = 0
    while True:
        digest = hashlib.sha256(prefix + nonce.to_bytes(NONCE_LEN, "big")).digest()
        if int.from_bytes(digest, "big") >> shift == 0:
            return nonce
        nonce += 1


def with_nonce(template: Block, nonce: int) -> Block:
    meta = nonce.to_bytes(NONCE_LEN, "big")
    digest = hash_bytes(
        header_bytes(template.height, template.prev_hash, template.timestamp, template.tx_root, meta)
    )
    return replace(template, meta=meta, block_hash=digest)


def mine_block(template: Block, difficulty: int) -> Block:
    return with_nonce(template, pow_mine(template, difficulty))


def chain_rank(height: int, tip_hash: bytes) -> tuple[int, bytes]:
    """Sort key: the preferred chain is the *minimum* of this key."""
    return (-height, tip_hash)


def fork_choice(candidates: Sequence[Chain], difficulty: int = 0) -> Chain:
    """Longest valid chain; equal lengths go to the lexicographically smaller tip hash."""
    if not candidates:
        raise InvalidCandidate("no candidates")
    for chain in candidates:
        if len(chain) == 0 or validate_chain(chain, difficulty) is not None:
            raise InvalidCandidate("candidate chain fails validation")
    return min(candidates, key=lambda c: chain_rank(len(c), c.tip_hash))

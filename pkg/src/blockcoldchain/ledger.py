"""Hash-linked ledger: signed transactions, blocks, chains and the BCC1 file."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from cryptography.exceptions import InvalidSignature as _CryptoInvalidSignature
from cryptography.hazmat.primitives import serialization
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)

from .codec import Reader, Writer
from .errors import (
    BadBlockHash,
    EncodingError,
    HeightMismatch,
    LedgerFormatError,
    LinkMismatch,
    NonMonotonicTimestamp,
    UnknownSubmitter,
)
from .payloads import (
    HASH_LEN,
    KEY_LEN,
    TxPayload,
    encode_payload,
    payload_kind,
    read_payload,
    write_payload,
)

ZERO_HASH = bytes(HASH_LEN)
SIG_LEN = 64
META_MAX = 256
LEDGER_MAGIC = b"BCC1"
_TX_DOMAIN = b"BCC1/tx"


def hash_bytes(data: bytes) -> bytes:
    return hashlib.sha256(data).digest()


# -- keys --------------------------------------------------------------------------


def key_id(key: Ed25519PrivateKey | Ed25519PublicKey) -> bytes:
    """Raw 32-byte public key, used directly as the submitter id."""
    if isinstance(key, Ed25519PrivateKey):
        key = key.public_key()
    return key.public_bytes(serialization.Encoding.Raw, serialization.PublicFormat.Raw)


def private_key_bytes(key: Ed25519PrivateKey) -> bytes:
    return key.private_bytes(
        serialization.Encoding.Raw,
        serialization.PrivateFormat.Raw,
        serialization.NoEncryption(),
    )


def key_from_seed(seed: int | str, name: str) -> Ed25519PrivateKey:
    """Deterministic key for simulations and tests; never use for real data."""
    material = hash_bytes(f"bcc-key:{seed}:{name}".encode())
    return Ed25519PrivateKey.from_private_bytes(material)


@lru_cache(maxsize=4096)
def public_key(kid: bytes) -> Ed25519PublicKey:
    return Ed25519PublicKey.from_public_bytes(kid)


# -- transactions --------------------------------------------------------------------


def signing_message(payload: TxPayload, submitter: bytes, nonce: int) -> bytes:
    w = Writer().raw(_TX_DOMAIN).blob(encode_payload(payload))
    return w.fixed(submitter, KEY_LEN).u64(nonce).getvalue()


@dataclass(frozen=True)
class SignedTransaction:
    payload: TxPayload
    submitter: bytes
    nonce: int
    signature: bytes

    @property
    def kind(self) -> str:
        return payload_kind(self.payload)

    def write(self, w: Writer) -> None:
        write_payload(w, self.payload)
        w.fixed(self.submitter, KEY_LEN).u64(self.nonce).fixed(self.signature, SIG_LEN)

    @classmethod
    def read(cls, r: Reader) -> "SignedTransaction":
        payload = read_payload(r)
        return cls(payload, r.fixed(KEY_LEN), r.u64(), r.fixed(SIG_LEN))

    def to_bytes(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "SignedTransaction":
        r = Reader(data)
        tx = cls.read(r)
        r.done()
        return tx

    @property
    def tx_hash(self) -> bytes:
        return _tx_hash(self)


@lru_cache(maxsize=65536)
def _tx_hash(tx: SignedTransaction) -> bytes:
    return hash_bytes(tx.to_bytes())


def sign_tx(key: Ed25519PrivateKey, payload: TxPayload, nonce: int) -> SignedTransaction:
    submitter = key_id(key)
    signature = key.sign(signing_message(payload, submitter, nonce))
    return SignedTransaction(payload, submitter, nonce, signature)


def signature_valid(tx: SignedTransaction, key: Ed25519PublicKey | None = None) -> bool:
    """Check the signature alone; ids are raw public keys, so ``key`` is optional."""
    try:
        key = key if key is not None else public_key(tx.submitter)
        key.verify(tx.signature, signing_message(tx.payload, tx.submitter, tx.nonce))
    except (_CryptoInvalidSignature, ValueError, EncodingError):
        return False
    return True


def verify_tx(
    tx: SignedTransaction,
    key_registry: Mapping[bytes, Ed25519PublicKey],
    last_nonce: Mapping[bytes, int] | None = None,
) -> bool:
    """True iff the signature is valid under the registered key and the nonce is fresh.

    Raises UnknownSubmitter when the submitter is not in ``key_registry``.
    """
    registered = key_registry.get(tx.submitter)
    if registered is None:
        raise UnknownSubmitter(tx.submitter.hex())
    if last_nonce is not None and tx.nonce <= last_nonce.get(tx.submitter, 0):
        return False
    return signature_valid(tx, registered)


# -- blocks -----------------------------------------------------------------------------


def tx_root(txs: Iterable[SignedTransaction]) -> bytes:
    return hash_bytes(b"".join(tx.tx_hash for tx in txs))


def header_bytes(height: int, prev_hash: bytes, timestamp: int, root: bytes, meta: bytes) -> bytes:
    w = Writer().u64(height).fixed(prev_hash, HASH_LEN).u64(timestamp)
    return w.fixed(root, HASH_LEN).blob(meta, META_MAX).getvalue()


@dataclass(frozen=True)
class Block:
    height: int
    prev_hash: bytes
    timestamp: int
    tx_root: bytes
    txs: tuple[SignedTransaction, ...]
    meta: bytes
    block_hash: bytes

    def header_bytes(self) -> bytes:
        return header_bytes(self.height, self.prev_hash, self.timestamp, self.tx_root, self.meta)

    def compute_hash(self) -> bytes:
        return hash_bytes(self.header_bytes())

    def write(self, w: Writer) -> None:
        w.raw(self.header_bytes()).fixed(self.block_hash, HASH_LEN).u32(len(self.txs))
        for tx in self.txs:
            tx.write(w)

    def to_bytes(self) -> bytes:
        w = Writer()
        self.write(w)
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "Block":
        r = Reader(data)
        height, prev_hash, timestamp = r.u64(), r.fixed(HASH_LEN), r.u64()
        root, meta = r.fixed(HASH_LEN), r.blob(META_MAX)
        block_hash = r.fixed(HASH_LEN)
        txs = tuple(SignedTransaction.read(r) for _ in range(r.u32()))
        r.done()
        return cls(height, prev_hash, timestamp, root, txs, meta, block_hash)


def build_block(
    prev: Block | None,
    txs: Sequence[SignedTransaction],
    timestamp: int,
    meta: bytes = b"",
    allow_empty: bool = False,
) -> Block:
    """Build the successor of ``prev``; ``prev=None`` builds a genesis block.

    Only genesis may be empty unless ``allow_empty`` (proof-of-work miners).
    """
    if prev is None:
        height, prev_hash = 0, ZERO_HASH
    else:
        if not txs and not allow_empty:
            raise ValueError("non-genesis blocks must carry transactions")
        if timestamp < prev.timestamp:
            raise NonMonotonicTimestamp(f"{timestamp} < {prev.timestamp}")
        height, prev_hash = prev.height + 1, prev.block_hash
    txs = tuple(txs)
    root = tx_root(txs)
    block_hash = hash_bytes(header_bytes(height, prev_hash, timestamp, root, meta))
    return Block(height, prev_hash, timestamp, root, txs, meta, block_hash)


# -- chains -----------------------------------------------------------------------------


@dataclass
class Chain:
    """Append-only block list. Only ``append_block`` ever grows it."""

    _blocks: list[Block] = field(default_factory=list)

    @property
    def blocks(self) -> tuple[Block, ...]:
        return tuple(self._blocks)

    @property
    def tip(self) -> Block | None:
        return self._blocks[-1] if self._blocks else None

    @property
    def tip_hash(self) -> bytes:
        return self._blocks[-1].block_hash if self._blocks else ZERO_HASH

    def __len__(self) -> int:
        return len(self._blocks)

    def __iter__(self) -> Iterator[Block]:
        return iter(self._blocks)

    def __getitem__(self, index: int) -> Block:
        return self._blocks[index]

    def snapshot(self) -> "Chain":
        return Chain(list(self._blocks))


def append_block(chain: Chain, block: Block) -> Chain:
    tip = chain.tip
    expected_prev = tip.block_hash if tip is not None else ZERO_HASH
    expected_height = tip.height + 1 if tip is not None else 0
    if block.prev_hash != expected_prev:
        raise LinkMismatch(f"block {block.height} does not link to tip")
    if block.height != expected_height:
        raise HeightMismatch(f"expected height {expected_height}, got {block.height}")
    if block.compute_hash() != block.block_hash:
        raise BadBlockHash(f"block {block.height}")
    if tip is not None and block.timestamp < tip.timestamp:
        raise NonMonotonicTimestamp(f"block {block.height}")
    chain._blocks.append(block)
    return chain


def leading_zero_bits(digest: bytes) -> int:
    value = int.from_bytes(digest, "big")
    return len(digest) * 8 - value.bit_length()


def block_problem(
    block: Block,
    prev: Block | None,
    expected_height: int,
    nonces: dict[bytes, int],
    difficulty: int = 0,
    check_txs: bool = True,
) -> str | None:
    """Describe why ``block`` cannot follow ``prev``; None when it can.

    ``nonces`` is the per-submitter high-water mark and is advanced in place
    for blocks that pass.
    """
    if block.height != expected_height:
        return "height"
    if prev is None:
        if block.prev_hash != ZERO_HASH:
            return "link"
    else:
        if block.prev_hash != prev.block_hash:
            return "link"
        if block.timestamp < prev.timestamp:
            return "timestamp"
    if block.compute_hash() != block.block_hash:
        return "block_hash"
    if tx_root(block.txs) != block.tx_root:
        return "tx_root"
    if prev is not None and difficulty and leading_zero_bits(block.block_hash) < difficulty:
        return "difficulty"
    if not check_txs:
        return None
    seen = dict(nonces)
    for tx in block.txs:
        if tx.nonce <= seen.get(tx.submitter, 0):
            return "nonce"
        if not signature_valid(tx):
            return "signature"
        seen[tx.submitter] = tx.nonce
    nonces.update(seen)
    return None


def validate_chain(chain: Chain | Sequence[Block], difficulty: int = 0) -> int | None:
    """Return None if the chain is valid, else the lowest invalid height."""
    nonces: dict[bytes, int] = {}
    prev = None
    for index, block in enumerate(chain):
        if block_problem(block, prev, index, nonces, difficulty) is not None:
            return index
        prev = block
    return None


# -- ledger file ----------------------------------------------------------------------------


def encode_ledger(blocks: Iterable[Block]) -> bytes:
    w = Writer().raw(LEDGER_MAGIC)
    for block in blocks:
        w.blob(block.to_bytes())
    return w.getvalue()


def write_ledger(path: str | Path, chain: Chain | Iterable[Block]) -> None:
    Path(path).write_bytes(encode_ledger(chain))


def append_ledger(path: str | Path, blocks: Iterable[Block]) -> None:
    path = Path(path)
    if not path.exists():
        path.write_bytes(LEDGER_MAGIC)
    with path.open("ab") as fh:
        for block in blocks:
            fh.write(Writer().blob(block.to_bytes()).getvalue())


def split_records(data: bytes) -> tuple[list[bytes], bool]:
    """Split a ledger image into block records; the flag is False if the tail is torn."""
    if data[:4] != LEDGER_MAGIC:
        raise LedgerFormatError("missing BCC1 magic")
    r = Reader(data[4:])
    records: list[bytes] = []
    while r.remaining:
        try:
            records.append(r.blob())
        except EncodingError:
            return records, False
    return records, True


def scan_ledger_bytes(data: bytes, difficulty: int = 0) -> tuple[Chain, int | None]:
    """Decode and validate a ledger image.

    Returns the valid prefix and the first invalid height (None if every
    record decodes and validates).
    """
    records, complete = split_records(data)
    chain = Chain()
    nonces: dict[bytes, int] = {}
    for height, record in enumerate(records):
        try:
            block = Block.from_bytes(record)
        except EncodingError:
            return chain, height
        if block_problem(block, chain.tip, height, nonces, difficulty) is not None:
            return chain, height
        chain._blocks.append(block)
    return chain, (None if complete else len(records))


def read_ledger(path: str | Path, difficulty: int = 0) -> Chain:
    chain, bad = scan_ledger_bytes(Path(path).read_bytes(), difficulty)
    if bad is not None:
        raise LedgerFormatError(f"ledger invalid at height {bad}")
    return chain

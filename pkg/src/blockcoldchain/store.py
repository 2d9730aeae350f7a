"""Content-addressed off-chain store for logger dumps.

Only a ``LoggerDumpRef`` (location, hash, first/last timestamp, count) goes on
chain; the dump itself lives in a directory of files named by the lowercase
hex SHA-256 of their canonical bytes.
"""

from __future__ import annotations

import os
import struct
import tempfile
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import TYPE_CHECKING, Sequence

from .codec import Reader, Writer
from .errors import CorruptPayload, DumpRefMismatch, EncodingError, MissingPayload, StaleTimestamp
from .ledger import hash_bytes
from .payloads import ID_MAX, LoggerDumpRef, TemperatureReading

if TYPE_CHECKING:
    from .contract import Alarm, ContractState

# 30 days at one reading per 10 minutes
MAX_DUMP_READINGS = 4320
# one dump record: u64 timestamp, i32 centi-degrees
_RECORD = struct.Struct(">Qi")


@dataclass(frozen=True)
class LoggerDump:
    location: str
    readings: tuple[TemperatureReading, ...]

    def __post_init__(self) -> None:
        if len(self.readings) > MAX_DUMP_READINGS:
            raise ValueError(f"dump holds {len(self.readings)} readings, max {MAX_DUMP_READINGS}")
        prev = None
        for r in self.readings:
            if r.location != self.location:
                raise ValueError(f"reading for {r.location} in dump for {self.location}")
            if prev is not None and r.ts <= prev:
                raise ValueError("dump readings must have strictly increasing timestamps")
            prev = r.ts

    def to_bytes(self) -> bytes:
        w = Writer().text(self.location, ID_MAX).u32(len(self.readings))
        try:
            w.raw(b"".join(_RECORD.pack(r.ts, r.temp) for r in self.readings))
        except struct.error as exc:
            raise EncodingError(f"reading does not fit the dump record: {exc}") from exc
        return w.getvalue()

    @classmethod
    def from_bytes(cls, data: bytes) -> "LoggerDump":
        r = Reader(data)
        location = r.text(ID_MAX)
        count = r.u32()
        if count > MAX_DUMP_READINGS:
            raise EncodingError("dump too large")
        body = r.take(count * _RECORD.size)
        r.done()
        readings = tuple(TemperatureReading(location, ts, temp) for ts, temp in _RECORD.iter_unpack(body))
        return cls(location, readings)

    @cached_property
    def content_hash(self) -> bytes:
        return hash_bytes(self.to_bytes())


def make_ref(dump: LoggerDump) -> LoggerDumpRef:
    if not dump.readings:
        raise ValueError("empty dump")
    return LoggerDumpRef(
        dump.location,
        dump.content_hash,
        dump.readings[0].ts,
        dump.readings[-1].ts,
        len(dump.readings),
    )


def dump_from_readings(location: str, readings: Sequence[TemperatureReading]) -> LoggerDump:
    return LoggerDump(location, tuple(readings))


class PayloadStore:
    def __init__(self, root: str | os.PathLike) -> None:
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)

    def path_for(self, digest: bytes) -> Path:
        return self.root / digest.hex()

    def put(self, dump: LoggerDump) -> bytes:
        data = dump.to_bytes()
        digest = hash_bytes(data)
        target = self.path_for(digest)
        if target.exists():
            return digest
        # write-then-rename keeps concurrent writers of the same content safe
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=".tmp-")
        try:
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        return digest

    def get(self, digest: bytes) -> LoggerDump:
        path = self.path_for(digest)
        try:
            data = path.read_bytes()
        except FileNotFoundError:
            raise MissingPayload(digest.hex()) from None
        if hash_bytes(data) != digest:
            raise CorruptPayload(digest.hex())
        try:
            return LoggerDump.from_bytes(data)
        except (EncodingError, ValueError) as exc:
            raise CorruptPayload(digest.hex()) from exc

    def __contains__(self, digest: bytes) -> bool:
        return self.path_for(digest).exists()

    def __len__(self) -> int:
        return sum(1 for p in self.root.iterdir() if not p.name.startswith("."))


def ingest_dump(
    state: "ContractState",
    ref: LoggerDumpRef,
    store: PayloadStore | None,
    caller: bytes,
    dry_run: bool = False,
) -> list["Alarm"]:
    if store is None:
        raise MissingPayload("no payload store attached")
    dump = store.get(ref.dump_hash)
    if dump.location != ref.location_id or len(dump.readings) != ref.count:
        raise DumpRefMismatch("reference does not describe the stored dump")
    if ref.count and (dump.readings[0].ts != ref.first_ts or dump.readings[-1].ts != ref.last_ts):
        raise DumpRefMismatch("reference time span does not match the stored dump")
    series = state.temps.get(ref.location_id)
    if series and dump.readings and dump.readings[0].ts <= series[-1].ts:
        raise StaleTimestamp("dump overlaps the on-chain series")
    return state.ingest_readings(caller, ref.location_id, dump.readings, dry_run)

"""Transaction payloads and their canonical encoding.

Each payload is a frozen dataclass with a one-byte union tag. Fields are
encoded in declaration order according to ``_FIELDS``.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from enum import IntEnum
from typing import ClassVar, Union

from .codec import Reader, Writer
from .errors import EncodingError

ID_MAX = 64
KEY_LEN = 32
HASH_LEN = 32


class LocationKind(IntEnum):
    ColdRoom = 0
    FreezerRoom = 1
    Freezer = 2
    Refrigerator = 3
    ColdBox = 4
    RefrigeratedTruck = 5
    VaccineCarrier = 6
    HealthCenter = 7
    Airport = 8
    CentralStore = 9
    RegionalStore = 10
    Manufacturer = 11


@dataclass(frozen=True)
class Deploy:
    TAG: ClassVar[int] = 0
    deployer: bytes


@dataclass(frozen=True)
class RegisterItem:
    TAG: ClassVar[int] = 1
    item_id: str
    manufacturer: str
    safe_min: int = 200
    safe_max: int = 800
    registered_at: int = 0


@dataclass(frozen=True)
class AddAdmin:
    TAG: ClassVar[int] = 2
    new_admin: bytes


@dataclass(frozen=True)
class AddLocation:
    TAG: ClassVar[int] = 3
    location_id: str
    kind: LocationKind
    sensor_key: bytes | None = None


@dataclass(frozen=True)
class RemoveLocation:
    TAG: ClassVar[int] = 4
    location_id: str


@dataclass(frozen=True)
class ItemArrival:
    TAG: ClassVar[int] = 5
    item_id: str
    location_id: str
    ts: int


@dataclass(frozen=True)
class ItemDeparture:
    TAG: ClassVar[int] = 6
    item_id: str
    location_id: str
    ts: int


@dataclass(frozen=True)
class TemperatureReading:
    """A single reading in signed centi-degrees Celsius."""

    TAG: ClassVar[int] = 7
    location: str
    ts: int
    temp: int


@dataclass(frozen=True)
class LoggerDumpRef:
    TAG: ClassVar[int] = 8
    location_id: str
    dump_hash: bytes
    first_ts: int
    last_ts: int
    count: int


TxPayload = Union[
    Deploy,
    RegisterItem,
    AddAdmin,
    AddLocation,
    RemoveLocation,
    ItemArrival,
    ItemDeparture,
    TemperatureReading,
    LoggerDumpRef,
]

PAYLOAD_TYPES: dict[int, type] = {
    cls.TAG: cls
    for cls in (
        Deploy,
        RegisterItem,
        AddAdmin,
        AddLocation,
        RemoveLocation,
        ItemArrival,
        ItemDeparture,
        TemperatureReading,
        LoggerDumpRef,
    )
}

# field kinds: id (text <= 64 bytes), key (32 raw bytes), hash (32 raw bytes),
# optkey (flag byte + key), kind (u8 enum), u64, u32, i32
_FIELDS: dict[type, tuple[str, ...]] = {
    Deploy: ("key",),
    RegisterItem: ("id", "id", "i32", "i32", "u64"),
    AddAdmin: ("key",),
    AddLocation: ("id", "kind", "optkey"),
    RemoveLocation: ("id",),
    ItemArrival: ("id", "id", "u64"),
    ItemDeparture: ("id", "id", "u64"),
    TemperatureReading: ("id", "u64", "i32"),
    LoggerDumpRef: ("id", "hash", "u64", "u64", "u32"),
}


def _write_field(w: Writer, kind: str, value) -> None:
    if kind == "id":
        w.text(value, ID_MAX)
    elif kind == "key":
        w.fixed(value, KEY_LEN)
    elif kind == "hash":
        w.fixed(value, HASH_LEN)
    elif kind == "optkey":
        if value is None:
            w.u8(0)
        else:
            w.u8(1).fixed(value, KEY_LEN)
    elif kind == "kind":
        w.u8(int(value))
    else:
        getattr(w, kind)(value)


def _read_field(r: Reader, kind: str):
    if kind == "id":
        return r.text(ID_MAX)
    if kind in ("key", "hash"):
        return r.fixed(KEY_LEN)
    if kind == "optkey":
        flag = r.u8()
        if flag == 0:
            return None
        if flag != 1:
            raise EncodingError(f"bad option flag {flag}")
        return r.fixed(KEY_LEN)
    if kind == "kind":
        value = r.u8()
        try:
            return LocationKind(value)
        except ValueError as exc:
            raise EncodingError(f"unknown location kind {value}") from exc
    return getattr(r, kind)()


def write_payload(w: Writer, payload: TxPayload) -> None:
    cls = type(payload)
    w.u8(cls.TAG)
    for field, kind in zip(dataclasses.fields(cls), _FIELDS[cls]):
        _write_field(w, kind, getattr(payload, field.name))


def read_payload(r: Reader) -> TxPayload:
    tag = r.u8()
    cls = PAYLOAD_TYPES.get(tag)
    if cls is None:
        raise EncodingError(f"unknown payload tag {tag}")
    values = [_read_field(r, kind) for kind in _FIELDS[cls]]
    return cls(*values)


def encode_payload(payload: TxPayload) -> bytes:
    w = Writer()
    write_payload(w, payload)
    return w.getvalue()


def decode_payload(data: bytes) -> TxPayload:
    r = Reader(data)
    payload = read_payload(r)
    r.done()
    return payload


def payload_kind(payload: TxPayload) -> str:
    return type(payload).__name__

"""Cold-chain contract: roles, locations, items, custody and temperature history.

Every handler checks all of its preconditions before touching the state, so
a raised ``ContractError`` always leaves the state exactly as it was.
Temperatures are integer centi-degrees Celsius throughout.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import TYPE_CHECKING, Iterable, Sequence

from .codec import Writer
from .errors import (
    BadRange,
    ContractError,
    CustodyConflict,
    DuplicateDeploy,
    DuplicateId,
    InactiveLocation,
    InvalidSignature,
    OutOfGlobalBounds,
    ReplayedNonce,
    StaleTimestamp,
    TxRejected,
    Unauthorized,
    UnknownItem,
    UnknownLocation,
    UnknownSubmitter,
)
from .ledger import Chain, SignedTransaction, hash_bytes, public_key, signature_valid, verify_tx
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

if TYPE_CHECKING:
    from .store import PayloadStore

GLOBAL_MIN = -12000
GLOBAL_MAX = 6000
ULTRACOLD_MIN = -9000
DEFAULT_SAFE_MIN = 200
DEFAULT_SAFE_MAX = 800
DEFAULT_GAP = 600


def format_centi(value: int) -> str:
    """Render centi-degrees as a decimal string with two fraction digits."""
    sign = "-" if value < 0 else ""
    whole, frac = divmod(abs(value), 100)
    return f"{sign}{whole}.{frac:02d}"


def parse_centi(text: str) -> int:
    from decimal import Decimal, InvalidOperation

    try:
        value = Decimal(text) * 100
    except InvalidOperation as exc:
        raise ValueError(f"not a temperature: {text!r}") from exc
    if value != value.to_integral_value():
        raise ValueError(f"more than two fraction digits: {text!r}")
    return int(value)


def alarm_check(reading: "TemperatureReading | int", safe_min: int, safe_max: int) -> bool:
    """True iff the temperature lies outside the closed safe range, in either direction."""
    temp = reading.temp if isinstance(reading, TemperatureReading) else reading
    return temp < safe_min or temp > safe_max


@dataclass(frozen=True)
class Location:
    id: str
    kind: LocationKind
    active: bool = True
    sensor_key: bytes | None = None


@dataclass(frozen=True)
class Item:
    id: str
    manufacturer: str
    safe_min: int = DEFAULT_SAFE_MIN
    safe_max: int = DEFAULT_SAFE_MAX
    registered_at: int = 0


@dataclass(frozen=True)
class CustodyInterval:
    location: str
    arrived_at: int
    departed_at: int | None = None

    @property
    def open(self) -> bool:
        return self.departed_at is None

    def end(self, now: int) -> int:
        return self.departed_at if self.departed_at is not None else max(now, self.arrived_at)


@dataclass(frozen=True)
class Alarm:
    item_id: str
    location: str
    ts: int
    temp: int


@dataclass
class TxResult:
    tx_hash: bytes
    kind: str
    error: str | None = None
    alarms: list[Alarm] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.error is None


@dataclass
class ContractState:
    admins: set[bytes] = field(default_factory=set)
    locations: dict[str, Location] = field(default_factory=dict)
    items: dict[str, Item] = field(default_factory=dict)
    custody: dict[str, list[CustodyInterval]] = field(default_factory=dict)
    temps: dict[str, list[TemperatureReading]] = field(default_factory=dict)
    sensor_bindings: dict[bytes, str] = field(default_factory=dict)
    last_nonce: dict[bytes, int] = field(default_factory=dict)
    deployer: bytes | None = None
    # derived, excluded from the state root
    clock: int = 0
    visits: dict[str, list[str]] = field(default_factory=dict)
    _ts_index: dict[str, list[int]] = field(default_factory=dict, repr=False)

    # -- construction / snapshots ---------------------------------------------

    @classmethod
    def deploy(cls, deployer: bytes) -> "ContractState":
        return cls(admins={deployer}, deployer=deployer)

    @property
    def deployed(self) -> bool:
        return self.deployer is not None

    def copy(self) -> "ContractState":
        return ContractState(
            admins=set(self.admins),
            locations=dict(self.locations),
            items=dict(self.items),
            custody={k: list(v) for k, v in self.custody.items()},
            temps={k: list(v) for k, v in self.temps.items()},
            sensor_bindings=dict(self.sensor_bindings),
            last_nonce=dict(self.last_nonce),
            deployer=self.deployer,
            clock=self.clock,
            visits={k: list(v) for k, v in self.visits.items()},
            _ts_index={k: list(v) for k, v in self._ts_index.items()},
        )

    def canonical_bytes(self) -> bytes:
        """World state in canonical form. Nonce counters and indexes are excluded."""
        w = Writer()
        w.u32(len(self.admins))
        for admin in sorted(self.admins):
            w.raw(admin)
        w.u32(len(self.locations))
        for loc in sorted(self.locations.values(), key=lambda l: l.id):
            w.text(loc.id).u8(int(loc.kind)).u8(int(loc.active))
            w.u8(0) if loc.sensor_key is None else w.u8(1).raw(loc.sensor_key)
        w.u32(len(self.items))
        for item in sorted(self.items.values(), key=lambda i: i.id):
            w.text(item.id).text(item.manufacturer).i32(item.safe_min).i32(item.safe_max)
            w.u64(item.registered_at)
        w.u32(len(self.custody))
        for item_id in sorted(self.custody):
            intervals = self.custody[item_id]
            w.text(item_id).u32(len(intervals))
            for iv in intervals:
                w.text(iv.location).u64(iv.arrived_at)
                w.u8(0) if iv.departed_at is None else w.u8(1).u64(iv.departed_at)
        w.u32(len(self.temps))
        for loc_id in sorted(self.temps):
            series = self.temps[loc_id]
            w.text(loc_id).u32(len(series))
            for reading in series:
                w.u64(reading.ts).i32(reading.temp)
        w.u32(len(self.sensor_bindings))
        for key in sorted(self.sensor_bindings):
            w.raw(key).text(self.sensor_bindings[key])
        return w.getvalue()

    def state_root(self) -> bytes:
        return hash_bytes(self.canonical_bytes())

    def key_registry(self) -> dict[bytes, object]:
        keys = set(self.admins) | set(self.sensor_bindings)
        return {kid: public_key(kid) for kid in keys}

    def is_admin(self, key: bytes) -> bool:
        return key in self.admins

    # -- access helpers --------------------------------------------------------

    def _location(self, location_id: str) -> Location:
        loc = self.locations.get(location_id)
        if loc is None:
            raise UnknownLocation(location_id)
        return loc

    def _item(self, item_id: str) -> Item:
        item = self.items.get(item_id)
        if item is None:
            raise UnknownItem(item_id)
        return item

    def _require_admin(self, caller: bytes) -> None:
        if caller not in self.admins:
            raise Unauthorized("caller is not an administrator")

    def _require_location_actor(self, caller: bytes, loc: Location) -> None:
        if caller in self.admins:
            return
        if self.sensor_bindings.get(caller) != loc.id:
            raise Unauthorized(f"caller is not bound to {loc.id}")

    def _tick(self, ts: int) -> None:
        if ts > self.clock:
            self.clock = ts

    # -- handlers ------------------------------------------------------------------

    def add_admin(self, caller: bytes, new_admin: bytes, dry_run: bool = False) -> None:
        self._require_admin(caller)
        if new_admin in self.admins:
            raise DuplicateId("already an administrator")
        if not dry_run:
            self.admins.add(new_admin)

    def add_location(
        self,
        caller: bytes,
        location_id: str,
        kind: LocationKind,
        sensor_key: bytes | None = None,
        dry_run: bool = False,
    ) -> None:
        self._require_admin(caller)
        if location_id in self.locations:
            raise DuplicateId(location_id)
        if sensor_key is not None and sensor_key in self.sensor_bindings:
            raise DuplicateId("sensor key already bound")
        if dry_run:
            return
        self.locations[location_id] = Location(location_id, LocationKind(kind), True, sensor_key)
        self.temps.setdefault(location_id, [])
        self._ts_index.setdefault(location_id, [])
        if sensor_key is not None:
            self.sensor_bindings[sensor_key] = location_id

    def remove_location(self, caller: bytes, location_id: str, dry_run: bool = False) -> None:
        self._require_admin(caller)
        loc = self._location(location_id)
        if not loc.active:
            raise InactiveLocation(location_id)
        if not dry_run:
            self.locations[location_id] = replace(loc, active=False)

    def register_item(self, caller: bytes, item: Item, dry_run: bool = False) -> None:
        loc = self._location(item.manufacturer)
        self._require_location_actor(caller, loc)
        if not loc.active:
            raise InactiveLocation(loc.id)
        if item.id in self.items:
            raise DuplicateId(item.id)
        if not (ULTRACOLD_MIN <= item.safe_min < item.safe_max <= GLOBAL_MAX):
            raise BadRange(f"[{item.safe_min}, {item.safe_max}]")
        if dry_run:
            return
        self.items[item.id] = item
        self.custody[item.id] = [CustodyInterval(loc.id, item.registered_at)]
        self._visit(loc.id, item.id)
        self._tick(item.registered_at)

    def record_arrival(
        self, caller: bytes, item_id: str, location_id: str, ts: int, dry_run: bool = False
    ) -> None:
        self._item(item_id)
        loc = self._location(location_id)
        self._require_location_actor(caller, loc)
        if not loc.active:
            raise InactiveLocation(location_id)
        intervals = self.custody[item_id]
        last = intervals[-1]
        if last.open:
            raise CustodyConflict(f"{item_id} is still held at {last.location}")
        if ts <= last.departed_at:
            raise StaleTimestamp(f"arrival {ts} not after last event {last.departed_at}")
        if dry_run:
            return
        intervals.append(CustodyInterval(location_id, ts))
        self._visit(location_id, item_id)
        self._tick(ts)

    def record_departure(
        self, caller: bytes, item_id: str, location_id: str, ts: int, dry_run: bool = False
    ) -> None:
        self._item(item_id)
        loc = self._location(location_id)
        self._require_location_actor(caller, loc)
        intervals = self.custody[item_id]
        last = intervals[-1]
        if not last.open or last.location != location_id:
            raise CustodyConflict(f"{item_id} is not held at {location_id}")
        if ts <= last.arrived_at:
            raise StaleTimestamp(f"departure {ts} not after arrival {last.arrived_at}")
        if dry_run:
            return
        intervals[-1] = replace(last, departed_at=ts)
        self._tick(ts)

    def record_temperature(
        self, caller: bytes, reading: TemperatureReading, dry_run: bool = False
    ) -> list[Alarm]:
        return self.ingest_readings(caller, reading.location, [reading], dry_run)

    def ingest_readings(
        self,
        caller: bytes,
        location_id: str,
        readings: Sequence[TemperatureReading],
        dry_run: bool = False,
    ) -> list[Alarm]:
        """Fold a batch of readings into one location's series, all or nothing."""
        loc = self._location(location_id)
        self._require_location_actor(caller, loc)
        if not loc.active:
            raise InactiveLocation(location_id)
        series = self._ts_index[location_id]
        prev_ts = series[-1] if series else None
        for reading in readings:
            if reading.location != location_id:
                raise UnknownLocation(f"reading for {reading.location} in {location_id} batch")
            if not GLOBAL_MIN <= reading.temp <= GLOBAL_MAX:
                raise OutOfGlobalBounds(str(reading.temp))
            if prev_ts is not None and reading.ts <= prev_ts:
                raise StaleTimestamp(f"reading at {reading.ts} not after {prev_ts}")
            prev_ts = reading.ts
        if dry_run:
            return []
        holders = [
            self.items[item_id]
            for item_id in self.visits.get(location_id, ())
            if self.custody[item_id][-1].open and self.custody[item_id][-1].location == location_id
        ]
        alarms = []
        for reading in readings:
            for item in holders:
                if self.custody[item.id][-1].arrived_at <= reading.ts and alarm_check(
                    reading.temp, item.safe_min, item.safe_max
                ):
                    alarms.append(Alarm(item.id, location_id, reading.ts, reading.temp))
        self.temps[location_id].extend(readings)
        series.extend(r.ts for r in readings)
        if readings:
            self._tick(readings[-1].ts)
        return alarms

    def _visit(self, location_id: str, item_id: str) -> None:
        visitors = self.visits.setdefault(location_id, [])
        if item_id not in visitors:
            visitors.append(item_id)

    # -- dispatch ------------------------------------------------------------------

    def apply(
        self,
        tx: SignedTransaction,
        store: "PayloadStore | None" = None,
        dry_run: bool = False,
    ) -> list[Alarm]:
        """Run the contract handler for ``tx`` with ``tx.submitter`` as caller.

        Signature and nonce are not checked here; see ``process_tx``.
        """
        p = tx.payload
        caller = tx.submitter
        if isinstance(p, Deploy):
            if self.deployed:
                raise DuplicateDeploy("contract already deployed")
            if caller != p.deployer:
                raise Unauthorized("deployer must sign its own deployment")
            if not dry_run:
                self.deployer = p.deployer
                self.admins.add(p.deployer)
            return []
        if isinstance(p, AddAdmin):
            self.add_admin(caller, p.new_admin, dry_run)
        elif isinstance(p, AddLocation):
            self.add_location(caller, p.location_id, p.kind, p.sensor_key, dry_run)
        elif isinstance(p, RemoveLocation):
            self.remove_location(caller, p.location_id, dry_run)
        elif isinstance(p, RegisterItem):
            item = Item(p.item_id, p.manufacturer, p.safe_min, p.safe_max, p.registered_at)
            self.register_item(caller, item, dry_run)
        elif isinstance(p, ItemArrival):
            self.record_arrival(caller, p.item_id, p.location_id, p.ts, dry_run)
        elif isinstance(p, ItemDeparture):
            self.record_departure(caller, p.item_id, p.location_id, p.ts, dry_run)
        elif isinstance(p, TemperatureReading):
            return self.record_temperature(caller, p, dry_run)
        elif isinstance(p, LoggerDumpRef):
            from .store import ingest_dump

            return ingest_dump(self, p, store, caller, dry_run)
        else:  # pragma: no cover - exhaustive over TxPayload
            raise TypeError(f"unsupported payload {type(p).__name__}")
        return []


def deploy(deployer: bytes) -> ContractState:
    return ContractState.deploy(deployer)


def apply_tx(
    state: ContractState, tx: SignedTransaction, store: "PayloadStore | None" = None
) -> tuple[ContractState, list[Alarm]]:
    """Functional form: return a new state; ``state`` itself is never modified."""
    new = state.copy()
    alarms = new.apply(tx, store)
    return new, alarms


def check_admission(state: ContractState, tx: SignedTransaction) -> None:
    """Signature, registry and nonce checks that precede contract execution."""
    if isinstance(tx.payload, Deploy) and not state.deployed:
        if not signature_valid(tx):
            raise InvalidSignature("bad deploy signature")
        return
    if not verify_tx(tx, state.key_registry(), None):
        raise InvalidSignature(tx.submitter.hex()[:16])
    if tx.nonce <= state.last_nonce.get(tx.submitter, 0):
        raise ReplayedNonce(f"nonce {tx.nonce} already used")


def process_tx(
    state: ContractState,
    tx: SignedTransaction,
    store: "PayloadStore | None" = None,
) -> TxResult:
    """Admit and execute one transaction in place.

    ``TxRejected`` / ``UnknownSubmitter`` propagate and leave the state alone.
    An admitted transaction consumes its nonce even when the contract refuses
    it; the refusal is reported in the result and the world state is untouched.
    """
    check_admission(state, tx)
    state.last_nonce[tx.submitter] = tx.nonce
    result = TxResult(tx.tx_hash, tx.kind)
    try:
        result.alarms = state.apply(tx, store)
    except ContractError as exc:
        result.error = exc.name
    return result


def replay_chain(
    chain: Chain | Iterable, store: "PayloadStore | None" = None
) -> tuple[ContractState, list[TxResult]]:
    state = ContractState()
    results: list[TxResult] = []
    for block in chain:
        for tx in block.txs:
            try:
                results.append(process_tx(state, tx, store))
            except (TxRejected, UnknownSubmitter) as exc:  # recorded, not fatal
                results.append(TxResult(tx.tx_hash, tx.kind, exc.name))
    return state, results


# -- queries ----------------------------------------------------------------------


class Verdict(str, Enum):
    SAFE = "SAFE"
    COMPROMISED = "COMPROMISED"
    UNKNOWN = "UNKNOWN"


@dataclass(frozen=True)
class Gap:
    hop: int
    location: str
    start: int
    end: int


@dataclass(frozen=True)
class Excursion:
    hop: int
    reading: TemperatureReading


@dataclass
class HopReport:
    interval: CustodyInterval
    kind: LocationKind | None
    readings: list[TemperatureReading]
    gaps: list[Gap]


@dataclass
class Violations:
    excursions: list[Excursion]
    gaps: list[Gap]


@dataclass
class ItemReport:
    item: Item
    hops: list[HopReport]
    verdict: Verdict
    excursions: list[Excursion]
    now: int

    def to_dict(self) -> dict:
        def reading(r: TemperatureReading) -> dict:
            return {"ts": r.ts, "temp": format_centi(r.temp)}

        hops = []
        for index, hop in enumerate(self.hops):
            temps = [r.temp for r in hop.readings]
            hops.append(
                {
                    "hop": index,
                    "location": hop.interval.location,
                    "kind": hop.kind.name if hop.kind is not None else None,
                    "arrived_at": hop.interval.arrived_at,
                    "departed_at": hop.interval.departed_at,
                    "reading_count": len(temps),
                    "min_temp": format_centi(min(temps)) if temps else None,
                    "max_temp": format_centi(max(temps)) if temps else None,
                    "readings": [reading(r) for r in hop.readings],
                    "gaps": [{"start": g.start, "end": g.end} for g in hop.gaps],
                }
            )
        return {
            "item": {
                "id": self.item.id,
                "manufacturer": self.item.manufacturer,
                "safe_min": format_centi(self.item.safe_min),
                "safe_max": format_centi(self.item.safe_max),
                "registered_at": self.item.registered_at,
            },
            "verdict": self.verdict.value,
            "as_of": self.now,
            "hops": hops,
            "excursions": [
                {"hop": e.hop, "location": e.reading.location, **reading(e.reading)}
                for e in self.excursions
            ],
        }


def _hop_readings(state: ContractState, interval: CustodyInterval, now: int) -> list[TemperatureReading]:
    series = state.temps.get(interval.location, [])
    index = state._ts_index.get(interval.location, [])
    lo = bisect.bisect_left(index, interval.arrived_at)
    hi = bisect.bisect_left(index, interval.end(now))
    return series[lo:hi]


def _hop_gaps(hop: int, interval: CustodyInterval, readings: Sequence[TemperatureReading], now: int, threshold: int) -> list[Gap]:
    start, end = interval.arrived_at, interval.end(now)
    if not readings:
        return [Gap(hop, interval.location, start, end)]
    points = [start, *(r.ts for r in readings), end]
    return [
        Gap(hop, interval.location, a, b)
        for a, b in zip(points, points[1:])
        if b - a > threshold
    ]


def _analyze(state: ContractState, item_id: str, gap_threshold: int, now: int | None):
    item = state._item(item_id)
    now = state.clock if now is None else now
    hops: list[HopReport] = []
    excursions: list[Excursion] = []
    for index, interval in enumerate(state.custody[item_id]):
        readings = _hop_readings(state, interval, now)
        gaps = _hop_gaps(index, interval, readings, now, gap_threshold)
        loc = state.locations.get(interval.location)
        hops.append(HopReport(interval, loc.kind if loc else None, readings, gaps))
        excursions.extend(
            Excursion(index, r) for r in readings if alarm_check(r.temp, item.safe_min, item.safe_max)
        )
    return item, hops, excursions, now


def detect_violations(
    state: ContractState, item_id: str, gap_threshold: int = DEFAULT_GAP, now: int | None = None
) -> Violations:
    _, hops, excursions, _ = _analyze(state, item_id, gap_threshold, now)
    return Violations(excursions, [g for hop in hops for g in hop.gaps])


def query_item_history(
    state: ContractState, item_id: str, gap_threshold: int = DEFAULT_GAP, now: int | None = None
) -> ItemReport:
    """Full custody and temperature history for one item.

    Open intervals run until ``now``, which defaults to the latest event
    timestamp the contract has seen.
    """
    item, hops, excursions, now = _analyze(state, item_id, gap_threshold, now)
    if excursions:
        verdict = Verdict.COMPROMISED
    elif any(hop.gaps or not hop.readings for hop in hops):
        verdict = Verdict.UNKNOWN
    else:
        verdict = Verdict.SAFE
    return ItemReport(item, hops, verdict, excursions, now)


def query_location_items(state: ContractState, location_id: str, at: int) -> list[str]:
    state._location(location_id)
    found = []
    for item_id in state.visits.get(location_id, ()):
        for iv in state.custody[item_id]:
            if iv.location == location_id and iv.arrived_at <= at and (iv.open or at < iv.departed_at):
                found.append(item_id)
                break
    return found


def query_location_temps(
    state: ContractState, location_id: str, start: int, end: int
) -> list[TemperatureReading]:
    state._location(location_id)
    if start > end:
        raise BadRange(f"from {start} > to {end}")
    index = state._ts_index[location_id]
    lo = bisect.bisect_left(index, start)
    hi = bisect.bisect_right(index, end)
    return state.temps[location_id][lo:hi]

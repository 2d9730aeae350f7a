import random
import threading

import pytest
from hypothesis import given, settings, strategies as st

from blockcoldchain.contract import process_tx
from blockcoldchain.errors import CorruptPayload, MissingPayload
from blockcoldchain.ledger import hash_bytes
from blockcoldchain.payloads import LoggerDumpRef, TemperatureReading
from blockcoldchain.sensors import SensorProfile, generate_trace
from blockcoldchain.store import MAX_DUMP_READINGS, LoggerDump, PayloadStore, dump_from_readings, make_ref

from helpers import T0, run, world


def _dump(n=144, location="MFG", t0=T0, seed=1):
    trace = generate_trace(SensorProfile(location, noise_amp=200), t0, n * 600, seed)
    return dump_from_readings(location, trace)


def test_put_get_round_trip(tmp_path):
    store = PayloadStore(tmp_path)
    dump = _dump()
    digest = store.put(dump)
    assert digest == hash_bytes(dump.to_bytes())
    assert store.get(digest) == dump
    assert store.path_for(digest).name == digest.hex()
    assert store.path_for(digest).read_bytes() == dump.to_bytes()


def test_put_is_idempotent(tmp_path):
    store = PayloadStore(tmp_path)
    dump = _dump()
    assert store.put(dump) == store.put(dump)
    assert len(store) == 1


def test_concurrent_puts_of_same_content(tmp_path):
    store = PayloadStore(tmp_path)
    dump = _dump()
    threads = [threading.Thread(target=store.put, args=(dump,)) for _ in range(8)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    assert len(store) == 1 and store.get(dump.content_hash) == dump


def test_missing(tmp_path):
    with pytest.raises(MissingPayload):
        PayloadStore(tmp_path).get(b"\x00" * 32)


def test_corruption_detected_on_read(tmp_path):
    store = PayloadStore(tmp_path)
    digest = store.put(_dump())
    path = store.path_for(digest)
    data = bytearray(path.read_bytes())
    data[random.Random(0).randrange(len(data))] ^= 0x01
    path.write_bytes(bytes(data))
    with pytest.raises(CorruptPayload):
        store.get(digest)


def test_dump_invariants():
    with pytest.raises(ValueError):
        LoggerDump("A", (TemperatureReading("A", 2, 0), TemperatureReading("A", 2, 0)))
    with pytest.raises(ValueError):
        LoggerDump("A", (TemperatureReading("B", 2, 0),))
    too_many = tuple(TemperatureReading("A", i, 0) for i in range(MAX_DUMP_READINGS + 1))
    with pytest.raises(ValueError):
        LoggerDump("A", too_many)


@settings(max_examples=30, deadline=None)
@given(st.lists(st.integers(-12000, 6000), min_size=1, max_size=50), st.integers(1, 900))
def test_dump_bytes_round_trip(temps, step):
    dump = LoggerDump("X", tuple(TemperatureReading("X", T0 + i * step, t) for i, t in enumerate(temps)))
    assert LoggerDump.from_bytes(dump.to_bytes()) == dump


def test_distinct_dumps_distinct_hashes():
    hashes = {_dump(seed=s).content_hash for s in range(50)}
    assert len(hashes) == 50


def test_ingest_grows_series_by_dump_size(tmp_path):
    store = PayloadStore(tmp_path)
    state, admin, sensors = world()
    dump = _dump(144)
    store.put(dump)
    result = process_tx(state, sensors["MFG"].sign(make_ref(dump)), store)
    assert result.ok
    assert len(state.temps["MFG"]) == 144


def test_full_thirty_day_dump_is_one_transaction(tmp_path):
    store = PayloadStore(tmp_path)
    state, admin, sensors = world()
    dump = _dump(MAX_DUMP_READINGS)
    store.put(dump)
    tx = sensors["MFG"].sign(make_ref(dump))
    assert process_tx(state, tx, store).ok
    assert len(state.temps["MFG"]) == MAX_DUMP_READINGS
    assert len(tx.to_bytes()) < 300


def test_overlapping_dump_is_stale_and_atomic(tmp_path):
    store = PayloadStore(tmp_path)
    state, admin, sensors = world()
    assert run(state, sensors["MFG"].sign(TemperatureReading("MFG", T0 + 600, 500))).ok
    before = state.state_root()
    dump = _dump(10)
    store.put(dump)
    assert process_tx(state, sensors["MFG"].sign(make_ref(dump)), store).error == "StaleTimestamp"
    assert state.state_root() == before


def test_missing_and_mismatched_refs(tmp_path):
    store = PayloadStore(tmp_path)
    state, admin, sensors = world()
    dump = _dump(10)
    ref = make_ref(dump)
    assert process_tx(state, sensors["MFG"].sign(ref), store).error == "MissingPayload"
    assert process_tx(state, sensors["MFG"].sign(ref), None).error == "MissingPayload"
    store.put(dump)
    bad = LoggerDumpRef(ref.location_id, ref.dump_hash, ref.first_ts, ref.last_ts, ref.count + 1)
    assert process_tx(state, sensors["MFG"].sign(bad), store).error == "DumpRefMismatch"
    other = LoggerDumpRef("L0", ref.dump_hash, ref.first_ts, ref.last_ts, ref.count)
    assert process_tx(state, sensors["L0"].sign(other), store).error == "DumpRefMismatch"


def test_dump_requires_location_key(tmp_path):
    store = PayloadStore(tmp_path)
    state, admin, sensors = world()
    dump = _dump(10)
    store.put(dump)
    assert process_tx(state, sensors["L0"].sign(make_ref(dump)), store).error == "Unauthorized"


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32), st.integers(1, 200))
def test_dump_equals_individual_submissions(tmp_path_factory, seed, n):
    store = PayloadStore(tmp_path_factory.mktemp("s"))
    dump = _dump(n, seed=seed)
    store.put(dump)
    a, _, sa = world()
    b, _, sb = world()
    assert process_tx(a, sa["MFG"].sign(make_ref(dump)), store).ok
    for r in dump.readings:
        assert process_tx(b, sb["MFG"].sign(r)).ok
    assert a.temps == b.temps
    assert a.state_root() == b.state_root()

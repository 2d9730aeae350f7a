import io
import json
from fractions import Fraction

import pytest
from hypothesis import given, settings, strategies as st

from blockcoldchain.contract import Verdict, query_item_history
from blockcoldchain.errors import BadProfile, WindowOutOfRange
from blockcoldchain.payloads import TemperatureReading
from blockcoldchain.sensors import (
    ExcursionSpec,
    SensorProfile,
    alarm_check,
    dump_jsonl,
    generate_trace,
    inject_excursion,
    load_jsonl,
)

from helpers import T0, run, world


def test_degenerate_profile_is_flat():
    trace = generate_trace(SensorProfile("F-1", base_temp=500), T0, 6 * 3600, seed=1)
    assert len(trace) == 36 and {r.temp for r in trace} == {500}
    assert [r.ts for r in trace] == [T0 + 600 * k for k in range(36)]


def test_thirty_days_at_ten_minutes():
    trace = generate_trace(SensorProfile("F-1", noise_amp=100), T0, 30 * 86400, seed=2)
    assert len(trace) == 4320


def test_same_seed_same_trace():
    p = SensorProfile("F-1", noise_amp=150, interval=300, drift_per_day=40)
    assert generate_trace(p, T0, 86400, 9) == generate_trace(p, T0, 86400, 9)
    assert generate_trace(p, T0, 86400, 9) != generate_trace(p, T0, 86400, 10)


@given(
    st.integers(1, 600),
    st.integers(0, 500),
    st.integers(-1000, 1000),
    st.integers(1, 3 * 86400),
    st.integers(0, 2**32),
)
@settings(max_examples=60, deadline=None)
def test_trace_properties(interval, noise, drift, duration, seed):
    p = SensorProfile("L", base_temp=400, noise_amp=noise, interval=interval, drift_per_day=drift)
    trace = generate_trace(p, T0, duration, seed)
    assert len(trace) == duration // interval
    for k, r in enumerate(trace):
        assert r.ts == T0 + k * interval
        d = drift * (k * interval) // 86400
        assert 400 + d - noise <= r.temp <= 400 + d + noise


@pytest.mark.parametrize("kwargs", [{"interval": 0}, {"interval": 601}, {"noise_amp": -1}])
def test_bad_profile(kwargs):
    with pytest.raises(BadProfile):
        SensorProfile("F-1", **kwargs)


def test_bad_duration():
    with pytest.raises(BadProfile):
        generate_trace(SensorProfile("F-1"), T0, 0, 1)


def _oracle_ramp(orig, target, dist, ramp):
    # independent closed form: orig + (target - orig) * dist / ramp, round half to even
    return orig + round(Fraction(target - orig) * Fraction(dist, ramp))


def test_excursion_plateau_ramps_and_locality():
    trace = generate_trace(SensorProfile("F-1", base_temp=500, noise_amp=80, interval=60), T0, 4 * 3600, 3)
    spec = ExcursionSpec(T0 + 3600, T0 + 7200, 1500, ramp=600)
    out = inject_excursion(trace, spec)
    assert len(out) == len(trace)
    for before, after in zip(trace, out):
        assert before.ts == after.ts
        if after.ts < spec.start or after.ts > spec.end:
            assert before == after
        elif spec.start + spec.ramp <= after.ts <= spec.end - spec.ramp:
            assert after.temp == 1500
        elif after.ts < spec.start + spec.ramp:
            assert after.temp == _oracle_ramp(before.temp, 1500, after.ts - spec.start, spec.ramp)
        else:
            assert after.temp == _oracle_ramp(before.temp, 1500, spec.end - after.ts, spec.ramp)


def test_excursion_edges_ramp_from_original_value():
    trace = generate_trace(SensorProfile("F-1", base_temp=500, interval=60), T0, 3600, 0)
    out = inject_excursion(trace, ExcursionSpec(T0 + 600, T0 + 1800, 1100, ramp=600))
    by_ts = {r.ts: r.temp for r in out}
    assert by_ts[T0 + 600] == 500 and by_ts[T0 + 900] == 800 and by_ts[T0 + 1200] == 1100
    assert by_ts[T0 + 1500] == 800 and by_ts[T0 + 1800] == 500


def test_zero_length_plateau_only_ramps():
    trace = generate_trace(SensorProfile("F-1", base_temp=0, interval=100), T0, 2000, 0)
    out = inject_excursion(trace, ExcursionSpec(T0 + 200, T0 + 1000, 800, ramp=400))
    temps = {r.ts: r.temp for r in out}
    assert temps[T0 + 600] == 800
    assert [temps[T0 + t] for t in (200, 300, 400, 500)] == [0, 200, 400, 600]


@pytest.mark.parametrize(
    "args",
    [(T0 + 10, T0 + 10, 900, 0), (T0 + 10, T0 + 100, 900, 46), (T0 + 10, T0 + 100, 900, -1)],
)
def test_bad_excursion_spec(args):
    with pytest.raises(WindowOutOfRange):
        ExcursionSpec(*args)


def test_excursion_outside_trace():
    trace = generate_trace(SensorProfile("F-1"), T0, 3600, 0)
    with pytest.raises(WindowOutOfRange):
        inject_excursion(trace, ExcursionSpec(T0 - 10, T0 + 600, 900))
    with pytest.raises(WindowOutOfRange):
        inject_excursion(trace, ExcursionSpec(T0, T0 + 3600, 900))


def test_alarm_check_both_sides():
    assert alarm_check(TemperatureReading("F", T0, 900), 200, 800)
    assert not alarm_check(TemperatureReading("F", T0, 800), 200, 800)
    assert alarm_check(100, 200, 800)


def test_jsonl_round_trip():
    trace = generate_trace(SensorProfile("F-1", noise_amp=300), T0, 7200, 5)
    buf = io.StringIO()
    dump_jsonl(trace, buf)
    first = buf.getvalue().splitlines()[0]
    assert set(json.loads(first)) == {"location", "ts", "temp_centi"}
    buf.seek(0)
    assert load_jsonl(buf) == trace


def test_injected_excursion_compromises_item():
    state, admin, sensors = world()
    trace = generate_trace(SensorProfile("MFG", base_temp=500, noise_amp=100), T0, 6 * 3600, 11)
    trace = inject_excursion(trace, ExcursionSpec(T0 + 3600, T0 + 5400, 1500, ramp=600))
    for r in trace:
        assert run(state, sensors["MFG"].sign(r)).ok
    report = query_item_history(state, "LOT-1", now=trace[-1].ts + 1)
    assert report.verdict is Verdict.COMPROMISED
    assert {e.reading.ts for e in report.excursions} >= {T0 + 4200, T0 + 4800}

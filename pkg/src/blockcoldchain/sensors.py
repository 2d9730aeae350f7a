"""Synthetic temperature-logger traces."""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from fractions import Fraction
from typing import IO, Iterable, Sequence

from .contract import alarm_check
from .errors import BadProfile, WindowOutOfRange
from .payloads import TemperatureReading

__all__ = [
    "SensorProfile",
    "ExcursionSpec",
    "generate_trace",
    "inject_excursion",
    "alarm_check",
    "dump_jsonl",
    "load_jsonl",
]

MAX_INTERVAL = 600
SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class SensorProfile:
    location: str
    base_temp: int = 500
    noise_amp: int = 0
    interval: int = MAX_INTERVAL
    drift_per_day: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.interval <= MAX_INTERVAL:
            raise BadProfile(f"interval must be in (0, {MAX_INTERVAL}] s, got {self.interval}")
        if self.noise_amp < 0:
            raise BadProfile("noise_amp must be non-negative")


@dataclass(frozen=True)
class ExcursionSpec:
    start: int
    end: int
    target_temp: int
    ramp: int = 0

    def __post_init__(self) -> None:
        if self.start >= self.end:
            raise WindowOutOfRange("start must precede end")
        if self.ramp < 0 or 2 * self.ramp > self.end - self.start:
            raise WindowOutOfRange("ramp must fit twice inside the window")


def generate_trace(profile: SensorProfile, t0: int, duration: int, seed: int) -> list[TemperatureReading]:
    """Readings at ``t0 + k * interval`` for k in [0, floor(duration / interval)).

    temp = base + uniform integer noise in [-noise_amp, noise_amp] + drift,
    where drift is ``drift_per_day`` scaled by elapsed time (floored).
    """
    if duration <= 0:
        raise BadProfile("duration must be positive")
    rng = random.Random(seed)
    count = duration // profile.interval
    trace = []
    for k in range(count):
        elapsed = k * profile.interval
        noise = rng.randint(-profile.noise_amp, profile.noise_amp) if profile.noise_amp else 0
        drift = profile.drift_per_day * elapsed // SECONDS_PER_DAY
        trace.append(TemperatureReading(profile.location, t0 + elapsed, profile.base_temp + noise + drift))
    return trace


def _ramp(orig: int, target: int, num: int, den: int) -> int:
    return orig + round(Fraction((target - orig) * num, den))


def inject_excursion(trace: Sequence[TemperatureReading], spec: ExcursionSpec) -> list[TemperatureReading]:
    """Overwrite readings inside ``[start, end]`` with an excursion to ``target_temp``.

    Within ``ramp`` seconds of either edge each reading moves linearly from its
    own value toward the target; the plateau holds the target exactly.
    """
    if not trace or spec.start < trace[0].ts or spec.end > trace[-1].ts:
        raise WindowOutOfRange("excursion window outside trace span")
    lo, hi = spec.start + spec.ramp, spec.end - spec.ramp
    out = []
    for r in trace:
        if r.ts < spec.start or r.ts > spec.end:
            out.append(r)
        elif lo <= r.ts <= hi:
            out.append(TemperatureReading(r.location, r.ts, spec.target_temp))
        elif r.ts < lo:
            out.append(TemperatureReading(r.location, r.ts, _ramp(r.temp, spec.target_temp, r.ts - spec.start, spec.ramp)))
        else:
            out.append(TemperatureReading(r.location, r.ts, _ramp(r.temp, spec.target_temp, spec.end - r.ts, spec.ramp)))
    return out


def dump_jsonl(readings: Iterable[TemperatureReading], fh: IO[str]) -> None:
    for r in readings:
        fh.write(json.dumps({"location": r.location, "ts": r.ts, "temp_centi": r.temp}) + "\n")


def load_jsonl(fh: IO[str]) -> list[TemperatureReading]:
    out = []
    for line in fh:
        line = line.strip()
        if line:
            row = json.loads(line)
            out.append(TemperatureReading(str(row["location"]), int(row["ts"]), int(row["temp_centi"])))
    return out

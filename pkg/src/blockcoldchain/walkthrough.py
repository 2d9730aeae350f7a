"""Scripted five-hop vaccine journey driven entirely through the ``bcc`` CLI.

Manufacturer -> airport truck -> central store -> regional store -> health
center. Each hop holds the lot for ``leg_s`` seconds and uploads one logger
dump at a 10-minute cadence. With ``excursion=True`` the truck leg logs a
15.00 °C plateau in the middle of the leg.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

from .payloads import LocationKind
from .sensors import ExcursionSpec, SensorProfile, dump_jsonl, generate_trace, inject_excursion
from .sim.network import DEFAULT_EPOCH

ITEM = "LOT-1"
ADMIN = "admin"
EXCURSION_TEMP = 1500
TRUCK = "AIRPORT-TRUCK-1"

PATH: list[tuple[str, LocationKind]] = [
    ("MFG-1", LocationKind.Manufacturer),
    (TRUCK, LocationKind.RefrigeratedTruck),
    ("CENTRAL-1", LocationKind.CentralStore),
    ("REGIONAL-1", LocationKind.RegionalStore),
    ("HEALTH-1", LocationKind.HealthCenter),
]


@dataclass
class Walkthrough:
    workdir: Path
    excursion: bool = False
    t0: int = DEFAULT_EPOCH + 3600
    leg_s: int = 6 * 3600
    transfer_s: int = 60
    seed: int = 42

    def base_args(self) -> list[str]:
        w = self.workdir
        return [
            "--ledger", str(w / "ledger.bcc"),
            "--store", str(w / "payloads"),
            "--keys", str(w / "keys"),
            "--seed", str(self.seed),
        ]

    def arrivals(self) -> list[int]:
        step = self.leg_s + self.transfer_s
        return [self.t0 + i * step for i in range(len(PATH))]

    def trace(self, hop: int) -> list:
        location, _ = PATH[hop]
        arrived = self.arrivals()[hop]
        profile = SensorProfile(location, base_temp=500, noise_amp=150, interval=600)
        readings = generate_trace(profile, arrived, self.leg_s, self.seed * 100 + hop)
        if self.excursion and location == TRUCK:
            mid = arrived + self.leg_s // 3
            readings = inject_excursion(readings, ExcursionSpec(mid, mid + 1800, EXCURSION_TEMP))
        return readings

    def commands(self) -> list[list[str]]:
        """Every CLI invocation, in order; the last one is the consumer check."""
        self.workdir.mkdir(parents=True, exist_ok=True)
        base = self.base_args()
        cmds = [base + ["init", "--admin", ADMIN, "--time", str(self.t0 - 3600)]]
        for loc, _ in PATH:
            cmds.append(base + ["keygen", f"key-{loc}"])
        for loc, kind in PATH:
            cmds.append(base + ["admin", "add-location", "--as", ADMIN, loc, "--kind", kind.name, "--sensor", f"key-{loc}"])
        mfg = PATH[0][0]
        cmds.append(base + ["admin", "register-item", "--as", ADMIN, ITEM, "--manufacturer", mfg,
                            "--min", "2.00", "--max", "8.00", "--ts", str(self.t0)])
        arrivals = self.arrivals()
        for hop, (loc, _) in enumerate(PATH):
            signer = ["--as", f"key-{loc}"]
            if hop > 0:
                cmds.append(base + ["location", "arrive", *signer, ITEM, "--ts", str(arrivals[hop])])
            trace_file = self.workdir / f"trace-{hop}-{loc}.jsonl"
            with trace_file.open("w") as fh:
                dump_jsonl(self.trace(hop), fh)
            cmds.append(base + ["location", "submit-dump", *signer, str(trace_file)])
            if hop < len(PATH) - 1:
                cmds.append(base + ["location", "depart", *signer, ITEM, "--ts", str(arrivals[hop] + self.leg_s)])
        cmds.append(base + ["--format", "json", "verify", ITEM])
        return cmds


def run(walk: Walkthrough, invoke: Callable[[Sequence[str]], tuple[int, str]]) -> tuple[int, str]:
    """Run every setup step (each must exit 0) and return the verify result."""
    cmds = walk.commands()
    for args in cmds[:-1]:
        code, output = invoke(args)
        if code != 0:
            raise RuntimeError(f"`bcc {' '.join(args)}` exited {code}: {output}")
    return invoke(cmds[-1])

import json

import pytest
from click.testing import CliRunner

from blockcoldchain.cli import cli
from blockcoldchain.ledger import LEDGER_MAGIC, read_ledger, split_records
from blockcoldchain.sensors import SensorProfile, dump_jsonl, generate_trace, inject_excursion, ExcursionSpec

T = 1_650_000_000


class Bcc:
    def __init__(self, root):
        self.root = root
        self.runner = CliRunner()
        self.base = ["--ledger", str(root / "ledger.bcc"), "--store", str(root / "store"), "--keys", str(root / "keys")]

    def __call__(self, *args, fmt=None):
        extra = ["--format", fmt] if fmt else []
        return self.runner.invoke(cli, self.base + extra + [str(a) for a in args])

    def ok(self, *args, fmt=None):
        result = self(*args, fmt=fmt)
        assert result.exit_code == 0, (args, result.output, result.stderr)
        return result

    def json(self, *args):
        return json.loads(self.ok(*args, fmt="json").stdout)


@pytest.fixture
def bcc(tmp_path):
    b = Bcc(tmp_path)
    b.ok("init", "--admin", "admin", "--time", T - 3600)
    return b


def _three_hop(bcc, excursion=False):
    hops = [("MFG-1", "Manufacturer"), ("TRUCK-1", "RefrigeratedTruck"), ("HC-1", "HealthCenter")]
    for loc, kind in hops:
        bcc.ok("keygen", f"k-{loc}")
        bcc.ok("admin", "add-location", "--as", "admin", loc, "--kind", kind, "--sensor", f"k-{loc}")
    bcc.ok("admin", "register-item", "--as", "admin", "LOT-1", "--manufacturer", "MFG-1", "--ts", T)
    leg = 3 * 3600
    for i, (loc, _) in enumerate(hops):
        start = T + i * (leg + 60)
        if i:
            bcc.ok("location", "arrive", "--as", f"k-{loc}", "LOT-1", "--ts", start)
        trace = generate_trace(SensorProfile(loc, noise_amp=100), start, leg, i)
        if excursion and i == 1:
            trace = inject_excursion(trace, ExcursionSpec(start + 3600, start + 4800, 1500))
        path = bcc.root / f"{loc}.jsonl"
        with path.open("w") as fh:
            dump_jsonl(trace, fh)
        bcc.ok("location", "submit-dump", "--as", f"k-{loc}", path)
        if i < len(hops) - 1:
            bcc.ok("location", "depart", "--as", f"k-{loc}", "LOT-1", "--ts", start + leg)
    return hops


def test_init_twice_fails(bcc):
    result = bcc("init", "--admin", "admin")
    assert result.exit_code != 0 and "LedgerExists" in result.stderr


def test_add_location_then_inspect(bcc):
    bcc.ok("admin", "add-location", "--as", "admin", "F-1", "--kind", "Freezer")
    data = bcc.json("admin", "inspect")
    assert [loc["id"] for loc in data["locations"]] == ["F-1"]
    assert data["height"] == 1


def test_register_item_bad_range(bcc):
    bcc.ok("admin", "add-location", "--as", "admin", "MFG-1", "--kind", "Manufacturer")
    result = bcc("admin", "register-item", "--as", "admin", "LOT-1", "--manufacturer", "MFG-1",
                 "--min", "8.00", "--max", "8.00", "--ts", T)
    assert result.exit_code != 0
    assert "BadRange" in result.stderr


def test_submit_temp_and_wrong_location(bcc):
    bcc.ok("keygen", "k1")
    bcc.ok("keygen", "k2")
    bcc.ok("admin", "add-location", "--as", "admin", "F-1", "--kind", "Freezer", "--sensor", "k1")
    bcc.ok("admin", "add-location", "--as", "admin", "F-2", "--kind", "Freezer", "--sensor", "k2")
    receipt = bcc.json("location", "submit-temp", "--as", "k1", "5.00", "--ts", T)
    assert receipt["kind"] == "TemperatureReading" and receipt["height"] == 3 and receipt["error"] is None
    result = bcc("location", "submit-temp", "--as", "k2", "--location", "F-1", "5.00", "--ts", T + 600)
    assert result.exit_code == 1 and result.stderr.startswith("Unauthorized")
    temps = bcc.json("location", "my-temps", "--as", "k1")
    assert temps["readings"] == [{"ts": T, "temp": "5.00"}]


def test_submit_dump_is_one_tx(bcc):
    bcc.ok("keygen", "k1")
    bcc.ok("admin", "add-location", "--as", "admin", "F-1", "--kind", "Freezer", "--sensor", "k1")
    trace = generate_trace(SensorProfile("F-1", noise_amp=50), T, 30 * 86400, 1)
    path = bcc.root / "dump.jsonl"
    with path.open("w") as fh:
        dump_jsonl(trace, fh)
    assert len(path.read_text().splitlines()) == 4320
    before = len(read_ledger(bcc.root / "ledger.bcc"))
    bcc.ok("location", "submit-dump", "--as", "k1", path)
    chain = read_ledger(bcc.root / "ledger.bcc")
    assert len(chain) == before + 1 and len(chain.tip.txs) == 1
    assert bcc.json("location", "my-temps", "--as", "k1")["count"] == 4320


def test_verify_clean_three_hops(bcc):
    hops = _three_hop(bcc)
    result = bcc("verify", "LOT-1", fmt="json")
    assert result.exit_code == 0
    report = json.loads(result.stdout)
    assert report["verdict"] == "SAFE"
    assert [h["location"] for h in report["hops"]] == [loc for loc, _ in hops]
    inspect = bcc.json("admin", "inspect")
    assert {l["id"] for l in inspect["locations"]} == {loc for loc, _ in hops}
    assert [i["id"] for i in inspect["items"]] == ["LOT-1"]


def test_verify_excursion_and_unknown(bcc):
    _three_hop(bcc, excursion=True)
    result = bcc("verify", "LOT-1", fmt="json")
    assert result.exit_code == 2
    report = json.loads(result.stdout)
    assert report["verdict"] == "COMPROMISED"
    assert report["excursions"][0]["ts"] == T + 3 * 3600 + 60 + 3600
    assert report["excursions"][0]["location"] == "TRUCK-1"
    table = bcc("verify", "LOT-1")
    assert table.exit_code == 2 and "TRUCK-1" in table.stdout
    assert bcc("verify", "NOPE").exit_code == 4
    assert bcc("consumer", "verify", "NOPE").exit_code == 4


def test_verify_unknown_verdict(bcc):
    bcc.ok("admin", "add-location", "--as", "admin", "MFG-1", "--kind", "Manufacturer")
    bcc.ok("admin", "register-item", "--as", "admin", "LOT-1", "--manufacturer", "MFG-1", "--ts", T)
    assert bcc("verify", "LOT-1", "--now", T + 3600).exit_code == 3


def test_my_items(bcc):
    _three_hop(bcc)
    data = bcc.json("location", "my-items", "--as", "k-HC-1")
    assert data["items"] == ["LOT-1"]
    assert bcc.json("location", "my-items", "--as", "k-MFG-1", "--at", T + 10)["items"] == ["LOT-1"]


def test_admin_add_admin_and_remove_location(bcc):
    bcc.ok("keygen", "second")
    bcc.ok("admin", "add-admin", "--as", "admin", "second")
    bcc.ok("admin", "add-location", "--as", "second", "F-1", "--kind", "2")
    bcc.ok("admin", "remove-location", "--as", "second", "F-1")
    data = bcc.json("admin", "inspect")
    assert len(data["admins"]) == 2 and data["locations"][0]["active"] is False
    result = bcc("admin", "remove-location", "--as", "second", "F-1")
    assert result.exit_code == 1 and "InactiveLocation" in result.stderr


def test_cli_mutations_replay_to_same_root(bcc):
    _three_hop(bcc)
    inspect = bcc.json("admin", "inspect")
    replay = bcc.json("replay")
    assert replay["state_root"] == inspect["state_root"]
    assert replay["failed_txs"] == 0


def test_replay_detects_flipped_byte(bcc):
    _three_hop(bcc)
    path = bcc.root / "ledger.bcc"
    data = path.read_bytes()
    records, _ = split_records(data)
    offset = len(LEDGER_MAGIC) + sum(4 + len(r) for r in records[:3]) + 4 + 20
    mutated = bytearray(data)
    mutated[offset] ^= 0xFF
    bad = bcc.root / "bad.bcc"
    bad.write_bytes(bytes(mutated))
    result = bcc("replay", bad)
    assert result.exit_code != 0
    height = int(result.stderr.strip().rsplit(" ", 1)[-1])
    assert height <= 3
    assert bcc("replay").exit_code == 0


def test_csv_format(bcc):
    bcc.ok("admin", "add-location", "--as", "admin", "F-1", "--kind", "Freezer")
    out = bcc.ok("admin", "inspect", fmt="csv").stdout
    assert "id,kind,active,sensor,readings" in out


SCENARIO = """
name: tiny
seed: 5
workload:
  txs: 40
  locations: 4
"""


def test_bench_writes_deterministic_csv(tmp_path):
    runner = CliRunner()
    path = tmp_path / "tiny.yaml"
    path.write_text(SCENARIO)
    outs = []
    for i in range(2):
        out = tmp_path / f"out{i}"
        result = runner.invoke(cli, ["--format", "json", "bench", str(path), "--out", str(out)])
        assert result.exit_code == 0, result.output
        summary = json.loads(result.stdout)
        assert summary["submitted"] == summary["committed"] == 40
        outs.append(out)
    for name in ("latency.csv", "commits.csv"):
        assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()
    summaries = [json.loads((o / "summary.json").read_text()) for o in outs]
    for s in summaries:
        s.pop("wall_s")
    assert summaries[0] == summaries[1]
    header = (outs[0] / "latency.csv").read_text().splitlines()[0]
    assert header == "tx_id,kind,accepted_ms,committed_ms"
    # two nodes' ledgers from one run replay to the same state root
    roots = {
        json.loads(runner.invoke(cli, ["--format", "json", "--store", str(tmp_path / "s"), "replay",
                                       str(outs[0] / "ledgers" / f"{node}.bcc")]).stdout)["state_root"]
        for node in ("orderer0", "peer1")
    }
    assert len(roots) == 1


def test_bench_bad_scenario(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_text("bogus: 1\n")
    result = CliRunner().invoke(cli, ["bench", str(path)])
    assert result.exit_code == 1 and "ScenarioError" in result.stderr

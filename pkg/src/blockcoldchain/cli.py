"""``bcc`` command line: admin, location and consumer surfaces plus bench/replay."""

from __future__ import annotations

import csv
import io
import json
import sys
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Any, Callable

import click
from cryptography.hazmat.primitives.asymmetric.ed25519 import Ed25519PrivateKey

from .contract import (
    DEFAULT_GAP,
    ContractState,
    Verdict,
    format_centi,
    parse_centi,
    query_item_history,
    query_location_items,
    query_location_temps,
    replay_chain,
)
from .errors import BCCError, LedgerFormatError, ScenarioError, UnknownItem
from .ledger import (
    Chain,
    append_ledger,
    key_from_seed,
    key_id,
    private_key_bytes,
    read_ledger,
    scan_ledger_bytes,
    sign_tx,
    write_ledger,
)
from .payloads import (
    AddAdmin,
    AddLocation,
    ItemArrival,
    ItemDeparture,
    LocationKind,
    RegisterItem,
    RemoveLocation,
    TemperatureReading,
    TxPayload,
)
from .sensors import load_jsonl
from .sim.network import DEFAULT_EPOCH, ConsensusConfig, Simulation, genesis_chain
from .sim.scenario import load_scenario, run_scenario, write_outputs
from .store import PayloadStore, dump_from_readings, make_ref

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_COMPROMISED = 2
EXIT_UNKNOWN = 3
EXIT_UNKNOWN_ITEM = 4

VERDICT_EXIT = {
    Verdict.SAFE: EXIT_OK,
    Verdict.COMPROMISED: EXIT_COMPROMISED,
    Verdict.UNKNOWN: EXIT_UNKNOWN,
}

# the embedded network every mutation goes through
ORDERERS = ["orderer0", "orderer1", "orderer2", "orderer3"]
PEER = "peer0"
BLOCK_INTERVAL = 11.0


@dataclass
class CliConfig:
    ledger_path: Path
    store_dir: Path
    keys_dir: Path
    seed: int = 42
    output_format: str = "table"

    # -- keys ---------------------------------------------------------------------

    def key_path(self, name: str) -> Path:
        return self.keys_dir / f"{name}.key"

    def load_key(self, name: str) -> Ed25519PrivateKey:
        path = self.key_path(name)
        try:
            raw = bytes.fromhex(path.read_text().strip())
        except FileNotFoundError:
            raise click.ClickException(f"no key file {path}") from None
        except ValueError:
            raise click.ClickException(f"key file {path} is not hex") from None
        if len(raw) != 32:
            raise click.ClickException(f"key file {path} must hold 32 bytes")
        return Ed25519PrivateKey.from_private_bytes(raw)

    def save_key(self, name: str, key: Ed25519PrivateKey) -> Path:
        self.keys_dir.mkdir(parents=True, exist_ok=True)
        path = self.key_path(name)
        path.write_text(private_key_bytes(key).hex() + "\n")
        return path

    def key_or_hex(self, ref: str) -> bytes:
        """Public key id from a key-file name or a 64-char hex string."""
        if self.key_path(ref).exists():
            return key_id(self.load_key(ref))
        try:
            raw = bytes.fromhex(ref)
        except ValueError:
            raw = b""
        if len(raw) != 32:
            raise click.ClickException(f"{ref!r} is neither a key name nor a 32-byte hex key")
        return raw

    # -- ledger ---------------------------------------------------------------------

    def store(self) -> PayloadStore:
        return PayloadStore(self.store_dir)

    def chain(self) -> Chain:
        if not self.ledger_path.exists():
            raise click.ClickException(f"no ledger at {self.ledger_path}; run `bcc init` first")
        try:
            return read_ledger(self.ledger_path)
        except BCCError as exc:
            raise click.ClickException(f"{exc.name}: {exc}") from None

    def state(self) -> ContractState:
        state, _ = replay_chain(self.chain(), self.store())
        return state


pass_cfg = click.make_pass_decorator(CliConfig)


def _fail(name: str, detail: str = "", code: int = EXIT_ERROR) -> None:
    click.echo(f"{name}: {detail}" if detail else name, err=True)
    sys.exit(code)


# -- rendering -----------------------------------------------------------------------------


def _table(rows: list[dict]) -> str:
    if not rows:
        return "(none)"
    cols = list(rows[0])
    cells = [[("" if row.get(c) is None else str(row.get(c))) for c in cols] for row in rows]
    widths = [max(len(c), *(len(r[i]) for r in cells)) for i, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths))]
    lines += ["  ".join(v.ljust(w) for v, w in zip(r, widths)) for r in cells]
    return "\n".join(line.rstrip() for line in lines)


def _csv_text(rows: list[dict]) -> str:
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]), lineterminator="\n")
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue().rstrip("\n")


def emit(cfg: CliConfig, data: Any, sections: dict[str, list[dict]] | None = None) -> None:
    """Print ``data`` as JSON, or its tabular ``sections`` as tables / CSV."""
    fmt = cfg.output_format
    if fmt == "json" or sections is None:
        click.echo(json.dumps(data, indent=2, sort_keys=False))
        return
    render = _table if fmt == "table" else _csv_text
    blocks = []
    for title, rows in sections.items():
        body = render(rows)
        blocks.append(f"# {title}\n{body}" if fmt == "table" else body)
    click.echo("\n\n".join(blocks))


# -- submitting through the embedded network -------------------------------------------------


def submit_payloads(cfg: CliConfig, signer: str, payloads: list[TxPayload]) -> list[dict]:
    """Sign, order and commit ``payloads``; append the new blocks to the ledger."""
    key = cfg.load_key(signer)
    chain = cfg.chain()
    store = cfg.store()
    sim = Simulation(
        ConsensusConfig("PoA", list(ORDERERS), block_interval=BLOCK_INTERVAL),
        chain,
        peers=[PEER],
        seed=cfg.seed,
        store=store,
    )
    peer = sim.node(PEER)
    before = len(peer.chain)
    nonce = peer.state.last_nonce.get(key_id(key), 0)
    receipts = []
    for payload in payloads:
        nonce += 1
        try:
            receipts.append(sim.submit(sign_tx(key, payload, nonce), PEER))
        except BCCError as exc:
            _fail(exc.name, str(exc))
    if not sim.run_until_committed(receipts, 100 * sim.config.interval_ms):
        _fail("NotCommitted", "transactions did not commit")
    sim.run(sim.now + sim.config.interval_ms)
    append_ledger(cfg.ledger_path, peer.chain.blocks[before:])
    out = [
        {
            "tx_hash": r.tx_hash.hex(),
            "kind": r.kind,
            "height": r.height,
            "latency_ms": r.latency_ms,
            "error": r.error,
            "alarms": [
                {"item": a.item_id, "location": a.location, "ts": a.ts, "temp": format_centi(a.temp)}
                for a in r.alarms
            ],
        }
        for r in receipts
    ]
    failed = [r for r in out if r["error"]]
    if failed:
        emit(cfg, out, {"receipts": [_flat_receipt(r) for r in out]})
        _fail(failed[0]["error"], "transaction committed but rejected by the contract")
    return out


def _flat_receipt(r: dict) -> dict:
    return {**{k: v for k, v in r.items() if k != "alarms"}, "alarms": len(r["alarms"])}


def _submit_and_print(cfg: CliConfig, signer: str, payloads: list[TxPayload]) -> None:
    receipts = submit_payloads(cfg, signer, payloads)
    emit(cfg, receipts if len(receipts) > 1 else receipts[0], {"receipts": [_flat_receipt(r) for r in receipts]})


def _centi(ctx, param, value):
    if value is None:
        return None
    try:
        return parse_centi(value)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from None


def _kind(ctx, param, value):
    try:
        return LocationKind[value]
    except KeyError:
        try:
            return LocationKind(int(value))
        except (ValueError, KeyError):
            names = ", ".join(k.name for k in LocationKind)
            raise click.BadParameter(f"choose one of {names}") from None


# -- root -------------------------------------------------------------------------------------


@click.group()
@click.option("--ledger", "ledger_path", default="ledger.bcc", show_default=True, type=click.Path(path_type=Path))
@click.option("--store", "store_dir", default="payloads", show_default=True, type=click.Path(path_type=Path))
@click.option("--keys", "keys_dir", default="keys", show_default=True, type=click.Path(path_type=Path))
@click.option("--seed", default=42, show_default=True, type=int)
@click.option("--format", "output_format", default="table", show_default=True, type=click.Choice(["json", "table", "csv"]))
@click.pass_context
def cli(ctx, ledger_path, store_dir, keys_dir, seed, output_format):
    """Cold-chain custody ledger."""
    ctx.obj = CliConfig(ledger_path, store_dir, keys_dir, seed, output_format)


@cli.command()
@click.argument("name")
@click.option("--random", "use_random", is_flag=True, help="Use OS randomness instead of --seed.")
@click.option("--force", is_flag=True, help="Overwrite an existing key file.")
@pass_cfg
def keygen(cfg, name, use_random, force):
    """Create key file NAME.key and print its public key."""
    if cfg.key_path(name).exists() and not force:
        _fail("KeyExists", str(cfg.key_path(name)))
    key = Ed25519PrivateKey.generate() if use_random else key_from_seed(cfg.seed, name)
    path = cfg.save_key(name, key)
    emit(cfg, {"name": name, "public_key": key_id(key).hex(), "path": str(path)},
         {"key": [{"name": name, "public_key": key_id(key).hex(), "path": str(path)}]})


@cli.command()
@click.option("--admin", "admin_name", required=True, help="Key name of the deploying administrator.")
@click.option("--time", "epoch", type=int, default=DEFAULT_EPOCH, show_default=True, help="Genesis timestamp.")
@pass_cfg
def init(cfg, admin_name, epoch):
    """Create a ledger holding the contract deployment."""
    if cfg.ledger_path.exists():
        _fail("LedgerExists", str(cfg.ledger_path))
    if not cfg.key_path(admin_name).exists():
        cfg.save_key(admin_name, key_from_seed(cfg.seed, admin_name))
    key = cfg.load_key(admin_name)
    chain = genesis_chain(key, epoch)
    cfg.ledger_path.parent.mkdir(parents=True, exist_ok=True)
    write_ledger(cfg.ledger_path, chain)
    cfg.store_dir.mkdir(parents=True, exist_ok=True)
    row = {"ledger": str(cfg.ledger_path), "admin": key_id(key).hex(), "genesis": chain.tip_hash.hex()}
    emit(cfg, row, {"init": [row]})


# -- admin ------------------------------------------------------------------------------------


@cli.group()
def admin():
    """Administrator operations."""


_as = click.option("--as", "signer", required=True, help="Key name to sign with.")


@admin.command("add-admin")
@_as
@click.argument("new_admin")
@pass_cfg
def admin_add_admin(cfg, signer, new_admin):
    """Grant administrator rights to NEW_ADMIN (key name or hex)."""
    _submit_and_print(cfg, signer, [AddAdmin(cfg.key_or_hex(new_admin))])


@admin.command("add-location")
@_as
@click.argument("location_id")
@click.option("--kind", required=True, callback=_kind, help="LocationKind name or number.")
@click.option("--sensor", default=None, help="Key (name or hex) bound to this location.")
@pass_cfg
def admin_add_location(cfg, signer, location_id, kind, sensor):
    """Register LOCATION_ID."""
    sensor_key = cfg.key_or_hex(sensor) if sensor else None
    _submit_and_print(cfg, signer, [AddLocation(location_id, kind, sensor_key)])


@admin.command("remove-location")
@_as
@click.argument("location_id")
@pass_cfg
def admin_remove_location(cfg, signer, location_id):
    """Deactivate LOCATION_ID; its history stays readable."""
    _submit_and_print(cfg, signer, [RemoveLocation(location_id)])


@admin.command("register-item")
@_as
@click.argument("item_id")
@click.option("--manufacturer", required=True, help="Manufacturer location id.")
@click.option("--min", "safe_min", default="2.00", show_default=True, callback=_centi)
@click.option("--max", "safe_max", default="8.00", show_default=True, callback=_centi)
@click.option("--ts", type=int, required=True, help="Registration time (unix seconds).")
@pass_cfg
def admin_register_item(cfg, signer, item_id, manufacturer, safe_min, safe_max, ts):
    """Register ITEM_ID with its safe temperature range (°C)."""
    _submit_and_print(cfg, signer, [RegisterItem(item_id, manufacturer, safe_min, safe_max, ts)])


@admin.command("inspect")
@pass_cfg
def admin_inspect(cfg):
    """Show every location and item known to the network."""
    chain = cfg.chain()
    state, _ = replay_chain(chain, cfg.store())
    locations = [
        {
            "id": loc.id,
            "kind": loc.kind.name,
            "active": loc.active,
            "sensor": loc.sensor_key.hex() if loc.sensor_key else None,
            "readings": len(state.temps.get(loc.id, ())),
        }
        for loc in sorted(state.locations.values(), key=lambda l: l.id)
    ]
    items = []
    for item_id in sorted(state.items):
        item = state.items[item_id]
        last = state.custody[item_id][-1]
        items.append(
            {
                "id": item.id,
                "manufacturer": item.manufacturer,
                "safe_min": format_centi(item.safe_min),
                "safe_max": format_centi(item.safe_max),
                "hops": len(state.custody[item_id]),
                "holder": last.location if last.open else None,
            }
        )
    summary = {
        "height": len(chain) - 1,
        "tip": chain.tip_hash.hex(),
        "state_root": state.state_root().hex(),
        "admins": sorted(a.hex() for a in state.admins),
    }
    emit(
        cfg,
        {**summary, "locations": locations, "items": items},
        {
            "network": [{k: v for k, v in summary.items() if k != "admins"} | {"admins": len(summary["admins"])}],
            "locations": locations,
            "items": items,
        },
    )


# -- location ---------------------------------------------------------------------------------


@cli.group()
def location():
    """Operations for a location's bound key."""


_loc = click.option("--location", "location_id", default=None, help="Defaults to the location bound to --as.")


def _bound_location(cfg: CliConfig, signer: str, location_id: str | None, state: ContractState | None = None) -> str:
    if location_id:
        return location_id
    state = state or cfg.state()
    bound = state.sensor_bindings.get(key_id(cfg.load_key(signer)))
    if bound is None:
        raise click.UsageError(f"key {signer} is not bound to a location; pass --location")
    return bound


@location.command("arrive")
@_as
@_loc
@click.argument("item_id")
@click.option("--ts", type=int, required=True)
@pass_cfg
def location_arrive(cfg, signer, location_id, item_id, ts):
    """Record ITEM_ID arriving at the location."""
    _submit_and_print(cfg, signer, [ItemArrival(item_id, _bound_location(cfg, signer, location_id), ts)])


@location.command("depart")
@_as
@_loc
@click.argument("item_id")
@click.option("--ts", type=int, required=True)
@pass_cfg
def location_depart(cfg, signer, location_id, item_id, ts):
    """Record ITEM_ID leaving the location."""
    _submit_and_print(cfg, signer, [ItemDeparture(item_id, _bound_location(cfg, signer, location_id), ts)])


@location.command("submit-temp")
@_as
@_loc
@click.argument("temp", callback=_centi)
@click.option("--ts", type=int, required=True)
@pass_cfg
def location_submit_temp(cfg, signer, location_id, temp, ts):
    """Submit one reading TEMP (°C, e.g. 5.00)."""
    _submit_and_print(cfg, signer, [TemperatureReading(_bound_location(cfg, signer, location_id), ts, temp)])


@location.command("submit-dump")
@_as
@_loc
@click.argument("jsonl", type=click.File("r"))
@pass_cfg
def location_submit_dump(cfg, signer, location_id, jsonl):
    """Store a JSON-lines logger dump off chain and submit its reference."""
    readings = load_jsonl(jsonl)
    if not readings:
        _fail("EmptyDump", "no readings in file")
    loc = _bound_location(cfg, signer, location_id)
    try:
        dump = dump_from_readings(loc, readings)
    except ValueError as exc:
        _fail("BadDump", str(exc))
    cfg.store().put(dump)
    _submit_and_print(cfg, signer, [make_ref(dump)])


@location.command("my-items")
@_as
@_loc
@click.option("--at", type=int, default=None, help="Point in time; defaults to the latest event.")
@pass_cfg
def location_my_items(cfg, signer, location_id, at):
    """Items held at the location."""
    state = cfg.state()
    loc = _bound_location(cfg, signer, location_id, state)
    at = state.clock if at is None else at
    try:
        items = query_location_items(state, loc, at)
    except BCCError as exc:
        _fail(exc.name, str(exc))
    emit(cfg, {"location": loc, "at": at, "items": items}, {f"items at {loc}": [{"item": i} for i in items]})


@location.command("my-temps")
@_as
@_loc
@click.option("--from", "start", type=int, default=0)
@click.option("--to", "end", type=int, default=None)
@pass_cfg
def location_my_temps(cfg, signer, location_id, start, end):
    """Readings recorded for the location."""
    state = cfg.state()
    loc = _bound_location(cfg, signer, location_id, state)
    end = state.clock if end is None else end
    try:
        readings = query_location_temps(state, loc, start, end)
    except BCCError as exc:
        _fail(exc.name, str(exc))
    rows = [{"ts": r.ts, "temp": format_centi(r.temp)} for r in readings]
    emit(cfg, {"location": loc, "count": len(rows), "readings": rows}, {f"readings at {loc}": rows})


# -- consumer ---------------------------------------------------------------------------------


def _verify(cfg: CliConfig, item_id: str, gap: int, now: int | None) -> None:
    state = cfg.state()
    try:
        report = query_item_history(state, item_id, gap, now)
    except UnknownItem as exc:
        _fail(exc.name, str(exc), EXIT_UNKNOWN_ITEM)
    data = report.to_dict()
    hops = [
        {k: h[k] for k in ("hop", "location", "kind", "arrived_at", "departed_at", "reading_count", "min_temp", "max_temp")}
        | {"gaps": len(h["gaps"])}
        for h in data["hops"]
    ]
    excursions = [
        {**e, "interval": f"{data['hops'][e['hop']]['location']} [{data['hops'][e['hop']]['arrived_at']}, {data['hops'][e['hop']]['departed_at'] or 'open'})"}
        for e in data["excursions"]
    ]
    data["excursions"] = excursions
    emit(
        cfg,
        data,
        {
            "item": [{"id": item_id, "verdict": data["verdict"], "hops": len(hops), "as_of": data["as_of"]}],
            "hops": hops,
            "excursions": excursions,
        },
    )
    sys.exit(VERDICT_EXIT[report.verdict])


_verify_opts = [
    click.argument("item_id"),
    click.option("--gap", type=int, default=DEFAULT_GAP, show_default=True, help="Gap threshold in seconds."),
    click.option("--now", type=int, default=None, help="Evaluate open intervals up to this time."),
    pass_cfg,
]


def _with(opts: list[Callable], fn: Callable) -> Callable:
    for opt in reversed(opts):
        fn = opt(fn)
    return fn


@cli.group()
def consumer():
    """Public, keyless queries."""


consumer.command("verify", help="Custody and temperature verdict for ITEM_ID.")(_with(_verify_opts, _verify))
cli.command("verify", help="Alias of `consumer verify`.")(_with(_verify_opts, _verify))


# -- bench / replay ---------------------------------------------------------------------------


@cli.command()
@click.argument("scenario", type=click.Path(exists=True, dir_okay=False))
@click.option("--runs", default=1, show_default=True, type=int)
@click.option("--out", "out_dir", default="bench-out", show_default=True, type=click.Path(path_type=Path))
@click.pass_context
def bench(ctx, scenario, runs, out_dir):
    """Run SCENARIO (YAML) and write latency CSVs plus a summary."""
    cfg: CliConfig = ctx.obj
    try:
        base = load_scenario(scenario)
    except ScenarioError as exc:
        _fail(exc.name, str(exc))
    # an explicit --seed overrides the scenario file
    if ctx.parent.get_parameter_source("seed") is click.core.ParameterSource.COMMANDLINE:
        base.seed = cfg.seed
    summaries = []
    for r in range(runs):
        result = run_scenario(replace(base, seed=base.seed + r))
        write_outputs(result, out_dir, f"-{r}" if runs > 1 else "")
        summary = result.summary()
        summary.pop("wall_s")
        summaries.append(summary)
    emit(cfg, summaries if runs > 1 else summaries[0], {"summary": summaries})


@cli.command()
@click.argument("ledger", required=False, type=click.Path(path_type=Path))
@click.option("--difficulty", default=0, show_default=True, type=int)
@pass_cfg
def replay(cfg, ledger, difficulty):
    """Validate a ledger file and replay it into a state root."""
    path = ledger or cfg.ledger_path
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        _fail("LedgerFormatError", str(exc))
    try:
        chain, bad = scan_ledger_bytes(data, difficulty)
    except LedgerFormatError:
        chain, bad = Chain(), 0
    if bad is not None:
        _fail("InvalidBlock", f"ledger invalid at height {bad}")
    state, results = replay_chain(chain, cfg.store())
    row = {
        "blocks": len(chain),
        "txs": len(results),
        "failed_txs": sum(1 for r in results if r.error),
        "tip": chain.tip_hash.hex(),
        "state_root": state.state_root().hex(),
    }
    emit(cfg, row, {"replay": [row]})


def main(argv: list[str] | None = None) -> None:
    cli.main(args=argv, prog_name="bcc")


if __name__ == "__main__":  # pragma: no cover
    main()

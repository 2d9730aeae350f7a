import random
import statistics

import pytest

from blockcoldchain.errors import InvalidCandidate, NodeDown, ScenarioError, Unauthorized, UnknownNode
from blockcoldchain.ledger import Chain, build_block, validate_chain
from blockcoldchain.payloads import AddLocation, LocationKind, RemoveLocation, TemperatureReading
from blockcoldchain.sim import (
    ConsensusConfig,
    FaultSpec,
    Scenario,
    SimClock,
    Simulation,
    WorkloadSpec,
    fork_choice,
    genesis_chain,
    mine_block,
    pow_mine,
    run_scenario,
)
from blockcoldchain.sim.network import Status
from blockcoldchain.sim.pow import chain_rank, meets_difficulty

from helpers import T0, Actor

INTERVAL = 11_000


def _network(mode="PoA", seed=1, peers=("peer0", "peer1"), **cfg):
    admin = Actor("admin")
    admin.nonce = 1
    sim = Simulation(ConsensusConfig(mode, **cfg), genesis_chain(admin.key, T0), peers=list(peers), seed=seed)
    sensor = Actor("sensor")
    receipt = sim.submit(admin.sign(AddLocation("F-1", LocationKind.Freezer, sensor.id)), "peer0")
    assert sim.run_until_committed([receipt], 10 * INTERVAL)
    sim.run(sim.now + INTERVAL)
    return sim, admin, sensor


def _reading(sensor, ts, temp=500):
    return sensor.sign(TemperatureReading("F-1", ts, temp))


# -- clock ---------------------------------------------------------------------------------


def test_clock_orders_by_time_then_sequence():
    clock, fired = SimClock(), []
    clock.schedule(5, fired.append, "b")
    clock.schedule(1, fired.append, "a")
    clock.schedule(5, fired.append, "c")
    clock.run()
    assert fired == ["a", "b", "c"] and clock.now == 5
    with pytest.raises(ValueError):
        clock.schedule(4, fired.append, "late")


def test_clock_run_limit():
    clock, fired = SimClock(), []
    for t in (1, 10, 20):
        clock.schedule(t, fired.append, t)
    clock.run(10)
    assert fired == [1, 10] and len(clock) == 1


# -- config --------------------------------------------------------------------------------


def test_config_quorum_defaults_and_bounds():
    assert ConsensusConfig().quorum == 3
    with pytest.raises(ScenarioError):
        ConsensusConfig(quorum=2)
    with pytest.raises(ScenarioError):
        ConsensusConfig(block_interval=0)
    with pytest.raises(ScenarioError):
        ConsensusConfig(mode="PoS")


# -- PoA -------------------------------------------------------------------------------------


def test_single_tx_commits_within_two_intervals():
    sim, admin, sensor = _network()
    receipt = sim.submit(_reading(sensor, T0), "peer0")
    assert sim.run_until_committed([receipt])
    assert 0 < receipt.latency_ms <= 2 * INTERVAL
    assert receipt.error is None


def test_every_node_commits_the_same_blocks():
    sim, admin, sensor = _network()
    receipts = []
    for k in range(30):
        sim.clock.schedule(sim.now + k * 3000, lambda k=k: receipts.append(sim.submit(_reading(sensor, T0 + k), "peer1")))
    sim.run()
    assert all(r.committed_at is not None for r in receipts)
    chains = {tuple(b.block_hash for b in n.chain) for n in sim.nodes.values()}
    assert len(chains) == 1
    assert not sim.safety_violations
    assert len({n.state.state_root() for n in sim.nodes.values()}) == 1
    assert all(validate_chain(n.chain) is None for n in sim.nodes.values())


def test_no_empty_blocks_when_idle():
    sim, _, _ = _network()
    height = len(sim.node("peer0").chain)
    sim.run(sim.now + 20 * INTERVAL)
    assert len(sim.node("peer0").chain) == height
    assert len(sim.clock) == 0


def test_leadership_rotates_by_height():
    sim, admin, sensor = _network()
    for k in range(6):
        sim.submit(_reading(sensor, T0 + k), "peer0")
        sim.run(sim.now + 2 * INTERVAL)
    leaders = [(h, node) for _, node, h, _ in sim.proposals]
    assert all(node == sim.config.orderers[h % 4] for h, node in leaders)


def test_batch_respects_max_and_arrival_order():
    sim, admin, sensor = _network(batch_max=5)
    receipts = [sim.submit(_reading(sensor, T0 + k), "peer0") for k in range(12)]
    sim.run()
    heights = [r.height for r in receipts]
    assert heights == sorted(heights)
    assert max(heights.count(h) for h in set(heights)) == 5


def test_contract_failure_rejected_at_submit():
    sim, admin, sensor = _network()
    with pytest.raises(Unauthorized):
        sim.submit(sensor.sign(RemoveLocation("F-1")), "peer0")


def test_submit_and_query_via_crashed_peer():
    sim, admin, sensor = _network()
    sim.inject_fault("peer1", "crash")
    assert sim.node("peer1").status is Status.CRASHED
    with pytest.raises(NodeDown):
        sim.submit(_reading(sensor, T0), "peer1")
    with pytest.raises(NodeDown):
        sim.query(lambda st: None, "peer1")
    with pytest.raises(UnknownNode):
        sim.inject_fault("nope", "crash")


def test_query_is_one_hop():
    sim, _, _ = _network()
    result, latency = sim.query(lambda st: sorted(st.locations), "peer0")
    assert result == ["F-1"] and 5 <= latency <= 50


def test_crashed_leader_replaced_after_one_interval():
    sim, admin, sensor = _network()
    leader = sim.current_leader()
    sim.inject_fault(leader, "crash")
    receipt = sim.submit(_reading(sensor, T0), "peer0")
    assert sim.run_until_committed([receipt], 10 * INTERVAL)
    # cut after one interval, view change after a second: about 2x interval
    assert INTERVAL * 2 <= receipt.latency_ms <= INTERVAL * 2 + 500
    assert sim.view_changes
    sim.inject_fault(leader, "recover")
    sim.run()
    assert len({n.chain.tip_hash for n in sim.nodes.values()}) == 1


def test_two_crashes_halt_until_recovery():
    sim, admin, sensor = _network()
    sim.inject_fault("orderer1", "crash")
    sim.inject_fault("orderer2", "crash")
    receipt = sim.submit(_reading(sensor, T0), "peer0")
    sim.run(sim.now + 10 * INTERVAL)
    assert receipt.committed_at is None
    sim.inject_fault("orderer1", "recover")
    recovered_at = sim.now
    assert sim.run_until_committed([receipt], 10 * INTERVAL)
    assert receipt.committed_at - recovered_at <= 2 * INTERVAL


def test_partition_minority_catches_up_after_heal():
    sim, admin, sensor = _network()
    sim.partition([["orderer0", "orderer1", "orderer2", "peer0"], ["orderer3", "peer1"]])
    assert sim.node("peer1").status is Status.PARTITIONED
    receipts = [sim.submit(_reading(sensor, T0 + k), "peer0") for k in range(3)]
    assert sim.run_until_committed(receipts, 10 * INTERVAL)
    assert len(sim.node("peer1").chain) < len(sim.node("peer0").chain)
    sim.heal()
    sim.run()
    assert len({n.chain.tip_hash for n in sim.nodes.values()}) == 1
    assert not sim.safety_violations


# -- PoW -------------------------------------------------------------------------------------


def test_pow_mine_difficulty_zero_first_try():
    template = build_block(None, [], T0)
    assert pow_mine(template, 0) == 0


def test_pow_mine_attempts_match_difficulty():
    rng = random.Random(0)
    attempts = []
    for i in range(100):
        template = build_block(None, [], T0 + rng.randrange(10**6))
        nonce = pow_mine(template, 8)
        block = mine_block(template, 8)
        assert meets_difficulty(block.block_hash, 8) and block.compute_hash() == block.block_hash
        attempts.append(nonce + 1)
    assert 256 / 3 <= statistics.fmean(attempts) <= 256 * 3


def test_pow_mine_rejects_excess_difficulty():
    with pytest.raises(ValueError):
        pow_mine(build_block(None, [], T0), 25)


def _pow_chain(n, seed, difficulty=4):
    admin = Actor("admin", seed=seed)
    chain = genesis_chain(admin.key, T0)
    blocks = list(chain)
    for h in range(1, n):
        blocks.append(mine_block(build_block(blocks[-1], [], T0 + h, allow_empty=True), difficulty))
    return Chain(blocks)


def test_fork_choice_longest_then_smallest_tip():
    a, b = _pow_chain(5, 1), _pow_chain(7, 2)
    assert fork_choice([a, b], 4) is b
    c, d = _pow_chain(6, 3), _pow_chain(6, 4)
    expected = c if c.tip_hash < d.tip_hash else d
    assert fork_choice([c, d], 4) is expected
    assert chain_rank(6, b"\x0a") < chain_rank(6, b"\x0b") < chain_rank(5, b"\x00")


def test_fork_choice_rejects_invalid():
    good = _pow_chain(3, 1)
    bad = Chain(list(good)[:2] + [list(_pow_chain(3, 2))[2]])
    with pytest.raises(InvalidCandidate):
        fork_choice([good, bad], 4)
    with pytest.raises(InvalidCandidate):
        fork_choice([])


def test_pow_network_converges_after_partition():
    sim, admin, sensor = _network("PoW", pow_difficulty=8)
    sim.partition([["orderer0", "orderer1", "peer0"], ["orderer2", "orderer3", "peer1"]])
    for k in range(5):
        sim.submit(_reading(sensor, T0 + k), "peer0")
    sim.run(sim.now + 30 * INTERVAL)
    tips = sim.tips()
    assert tips["peer0"] != tips["peer1"]
    sim.heal()
    start = sim.blocks_mined
    while len(set(sim.tips().values())) > 1:
        assert sim.clock.step()
        assert sim.blocks_mined - start <= 10
    chains = [n.chain for n in sim.nodes.values()]
    assert all(validate_chain(c, 8) is None for c in chains)
    assert len({n.state.state_root() for n in sim.nodes.values()}) == 1


# -- scenarios -------------------------------------------------------------------------------


def test_small_scenario_runs_and_is_deterministic():
    sc = Scenario(workload=WorkloadSpec(txs=60, locations=4))
    a, b = run_scenario(sc), run_scenario(sc)
    assert a.latency_csv() == b.latency_csv()
    assert a.commit_log_csv() == b.commit_log_csv()
    assert a.state_roots() == b.state_roots()
    assert a.latency_csv().splitlines()[0] == "tx_id,kind,accepted_ms,committed_ms"
    assert a.commit_log_csv().splitlines()[0] == "height,block_hash,node,committed_ms,tx_count"
    s = a.summary()
    assert s["submitted"] == s["committed"] == 60


def test_scenario_leader_crash_fault():
    sc = Scenario(
        workload=WorkloadSpec(txs=60, locations=4),
        faults=[FaultSpec(2000, "crash", "@leader")],
    )
    res = run_scenario(sc)
    assert res.summary()["committed"] == 60
    assert any(n.crashed for n in res.sim.nodes.values())


def test_scenario_from_dict_validation():
    sc = Scenario.from_dict({"seed": 3, "workload": {"txs": 10}, "faults": [{"at_s": 1, "action": "crash", "node": "orderer0"}]})
    assert sc.seed == 3 and sc.workload.txs == 10 and sc.faults[0].node == "orderer0"
    with pytest.raises(ScenarioError):
        Scenario.from_dict({"bogus": 1})
    with pytest.raises(ScenarioError):
        Scenario.from_dict({"orderers": 4, "quorum": 1})

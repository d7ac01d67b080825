import json

import pytest

from dphaser.phaser import make_config, phaser_installed
from dphaser.scenarios import SCENARIOS, build_scenario, scenario_factory
from dphaser.sim import InvalidSchedule, Outcome, SimWorld
from dphaser.state import MUTATIONS, SCSL, SNSL, Config, NodeState, make
from dphaser.verifier import (ExploreConfig, brute_force_schedules, check_barrier_safety,
                              decomposed_verify, explore, linear_extensions, replay,
                              report_json)


def inert(node, msg, cfg):
    return Outcome(node, [])


def toy(chains):
    """Independent FIFO chains: chain i holds chains[i] messages on its own channel."""
    w = SimWorld(inert, Config())
    w.add_node(NodeState(0, 0, {}))
    for i, length in enumerate(chains, start=1):
        w.add_node(NodeState(i, i, {}))
        for _ in range(length):
            w.send(make(i, 0, "NOTE"))
    return w


def toy_config(chains):
    # toy worlds hold no lists, so only the per-state predicates apply
    return ExploreConfig(lambda: toy(chains), terminal_predicates={})


def signalers_and_waiter(mutation=None):
    team = [(1, "s"), (2, "s"), (3, "s"), (4, "w")]
    cfg = make_config(4, mutation=mutation, max_height=3)
    ph = phaser_installed(team, cfg, record=False,
                          heights={SCSL: {1: 1, 2: 2, 3: 1}, SNSL: {4: 1}})
    for t in (1, 2, 3, 4):
        ph.next(t)
    return ph.world


def test_two_concurrent_messages_two_schedules():
    rep = explore(toy_config([1, 1]))
    assert rep.schedules == 2 and rep.ok


@pytest.mark.parametrize("chains", [[1, 1], [2, 1], [2, 2], [3, 1, 1]])
def test_schedule_count_matches_interleavings(chains):
    rep = explore(toy_config(chains))
    assert rep.schedules == linear_extensions(chains) == brute_force_schedules(toy(chains))


def test_three_signalers_one_waiter_safe():
    rep = explore(ExploreConfig(signalers_and_waiter))
    assert rep.ok and rep.quiesced and rep.states_visited > 1


def test_early_forward_caught_and_replayed():
    factory = lambda: signalers_and_waiter("early-forward")  # noqa: E731
    rep = explore(ExploreConfig(factory))
    assert rep.violations
    v = rep.violations[0]
    assert f"{replay(factory, v.schedule).digest():016x}" == v.digest


@pytest.mark.parametrize("name", SCENARIOS)
def test_scenarios_clean(name):
    rep = explore(ExploreConfig(scenario_factory(name)))
    assert rep.ok, [v.detail for v in rep.violations]


def test_decomposition_shrinks_every_kind():
    make_world = scenario_factory("spawn-during-phase")
    full = explore(ExploreConfig(make_world))
    kinds = ["INSERT_SEARCH", "INSERT_LINK", "INSERT_ATTACHED", "INSERT_ACK", "SIGNAL"]
    reps = decomposed_verify(make_world, kinds)
    assert [r.kind for r in reps] == kinds
    assert all(r.states_visited < full.states_visited for r in reps)
    assert sum(len(r.violations) for r in reps) == 0


def test_absent_kind_gives_single_path():
    rep = explore(ExploreConfig(scenario_factory("one-phase"), decompose="PROMOTE_LINK"))
    assert rep.schedules == 1 and rep.ok


def test_bad_explore_config():
    with pytest.raises(ValueError):
        ExploreConfig(lambda: toy([1]), decompose="NOT_A_KIND")
    with pytest.raises(ValueError):
        ExploreConfig(lambda: toy([1]), depth=0)
    with pytest.raises(ValueError):
        decomposed_verify(lambda: toy([1]), ["BOGUS"])


def test_depth_bound_marks_incomplete():
    rep = explore(ExploreConfig(scenario_factory("one-phase"), depth=3))
    assert not rep.complete and not rep.ok


def test_trace_check_empty_ok():
    assert check_barrier_safety([]) is None


def test_trace_check_notify_before_signal():
    notes = [(0, 1, "register", 0, "s"), (1, 2, "register", 0, "sw"),
             (2, 1, "signal", 0), (3, 2, "notified", 0), (4, 2, "signal", 0)]
    assert check_barrier_safety(notes) is not None


def all_leaves(world):
    picks = world.enabled()
    if not picks:
        yield world
        return
    for ch in picks:
        child = world.clone()
        child.deliver(ch)
        yield from all_leaves(child)


def test_trace_check_on_every_two_signaler_schedule():
    def world():
        ph = phaser_installed([(1, "sw"), (2, "sw")], make_config(2, max_height=2), record=False,
                              heights={SCSL: {1: 1, 2: 1}, SNSL: {1: 1, 2: 1}})
        ph.next(1)
        ph.next(2)
        return ph.world

    leaves = list(all_leaves(world()))
    assert len(leaves) > 1
    assert all(check_barrier_safety(w.notes) is None for w in leaves)


def test_replay_empty_schedule_is_initial_world():
    make_world = scenario_factory("one-phase")
    assert replay(make_world, []).digest() == make_world().digest()


def test_replay_rejects_bogus_schedule():
    with pytest.raises(InvalidSchedule):
        replay(scenario_factory("one-phase"), [(7, 7)])


def test_unknown_scenario():
    with pytest.raises(ValueError):
        build_scenario("nope")


@pytest.mark.parametrize("mutation,scenario", [
    ("drop-ack", "spawn-during-phase"),
    ("early-forward", "one-phase"),
    ("skip-freeze", "promote-race"),
    ("wrong-reparent", "one-phase"),
    ("phase-off-by-one", "one-phase"),
])
def test_each_mutation_detected(mutation, scenario):
    assert mutation in MUTATIONS
    rep = explore(ExploreConfig(scenario_factory(scenario, mutation)))
    assert rep.violations


def test_report_json_round_trip():
    rep = explore(toy_config([1, 1]))
    doc = json.loads(report_json([rep]))
    assert doc[0]["schedules"] == 2 and doc[0]["violations"] == []

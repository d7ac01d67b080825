import pytest

from dphaser import bootstrap
from dphaser.bench import DELETE_KINDS, PROMOTE_KINDS, _count
from dphaser.phaser import build, make_config, phaser_installed
from dphaser.scenarios import build_scenario
from dphaser.state import SCSL, SENTINEL, SNSL, NodeState, TaskState, make
from dphaser.topology import snapshot, validate_topology
from dphaser.verifier import ExploreConfig, explore

POST_SEARCH = ("INSERT_LINK", "INSERT_ATTACHED", "INSERT_ACK")


def installed(s_heights, w_heights=None, horizon=1, n=8):
    team = [(t, "s") for t in s_heights] + [(t, "w") for t in (w_heights or {})]
    cfg = make_config(n, horizon=horizon)
    return phaser_installed(team, cfg, record=True, heights={SCSL: s_heights, SNSL: w_heights or {}})


def join(world, cid, key, height, via=1):
    """Inject a bare joining node and start its level-0 search at ``via``."""
    ls = bootstrap.empty_list(world.cfg, "joining", height)
    world.add_node(NodeState(cid, key, {SCSL: ls}, TaskState("s", parent_phase=0)))
    world.send(make(via, via, "INSERT_SEARCH", SCSL, None, world.cfg.max_height - 1, child=cid, key=key))


def deliver_all(world, ch):
    out = []
    while ch in world.channels:
        out.append(world.deliver(ch))
    return out


def emitted(events, kind):
    return [(m.dst, m.phase) for ev in events for m in ev.emitted if m.kind == kind]


def test_leaf_sends_one_signal_to_parent():
    ph = installed({1: 2, 2: 1})
    ph.next(2)
    evs = deliver_all(ph.world, (2, 2))
    assert emitted(evs, "SIGNAL") == [(1, 0)]


def test_single_signaler_completes_phase():
    ph = build([(1, "s")], 1, installed=True)
    ph.world.run_to_quiescence()
    assert ph.world.counts["SIGNAL"] == 1
    assert any(n[1] == SENTINEL and n[2] == "complete" and n[3] == 0 for n in ph.world.notes)


def test_eight_signalers_one_signal_per_tree_edge():
    ph = build([(i, "s") for i in range(1, 9)], 1, seed=4, installed=True)
    assert ph.world.run_to_quiescence().quiesced
    tree_edges = len(snapshot(ph.world, SCSL).nodes) - 1
    assert ph.world.counts["SIGNAL"] == tree_edges == 8


def test_forward_after_own_and_child_signal():
    ph = installed({1: 2, 2: 1})
    w = ph.world
    ph.next(1)
    assert emitted(deliver_all(w, (1, 1)), "SIGNAL") == []  # still waiting for child 2
    ph.next(2)
    deliver_all(w, (2, 2))
    assert emitted(deliver_all(w, (2, 1)), "SIGNAL") == [(SENTINEL, 0)]


def test_early_signal_is_buffered():
    ph = installed({1: 2, 2: 1}, {3: 1}, horizon=2)
    w = ph.world
    ph.script(2, 2)
    deliver_all(w, (2, 2))
    assert emitted(deliver_all(w, (2, 1)), "SIGNAL") == []
    ph.next(1)
    assert emitted(deliver_all(w, (1, 1)), "SIGNAL") == [(SENTINEL, 0)]
    ph.next(1)
    assert emitted(deliver_all(w, (1, 1)), "SIGNAL") == [(SENTINEL, 1)]


def test_head_completes_after_last_arrival():
    ph = installed({1: 1, 2: 2})  # both hang directly off the head
    w = ph.world
    for t in (1, 2):
        ph.next(t)
        deliver_all(w, (t, t))
    first = w.deliver((1, SENTINEL))
    assert not emitted([first], "PHASE_COMPLETE")
    last = w.deliver((2, SENTINEL))
    assert "complete" in [n[0] for n in last.notes]


def test_middle_insert_uses_four_splice_messages():
    ph = installed({1: 1, 2: 1})
    w = ph.world
    join(w, 9, (w.nodes[1].key + w.nodes[2].key) // 2, 1)
    assert w.run_to_quiescence().quiesced
    assert _count(w, POST_SEARCH) == 4
    assert snapshot(w, SCSL).order() == [SENTINEL, 1, 9, 2]


def test_tail_insert_skips_attached():
    ph = installed({1: 1, 2: 1})
    w = ph.world
    join(w, 9, w.nodes[2].key + 1, 1)
    assert w.run_to_quiescence().quiesced
    assert w.counts.get("INSERT_ATTACHED", 0) == 0
    assert _count(w, POST_SEARCH) == 2
    assert snapshot(w, SCSL).order() == [SENTINEL, 1, 2, 9]


def test_promotion_takes_one_round_per_missing_level():
    ph = installed({1: 3, 2: 3})
    w = ph.world
    join(w, 9, (w.nodes[1].key + w.nodes[2].key) // 2, 3)
    assert w.run_to_quiescence().quiesced
    assert w.counts["PROMOTE_LINK"] == 2
    assert w.nodes[9].lists[SCSL].linked_h == 3
    assert validate_topology(snapshot(w, SCSL)) == []


def test_promotion_race_all_interleavings():
    rep = explore(ExploreConfig(lambda: build_scenario("promote-race")))
    assert rep.ok and rep.states_visited > 0


@pytest.mark.parametrize("h", [1, 2, 3])
def test_delete_cost_with_successor_at_every_level(h):
    ph = installed({1: h, 2: h, 3: h})
    ph.drop(2)
    assert ph.world.run_to_quiescence().quiesced
    # one unlink and one ack per level, plus the final ack back to the leaving node
    assert _count(ph.world, DELETE_KINDS) == 2 * h + 1
    assert ph.world.nodes[2].lists[SCSL].status == "retired"
    assert snapshot(ph.world, SCSL).order() == [SENTINEL, 1, 3]


def test_delete_cost_never_above_bound():
    for seed in range(30):
        ph = build([(i, "s") for i in range(1, 9)], 1, seed=seed, installed=True, record=False)
        victim = 1 + seed % 8
        h = ph.world.nodes[victim].lists[SCSL].linked_h
        ph.drop(victim)
        ph.world.run_to_quiescence()
        assert _count(ph.world, DELETE_KINDS) <= 2 * h + 1


def test_delete_during_phase_all_interleavings():
    rep = explore(ExploreConfig(lambda: build_scenario("delete-during-phase")))
    assert rep.ok


def test_delete_next_to_insert_all_interleavings():
    def world():
        ph = installed({1: 1, 2: 1, 3: 1}, n=4)
        join(ph.world, 9, (ph.world.nodes[2].key + ph.world.nodes[3].key) // 2, 1, via=2)
        ph.drop(3)
        ph.world.record = False
        return ph.world

    rep = explore(ExploreConfig(world))
    assert rep.ok, rep.violations
    assert rep.schedules > 1


def test_promote_messages_counted():
    ph = installed({1: 2, 2: 2})
    join(ph.world, 9, ph.world.nodes[1].key + 1, 2)
    ph.world.run_to_quiescence()
    assert _count(ph.world, PROMOTE_KINDS) >= 3

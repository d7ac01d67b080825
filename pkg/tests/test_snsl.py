import math
import statistics

from dphaser.phaser import build, make_config, phaser_installed
from dphaser.state import SCSL, SENTINEL, SNSL, make
from dphaser.topology import root_distances, snapshot


def waiters(w_heights, s_heights=None, horizon=1):
    s_heights = s_heights or {}
    team = [(t, "s") for t in s_heights] + [(t, "w") for t in w_heights]
    return phaser_installed(team, make_config(8, horizon=horizon),
                            heights={SCSL: s_heights, SNSL: w_heights})


def test_one_notify_per_tree_edge_per_phase():
    team = [(1, "s")] + [(i, "w") for i in range(2, 8)]
    ph = build(team, 3, seed=2, installed=True)
    assert ph.world.run_to_quiescence().quiesced
    edges = len(snapshot(ph.world, SNSL).nodes) - 1
    assert ph.world.counts["NOTIFY"] == 3 * edges == 3 * 6


def test_leaf_waiter_does_not_forward():
    ph = waiters({1: 2, 2: 1}, {5: 1})
    w = ph.world
    w.send(make(1, 2, "NOTIFY", SNSL, 0))
    ev = w.deliver((1, 2))
    assert ev.fault is None and ev.emitted == ()


def test_interior_waiter_fans_out_to_each_child():
    ph = waiters({1: 3, 2: 1, 3: 2, 4: 3}, {5: 1})
    w = ph.world
    w.send(make(SENTINEL, 1, "NOTIFY", SNSL, 0))
    ev = w.deliver((SENTINEL, 1))
    assert sorted(m.dst for m in ev.emitted if m.kind == "NOTIFY") == [2, 3, 4]


def test_out_of_order_completion_is_a_fault():
    ph = waiters({1: 1}, {5: 1}, horizon=1)
    ph.next(5)
    ph.next(1)
    ph.world.run_to_quiescence()
    assert ph.world.nodes[1].lists[SNSL].last == 0
    ph.world.send(make(SENTINEL, 1, "NOTIFY", SNSL, 2))
    ph.world.run_to_quiescence()
    assert ph.world.faults[-1]["kind"] == "protocol-violation"


def test_waiter_unblocks_after_notify():
    ph = waiters({1: 1}, {5: 1})
    ph.next(1)
    w = ph.world
    w.deliver((1, 1))
    assert w.nodes[1].task.status == "blocked"
    ph.next(5)
    w.run_to_quiescence()
    assert w.nodes[1].task.status == "running" and w.nodes[1].task.phase == 1


def test_notify_depth_is_logarithmic():
    depths = []
    for seed in range(100):
        ph = phaser_installed([(i, "w") for i in range(1, 65)], make_config(64, seed=seed), record=False)
        depths.append(max(root_distances(snapshot(ph.world, SNSL)).values()))
    assert statistics.fmean(depths) <= 4 * math.log2(64)

"""Complexity measurements over many seeds.

Each measurement builds a fresh world, performs one operation, and counts
delivered messages by kind.  Large-n runs start from the installed
(oracle-shaped) lists; :func:`bootstrap_rounds` checks separately that the
distributed bootstrap produces that same shape.
"""

from __future__ import annotations

import math
import random
import statistics
from dataclasses import dataclass

from . import bootstrap
from .node import child_identity
from .phaser import make_config, oracle_topologies, phaser_installed, phaser_new
from .sim import SeededRandom
from .state import LISTS, SCSL, SENTINEL, NodeState, TaskState, make
from .topology import root_distances, snapshot

INSERT_KINDS = ("INSERT_SEARCH", "INSERT_LINK", "INSERT_ATTACHED", "INSERT_ACK")
PROMOTE_KINDS = ("PROMOTE_SEARCH", "PROMOTE_LINK", "PROMOTE_ATTACHED", "PROMOTE_ACK")
DELETE_KINDS = ("DELETE_UNLINK", "DELETE_ACK")

CSV_FIELDS = ("n", "p", "seeds", "mean_hops", "max_hops", "mean_insert_msgs",
              "mean_insert_search_hops", "mean_delete_msgs", "mean_delete_height", "bootstrap_rounds")
PROMOTE_FIELDS = ("C", "p", "seeds", "mean_promote_msgs")


def _team(n: int) -> list[tuple[int, str]]:
    return [(i + 1, "s") for i in range(n)]


def _count(world, kinds) -> int:
    return sum(world.counts.get(k, 0) for k in kinds)


def root_hops(n: int, p: float, seed: int) -> list[int]:
    """Signal hops from every signaler to the head on a freshly built list."""
    ph = phaser_installed(_team(n), make_config(n, p, seed), record=False)
    dist = root_distances(snapshot(ph.world, SCSL))
    return [d for i, d in dist.items() if i != SENTINEL]


def insert_and_delete(n: int, p: float, seed: int) -> tuple[int, int, int, int]:
    """(insert messages, search hops, delete messages, height of the deleted node)."""
    rng = random.Random(f"bench:{seed}")
    ph = phaser_installed(_team(n), make_config(n, p, seed), policy=SeededRandom(seed), record=False)
    w = ph.world
    spawner = rng.randint(1, n)
    ph.async_spawn(spawner, "s")
    w.run_to_quiescence()
    ins = _count(w, INSERT_KINDS)
    hops = w.counts.get("INSERT_SEARCH", 0)
    victim = rng.randint(1, n)
    height = w.nodes[victim].lists[SCSL].linked_h
    before = _count(w, DELETE_KINDS)
    ph.drop(victim)
    w.run_to_quiescence()
    return ins, hops, _count(w, DELETE_KINDS) - before, height


def bootstrap_rounds(n: int, p: float, seed: int, mode: str = "s") -> tuple[int, bool]:
    """Rounds used by the distributed bootstrap and whether every list matched the oracle."""
    team = [(i + 1, mode) for i in range(n)]
    cfg = make_config(n, p, seed)
    ph = phaser_new(team, cfg, record=False)
    ph.world.run_to_quiescence()
    rounds = 1 + max((x[4] for x in ph.world.notes if x[2] == "boot-round"), default=-1)
    oracle = oracle_topologies(team, cfg)
    return rounds, all(snapshot(ph.world, L) == oracle[L] for L in LISTS)


def promote_per_node(c: int, p: float, seed: int) -> float:
    """Mean promotion messages per node when ``c`` nodes join between two tall neighbours."""
    cfg = make_config(c + 2, p, seed)
    h = cfg.max_height
    ph = phaser_installed([(1, "s"), (2, "s")], cfg, policy=SeededRandom(seed), record=False,
                          heights={SCSL: {1: h, 2: h}, "W": {}})
    w = ph.world
    lo, hi = w.nodes[1].key, w.nodes[2].key
    rng = random.Random(f"promote:{seed}")
    keys = sorted(rng.sample(range(lo + 1, hi), c))
    rng.shuffle(keys)
    for j, key in enumerate(keys):
        cid = 3 + j
        _, heights = child_identity(cfg, cid, "s")
        ls = bootstrap.empty_list(cfg, "joining", heights[SCSL])
        w.add_node(NodeState(cid, key, {SCSL: ls}, TaskState("s", parent_phase=0)))
        w.send(make(1, 1, "INSERT_SEARCH", SCSL, None, h - 1, child=cid, key=key))
    w.run_to_quiescence()
    return _count(w, PROMOTE_KINDS) / c


@dataclass
class BenchRow:
    n: int
    p: float
    seeds: int
    mean_hops: float
    max_hops: int
    mean_insert_msgs: float
    mean_insert_search_hops: float
    mean_delete_msgs: float
    mean_delete_height: float
    bootstrap_rounds: int

    def csv(self) -> list:
        return [getattr(self, f) for f in CSV_FIELDS]


def bench_n(n: int, p: float = 0.5, seeds: int = 100, boot_limit: int = 256) -> BenchRow:
    hops, maxima, ins, search, dele, heights = [], [], [], [], [], []
    for s in range(seeds):
        d = root_hops(n, p, s)
        hops.append(statistics.fmean(d))
        maxima.append(max(d))
        a, b, c, h = insert_and_delete(n, p, s)
        ins.append(a)
        search.append(b)
        dele.append(c)
        heights.append(h)
    # the distributed bootstrap is only simulated up to boot_limit; beyond that its
    # round count is the closed form it was checked against at smaller n
    rounds = bootstrap_rounds(n, p, 0)[0] if n <= boot_limit else bootstrap.rounds(n)
    return BenchRow(n, p, seeds, statistics.fmean(hops), max(maxima), statistics.fmean(ins),
                    statistics.fmean(search), statistics.fmean(dele), statistics.fmean(heights), rounds)


def bench_promote(cs: list[int], p: float = 0.5, seeds: int = 100) -> list[tuple[int, float]]:
    return [(c, statistics.fmean(promote_per_node(c, p, s) for s in range(seeds))) for c in cs]


def fit_log(points: list[tuple[int, float]]) -> tuple[float, float]:
    """Least-squares ``y = a*log2(C) + b``."""
    xs = [math.log2(c) for c, _ in points]
    ys = [y for _, y in points]
    a, b = statistics.linear_regression(xs, ys)
    return a, b


def promote_shape(c: int, p: float) -> float:
    """Shape of the analytical promotion bound, up to constants."""
    r = p / (1 - p)
    return r * math.log2(max(c * r, 2))

"""Quiescent-time view of one augmented skip list.

A node's signal parent is its predecessor on the node's own top level.  The
head is the root.  Inverting that rule gives each node's children, which is
the tree signals are aggregated up and notifications diffused down.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass

from .state import SENTINEL, NodeState


class InvalidNode(Exception):
    pass


def sample_height(p: float, rng: random.Random, max_height: int) -> int:
    """Geometric height: ``P(h > k) = p**k``, truncated at ``max_height``."""
    if not 0 <= p < 1:
        raise ValueError(f"invalid-parameter: p={p} must satisfy 0 <= p < 1")
    h = 1
    while h < max_height and rng.random() < p:
        h += 1
    return h


@dataclass(frozen=True)
class TopoNode:
    key: int
    height: int  # linked height
    prev: tuple  # per level: id or None
    next: tuple


@dataclass
class Topology:
    nodes: dict  # id -> TopoNode
    head: int = SENTINEL

    def __eq__(self, other):
        return isinstance(other, Topology) and self.head == other.head and self.nodes == other.nodes

    def order(self) -> list[int]:
        """Level-0 order from the head."""
        out, cur, seen = [], self.head, set()
        while cur is not None and cur not in seen and cur in self.nodes:
            seen.add(cur)
            out.append(cur)
            cur = self.nodes[cur].next[0] if self.nodes[cur].height > 0 else None
        return out

    def to_json(self) -> str:
        arr = [{"id": i, "key": n.key, "height": n.height, "prev": list(n.prev), "next": list(n.next)}
               for i, n in sorted(self.nodes.items())]
        return json.dumps({"head": self.head, "nodes": arr}, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Topology":
        d = json.loads(text)
        nodes = {e["id"]: TopoNode(e["key"], e["height"], tuple(e["prev"]), tuple(e["next"]))
                 for e in d["nodes"]}
        return cls(nodes, d["head"])


def build_sequential(entries: list[tuple[int, int, int]], head_height: int,
                     head: int = SENTINEL, head_key: int = 0) -> Topology:
    """Oracle: insert ``(id, key, height)`` entries one at a time, left to right."""
    order = [(head, head_key, head_height)] + sorted(entries, key=lambda e: e[1])
    prev = {i: [None] * h for i, _, h in order}
    nxt = {i: [None] * h for i, _, h in order}
    last = [head] * head_height
    for i, _, h in order[1:]:
        for k in range(h):
            prev[i][k] = last[k]
            nxt[last[k]][k] = i
            last[k] = i
    return Topology({i: TopoNode(key, h, tuple(prev[i]), tuple(nxt[i])) for i, key, h in order}, head)


def snapshot(world, lst: str) -> Topology:
    """Topology of list ``lst`` over every node currently linked into it."""
    nodes = {}
    for i, node in world.nodes.items():
        ls = node.lists.get(lst)
        if ls is None or ls.linked_h <= 0 or ls.status in ("retired", "unlinked", "boot", "joining"):
            continue
        h = ls.linked_h
        prev = tuple(None if ls.prv[k] is None else ls.prv[k][0] for k in range(h))
        nxt = tuple(None if ls.nxt[k] is None else ls.nxt[k][0] for k in range(h))
        nodes[i] = TopoNode(node.key, h, prev, nxt)
    return Topology(nodes, SENTINEL)


def signal_parent(topo: Topology, v: int) -> int | None:
    """Top-level predecessor of ``v``; ``None`` stands for Root (``v`` is the head)."""
    node = topo.nodes.get(v)
    if node is None or node.height <= 0:
        raise InvalidNode(f"node {v} is not linked")
    if v == topo.head:
        return None
    return node.prev[node.height - 1]


def children(topo: Topology) -> dict[int, list[int]]:
    out: dict[int, list[int]] = {i: [] for i in topo.nodes}
    for v in topo.nodes:
        p = signal_parent(topo, v)
        if p is not None and p in out:
            out[p].append(v)
    return out


def root_distances(topo: Topology) -> dict[int, int]:
    dist = {topo.head: 0}

    def walk(v):
        path = []
        while v not in dist:
            path.append(v)
            v = signal_parent(topo, v)
        d = dist[v]
        for u in reversed(path):
            d += 1
            dist[u] = d

    for v in topo.nodes:
        walk(v)
    return dist


def validate_topology(topo: Topology) -> list[str]:
    """Return a list of violations, each prefixed by the failing check letter."""
    v: list[str] = []
    nodes = topo.nodes
    if topo.head not in nodes:
        return ["c: head missing"]
    head = nodes[topo.head]
    members_below = None
    for k in range(head.height):
        # (a) walk level k from the head
        seen, cur, last_key = [], topo.head, None
        while cur is not None:
            if cur not in nodes:
                v.append(f"a: level {k} points to unknown node {cur}")
                break
            n = nodes[cur]
            if n.height <= k:
                v.append(f"a: node {cur} reached at level {k} above its height")
                break
            if last_key is not None and n.key <= last_key:
                v.append(f"a: level {k} not sorted at node {cur}")
                break
            if cur in seen:
                v.append(f"a: cycle at level {k}")
                break
            seen.append(cur)
            last_key = n.key
            nx = n.next[k]
            if nx is not None and nx in nodes and (nodes[nx].height <= k or nodes[nx].prev[k] != cur):
                v.append(f"a: level {k} link {cur}->{nx} not mirrored by prev")
            cur = nx
        members = set(seen)
        expected = {i for i, n in nodes.items() if n.height > k}
        if members != expected:
            v.append(f"a: level {k} membership {sorted(members)} != linked {sorted(expected)}")
        for i in expected:
            p = nodes[i].prev[k]
            if i == topo.head:
                if p is not None:
                    v.append(f"c: head has prev at level {k}")
            elif p is None or p not in nodes or nodes[p].height <= k or nodes[p].next[k] != i:
                v.append(f"a: level {k} prev link of {i} not mirrored by next")
        # (b) membership is nested
        if members_below is not None and not members <= members_below:
            v.append(f"b: level {k} members not present at level {k - 1}")
        members_below = members
    # (c) head leftmost and tallest
    if any(n.height > head.height for n in nodes.values()):
        v.append("c: head is not the tallest node")
    if any(n.key < head.key for i, n in nodes.items() if i != topo.head):
        v.append("c: head is not leftmost")
    # (d) signal-parent tree
    for start in nodes:
        cur, hops = start, 0
        while cur is not None and hops <= len(nodes):
            if cur not in nodes:
                v.append(f"d: node {start} reaches unknown node {cur}")
                break
            cur = signal_parent(topo, cur) if nodes[cur].height > 0 else None
            hops += 1
        if hops > len(nodes):
            v.append(f"d: signal-parent cycle from {start}")
    return v


def node_topo(node: NodeState, lst: str) -> TopoNode:
    ls = node.lists[lst]
    h = ls.linked_h
    return TopoNode(node.key, h, tuple(None if ls.prv[k] is None else ls.prv[k][0] for k in range(h)),
                    tuple(None if ls.nxt[k] is None else ls.nxt[k][0] for k in range(h)))

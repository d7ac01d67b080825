"""Initial construction of both skip lists by recursive doubling.

Members of a list are ranked by team order.  In round ``r`` every member
exchanges a window summary with ranks ``i - 2**r`` and ``i + 2**r`` (when
they exist; there is no wrap-around).  A summary holds, per level, the
leftmost and rightmost window member reaching that level.  After
``ceil(log2 n)`` rounds each member knows its nearest neighbour on both
sides at every level of its height.  The sentinel sits left of rank 0 and
receives rank 0's final leftmost table.
"""

from __future__ import annotations

import math
import random

from .ctx import Ctx
from .scsl import add_child
from .state import (LISTS, SCSL, SENTINEL, Config, ListState, Message, NodeState, ProtocolFault,
                    TaskState, lists_for)
from .topology import sample_height


def rounds(n: int) -> int:
    return math.ceil(math.log2(n)) if n > 1 else 0


def team_keys(n: int) -> list[int]:
    step = (1 << 64) // (n + 1)
    return [(i + 1) * step for i in range(n)]


def sample_heights(team: list[tuple[int, str]], cfg: Config) -> dict[str, dict[int, int]]:
    """Heights are drawn centrally before round 0, list by list in team order."""
    rng = random.Random(cfg.seed)
    out = {}
    for L in LISTS:
        out[L] = {tid: sample_height(cfg.p, rng, cfg.max_height)
                  for tid, mode in team if L in lists_for(mode)}
    return out


def empty_list(cfg: Config, status: str, target_h: int) -> ListState:
    m = cfg.max_height
    return ListState(status=status, target_h=target_h, nxt=[None] * m, prv=[None] * m, lock=[None] * m)


def set_links(ls: ListState, L: str, node_id: int, prevs: list, nexts: list, heights: dict) -> None:
    """Install quiescent links and the derived parent/child relation from phase 0."""
    h = len(prevs)
    ls.linked_h = ls.target_h = h
    for k in range(h):
        ls.prv[k], ls.nxt[k] = prevs[k], nexts[k]
    ls.children = {}
    for k in range(h):
        n = nexts[k]
        if n is not None and heights[n[0]] == k + 1:
            add_child(ls, n[0], 0)
    parent = None if node_id == SENTINEL else prevs[h - 1][0]
    if L == SCSL:
        ls.agg, ls.parents = 0, ([] if parent is None else [(0, parent)])
    else:
        ls.last, ls.parent = -1, parent
    ls.status = "active"


def bootstrap(team: list[tuple[int, str]], cfg: Config) -> tuple[dict[int, NodeState], list[Message], list]:
    """Node states, the messages that start round 0 of both lists, and ``(node, *note)`` tuples."""
    heights = sample_heights(team, cfg)
    keys = dict(zip([t for t, _ in team], team_keys(len(team))))
    nodes = {SENTINEL: NodeState(SENTINEL, 0, {L: empty_list(cfg, "boot", cfg.max_height) for L in LISTS})}
    for tid, mode in team:
        nodes[tid] = NodeState(tid, keys[tid], {L: empty_list(cfg, "boot", heights[L][tid])
                                               for L in lists_for(mode)}, TaskState(mode))
    msgs: list[Message] = []
    notes: list = []
    for L in LISTS:
        ranks = tuple(tid for tid, mode in team if L in lists_for(mode))
        head = nodes[SENTINEL].lists[L]
        if not ranks:
            set_links(head, L, SENTINEL, [None] * cfg.max_height, [None] * cfg.max_height, {})
        else:
            head.boot = {"head": True, "buffer": []}
        for i, tid in enumerate(ranks):
            ls = nodes[tid].lists[L]
            h = ls.target_h
            me = (tid, keys[tid], h)
            ls.boot = {"rank": i, "ranks": ranks, "round": 0, "got": [], "inbox": [], "early": [],
                       "buffer": [],
                       "L": [None] * cfg.max_height, "R": [None] * cfg.max_height,
                       "LM": [me if k < h else None for k in range(cfg.max_height)],
                       "RM": [me if k < h else None for k in range(cfg.max_height)]}
            ctx = Ctx(nodes[tid], cfg)
            _enter_round(ctx, L)
            msgs.extend(ctx.out)
            notes.extend((tid,) + tuple(n) for n in ctx.notes)
    return nodes, msgs, notes


def _partners(b: dict) -> list[int]:
    i, n, step = b["rank"], len(b["ranks"]), 1 << b["round"]
    return [j for j in (i - step, i + step) if 0 <= j < n]


def _enter_round(ctx: Ctx, L: str) -> None:
    ls = ctx.node.lists[L]
    b = ls.boot
    # partnership is symmetric, so a round where this rank has nobody is skipped on both sides
    while b["round"] < rounds(len(b["ranks"])) and not _partners(b):
        b["round"] += 1
    if b["round"] >= rounds(len(b["ranks"])):
        _finalize(ctx, L)
        return
    ctx.note("boot-round", L, b["round"])
    for j in _partners(b):
        ctx.send(b["ranks"][j], "BOOT_X", L, round=b["round"], LM=tuple(b["LM"]), RM=tuple(b["RM"]))


def on_boot_exchange(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[msg.lst]
    b = ls.boot
    if b is None or "rank" not in b:
        raise ProtocolFault("protocol-violation", "BOOT_X outside bootstrap")
    r = msg.get("round")
    if r > b["round"]:
        b["early"].append(msg)
        return
    side = "left" if b["ranks"].index(msg.src) < b["rank"] else "right"
    if r < b["round"] or side in b["got"]:
        raise ProtocolFault("protocol-violation", f"round {r} message from {side} partner is stale or duplicate")
    b["got"].append(side)
    b["inbox"].append((side, msg.get("LM"), msg.get("RM")))
    if len(b["got"]) < len(_partners(b)):
        return
    _merge(b)
    b["round"] += 1
    b["got"], b["inbox"] = [], []
    early, b["early"] = b["early"], []
    _enter_round(ctx, msg.lst)
    ctx.redo.extend(early)


def _merge(b: dict) -> None:
    left = right = (None,) * 2
    for side, lm, rm in b["inbox"]:
        if side == "left":
            left = (lm, rm)
        else:
            right = (lm, rm)
    for k in range(len(b["L"])):
        at = lambda t: None if t is None else t[k]  # noqa: E731
        b["L"][k] = b["L"][k] or at(left[1])
        b["R"][k] = b["R"][k] or at(right[0])
        b["LM"][k] = at(left[0]) or b["LM"][k] or at(right[0])
        b["RM"][k] = at(right[1]) or b["RM"][k] or at(left[1])


def _finalize(ctx: Ctx, L: str) -> None:
    ls = ctx.node.lists[L]
    b = ls.boot
    h = ls.target_h
    known = [e for e in b["L"] + b["R"] if e is not None]
    heights = {e[0]: e[2] for e in known}
    prevs = [(SENTINEL, 0) if b["L"][k] is None else b["L"][k][:2] for k in range(h)]
    nexts = [None if b["R"][k] is None else b["R"][k][:2] for k in range(h)]
    set_links(ls, L, ctx.id, prevs, nexts, heights)
    if b["rank"] == 0:
        ctx.send(SENTINEL, "BOOT_HEAD", L, LM=tuple(b["LM"]))
    ctx.redo.extend(b["buffer"])
    ls.boot = None


def on_boot_head(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[msg.lst]
    if ls.boot is None or not ls.boot.get("head"):
        raise ProtocolFault("protocol-violation", "BOOT_HEAD outside bootstrap")
    lm = msg.get("LM")
    heights = {e[0]: e[2] for e in lm if e is not None}
    nexts = [None if e is None else e[:2] for e in lm]
    buffered = ls.boot["buffer"]
    set_links(ls, msg.lst, SENTINEL, [None] * len(lm), nexts, heights)
    ls.boot = None
    ctx.redo.extend(buffered)

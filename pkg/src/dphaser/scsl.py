"""Signal-collection skip list.

Signals are aggregated up the tree formed by each node's top-level
predecessor.  Membership is counted per phase: every child record is a
half-open phase interval ``[from, until)``, so a node that changes parent
hands its signals over at an agreed phase boundary and no phase is ever
counted twice or skipped.

The structural protocols (eager level-0 insertion, lazy one-level-at-a-time
promotion, top-down deletion) live here too; the notification list reuses
them unchanged.
"""

from __future__ import annotations

from .ctx import Ctx
from .state import SCSL, SENTINEL, SNSL, ListState, Message, ProtocolFault

INF = float("inf")


# -- child intervals ----------------------------------------------------------

def add_child(ls: ListState, child: int, frm: int) -> None:
    ls.children.setdefault(child, []).append([frm, None])


def close_child(ls: ListState, child: int, until: int) -> None:
    ivs = ls.children.get(child, [])
    for iv in ivs:
        if iv[1] is None:
            iv[1] = until
            break
    else:
        raise ProtocolFault("protocol-violation", f"release from non-child {child}")
    ivs[:] = [iv for iv in ivs if iv[1] is None or iv[1] > iv[0]]
    if not ivs:
        del ls.children[child]


def truncate_child(ls: ListState, child: int, until: int) -> None:
    ivs = ls.children.get(child, [])
    for iv in ivs:
        if iv[1] is None or iv[1] > until:
            iv[1] = until
    ivs[:] = [iv for iv in ivs if iv[1] > iv[0]]
    if not ivs:
        ls.children.pop(child, None)


def covers(iv, ph: int) -> bool:
    return iv[0] <= ph and (iv[1] is None or ph < iv[1])


def count_children(ls: ListState, ph: int) -> int:
    return sum(1 for ivs in ls.children.values() for iv in ivs if covers(iv, ph))


def children_at(ls: ListState, ph: int) -> list[int]:
    return sorted(c for c, ivs in ls.children.items() if any(covers(iv, ph) for iv in ivs))


def has_open_children(ls: ListState) -> bool:
    return any(iv[1] is None for ivs in ls.children.values() for iv in ivs)


def count_bound(ls: ListState) -> float:
    """First phase from which a departing node owes nobody a signal."""
    bound = ls.self_until or 0
    for ivs in ls.children.values():
        for iv in ivs:
            bound = max(bound, INF if iv[1] is None else iv[1])
    return bound


def parent_for(ls: ListState, ph: int) -> int:
    best = None
    for frm, p in ls.parents:
        if frm <= ph:
            best = p
    if best is None:
        raise ProtocolFault("protocol-violation", f"no parent for phase {ph}")
    return best


# -- aggregation ----------------------------------------------------------------

def self_needed(ctx: Ctx, ls: ListState, ph: int) -> bool | None:
    if ctx.id == SENTINEL:
        return False
    if ls.self_from is None:
        return None
    return ph >= ls.self_from and (ls.self_until is None or ph < ls.self_until)


def signal(ctx: Ctx, phase: int) -> None:
    ls = ctx.node.lists[SCSL]
    if ls.signaled != phase:
        raise ProtocolFault("protocol-violation", f"signal for {phase} but next expected {ls.signaled}")
    ls.signaled = phase + 1
    ctx.note("signal", phase)


def on_signal(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[SCSL]
    if msg.phase < ls.agg:
        raise ProtocolFault("stale-signal", f"phase {msg.phase} already forwarded (at {ls.agg})")
    ls.recv[msg.phase] = ls.recv.get(msg.phase, 0) + 1


def try_forward(ctx: Ctx) -> None:
    ls = ctx.node.lists.get(SCSL)
    if ls is None or ls.status in ("boot", "retired") or ls.ho is not None or ls.linked_h <= 0 and ls.status == "joining":
        return
    head = ctx.id == SENTINEL
    while ls.agg < ctx.cfg.horizon:
        ph = ls.agg
        need = self_needed(ctx, ls, ph)
        if need is None or (need and ls.signaled <= ph):
            return
        cnt = count_children(ls, ph)
        got = ls.recv.get(ph, 0)
        if got > cnt:
            raise ProtocolFault("over-count", f"phase {ph}: {got} signals for {cnt} children")
        if got < cnt and not (ctx.mutated("early-forward") and got == cnt - 1):
            return
        if ls.status in ("leaving", "unlinked") and not need and cnt == 0 and ph >= count_bound(ls):
            return
        if head:
            ctx.send(SENTINEL, "PHASE_COMPLETE", SNSL, phase=ph)
            ctx.note("complete", ph)
        else:
            ctx.send(parent_for(ls, ph), "SIGNAL", SCSL, phase=ph)
        ls.agg = ph + 1
        ls.recv.pop(ph, None)
        while len(ls.parents) > 1 and ls.parents[1][0] <= ls.agg:
            ls.parents.pop(0)


# -- parent handover: adopt at the new parent first, then release the old --------

def handover_target(ctx: Ctx, ls: ListState) -> int | None:
    if ctx.mutated("wrong-reparent") and ls.linked_h > 0:
        return ls.prv[0][0]
    return ls.derived_parent()


def start_handover(ctx: Ctx, ls: ListState, new: int) -> None:
    # phases from the current parent's start are already promised to it
    m = max(ls.agg, ls.parents[-1][0])
    ls.ho = ("adopt", new, m)
    ctx.send(new, "ADOPT", SCSL, min=m)


def on_adopt(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[SCSL]
    if ls.status in ("unlinked", "retired"):
        ctx.send(msg.src, "ADOPT_NACK", SCSL)
        return
    e = max(msg.get("min"), ls.agg)
    add_child(ls, msg.src, e)
    ctx.send(msg.src, "ADOPTED", SCSL, phase=e)


def on_adopted(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[SCSL]
    if ls.ho is None or ls.ho[0] != "adopt" or ls.ho[1] != msg.src:
        raise ProtocolFault("protocol-violation", "unexpected ADOPTED")
    e = msg.phase
    old = ls.parents[-1][1]
    ls.parents.append((e, msg.src))
    ctx.send(old, "RELEASE", SCSL, phase=e)
    ls.ho = None


def on_adopt_nack(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[SCSL]
    ls.ho = None


def on_release(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[SCSL]
    if msg.get("final"):
        truncate_child(ls, msg.src, msg.phase)
    else:
        close_child(ls, msg.src, msg.phase)


def retire(ctx: Ctx, ls: ListState) -> None:
    """Tell every parent still expecting signals from ``agg`` on that none will come."""
    owed = []
    h = ctx.cfg.horizon
    for i, (frm, p) in enumerate(ls.parents):
        end = ls.parents[i + 1][0] if i + 1 < len(ls.parents) else INF
        # an open interval blocks the parent's retirement; a closed one only matters
        # while it still covers a phase below the horizon that we never sent
        live = end == INF or (frm < end and frm < h and end > ls.agg and ls.agg < h)
        if live and p not in owed:
            owed.append(p)
    for p in owed:
        ctx.send(p, "RELEASE", SCSL, phase=ls.agg, final=True)
    ls.status = "retired"


# -- structural protocols (shared by both lists) --------------------------------

def enqueue(ls: ListState, level: int, msg: Message) -> None:
    ls.queue.setdefault(level, []).append(msg)


def unlock(ctx: Ctx, ls: ListState, level: int) -> None:
    if ls.leave == "freeze":
        ls.lock[level] = ("del",)
        return
    ls.lock[level] = None
    q = ls.queue.pop(level, None)
    if q:
        ctx.redo.extend(q)


def ghost_target(ls: ListState, level: int) -> int:
    for k in range(min(level, len(ls.prv) - 1), -1, -1):
        if ls.prv[k] is not None:
            return ls.prv[k][0]
    raise ProtocolFault("protocol-violation", "no predecessor to forward to")


def _detached(ls: ListState) -> bool:
    return ls.status in ("unlinked", "retired")


def _locked(ctx: Ctx, ls: ListState, level: int) -> bool:
    if ls.lock[level] is None:
        return False
    return not (ctx.mutated("skip-freeze") and ls.lock[level] != ("del",))


def on_insert_search(ctx: Ctx, msg: Message) -> None:
    L = msg.lst
    ls = ctx.node.lists[L]
    key, child = msg.get("key"), msg.get("child")
    if _detached(ls):
        ctx.forward(msg, ghost_target(ls, msg.level))
        return
    for k in range(min(msg.level, ls.linked_h - 1), -1, -1):
        n = ls.nxt[k]
        if n is not None and n[1] < key:
            ctx.send(n[0], "INSERT_SEARCH", L, level=k, key=key, child=child)
            return
    if key == ctx.node.key or (ls.nxt[0] is not None and ls.nxt[0][1] == key):
        raise ProtocolFault("protocol-violation", f"duplicate key {key}")
    if _locked(ctx, ls, 0):
        enqueue(ls, 0, msg)
        return
    ls.lock[0] = ("ins", child)
    epoch = ls.agg + 1 if L == SCSL else ls.last + 1
    add_child(ls, child, epoch)
    ctx.send(child, "INSERT_LINK", L, level=0, prev=ctx.me, next=ls.nxt[0], epoch=epoch)


def on_insert_link(ctx: Ctx, msg: Message) -> None:
    L = msg.lst
    ls = ctx.node.lists[L]
    prev, nxt, e = msg.get("prev"), msg.get("next"), msg.get("epoch")
    ls.prv[0], ls.nxt[0], ls.linked_h, ls.join_epoch = prev, nxt, 1, e
    if L == SCSL:
        ls.agg, ls.parents = e, [(e, prev[0])]
    else:
        ls.last, ls.parent = e - 1, prev[0]
    if nxt is not None:
        # nobody may splice in behind us until the successor has seen us
        ls.lock[0] = ("link",)
        ctx.send(nxt[0], "INSERT_ATTACHED", L, level=0, prev=ctx.me, pred=prev[0])
    elif not ctx.mutated("drop-ack"):
        ctx.send(prev[0], "INSERT_ACK", L, level=0, child=ctx.me)


def on_insert_attached(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[msg.lst]
    ls.prv[0] = msg.get("prev")
    if not ctx.mutated("drop-ack"):
        ctx.send(msg.get("prev")[0], "INSERT_ACK", msg.lst, level=0, relay=msg.get("pred"))


def on_insert_ack(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[msg.lst]
    if msg.get("relay") is not None:
        unlock(ctx, ls, 0)
        ctx.send(msg.get("relay"), "INSERT_ACK", msg.lst, level=0, child=ctx.me)
        return
    ls.nxt[0] = msg.get("child")
    unlock(ctx, ls, 0)


def start_promote(ctx: Ctx, L: str) -> None:
    ls = ctx.node.lists[L]
    level = ls.linked_h
    ls.op = ("promote", level)
    ctx.send(ls.prv[ls.top][0], "PROMOTE_SEARCH", L, level=level, key=ctx.node.key, node=ctx.id)


def on_promote_search(ctx: Ctx, msg: Message) -> None:
    L, level = msg.lst, msg.level
    ls = ctx.node.lists[L]
    if _detached(ls):
        ctx.forward(msg, ghost_target(ls, level))
        return
    if ls.linked_h <= level:
        ctx.forward(msg, ls.prv[ls.top][0])
        return
    n = ls.nxt[level]
    if n is not None and n[1] < msg.get("key"):
        ctx.forward(msg, n[0])
        return
    if _locked(ctx, ls, level):
        enqueue(ls, level, msg)
        return
    ls.lock[level] = ("pro", msg.get("node"))
    ctx.send(msg.get("node"), "PROMOTE_LINK", L, level=level, prev=ctx.me, next=n)


def on_promote_link(ctx: Ctx, msg: Message) -> None:
    L, level = msg.lst, msg.level
    ls = ctx.node.lists[L]
    if ls.op != ("promote", level):
        raise ProtocolFault("protocol-violation", f"unexpected PROMOTE_LINK at level {level}")
    prev, nxt = msg.get("prev"), msg.get("next")
    ls.prv[level], ls.nxt[level], ls.linked_h, ls.op = prev, nxt, level + 1, None
    if nxt is not None:
        ls.lock[level] = ("link",)
        ctx.send(nxt[0], "PROMOTE_ATTACHED", L, level=level, prev=ctx.me, pred=prev[0])
    else:
        ctx.send(prev[0], "PROMOTE_ACK", L, level=level, child=ctx.me)


def on_promote_attached(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[msg.lst]
    ls.prv[msg.level] = msg.get("prev")
    ctx.send(msg.get("prev")[0], "PROMOTE_ACK", msg.lst, level=msg.level, relay=msg.get("pred"))


def on_promote_ack(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[msg.lst]
    if msg.get("relay") is not None:
        unlock(ctx, ls, msg.level)
        ctx.send(msg.get("relay"), "PROMOTE_ACK", msg.lst, level=msg.level, child=ctx.me)
        return
    ls.nxt[msg.level] = msg.get("child")
    unlock(ctx, ls, msg.level)


def start_delete(ctx: Ctx, L: str) -> None:
    """Send the top-down unlink chain; every link of the departing node is frozen."""
    ls = ctx.node.lists[L]
    h = ls.linked_h
    ls.leave = "chain"
    ctx.send(ls.prv[h - 1][0], "DELETE_UNLINK", L, level=h - 1, target=ctx.id, tkey=ctx.node.key,
             nexts=tuple(ls.nxt[:h]), prevs=tuple(ls.prv[:h]))


def _chain(msg: Message) -> dict:
    return {"target": msg.get("target"), "tkey": msg.get("tkey"),
            "nexts": msg.get("nexts"), "prevs": msg.get("prevs")}


def _continue_chain(ctx: Ctx, msg: Message, level: int) -> None:
    chain = _chain(msg)
    if level > 0:
        ctx.send(chain["prevs"][level - 1][0], "DELETE_UNLINK", msg.lst, level=level - 1, **chain)
    else:
        ctx.send(chain["target"], "DELETE_ACK", msg.lst, level=0, final=True)


def on_delete_unlink(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[msg.lst]
    k, d = msg.level, msg.get("target")
    if _detached(ls) or ls.linked_h <= k:
        ctx.forward(msg, ghost_target(ls, k))
        return
    if ls.lock[k] is not None:
        # the link may be mid-splice; decide once it settles
        enqueue(ls, k, msg)
        return
    n = ls.nxt[k]
    if n is None or n[0] != d:
        if n is not None and n[1] < msg.get("tkey"):
            ctx.forward(msg, n[0])
            return
        raise ProtocolFault("protocol-violation", f"unlink target {d} not found at level {k}")
    succ = msg.get("nexts")[k]
    ls.nxt[k] = succ
    if succ is not None:
        ctx.send(succ[0], "DELETE_ACK", msg.lst, level=k, prev=ctx.me, **_chain(msg))
    else:
        _continue_chain(ctx, msg, k)


def on_delete_ack(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[msg.lst]
    if msg.get("final"):
        if ls.leave != "chain":
            raise ProtocolFault("protocol-violation", "final DELETE_ACK without deletion")
        ls.status, ls.leave, ls.linked_h = "unlinked", None, 0
        ls.lock = [None] * len(ls.lock)
        queued, ls.queue = ls.queue, {}
        for level in sorted(queued):
            for m in queued[level]:
                ctx.forward(m, ghost_target(ls, level))
        return
    k = msg.level
    if _detached(ls):
        # we left too; the chain only needs relaying
        _continue_chain(ctx, msg, k)
        return
    ls.subst[(k, msg.get("target"))] = msg.get("prev")
    if ls.prv[k] is not None and ls.prv[k][0] == msg.get("target"):
        set_prev(ls, k, msg.get("prev"))
    _continue_chain(ctx, msg, k)


def set_prev(ls: ListState, k: int, prev) -> None:
    # acks from different senders race; skip past predecessors already known to be gone
    while prev is not None and (k, prev[0]) in ls.subst:
        prev = ls.subst[(k, prev[0])]
    ls.prv[k] = prev

"""Signal-notification skip list.

The head-waiter learns of each completed phase through ``PHASE_COMPLETE``
and diffuses ``NOTIFY`` down the same parent/child tree shape used for
signal collection, over the waiter membership.  Notifications must arrive in
phase order, so a node that changes parent detaches from the old one first
(learning the first phase the old parent will no longer send) and the new
parent replays any completed phases from there.
"""

from __future__ import annotations

from .ctx import Ctx
from .scsl import add_child, children_at, close_child, handover_target
from .state import SNSL, Message, ProtocolFault


def on_phase_complete(ctx: Ctx, msg: Message) -> None:
    _advance(ctx, msg.phase)


def on_notify(ctx: Ctx, msg: Message) -> None:
    _advance(ctx, msg.phase)


def _advance(ctx: Ctx, ph: int) -> None:
    ls = ctx.node.lists[SNSL]
    if ph != ls.last + 1:
        raise ProtocolFault("protocol-violation", f"notification for phase {ph} after {ls.last}")
    ls.last = ph
    for c in children_at(ls, ph):
        ctx.send(c, "NOTIFY", SNSL, phase=ph)
    ctx.note("notified", ph)
    task = ctx.node.task
    if task is None or task.status != "blocked":
        return
    if task.blocked_on <= ph:
        task.phase = task.blocked_on + 1
        task.blocked_on = None
        task.status = "running"
        ctx.note("unblock", task.phase - 1)


def start_handover(ctx: Ctx, ls, new: int) -> None:
    ls.ho = ("detach", new)
    ctx.send(ls.parent, "DETACH", SNSL)


def start_final_detach(ctx: Ctx, ls) -> None:
    ls.ho = ("final",)
    ctx.send(ls.parent, "DETACH", SNSL)


def on_detach(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[SNSL]
    # the child may have joined us ahead of our own progress
    opened = [iv[0] for iv in ls.children.get(msg.src, []) if iv[1] is None]
    e = max([ls.last + 1] + opened)
    close_child(ls, msg.src, e)
    ctx.send(msg.src, "DETACHED", SNSL, phase=e)


def on_detached(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[SNSL]
    if ls.ho is None:
        raise ProtocolFault("protocol-violation", "unexpected DETACHED")
    if ls.ho[0] == "final":
        ls.ho, ls.parent, ls.status = None, None, "retired"
        return
    if msg.phase != ls.last + 1:
        raise ProtocolFault("protocol-violation", f"detached at {msg.phase}, notified through {ls.last}")
    new = handover_target(ctx, ls)
    ls.ho = ("wadopt", new, msg.phase)
    ctx.send(new, "ADOPT", SNSL, min=msg.phase)


def on_adopt(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[SNSL]
    if ls.status in ("unlinked", "retired"):
        ctx.send(msg.src, "ADOPT_NACK", SNSL)
        return
    m = msg.get("min")
    add_child(ls, msg.src, m)
    for ph in range(m, ls.last + 1):
        ctx.send(msg.src, "NOTIFY", SNSL, phase=ph)
    ctx.send(msg.src, "ADOPTED", SNSL, phase=m)


def on_adopted(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[SNSL]
    if ls.ho is None or ls.ho[0] != "wadopt" or ls.ho[1] != msg.src:
        raise ProtocolFault("protocol-violation", "unexpected ADOPTED")
    ls.parent, ls.ho = msg.src, None


def on_adopt_nack(ctx: Ctx, msg: Message) -> None:
    ls = ctx.node.lists[SNSL]
    m = ls.ho[2]
    new = handover_target(ctx, ls)
    ls.ho = ("wadopt", new, m)
    ctx.send(new, "ADOPT", SNSL, min=m)

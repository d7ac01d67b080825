"""Per-node message handler.

``handle`` is the pure ``(NodeState, Message) -> (NodeState, [Message])``
function the simulator calls.  Each message gets a direct effect (the
``on_*`` functions in the protocol modules) followed by :func:`settle`,
which reacts to the new local state: parent handovers, lazy promotion,
deletion progress, signal forwarding, and task start/resume.
"""

from __future__ import annotations

import random

from . import bootstrap, scsl, snsl
from .ctx import Ctx
from .sim import Outcome
from .state import (SCSL, SENTINEL, SNSL, Config, Message, NodeState, ProtocolFault, TaskState,
                    lists_for)
from .topology import sample_height

_STRUCT = {
    "INSERT_SEARCH": scsl.on_insert_search,
    "INSERT_LINK": scsl.on_insert_link,
    "INSERT_ATTACHED": scsl.on_insert_attached,
    "INSERT_ACK": scsl.on_insert_ack,
    "PROMOTE_SEARCH": scsl.on_promote_search,
    "PROMOTE_LINK": scsl.on_promote_link,
    "PROMOTE_ATTACHED": scsl.on_promote_attached,
    "PROMOTE_ACK": scsl.on_promote_ack,
    "DELETE_UNLINK": scsl.on_delete_unlink,
    "DELETE_ACK": scsl.on_delete_ack,
}
_BY_LIST = {
    SCSL: {"SIGNAL": scsl.on_signal, "ADOPT": scsl.on_adopt, "ADOPTED": scsl.on_adopted,
           "ADOPT_NACK": scsl.on_adopt_nack, "RELEASE": scsl.on_release},
    SNSL: {"PHASE_COMPLETE": snsl.on_phase_complete, "NOTIFY": snsl.on_notify,
           "ADOPT": snsl.on_adopt, "ADOPTED": snsl.on_adopted, "ADOPT_NACK": snsl.on_adopt_nack,
           "DETACH": snsl.on_detach, "DETACHED": snsl.on_detached},
}
# kinds a retired node still absorbs: in-flight routing and late adoption requests
_GHOST_OK = {"INSERT_SEARCH", "PROMOTE_SEARCH", "DELETE_UNLINK", "DELETE_ACK", "ADOPT"}


def handle(node: NodeState, msg: Message, cfg: Config) -> Outcome:
    ctx = Ctx(node.clone(), cfg)
    _dispatch(ctx, msg)
    while ctx.redo:
        _dispatch(ctx, ctx.redo.pop(0))
    settle(ctx)
    return Outcome(ctx.node, ctx.out, ctx.spawned, ctx.notes)


def kick(node: NodeState, cfg: Config) -> Outcome:
    """Settle a freshly built node without delivering anything."""
    ctx = Ctx(node.clone(), cfg)
    settle(ctx)
    return Outcome(ctx.node, ctx.out, ctx.spawned, ctx.notes)


def _dispatch(ctx: Ctx, msg: Message) -> None:
    if msg.kind == "ACT":
        _on_act(ctx, msg)
        return
    if msg.kind == "BOOT_X":
        bootstrap.on_boot_exchange(ctx, msg)
        return
    if msg.kind == "BOOT_HEAD":
        bootstrap.on_boot_head(ctx, msg)
        return
    ls = ctx.node.lists.get(msg.lst)
    if ls is None:
        raise ProtocolFault("protocol-violation", f"{msg.kind} for list {msg.lst} at non-member {ctx.id}")
    if ls.status == "boot":
        ls.boot["buffer"].append(msg)
        return
    if ls.status == "retired" and msg.kind not in _GHOST_OK:
        raise ProtocolFault("dead-letter", f"{msg.kind} delivered to retired node {ctx.id}")
    fn = _STRUCT.get(msg.kind) or _BY_LIST[msg.lst].get(msg.kind)
    if fn is None:
        raise ProtocolFault("protocol-violation", f"unexpected {msg.kind} on list {msg.lst}")
    fn(ctx, msg)


# -- tasks ------------------------------------------------------------------------

def child_identity(cfg: Config, child: int, mode: str) -> tuple[int, dict]:
    """Key and per-list target heights of a spawned task, derived from the seed."""
    rng = random.Random(f"{cfg.seed}:{child}")
    key = rng.getrandbits(64) or 1
    return key, {L: sample_height(cfg.p, rng, cfg.max_height) for L in lists_for(mode)}


def _on_act(ctx: Ctx, msg: Message) -> None:
    task = ctx.node.task
    if task is None:
        raise ProtocolFault("invalid", f"node {ctx.id} has no task")
    if task.status == "dropped":
        raise ProtocolFault("invalid", f"task {ctx.id} already dropped")
    task.pending = task.pending + (msg.get("action"),)


def _run_pending(ctx: Ctx) -> None:
    task = ctx.node.task
    while task.status == "running" and task.pending:
        action, task.pending = task.pending[0], task.pending[1:]
        _run(ctx, task, action)


def _run(ctx: Ctx, task: TaskState, action: tuple) -> None:
    op = action[0]
    lists = ctx.node.lists
    if op == "until":
        # next() repeatedly until the task reaches phase action[1]
        if task.phase < action[1]:
            task.pending = (action,) + task.pending
            _run(ctx, task, ("next",))
        return
    if op == "next":
        k = task.phase
        if k >= ctx.cfg.horizon:
            raise ProtocolFault("invalid", f"next beyond phase horizon {ctx.cfg.horizon}")
        if SCSL in lists:
            scsl.signal(ctx, k)
        slack = 1 if ctx.mutated("phase-off-by-one") else 0
        if SNSL in lists and lists[SNSL].last < k - slack:
            task.status, task.blocked_on = "blocked", k
        else:
            task.phase = k + 1
    elif op == "spawn":
        _spawn(ctx, task, action[1], action[2], action[3])
    elif op == "drop":
        if task.status != "running":
            raise ProtocolFault("invalid", "double drop")
        task.status, task.drop_phase = "dropping", task.phase
        if SCSL in lists:
            lists[SCSL].self_until = task.phase
        ctx.note("drop", task.phase)
    else:
        raise ProtocolFault("invalid", f"unknown action {action!r}")


def _spawn(ctx: Ctx, task: TaskState, child: int, mode: str, actions: tuple) -> None:
    mine = set(ctx.node.lists)
    if not set(lists_for(mode)) <= mine:
        raise ProtocolFault("invalid-registration", f"task {ctx.id} cannot spawn a {mode!r} child")
    key, heights = child_identity(ctx.cfg, child, mode)
    lists = {L: bootstrap.empty_list(ctx.cfg, "joining", heights[L]) for L in lists_for(mode)}
    ctx.spawned.append(NodeState(child, key, lists, TaskState(mode, parent_phase=task.phase,
                                                                pending=tuple(actions))))
    ctx.note("spawn", child, task.phase)
    # searching from the full-height head keeps the route logarithmic; the spawner's
    # own levels are usually too low to skip far
    for L in lists:
        ctx.send(SENTINEL, "INSERT_SEARCH", L, level=ctx.cfg.max_height - 1, child=child, key=key)


# -- reaction to local state ---------------------------------------------------------

def _start_task(ctx: Ctx) -> None:
    task = ctx.node.task
    lists = ctx.node.lists
    if any(ls.status == "boot" or ls.linked_h <= 0 for ls in lists.values()):
        return
    if task.parent_phase is None:
        start = 0
    else:
        start = max([task.parent_phase + 1] + [ls.join_epoch for ls in lists.values()])
    task.start = task.phase = start
    task.status = "running"
    for ls in lists.values():
        ls.status = "active"
    if SCSL in lists:
        lists[SCSL].self_from = lists[SCSL].signaled = start
    ctx.note("register", start, task.mode)


def _snap(ctx: Ctx) -> tuple:
    # NodeState.canonical caches, so build an uncached view here
    node = ctx.node
    return (len(ctx.out), tuple(ls.canonical() for ls in node.lists.values()),
            None if node.task is None else node.task.canonical())


def settle(ctx: Ctx) -> None:
    node = ctx.node
    task = node.task
    for _ in range(64):
        before = _snap(ctx)
        if task is not None and task.status == "unborn":
            _start_task(ctx)
        if task is not None:
            _run_pending(ctx)
        for L, ls in node.lists.items():
            _settle_list(ctx, L, ls)
        while ctx.redo:
            _dispatch(ctx, ctx.redo.pop(0))
        scsl.try_forward(ctx)
        if task is not None:
            _run_pending(ctx)
            if task.status == "dropping" and node.retired:
                task.status = "dropped"
                ctx.note("dropped", task.drop_phase)
        if _snap(ctx) == before:
            return
    raise ProtocolFault("protocol-violation", "settle did not converge")


def _settle_list(ctx: Ctx, L: str, ls) -> None:
    if ls.status in ("boot", "retired") or ctx.id == SENTINEL:
        return
    task = ctx.node.task
    if ls.status == "unlinked":
        if ls.ho is not None or scsl.has_open_children(ls):
            return
        if L == SCSL:
            if ls.agg >= min(scsl.count_bound(ls), ctx.cfg.horizon):
                scsl.retire(ctx, ls)
        else:
            snsl.start_final_detach(ctx, ls)
        return
    if ls.linked_h <= 0 or ls.status == "joining":
        return
    if ls.leave is None and ls.ho is None:
        dp = scsl.handover_target(ctx, ls)
        cur = ls.parents[-1][1] if L == SCSL else ls.parent
        if dp != cur:
            (scsl if L == SCSL else snsl).start_handover(ctx, ls, dp)
            return
    dropping = task is not None and task.status == "dropping"
    if ls.leave is None and ls.op is None and ls.linked_h < ls.target_h:
        scsl.start_promote(ctx, L)
        return
    if dropping and ls.leave is None and ls.op is None and ls.ho is None and ls.stable:
        ls.leave, ls.status = "freeze", "leaving"
    if ls.leave == "freeze":
        for k in range(ls.linked_h):
            if ls.lock[k] is None:
                ls.lock[k] = ("del",)
        if all(ls.lock[k] == ("del",) for k in range(ls.linked_h)):
            scsl.start_delete(ctx, L)

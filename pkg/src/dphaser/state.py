"""Wire messages and per-node protocol state.

Every node carries one :class:`ListState` per skip list it belongs to:
``"S"`` for the signal-collection list and ``"W"`` for the notification
list.  The sentinel (id 0) belongs to both.  Handlers never mutate a state
they were given; they work on a :meth:`NodeState.clone`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

SENTINEL = 0
SCSL = "S"
SNSL = "W"
LISTS = (SCSL, SNSL)

SIGNAL_ONLY = "s"
WAIT_ONLY = "w"
SIGNAL_WAIT = "sw"
MODES = (SIGNAL_ONLY, WAIT_ONLY, SIGNAL_WAIT)

# every kind the protocol may put on the wire
KINDS = (
    "BOOT_X", "BOOT_HEAD", "ACT",
    "SIGNAL", "PHASE_COMPLETE", "NOTIFY",
    "INSERT_SEARCH", "INSERT_LINK", "INSERT_ATTACHED", "INSERT_ACK",
    "PROMOTE_SEARCH", "PROMOTE_LINK", "PROMOTE_ATTACHED", "PROMOTE_ACK",
    "DELETE_UNLINK", "DELETE_ACK",
    "ADOPT", "ADOPTED", "ADOPT_NACK", "RELEASE", "DETACH", "DETACHED",
)

MUTATIONS = ("drop-ack", "early-forward", "skip-freeze", "wrong-reparent", "phase-off-by-one")


def lists_for(mode: str) -> tuple[str, ...]:
    if mode == SIGNAL_ONLY:
        return (SCSL,)
    if mode == WAIT_ONLY:
        return (SNSL,)
    if mode == SIGNAL_WAIT:
        return (SCSL, SNSL)
    raise ValueError(f"unknown mode {mode!r}")


def max_height_for(team_size: int) -> int:
    return math.ceil(math.log2(max(team_size, 1))) + 2


class ProtocolFault(Exception):
    """A handler rejected a message; recorded by the simulator, never fatal."""

    def __init__(self, kind: str, detail: str = ""):
        super().__init__(f"{kind}: {detail}" if detail else kind)
        self.kind = kind
        self.detail = detail


@dataclass(frozen=True)
class Message:
    src: int
    dst: int
    kind: str
    lst: str | None = None
    phase: int | None = None
    level: int | None = None
    payload: tuple = ()

    def get(self, name: str, default: Any = None) -> Any:
        for k, v in self.payload:
            if k == name:
                return v
        return default

    def to_json(self) -> dict:
        return {"src": self.src, "dst": self.dst, "kind": self.kind, "lst": self.lst,
                "phase": self.phase, "level": self.level}


def make(src: int, dst: int, kind: str, lst: str | None = None, phase: int | None = None,
         level: int | None = None, **payload: Any) -> Message:
    return Message(src, dst, kind, lst, phase, level, tuple(sorted(payload.items())))


@dataclass(frozen=True)
class Config:
    """World-wide protocol constants, shared read-only by every handler."""

    p: float = 0.5
    max_height: int = 4
    horizon: int = 1
    seed: int = 0
    mutation: str | None = None


@dataclass
class ListState:
    status: str = "boot"  # boot | joining | active | leaving | unlinked | retired
    target_h: int = 1
    linked_h: int = 0
    nxt: list = field(default_factory=list)  # per level: (id, key) or None
    prv: list = field(default_factory=list)
    lock: list = field(default_factory=list)  # per level: owner tuple or None
    queue: dict = field(default_factory=dict)  # level -> [Message] waiting on lock
    children: dict = field(default_factory=dict)  # child id -> [[from, until|None], ...]
    # signal collection
    agg: int = 0
    recv: dict = field(default_factory=dict)
    self_from: int | None = None
    self_until: int | None = None
    parents: list = field(default_factory=list)  # [(from_phase, parent id)]
    # notification
    last: int = -1
    parent: int | None = None
    # handover in progress, e.g. ("adopt", new, min) / ("detach", old) / ("wadopt", new, min)
    ho: tuple | None = None
    join_epoch: int | None = None
    leave: str | None = None  # None | "freeze" | "chain"
    op: tuple | None = None  # own promotion in flight: ("promote", level)
    signaled: int = 0  # own signals given for every phase below this
    # (level, departed id) -> its predecessor, for unlink acks that overtook the link they fix
    subst: dict = field(default_factory=dict)
    boot: dict | None = None

    def clone(self) -> "ListState":
        c = ListState(
            self.status, self.target_h, self.linked_h, list(self.nxt), list(self.prv),
            list(self.lock), {k: list(v) for k, v in self.queue.items()},
            {k: [list(iv) for iv in v] for k, v in self.children.items()},
            self.agg, dict(self.recv), self.self_from, self.self_until, list(self.parents),
            self.last, self.parent, self.ho, self.join_epoch, self.leave, self.op,
            self.signaled, dict(self.subst), None,
        )
        if self.boot is not None:
            c.boot = {k: (list(v) if isinstance(v, list) else v) for k, v in self.boot.items()}
        return c

    @property
    def top(self) -> int:
        return self.linked_h - 1

    @property
    def stable(self) -> bool:
        return self.linked_h == self.target_h

    def derived_parent(self) -> int | None:
        if self.linked_h <= 0:
            return None
        link = self.prv[self.top]
        return None if link is None else link[0]

    def canonical(self) -> tuple:
        boot = None
        if self.boot is not None:
            boot = tuple(sorted((k, tuple(v) if isinstance(v, list) else v)
                                for k, v in self.boot.items()))
        return (
            self.status, self.target_h, self.linked_h, tuple(self.nxt), tuple(self.prv),
            tuple(self.lock), tuple(sorted((k, tuple(v)) for k, v in self.queue.items())),
            tuple(sorted((k, tuple(tuple(iv) for iv in v)) for k, v in self.children.items())),
            self.agg, tuple(sorted(self.recv.items())), self.self_from, self.self_until,
            tuple(self.parents), self.last, self.parent, self.ho, self.join_epoch, self.leave,
            self.op, self.signaled, tuple(sorted(self.subst.items())), boot,
        )


@dataclass
class TaskState:
    mode: str
    status: str = "unborn"  # unborn | running | blocked | dropping | dropped
    phase: int = 0
    start: int | None = None
    parent_phase: int | None = None
    blocked_on: int | None = None
    pending: tuple = ()  # actions delivered while not runnable
    drop_phase: int | None = None

    def clone(self) -> "TaskState":
        return TaskState(self.mode, self.status, self.phase, self.start, self.parent_phase,
                         self.blocked_on, self.pending, self.drop_phase)

    def canonical(self) -> tuple:
        return (self.mode, self.status, self.phase, self.start, self.parent_phase,
                self.blocked_on, self.pending, self.drop_phase)


@dataclass
class NodeState:
    id: int
    key: int
    lists: dict  # "S"/"W" -> ListState
    task: TaskState | None = None
    _canon: tuple | None = field(default=None, repr=False, compare=False)

    def clone(self) -> "NodeState":
        return NodeState(self.id, self.key, {k: v.clone() for k, v in self.lists.items()},
                         None if self.task is None else self.task.clone())

    def canonical(self) -> tuple:
        if self._canon is None:
            self._canon = (
                self.id, self.key,
                tuple((k, self.lists[k].canonical()) for k in sorted(self.lists)),
                None if self.task is None else self.task.canonical(),
            )
        return self._canon

    @property
    def retired(self) -> bool:
        return all(ls.status == "retired" for ls in self.lists.values())

"""Deterministic in-process message-passing substrate.

Channels are FIFO per ordered ``(src, dst)`` pair.  The only source of
nondeterminism is which nonempty channel delivers next, and that choice is
made by a :class:`SchedulePolicy`.
"""

from __future__ import annotations

import json
import random
from collections.abc import Callable, Iterable
from dataclasses import dataclass, field
from typing import NamedTuple

from .state import Config, Message, NodeState, ProtocolFault

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a64(data: bytes) -> int:
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK
    return h


def state_digest(node: NodeState) -> int:
    return fnv1a64(repr(node.canonical()).encode())


class Outcome(NamedTuple):
    node: NodeState
    out: list
    spawned: list = []
    notes: list = []


Handler = Callable[[NodeState, Message, Config], Outcome]
Channel = tuple[int, int]


@dataclass
class TraceEvent:
    step: int
    msg: Message
    emitted: tuple
    digest: int | None
    notes: tuple = ()
    fault: str | None = None

    def to_json(self) -> dict:
        d = self.msg.to_json()
        d = {"step": self.step, **d,
             "emitted": [{k: v for k, v in m.to_json().items() if k != "src"} for m in self.emitted],
             "digest": None if self.digest is None else f"{self.digest:016x}"}
        if self.fault:
            d["fault"] = self.fault
        return d


class InvalidSchedule(Exception):
    pass


class SchedulePolicy:
    name = "abstract"

    def choose(self, world: "SimWorld", enabled: list[Channel]) -> Channel:
        raise NotImplementedError

    def clone(self) -> "SchedulePolicy":
        return self


class FifoGlobal(SchedulePolicy):
    """Deliver in global send order."""

    name = "fifo-global"

    def choose(self, world, enabled):
        return min(enabled, key=lambda ch: world.channels[ch][0][0])


class SeededRandom(SchedulePolicy):
    name = "seeded-random"

    def __init__(self, seed: int = 0):
        self.seed = seed
        self.rng = random.Random(seed)

    def choose(self, world, enabled):
        return enabled[self.rng.randrange(len(enabled))]

    def clone(self):
        c = SeededRandom(self.seed)
        c.rng.setstate(self.rng.getstate())
        return c


class ExplicitSchedule(SchedulePolicy):
    name = "explicit-schedule"

    def __init__(self, picks: Iterable[Channel]):
        self.picks = [tuple(p) for p in picks]
        self.pos = 0

    def choose(self, world, enabled):
        if self.pos >= len(self.picks):
            raise InvalidSchedule("schedule exhausted")
        pick = self.picks[self.pos]
        if pick not in enabled:
            raise InvalidSchedule(f"pick {self.pos} references empty channel {pick}")
        self.pos += 1
        return pick

    def clone(self):
        c = ExplicitSchedule(self.picks)
        c.pos = self.pos
        return c


class AdversarialOnKind(SchedulePolicy):
    """Starve one message kind: it is delivered only when nothing else is pending."""

    name = "adversarial-on-kind"

    def __init__(self, kind: str):
        self.kind = kind

    def choose(self, world, enabled):
        others = [ch for ch in enabled if world.channels[ch][0][1].kind != self.kind]
        return FifoGlobal().choose(world, others or enabled)


def make_policy(name: str, seed: int = 0) -> SchedulePolicy:
    if name in ("random", "seeded-random"):
        return SeededRandom(seed)
    if name in ("fifo", "fifo-global"):
        return FifoGlobal()
    if name.startswith("adversarial:"):
        return AdversarialOnKind(name.split(":", 1)[1])
    raise ValueError(f"unknown policy {name!r}")


class RunResult(NamedTuple):
    steps: int
    quiesced: bool  # no pending messages and no outstanding work
    limit_hit: bool
    stalled: bool  # channels drained but some node still has work it cannot finish


@dataclass
class SimWorld:
    handler: Handler
    cfg: Config = field(default_factory=Config)
    policy: SchedulePolicy = field(default_factory=FifoGlobal)
    nodes: dict = field(default_factory=dict)
    channels: dict = field(default_factory=dict)  # (src, dst) -> tuple[(seq, Message), ...]
    trace: list = field(default_factory=list)
    faults: list = field(default_factory=list)
    notes: list = field(default_factory=list)
    sent: int = 0
    delivered: int = 0
    seq: int = 0
    record: bool = True
    outstanding: Callable[["SimWorld"], list] | None = None
    counts: dict = field(default_factory=dict)  # delivered messages per kind

    # -- messaging ---------------------------------------------------------
    def send(self, msg: Message) -> None:
        if msg.dst not in self.nodes:
            self.faults.append({"step": self.delivered, "kind": "dead-letter",
                                "detail": f"{msg.kind} {msg.src}->{msg.dst}"})
            return
        ch = (msg.src, msg.dst)
        self.channels[ch] = self.channels.get(ch, ()) + ((self.seq, msg),)
        self.seq += 1
        self.sent += 1

    def pending(self) -> int:
        return sum(len(q) for q in self.channels.values())

    def enabled(self) -> list[Channel]:
        return sorted(ch for ch, q in self.channels.items() if q)

    def add_node(self, node: NodeState) -> None:
        if node.id in self.nodes:
            raise ValueError(f"node {node.id} already exists")
        self.nodes[node.id] = node

    # -- execution ---------------------------------------------------------
    def deliver(self, ch: Channel) -> TraceEvent:
        q = self.channels[ch]
        (_, msg), rest = q[0], q[1:]
        if rest:
            self.channels[ch] = rest
        else:
            del self.channels[ch]
        step = self.delivered
        self.delivered += 1
        self.counts[msg.kind] = self.counts.get(msg.kind, 0) + 1
        node = self.nodes.get(msg.dst)
        if node is None:
            self.faults.append({"step": step, "kind": "dead-letter", "detail": f"{msg.kind} to {msg.dst}"})
            ev = TraceEvent(step, msg, (), None, (), "dead-letter")
            if self.record:
                self.trace.append(ev)
            return ev
        try:
            res = self.handler(node, msg, self.cfg)
        except ProtocolFault as exc:
            self.faults.append({"step": step, "kind": exc.kind, "detail": exc.detail, "node": msg.dst})
            ev = TraceEvent(step, msg, (), state_digest(node) if self.record else None, (), exc.kind)
            if self.record:
                self.trace.append(ev)
            return ev
        self.nodes[msg.dst] = res.node
        for child in res.spawned:
            if child.id in self.nodes:
                self.faults.append({"step": step, "kind": "protocol-violation",
                                    "detail": f"spawn of existing id {child.id}"})
                continue
            self.nodes[child.id] = child
        for out in res.out:
            self.send(out)
        if res.notes:
            self.notes.extend((step, msg.dst) + tuple(n) for n in res.notes)
        ev = TraceEvent(step, msg, tuple(res.out), state_digest(res.node) if self.record else None,
                        tuple(res.notes))
        if self.record:
            self.trace.append(ev)
        return ev

    def step(self) -> TraceEvent | None:
        """Deliver one message chosen by the policy; ``None`` means quiescent."""
        enabled = self.enabled()
        if not enabled:
            return None
        return self.deliver(self.policy.choose(self, enabled))

    def run_to_quiescence(self, step_limit: int = 1_000_000) -> RunResult:
        if step_limit <= 0:
            raise ValueError("step_limit must be positive")
        steps = 0
        while steps < step_limit:
            if self.step() is None:
                break
            steps += 1
        limit_hit = bool(self.enabled())
        stalled = not limit_hit and bool(self.outstanding and self.outstanding(self))
        return RunResult(steps, not limit_hit and not stalled, limit_hit, stalled)

    # -- snapshots ---------------------------------------------------------
    def clone(self) -> "SimWorld":
        return SimWorld(self.handler, self.cfg, self.policy.clone(), dict(self.nodes),
                        dict(self.channels), list(self.trace), list(self.faults), list(self.notes),
                        self.sent, self.delivered, self.seq, self.record, self.outstanding,
                        dict(self.counts))

    def canonical(self) -> tuple:
        nodes = tuple(self.nodes[i].canonical() for i in sorted(self.nodes))
        chans = tuple((ch, tuple(m for _, m in q)) for ch, q in sorted(self.channels.items()))
        faults = tuple(f["kind"] for f in self.faults)
        return nodes, chans, faults

    def digest(self) -> int:
        return fnv1a64(repr(self.canonical()).encode())

    def trace_lines(self) -> list[str]:
        return [json.dumps(ev.to_json(), sort_keys=True) for ev in self.trace]

    def write_trace(self, path: str) -> None:
        with open(path, "w") as fh:
            for line in self.trace_lines():
                fh.write(line + "\n")

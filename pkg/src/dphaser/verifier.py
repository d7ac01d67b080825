"""Bounded exhaustive exploration of delivery schedules.

A schedule is the list of channels ``(src, dst)`` picked at each step; since
channels are FIFO this fully determines an execution.  The explorer runs a
depth-first search over schedules, pruning worlds whose canonical state was
seen before, and evaluates every predicate at every state it reaches.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Callable

from .phaser import outstanding
from .sim import ExplicitSchedule, InvalidSchedule, SimWorld
from .state import KINDS, SCSL, SENTINEL, SNSL
from .topology import snapshot, validate_topology

Schedule = list  # [(src, dst), ...]


# -- predicates -------------------------------------------------------------------

def released_bound(world: SimWorld) -> int:
    """Every phase below the result has been completed, notified or waited past somewhere."""
    k = 0
    head = world.nodes.get(SENTINEL)
    if head is not None and SCSL in head.lists:
        k = head.lists[SCSL].agg
    for n in world.nodes.values():
        w = n.lists.get(SNSL)
        if w is None or w.status in ("boot",):
            continue
        k = max(k, w.last + 1)
        t = n.task
        if t is not None and t.start is not None and t.phase > t.start:
            k = max(k, t.phase)
    return k


def barrier_safety(world: SimWorld) -> list[str]:
    """Registered signalers must have signaled every phase that was released."""
    k = released_bound(world)
    out = []
    for i, n in sorted(world.nodes.items()):
        s = n.lists.get(SCSL)
        if i == SENTINEL or s is None or s.self_from is None:
            continue
        need = k if s.self_until is None else min(k, s.self_until)
        if need > s.self_from and s.signaled < need:
            out.append(f"phase {s.signaled} released before task {i} signaled it")
    return out


def no_faults(world: SimWorld) -> list[str]:
    return [f"{f['kind']}: {f.get('detail', '')}" for f in world.faults]


def topology_ok(world: SimWorld) -> list[str]:
    out = []
    for L in (SCSL, SNSL):
        out.extend(f"{L} {v}" for v in validate_topology(snapshot(world, L)))
        for i, n in sorted(world.nodes.items()):
            ls = n.lists.get(L)
            if i == SENTINEL or ls is None or ls.status != "active":
                continue
            cur = ls.parents[-1][1] if L == SCSL else ls.parent
            if cur != ls.derived_parent():
                out.append(f"{L} node {i} reports to {cur}, derived parent {ls.derived_parent()}")
    return out


def quiescence(world: SimWorld) -> list[str]:
    return [f"deadlock: {x}" for x in outstanding(world)]


STATE_PREDICATES: dict[str, Callable[[SimWorld], list[str]]] = {
    "barrier-safety": barrier_safety,
    "no-fault": no_faults,
}
TERMINAL_PREDICATES: dict[str, Callable[[SimWorld], list[str]]] = {
    "topology": topology_ok,
    "quiescence": quiescence,
}


def check_barrier_safety(notes) -> str | None:
    """Trace-prefix form of barrier safety over simulator notes.

    ``notes`` are ``(step, node, event, ...)`` tuples.  Returns ``None`` when
    the prefix is safe, otherwise a description of the first violation.
    """
    reg: dict[int, tuple[int, int | None]] = {}  # signaler -> (start, drop phase)
    signaled: dict[int, set] = {}
    released = -1
    for note in notes:
        _, node, ev, *rest = note
        if ev == "register":
            start, mode = rest[0], rest[1]
            if "s" in mode:
                reg[node] = (start, None)
                signaled.setdefault(node, set())
                if start <= released:
                    return f"task {node} registered for phase {start} after it was released"
        elif ev == "signal":
            signaled.setdefault(node, set()).add(rest[0])
        elif ev == "drop" and node in reg:
            reg[node] = (reg[node][0], rest[0])
        elif ev in ("complete", "notified", "unblock"):
            k = rest[0]
            for t, (start, until) in sorted(reg.items()):
                if start <= k and (until is None or k < until) and k not in signaled[t]:
                    return f"{ev} for phase {k} at node {node} before task {t} signaled"
            released = max(released, k)
    return None


# -- exploration ------------------------------------------------------------------

@dataclass
class ExploreConfig:
    make_world: Callable[[], SimWorld]
    depth: int = 2000
    decompose: str | None = None
    state_predicates: dict = field(default_factory=lambda: dict(STATE_PREDICATES))
    terminal_predicates: dict = field(default_factory=lambda: dict(TERMINAL_PREDICATES))
    max_violations: int = 5
    dedup: bool = True

    def __post_init__(self):
        if self.depth < 1:
            raise ValueError("depth bound must be >= 1")
        if self.decompose is not None and self.decompose not in KINDS:
            raise ValueError(f"invalid message kind {self.decompose!r}")


@dataclass
class Violation:
    predicate: str
    detail: str
    schedule: list
    digest: str

    def to_json(self) -> dict:
        return {"predicate": self.predicate, "detail": self.detail,
                "schedule": [list(ch) for ch in self.schedule], "digest": self.digest}


@dataclass
class VerificationReport:
    kind: str | None
    states_visited: int = 0
    max_depth: int = 0
    violations: list = field(default_factory=list)
    quiesced: bool = True
    complete: bool = True
    schedules: int = 0  # maximal schedules in the explored tree, before dedup

    @property
    def ok(self) -> bool:
        return not self.violations and self.complete

    def to_json(self) -> dict:
        return {"kind": self.kind, "states_visited": self.states_visited, "max_depth": self.max_depth,
                "violations": [v.to_json() for v in self.violations], "quiesced": self.quiesced,
                "complete": self.complete, "schedules": self.schedules}


def choices(world: SimWorld, kind: str | None) -> list:
    enabled = world.enabled()
    if kind is None:
        return enabled
    hot = [ch for ch in enabled if world.channels[ch][0][1].kind == kind]
    cold = [ch for ch in enabled if world.channels[ch][0][1].kind != kind]
    return hot + cold[:1]


def explore(cfg: ExploreConfig) -> VerificationReport:
    rep = VerificationReport(cfg.decompose)
    root = cfg.make_world()
    root.record = False
    memo: dict = {}  # canonical -> maximal schedules below it
    on_path: set = set()
    path: list = []
    seen_bad: set = set()

    def evaluate(world: SimWorld, preds: dict) -> None:
        for name, fn in preds.items():
            if len(rep.violations) >= cfg.max_violations or name in seen_bad:
                continue
            found = fn(world)
            if found:
                seen_bad.add(name)
                rep.violations.append(Violation(name, found[0], list(path), f"{world.digest():016x}"))

    def evaluate_cycle(world: SimWorld) -> None:
        # a schedule that returns to a state on the current path can run forever
        if "livelock" not in seen_bad and len(rep.violations) < cfg.max_violations:
            seen_bad.add("livelock")
            rep.violations.append(Violation("livelock", "schedule revisits an earlier state",
                                            list(path), f"{world.digest():016x}"))

    def enter(world: SimWorld):
        """Visit ``world``; returns a frame to expand or a finished count."""
        key = world.canonical()
        if key in on_path:
            evaluate_cycle(world)
            return 0
        if cfg.dedup and key in memo:
            return memo[key]
        rep.states_visited += 1
        rep.max_depth = max(rep.max_depth, len(path))
        evaluate(world, cfg.state_predicates)
        picks = choices(world, cfg.decompose)
        if not picks:
            evaluate(world, cfg.terminal_predicates)
            if outstanding(world):
                rep.quiesced = False
            memo[key] = 1
            return 1
        if len(path) >= cfg.depth:
            rep.complete = False
            memo[key] = 0
            return 0
        on_path.add(key)
        return [world, key, picks, 0, 0]

    first = enter(root)
    if isinstance(first, int):
        rep.schedules = first
        return rep
    stack = [first]
    while stack:
        frame = stack[-1]
        world, key, picks, i, acc = frame
        if i == len(picks):
            stack.pop()
            on_path.discard(key)
            memo[key] = acc
            if path:
                path.pop()
            if stack:
                stack[-1][4] += acc
            else:
                rep.schedules = acc
            continue
        frame[3] = i + 1
        ch = picks[i]
        child = world.clone()
        child.deliver(ch)
        path.append(ch)
        res = enter(child)
        if isinstance(res, int):
            frame[4] += res
            path.pop()
        else:
            stack.append(res)
    if not cfg.dedup:
        memo.clear()
    return rep


def decomposed_verify(make_world: Callable[[], SimWorld], kinds: list[str],
                      depth: int = 2000) -> list[VerificationReport]:
    for k in kinds:
        if k not in KINDS:
            raise ValueError(f"invalid message kind {k!r}")
    return [explore(ExploreConfig(make_world, depth, decompose=k)) for k in kinds]


def replay(make_world: Callable[[], SimWorld], schedule: Schedule) -> SimWorld:
    """Re-run ``schedule`` from the initial world with tracing on."""
    world = make_world()
    world.record = True
    world.policy = ExplicitSchedule([tuple(ch) for ch in schedule])
    for _ in range(len(schedule)):
        if world.step() is None:
            raise InvalidSchedule("schedule outlives the pending messages")
    return world


# -- independent schedule counting ----------------------------------------------------

def linear_extensions(chains: list[int]) -> int:
    """Interleavings of independent FIFO chains of the given lengths (multinomial)."""
    total = sum(chains)
    out = math.factorial(total)
    for c in chains:
        out //= math.factorial(c)
    return out


def brute_force_schedules(world: SimWorld) -> int:
    """Count maximal schedules by plain recursion, with no state sharing at all."""
    picks = world.enabled()
    if not picks:
        return 1
    total = 0
    for ch in picks:
        child = world.clone()
        child.record = False
        child.deliver(ch)
        total += brute_force_schedules(child)
    return total


def report_json(reports: list[VerificationReport]) -> str:
    return json.dumps([r.to_json() for r in reports], indent=2, sort_keys=True)

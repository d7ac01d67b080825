"""Task-facing phaser operations, injected into a :class:`SimWorld` as ``ACT`` events.

Every API call is validated here against the registration bookkeeping the
handle keeps (so misuse fails synchronously), then delivered to the task's
node as a local message.  The node runs actions in order as soon as it is
able to: a blocked waiter holds later actions until it is notified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import bootstrap, node
from .sim import SimWorld, make_policy
from .state import (LISTS, SENTINEL, Config, NodeState, TaskState, lists_for,
                    make, max_height_for)
from .topology import Topology, build_sequential


class PhaserError(Exception):
    """Invalid use of the phaser API; ``kind`` is ``invalid`` or ``invalid-registration``."""

    def __init__(self, kind: str, detail: str):
        super().__init__(f"{kind}: {detail}")
        self.kind = kind


def parse_modes(text: str) -> list[str]:
    """``"4sw,2s,2w"`` -> one mode string per task, in the given order."""
    out = []
    for part in text.split(","):
        part = part.strip()
        digits = len(part) - len(part.lstrip("0123456789"))
        count, mode = (int(part[:digits]) if digits else 1), part[digits:]
        lists_for(mode)
        out.extend([mode] * count)
    if not out:
        raise ValueError("empty mode mix")
    return out


@dataclass
class Phaser:
    world: SimWorld
    modes: dict  # task id -> mode
    dropped: set = field(default_factory=set)
    next_id: int = 0

    @property
    def cfg(self) -> Config:
        return self.world.cfg

    def _act(self, task: int, *action) -> None:
        self.world.send(make(task, task, "ACT", action=tuple(action)))

    def _check_live(self, task: int) -> None:
        if task not in self.modes:
            raise PhaserError("invalid", f"task {task} is not registered")
        if task in self.dropped:
            raise PhaserError("invalid", f"task {task} was dropped")

    def async_spawn(self, parent: int, mode: str, actions: tuple = ()) -> int:
        """Register a child of ``parent``; ``actions`` run once the child is linked in."""
        self._check_live(parent)
        if not set(lists_for(mode)) <= set(lists_for(self.modes[parent])):
            raise PhaserError("invalid-registration",
                              f"{self.modes[parent]!r} parent cannot spawn a {mode!r} child")
        cid = self.next_id
        self.next_id += 1
        self.modes[cid] = mode
        self._act(parent, "spawn", cid, mode, tuple(actions))
        return cid

    def next(self, task: int) -> None:
        self._check_live(task)
        self._act(task, "next")

    def drop(self, task: int) -> None:
        self._check_live(task)
        self.dropped.add(task)
        self._act(task, "drop")

    def script(self, task: int, phases: int) -> None:
        for _ in range(phases):
            self.next(task)

    def run_until(self, task: int, phase: int) -> None:
        """Keep calling next() until ``task`` reaches ``phase``."""
        self._check_live(task)
        self._act(task, "until", phase)


def make_config(n: int, p: float = 0.5, seed: int = 0, horizon: int = 1,
                mutation: str | None = None, max_height: int | None = None) -> Config:
    if not 0 <= p < 1:
        raise ValueError("invalid-parameter: p must be in [0, 1)")
    return Config(p=p, max_height=max_height or max_height_for(n), horizon=horizon, seed=seed,
                  mutation=mutation)


def _world(cfg: Config, policy, nodes: dict, record: bool) -> SimWorld:
    world = SimWorld(node.handle, cfg, policy, record=record, outstanding=outstanding)
    for n in nodes.values():
        world.add_node(n)
    return world


def _kick_all(world: SimWorld) -> None:
    for nid in sorted(world.nodes):
        res = node.kick(world.nodes[nid], world.cfg)
        world.nodes[nid] = res.node
        for m in res.out:
            world.send(m)
        world.notes.extend((-1, nid) + tuple(n) for n in res.notes)


def phaser_new(team: list[tuple[int, str]], cfg: Config, policy="fifo",
               record: bool = True) -> Phaser:
    """Start a phaser whose lists are built by the distributed bootstrap."""
    if not team:
        raise PhaserError("invalid", "empty team")
    if isinstance(policy, str):
        policy = make_policy(policy, cfg.seed)
    nodes, msgs, notes = bootstrap.bootstrap(team, cfg)
    world = _world(cfg, policy, nodes, record)
    world.notes.extend((-1,) + n for n in notes)
    for m in msgs:
        world.send(m)
    _kick_all(world)
    return Phaser(world, dict(team), next_id=max(t for t, _ in team) + 1)


def oracle_topologies(team: list[tuple[int, str]], cfg: Config) -> dict[str, Topology]:
    heights = bootstrap.sample_heights(team, cfg)
    keys = dict(zip([t for t, _ in team], bootstrap.team_keys(len(team))))
    return {L: build_sequential([(t, keys[t], heights[L][t]) for t, m in team if L in lists_for(m)],
                                cfg.max_height) for L in LISTS}


def phaser_installed(team: list[tuple[int, str]], cfg: Config, policy="fifo",
                     record: bool = True, heights: dict | None = None) -> Phaser:
    """Start a phaser whose lists are already in their quiescent post-bootstrap shape.

    ``heights`` (list -> task -> height) overrides the sampled heights, which
    lets scenarios pin a particular shape.
    """
    if not team:
        raise PhaserError("invalid", "empty team")
    if isinstance(policy, str):
        policy = make_policy(policy, cfg.seed)
    heights = heights or bootstrap.sample_heights(team, cfg)
    keys = dict(zip([t for t, _ in team], bootstrap.team_keys(len(team))))
    nodes = {SENTINEL: NodeState(SENTINEL, 0, {})}
    for t, mode in team:
        nodes[t] = NodeState(t, keys[t], {}, TaskState(mode))
    for L in LISTS:
        members = [(t, keys[t], heights[L][t]) for t, m in team if L in lists_for(m)]
        topo = build_sequential(members, cfg.max_height)
        install_list(nodes, L, topo, cfg)
    world = _world(cfg, policy, nodes, record)
    _kick_all(world)
    return Phaser(world, dict(team), next_id=max(t for t, _ in team) + 1)


def install_list(nodes: dict, L: str, topo: Topology, cfg: Config) -> None:
    hs = {i: tn.height for i, tn in topo.nodes.items()}
    keyed = lambda i: None if i is None else (i, topo.nodes[i].key)  # noqa: E731
    for i, tn in topo.nodes.items():
        ls = bootstrap.empty_list(cfg, "boot", tn.height)
        prevs = [keyed(x) for x in tn.prev] if i != SENTINEL else [None] * tn.height
        bootstrap.set_links(ls, L, i, prevs, [keyed(x) for x in tn.next], hs)
        nodes[i].lists[L] = ls


def build(team: list[tuple[int, str]], phases: int, p: float = 0.5, seed: int = 0,
          policy: str = "fifo", mutation: str | None = None, installed: bool = False,
          record: bool = True) -> Phaser:
    """Phaser plus a script of ``phases`` next() calls for every task."""
    if phases < 1:
        raise ValueError("phases must be >= 1")
    cfg = make_config(len(team), p, seed, phases, mutation)
    ph = (phaser_installed if installed else phaser_new)(team, cfg, policy, record)
    for t, _ in team:
        ph.script(t, phases)
    return ph


# -- liveness bookkeeping ---------------------------------------------------------------

_SETTLED = ("active", "retired")


def outstanding(world: SimWorld) -> list[str]:
    """Work some node still owes; non-empty at quiescence means the run is stuck."""
    out = []
    for i in sorted(world.nodes):
        n = world.nodes[i]
        t = n.task
        if t is not None:
            if t.status in ("unborn", "blocked", "dropping"):
                out.append(f"task {i} {t.status}")
            elif t.pending and t.status != "dropped":
                out.append(f"task {i} has {len(t.pending)} pending actions")
        for L, ls in sorted(n.lists.items()):
            if ls.status not in _SETTLED:
                out.append(f"{L}:{i} {ls.status}")
            if ls.status == "retired":
                continue
            if any(x is not None for x in ls.lock) or ls.queue:
                out.append(f"{L}:{i} holds locks")
            if ls.ho is not None or ls.op is not None:
                out.append(f"{L}:{i} handover/promotion in flight")
            if ls.status == "active" and ls.linked_h < ls.target_h:
                out.append(f"{L}:{i} not promoted")
    return out


def phase_counters(world: SimWorld) -> dict[int, int]:
    return {i: n.task.phase for i, n in world.nodes.items()
            if n.task is not None and n.task.status in ("running", "blocked")}

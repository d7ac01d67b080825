"""Named starting worlds for the explorer and the ``verify`` command.

Every scenario starts from lists already in their quiescent post-bootstrap
shape with pinned heights, so the explored interleavings are those of the
operation under test rather than of bootstrap.  Scripts are injected as
``ACT`` messages and are themselves interleaved with protocol traffic.
"""

from __future__ import annotations

from typing import Callable

from .phaser import Phaser, make_config, phaser_installed
from .sim import SimWorld
from .state import SCSL, SNSL

SCENARIOS = ("one-phase", "spawn-during-phase", "delete-during-phase", "promote-race", "mixed")


def _installed(team, heights, horizon, mutation, seed=0) -> Phaser:
    cfg = make_config(len(team) + 1, 0.5, seed, horizon, mutation, max_height=3)
    return phaser_installed(team, cfg, "fifo", record=False, heights=heights)


def one_phase(mutation: str | None = None) -> Phaser:
    """Three signal-wait tasks, one phase; task 3 hangs below task 2."""
    team = [(1, "sw"), (2, "sw"), (3, "sw")]
    heights = {SCSL: {1: 1, 2: 2, 3: 1}, SNSL: {1: 1, 2: 2, 3: 1}}
    ph = _installed(team, heights, 1, mutation)
    for t, _ in team:
        ph.next(t)
    return ph


def spawn_during_phase(mutation: str | None = None) -> Phaser:
    """Task 1 spawns a signal-only child while phase 0 is being collected."""
    team = [(1, "sw"), (2, "s"), (3, "w")]
    heights = {SCSL: {1: 1, 2: 2}, SNSL: {1: 1, 3: 1}}
    ph = _installed(team, heights, 2, mutation)
    ph.async_spawn(1, "s", (("until", 2),))
    ph.next(1)
    ph.next(2)
    ph.next(3)
    return ph


def delete_during_phase(mutation: str | None = None) -> Phaser:
    """Task 2, parent of task 3, drops while the others signal phase 0."""
    team = [(1, "s"), (2, "s"), (3, "s"), (4, "w")]
    heights = {SCSL: {1: 1, 2: 2, 3: 1}, SNSL: {4: 1}}
    ph = _installed(team, heights, 1, mutation)
    ph.drop(2)
    for t in (1, 3, 4):
        ph.next(t)
    return ph


def promote_race(mutation: str | None = None) -> Phaser:
    """Adjacent tasks 2 and 3 both owe a level-1 link and promote concurrently."""
    team = [(1, "s"), (2, "s"), (3, "s"), (4, "w")]
    heights = {SCSL: {1: 2, 2: 1, 3: 1}, SNSL: {4: 1}}
    ph = _installed(team, heights, 1, mutation)
    w = ph.world
    for t in (2, 3):
        w.nodes[t].lists[SCSL].target_h = 2
        w.nodes[t]._canon = None
    _rekick(w, (2, 3))
    for t in (1, 2, 3, 4):
        ph.next(t)
    return ph


def mixed(mutation: str | None = None) -> Phaser:
    """One spawn and one drop interleaved with two phases."""
    team = [(1, "sw"), (2, "s"), (3, "w")]
    heights = {SCSL: {1: 1, 2: 1}, SNSL: {1: 1, 3: 1}}
    ph = _installed(team, heights, 2, mutation)
    ph.async_spawn(1, "s", (("until", 2),))
    ph.run_until(1, 2)
    ph.next(2)
    ph.drop(2)
    ph.run_until(3, 2)
    return ph


def _rekick(world: SimWorld, ids) -> None:
    from .node import kick
    for i in ids:
        res = kick(world.nodes[i], world.cfg)
        world.nodes[i] = res.node
        for m in res.out:
            world.send(m)


_BUILDERS: dict[str, Callable[..., Phaser]] = {
    "one-phase": one_phase,
    "spawn-during-phase": spawn_during_phase,
    "delete-during-phase": delete_during_phase,
    "promote-race": promote_race,
    "mixed": mixed,
}


def build_scenario(name: str, mutation: str | None = None) -> SimWorld:
    if name not in _BUILDERS:
        raise ValueError(f"unknown scenario {name!r}")
    return _BUILDERS[name](mutation).world


def scenario_factory(name: str, mutation: str | None = None) -> Callable[[], SimWorld]:
    if name not in _BUILDERS:
        raise ValueError(f"unknown scenario {name!r}")
    return lambda: build_scenario(name, mutation)

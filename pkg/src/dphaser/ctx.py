from __future__ import annotations

from dataclasses import replace

from .state import Config, Message, NodeState, make


class Ctx:
    """Scratch space for one handler invocation: a private node copy plus effects."""

    def __init__(self, node: NodeState, cfg: Config):
        self.node = node
        self.cfg = cfg
        self.out: list[Message] = []
        self.spawned: list[NodeState] = []
        self.notes: list[tuple] = []
        self.redo: list[Message] = []  # re-dispatched locally after the current message

    @property
    def id(self) -> int:
        return self.node.id

    @property
    def me(self) -> tuple[int, int]:
        return (self.node.id, self.node.key)

    def send(self, dst, kind, lst=None, phase=None, level=None, **payload):
        self.out.append(make(self.node.id, dst, kind, lst, phase, level, **payload))

    def forward(self, msg: Message, dst: int) -> None:
        self.out.append(replace(msg, src=self.node.id, dst=dst))

    def note(self, *fields) -> None:
        self.notes.append(fields)

    def mutated(self, name: str) -> bool:
        return self.cfg.mutation == name

"""Node interfaces the simulator drives.

Every node is a single-owner reactor: the simulator hands it one event
at a time and collects what it emits. Servers return the messages to
send; clients return a :class:`Reaction`, which can also carry the tag
the operation committed to and the operation's response.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

from ..core import Message, Tag


@dataclass
class Reaction:
    sends: list[Message] = field(default_factory=list)
    tag: Tag | None = None  # set once, when the query phase fixes T(op)
    done: bool = False
    value: bytes | None = None  # read result


class ServerNode:
    def __init__(self, node_id: str):
        self.id = node_id
        self.changed = False

    def on_message(self, msg: Message) -> list[Message]:
        raise NotImplementedError

    def snapshot(self) -> list[dict]:
        """JSON-ready view of stored records, used for trace state events."""
        raise NotImplementedError

    def storage(self) -> Fraction:
        return sum((Fraction(r["size"]) for r in self.snapshot() if r["size"]), Fraction(0))


class ClientNode:
    def __init__(self, node_id: str):
        self.id = node_id
        self.op: str | None = None

    def invoke(self, op: str, kind: str, value: bytes | None) -> Reaction:
        raise NotImplementedError

    def on_message(self, msg: Message) -> Reaction:
        raise NotImplementedError


class PhaseClient(ClientNode):
    """Bookkeeping for clients that run a sequence of broadcast/await phases."""

    def __init__(self, node_id: str):
        super().__init__(node_id)
        self.kind = None
        self.phase = "idle"
        self.responses: dict[str, Message] = {}

    def start_phase(self, phase: str):
        self.phase = phase
        self.responses = {}

    def record(self, msg: Message, expected_kind) -> bool:
        """Record a response for the current phase; False if it is stale."""
        if msg.op != self.op or msg.kind != expected_kind or msg.src in self.responses:
            return False
        self.responses[msg.src] = msg
        return True

    def finish(self, **kwargs) -> Reaction:
        self.phase = "done"
        return Reaction(done=True, **kwargs)

"""Deterministic simulator of an asynchronous, reliable, crash-prone network.

Asynchrony is modelled by reordering alone: every sent message stays
deliverable until the scheduler picks it, so nothing is lost unless a
script holds it forever. A run ends when nothing is enabled (quiescence)
or the step budget is spent.

Scheduler modes:

* ``seeded_random``: each step picks uniformly among enabled actions
  (pending deliveries and invocable operations) using the seed.
* ``fair_round_robin``: invocations first, then the oldest pending message.
* ``scripted``: same order as ``fair_round_robin``; meant to be used with
  ``script`` directives.

Script directives apply in every mode. Each has the form::

    {"hold": <message matcher>, "skip": 0,
     "release": "never" | "quiescence" | "until", "until": <event matcher>}

Matching messages (after the first ``skip``) are held back. They are
released when the ``until`` event is logged, when the run would otherwise
go quiescent, or never. Once released a directive holds nothing more.

A message matcher compares fields of the send event (``kind``, ``src``,
``dst``, ``op``, ``tag``). An event matcher also names the ``event`` type
and may give ``count`` (the n-th match, default 1).
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from . import protocols
from .config import ScenarioConfig
from .core import Message
from .trace import ExecutionTrace


def matches(matcher: dict, record: dict) -> bool:
    for key, want in matcher.items():
        if key == "count":
            continue
        if record.get(key) != want:
            return False
    return True


@dataclass
class _Trigger:
    step: int | None = None
    matcher: dict | None = None
    seen: int = 0
    fired: bool = False

    @classmethod
    def parse(cls, spec):
        if isinstance(spec, int):
            return cls(step=spec)
        return cls(matcher=spec["after"])

    def observe(self, event: dict):
        if self.fired or self.matcher is None:
            return
        if matches(self.matcher, event):
            self.seen += 1
            if self.seen >= self.matcher.get("count", 1):
                self.fired = True

    def due(self, step: int) -> bool:
        return self.fired or (self.step is not None and step >= self.step)


class _Hold:
    def __init__(self, directive: dict):
        self.matcher = directive["hold"]
        self.skip = directive.get("skip", 0)
        self.release = directive.get("release", "until" if directive.get("until") else "never")
        self.until = _Trigger(matcher=directive["until"]) if directive.get("until") else None
        self.active = True
        self.held: list[int] = []


@dataclass
class _Op:
    op_id: str
    client: str
    kind: str
    value: bytes | None
    trigger: _Trigger
    state: str = "waiting"  # waiting -> running -> done | failed | cancelled


class Simulator:
    def __init__(self, config: ScenarioConfig):
        self.cfg = config
        self.servers, make_client = protocols.build(config)
        self.clients = {c: make_client(c) for c in config.clients}
        self.rng = random.Random(config.seed)
        self.trace = ExecutionTrace(config.to_dict())
        self.seq = 0
        self.step = 0
        self.next_msg = 0
        self.pending: dict[int, Message] = {}
        self.messages: dict[int, Message] = {}
        self.crashed: set[str] = set()

        counters: dict[str, int] = {}
        self.ops: list[_Op] = []
        for spec in config.ops:
            counters[spec.client] = counters.get(spec.client, 0) + 1
            op_id = f"{spec.client}#{counters[spec.client]}"
            self.ops.append(_Op(op_id, spec.client, spec.kind, spec.value, _Trigger.parse(spec.at)))
        self.crash_triggers = {}
        for role in ("servers", "clients"):
            for node, spec in config.failures[role].items():
                self.crash_triggers[node] = _Trigger.parse(spec)
        self.holds = [_Hold(d) for d in config.scheduler.get("script", [])]
        self.current: dict[str, _Op] = {}

    # -- logging -------------------------------------------------------

    def log(self, _event: str, **fields):
        self.seq += 1
        event = {"event": _event, "seq": self.seq, **fields}
        self.trace.events.append(event)
        for op in self.ops:
            if op.state == "waiting":
                op.trigger.observe(event)
        for trig in self.crash_triggers.values():
            trig.observe(event)
        for hold in self.holds:
            if hold.active and hold.until is not None:
                hold.until.observe(event)
                if hold.until.fired:
                    self._release(hold)
        return event

    def _release(self, hold: _Hold):
        hold.active = False
        if hold.held:
            ids = sorted(hold.held)
            hold.held = []
            for mid in ids:
                self.pending[mid] = self.messages[mid]
            self.log("release", msgs=ids)

    def _log_state(self, server):
        self.log("state", node=server.id, store=server.snapshot(), storage=str(server.storage()))
        server.changed = False

    # -- actions -------------------------------------------------------

    def send(self, msgs):
        for msg in msgs:
            self.next_msg += 1
            mid = self.next_msg
            self.messages[mid] = msg
            record = self.log("send", msg=mid, **msg.to_json())
            for hold in self.holds:
                if hold.active and matches(hold.matcher, record):
                    if hold.skip > 0:
                        hold.skip -= 1
                        continue
                    hold.held.append(mid)
                    break
            else:
                self.pending[mid] = msg

    def _react(self, client_id, reaction):
        op = self.current[client_id]
        if reaction.tag is not None:
            self.log("tag", node=client_id, op=op.op_id, tag=reaction.tag.to_json())
        self.send(reaction.sends)
        if reaction.done:
            client = self.clients[client_id]
            tag = getattr(client, "tag", None)
            value = reaction.value.hex() if reaction.value is not None else None
            self.log("respond", node=client_id, op=op.op_id, kind=op.kind,
                     tag=None if tag is None else tag.to_json(), value=value)
            op.state = "done"
            del self.current[client_id]

    def invoke(self, op: _Op):
        op.state = "running"
        self.current[op.client] = op
        self.log("invoke", node=op.client, op=op.op_id, kind=op.kind,
                 value=None if op.value is None else op.value.hex())
        self._react(op.client, self.clients[op.client].invoke(op.op_id, op.kind, op.value))

    def deliver(self, mid: int):
        msg = self.pending.pop(mid)
        fields = dict(msg=mid, src=msg.src, dst=msg.dst, kind=msg.kind.value, op=msg.op)
        if msg.dst in self.crashed:
            self.log("drop", **fields)
            return
        self.log("deliver", **fields)
        if msg.dst in self.servers:
            server = self.servers[msg.dst]
            out = server.on_message(msg)
            if server.changed:
                self._log_state(server)
            self.send(out)
        elif msg.dst in self.current:
            self._react(msg.dst, self.clients[msg.dst].on_message(msg))

    def crash(self, node: str):
        self.crashed.add(node)
        if node in self.servers:
            self.log("crash", node=node, role="server", op=None)
            return
        op = self.current.pop(node, None)
        self.log("crash", node=node, role="client", op=None if op is None else op.op_id)
        if op is not None:
            op.state = "failed"
        for other in self.ops:
            if other.client == node and other.state == "waiting":
                other.state = "cancelled"

    # -- scheduling ----------------------------------------------------

    def _invocable(self) -> list[_Op]:
        out, blocked = [], set()
        for op in self.ops:
            if op.state == "waiting" and op.client not in blocked:
                blocked.add(op.client)
                if op.client not in self.current and op.trigger.due(self.step):
                    out.append(op)
            elif op.state == "running":
                blocked.add(op.client)
        return out

    def _fire_crashes(self):
        for node, trig in self.crash_triggers.items():
            if node not in self.crashed and trig.due(self.step):
                self.crash(node)

    def _next_step_trigger(self):
        steps = [op.trigger.step for op in self.ops
                 if op.state == "waiting" and op.trigger.step is not None and op.trigger.step > self.step]
        steps += [t.step for n, t in self.crash_triggers.items()
                  if n not in self.crashed and t.step is not None and t.step > self.step]
        return min(steps) if steps else None

    def choose(self, invocable, pending_ids):
        if self.cfg.mode == "seeded_random":
            i = self.rng.randrange(len(invocable) + len(pending_ids))
            return ("invoke", invocable[i]) if i < len(invocable) else ("deliver", pending_ids[i - len(invocable)])
        if invocable:
            return "invoke", invocable[0]
        return "deliver", pending_ids[0]

    def run(self) -> ExecutionTrace:
        for server in self.servers.values():
            self._log_state(server)
        budget = self.cfg.step_budget
        reason = "quiescent"
        while True:
            self._fire_crashes()
            invocable = self._invocable()
            pending_ids = sorted(self.pending)
            if not invocable and not pending_ids:
                waiting = [h for h in self.holds if h.active and h.release == "quiescence" and h.held]
                if waiting:
                    for hold in waiting:
                        self._release(hold)
                    continue
                nxt = self._next_step_trigger()
                if nxt is not None:
                    self.step = nxt
                    continue
                break
            if self.step >= budget:
                reason = "budget"
                break
            action, target = self.choose(invocable, pending_ids)
            self.step += 1
            if action == "invoke":
                self.invoke(target)
            else:
                self.deliver(target)

        running = [op.op_id for op in self.ops if op.state == "running"]
        uninvoked = [op.op_id for op in self.ops if op.state == "waiting"]
        if reason != "budget":
            reason = "complete" if not running and not uninvoked else "stalled"
        held = sorted(m for h in self.holds for m in h.held)
        self.log("halt", reason=reason, steps=self.step, budget=budget,
                 pending_ops=running, uninvoked=uninvoked,
                 undelivered=sorted(self.pending), held=held)
        return self.trace


def run(config: ScenarioConfig) -> ExecutionTrace:
    return Simulator(config).run()


def enforce_fairness(trace: ExecutionTrace) -> bool:
    """True iff every message sent to a node that never crashes was delivered."""
    crashed = {e["node"] for e in trace.events if e["event"] == "crash"}
    delivered = {e["msg"] for e in trace.events if e["event"] in ("deliver", "drop")}
    return all(
        e["msg"] in delivered
        for e in trace.events
        if e["event"] == "send" and e["dst"] not in crashed
    )

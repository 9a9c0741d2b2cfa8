"""CCOAS: an (N, N-f) code with N-f quorums and reader registration.

Writers and the query phase are the CAS ones. A server asked by a reader
for an element it does not hold yet remembers the request and answers when
the element's pre-write arrives, so every read needs every live server to
eventually see every pre-write. There is no gossip.
"""

from __future__ import annotations

from fractions import Fraction

from ..codec import CodecParams, encode
from ..core import T0, Kind, Label, Message, OperationId, Tag, Triple
from .base import ServerNode
from .cas import CasClient


class CcoasServer(ServerNode):
    def __init__(self, node_id, index, params: CodecParams, initial_value: bytes):
        super().__init__(node_id)
        self.index = index
        self.params = params
        w0 = encode(initial_value, params)[index - 1]
        self.triples: dict[Tag, Triple] = {T0: Triple(T0, w0, Label.FIN)}

    def _store(self, triple: Triple):
        if self.triples.get(triple.tag) != triple:
            self.triples[triple.tag] = triple
            self.changed = True

    @staticmethod
    def _reply(msg, kind, tag=None, payload=None):
        return Message(msg.dst, msg.src, msg.op, kind, tag, payload)

    def on_message(self, msg: Message) -> list[Message]:
        t = msg.tag
        old = self.triples.get(t) if t is not None else None

        if msg.kind == Kind.QUERY:
            highest = max(tag for tag, tr in self.triples.items() if tr.label.is_fin)
            return [self._reply(msg, Kind.QUERY_RESP, highest)]

        if msg.kind == Kind.PRE_WRITE:
            out = []
            if old is None:
                self._store(Triple(t, msg.payload, Label.PRE))
            elif old.payload is None and old.label is Label.FIN:
                # Serve readers that registered before the element arrived;
                # registrations are operation ids so replies carry the read's id.
                for op in sorted(old.registered_readers):
                    reader = OperationId.parse(op).client_id
                    out.append(Message(self.id, reader, op, Kind.FINALIZE_READ_RESP, t, msg.payload))
                self._store(Triple(t, msg.payload, Label.FIN))
            out.append(self._reply(msg, Kind.PRE_WRITE_ACK, t))
            return out

        if msg.kind == Kind.FINALIZE_WRITE:
            if old is None:
                self._store(Triple(t, None, Label.FIN))
            elif old.label is Label.PRE:
                self._store(Triple(t, old.payload, Label.FIN, old.registered_readers))
            return [self._reply(msg, Kind.FINALIZE_WRITE_ACK, t)]

        if msg.kind == Kind.FINALIZE_READ:
            if old is not None and old.payload is not None:
                self._store(Triple(t, old.payload, Label.FIN))
                return [self._reply(msg, Kind.FINALIZE_READ_RESP, t, old.payload)]
            readers = (old.registered_readers if old is not None else frozenset()) | {msg.op}
            self._store(Triple(t, None, Label.FIN, frozenset(readers)))
            return []
        return []

    def snapshot(self):
        return [self.triples[t].to_json() for t in sorted(self.triples)]

    def storage(self):
        return sum((tr.payload.cost for tr in self.triples.values() if tr.payload is not None),
                   Fraction(0))


def build(config):
    k = config.n - config.f
    params = CodecParams(config.n, k)
    ids = config.server_ids()
    v0 = bytes(config.value_length)
    servers = {sid: CcoasServer(sid, i + 1, params, v0) for i, sid in enumerate(ids)}

    def make_client(cid):
        return CasClient(cid, ids, k, params, config.value_length)

    return servers, make_client


def drawback_config(variant: str = "suppressed", protocol: str = "ccoas", n: int = 5, f: int = 1):
    """Scripted run where one pre-write is held past the write's termination.

    The pre-write to the last server is held; the write completes on the
    other n-1 servers; server s1 then crashes and a read starts. In the
    "suppressed" variant the held pre-write is never delivered, in the
    "fair" variant it is released once the read's finalize reaches the
    server that is missing the element.
    """
    from ..config import ScenarioConfig

    if variant not in ("suppressed", "fair"):
        raise ValueError(f"unknown variant {variant!r}")
    last = f"s{n}"
    hold = {"hold": {"kind": "pre_write", "dst": last}}
    if variant == "suppressed":
        hold["release"] = "never"
    else:
        hold["release"] = "until"
        hold["until"] = {"event": "deliver", "kind": "finalize_read", "dst": last}
    data = {
        "id": f"{protocol}_drawback" + ("" if variant == "suppressed" else "_fair"),
        "protocol": protocol,
        "n": n,
        "f": f,
        "clients": ["w1", "r1"],
        "ops": [
            {"client": "w1", "kind": "write", "value": "drawback", "at": 0},
            {"client": "r1", "kind": "read", "at": {"after": {"event": "crash", "node": "s1"}}},
        ],
        "failures": {"servers": {"s1": {"after": {"event": "respond", "op": "w1#1"}}}},
        "scheduler": {"mode": "scripted", "seed": 0, "script": [hold]},
    }
    if protocol in ("cas", "casgc"):
        data["k"] = n - 2 * f
    if protocol == "casgc":
        data["delta"] = 1
    return ScenarioConfig.from_dict(data)


def drawback_scenario(variant: str = "suppressed", protocol: str = "ccoas", n: int = 5, f: int = 1):
    """Run :func:`drawback_config` and return ``(trace, verdict)``."""
    from ..sim import run

    trace = run(drawback_config(variant, protocol, n, f))
    read_done = any(e["event"] == "respond" and e["op"] == "r1#1" for e in trace.events)
    return trace, "read terminated" if read_done else "read stalled (budget)"

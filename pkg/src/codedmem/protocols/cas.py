"""CAS(k): coded atomic storage with query, pre-write and finalize phases.

Servers keep every (tag, coded element, label) triple they learn about and
gossip each finalized tag to their peers once. Only 'fin' tags are visible
to queries, so a reader is never pointed at a version whose coded elements
have not yet reached a quorum.
"""

from __future__ import annotations

from fractions import Fraction

from ..codec import CodecParams, decode, encode
from ..core import T0, Kind, Label, Message, Tag, Triple, next_tag
from .base import PhaseClient, Reaction, ServerNode


class CasClient(PhaseClient):
    """Reader/writer for CAS; CCOAS reuses it with k = threshold = n - f.

    Args:
        node_id: client identifier, also the id component of its tags.
        servers: server ids in coordinate order (server i holds element i+1).
        threshold: responses needed to close a phase.
        params: erasure code parameters.
        value_length: unpadded value length in bytes.
    """

    def __init__(self, node_id, servers, threshold, params: CodecParams, value_length):
        super().__init__(node_id)
        self.servers = list(servers)
        self.threshold = threshold
        self.params = params
        self.value_length = value_length
        self.value = None
        self.tag = None

    def _broadcast(self, kind, tag=None, payloads=None):
        return [
            Message(self.id, s, self.op, kind, tag, None if payloads is None else payloads[i])
            for i, s in enumerate(self.servers)
        ]

    def invoke(self, op, kind, value=None) -> Reaction:
        self.op, self.kind, self.value, self.tag = op, kind, value, None
        self.start_phase("query")
        return Reaction(self._broadcast(Kind.QUERY))

    def on_message(self, msg: Message) -> Reaction:
        if self.phase == "query" and self.record(msg, Kind.QUERY_RESP):
            if len(self.responses) < self.threshold:
                return Reaction()
            highest = max(r.tag for r in self.responses.values())
            if self.kind == "write":
                self.tag = next_tag(highest, self.id)
                self.start_phase("pre_write")
                elements = encode(self.value, self.params)
                return Reaction(self._broadcast(Kind.PRE_WRITE, self.tag, elements), tag=self.tag)
            self.tag = highest
            self.start_phase("finalize")
            return Reaction(self._broadcast(Kind.FINALIZE_READ, self.tag), tag=self.tag)

        if self.phase == "pre_write" and self.record(msg, Kind.PRE_WRITE_ACK):
            if len(self.responses) >= self.threshold:
                self.start_phase("finalize")
                return Reaction(self._broadcast(Kind.FINALIZE_WRITE, self.tag))
            return Reaction()

        if self.phase == "finalize" and self.kind == "write":
            if self.record(msg, Kind.FINALIZE_WRITE_ACK) and len(self.responses) >= self.threshold:
                return self.finish()
            return Reaction()

        if self.phase == "finalize" and self.kind == "read":
            if self.record(msg, Kind.FINALIZE_READ_RESP):
                return self._try_decode()
        return Reaction()

    def _try_decode(self) -> Reaction:
        coded = [r.payload for r in self.responses.values() if r.payload is not None]
        if len(self.responses) < self.threshold or len(coded) < self.params.k:
            return Reaction()
        value = decode(coded, self.params, self.value_length)
        return self.finish(value=value)


class CasServer(ServerNode):
    gossips = True

    def __init__(self, node_id, index, peers, params: CodecParams, initial_value: bytes):
        super().__init__(node_id)
        self.index = index
        self.peers = [p for p in peers if p != node_id]
        self.params = params
        w0 = encode(initial_value, params)[index - 1]
        self.triples: dict[Tag, Triple] = {T0: Triple(T0, w0, Label.FIN)}
        self.gossiped: set[Tag] = set()

    # -- state helpers -------------------------------------------------

    def _store(self, triple: Triple):
        if self.triples.get(triple.tag) != triple:
            self.triples[triple.tag] = triple
            self.changed = True

    def _finalize(self, tag: Tag):
        """Upgrade a stored triple to its finalized label, or add a null 'fin' one."""
        old = self.triples.get(tag)
        if old is None:
            self._store(Triple(tag, None, Label.FIN))
        else:
            self._store(Triple(tag, old.payload, old.label.finalized(), old.registered_readers))

    def highest_fin(self) -> Tag:
        return max(t for t, tr in self.triples.items() if tr.label.is_fin)

    def _gossip(self, msg: Message) -> list[Message]:
        if not self.gossips or msg.tag in self.gossiped:
            return []
        self.gossiped.add(msg.tag)
        return [Message(self.id, p, msg.op, Kind.GOSSIP, msg.tag) for p in self.peers]

    def _reply(self, msg, kind, tag=None, payload=None):
        return Message(self.id, msg.src, msg.op, kind, tag, payload)

    # -- handlers ------------------------------------------------------

    def on_message(self, msg: Message) -> list[Message]:
        handler = getattr(self, "on_" + msg.kind.value, None)
        if handler is None:
            return []
        return handler(msg)

    def on_query(self, msg):
        return [self._reply(msg, Kind.QUERY_RESP, self.highest_fin())]

    def on_pre_write(self, msg):
        if msg.tag not in self.triples:
            self._store(Triple(msg.tag, msg.payload, Label.PRE))
        return [self._reply(msg, Kind.PRE_WRITE_ACK, msg.tag)]

    def on_finalize_write(self, msg):
        self._finalize(msg.tag)
        return [self._reply(msg, Kind.FINALIZE_WRITE_ACK, msg.tag)] + self._gossip(msg)

    def on_finalize_read(self, msg):
        self._finalize(msg.tag)
        payload = self.triples[msg.tag].payload
        return [self._reply(msg, Kind.FINALIZE_READ_RESP, msg.tag, payload)] + self._gossip(msg)

    def on_gossip(self, msg):
        self._finalize(msg.tag)
        return self._gossip(msg)

    def snapshot(self):
        return [self.triples[t].to_json() for t in sorted(self.triples)]

    def storage(self):
        return sum((tr.payload.cost for tr in self.triples.values() if tr.payload is not None),
                   Fraction(0))


def build(config):
    params = CodecParams(config.n, config.k)
    ids = config.server_ids()
    v0 = bytes(config.value_length)
    servers = {sid: CasServer(sid, i + 1, ids, params, v0) for i, sid in enumerate(ids)}
    threshold = config.quorum_threshold()

    def make_client(cid):
        return CasClient(cid, ids, threshold, params, config.value_length)

    return servers, make_client

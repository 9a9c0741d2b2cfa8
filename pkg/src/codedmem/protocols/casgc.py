"""CASGC(k, delta): CAS servers that discard coded elements of old versions.

Clients are the CAS clients. A server keeps payloads only for tags at or
above the (delta+1)-th highest finalized tag it knows; older triples are
reduced to metadata with a 'gc' marker. A reader asking for a collected
element gets no answer, which is why liveness needs bounded concurrency.
"""

from __future__ import annotations

from ..codec import CodecParams
from ..core import Kind, Label, Tag, Triple, label_is_fin
from .cas import CasClient, CasServer


def garbage_collect(triples: dict[Tag, Triple], delta: int) -> dict[Tag, Triple]:
    """Return a copy of ``triples`` with versions below the delta+1 newest finalized tags collected."""
    finalized = sorted((t for t, tr in triples.items() if tr.label.is_fin), reverse=True)
    if len(finalized) <= delta + 1:
        return dict(triples)
    cutoff = finalized[delta]
    out = {}
    for t, tr in triples.items():
        if t < cutoff and not tr.label.is_gc:
            tr = Triple(t, None, tr.label.collected())
        out[t] = tr
    return out


class CasgcServer(CasServer):
    def __init__(self, node_id, index, peers, params: CodecParams, initial_value: bytes, delta: int):
        super().__init__(node_id, index, peers, params, initial_value)
        self.delta = delta

    def _gc(self):
        collected = garbage_collect(self.triples, self.delta)
        if collected != self.triples:
            self.triples = collected
            self.changed = True

    def on_pre_write(self, msg):
        if msg.tag not in self.triples:
            self._store(Triple(msg.tag, msg.payload, Label.PRE))
        self._gc()
        return [self._reply(msg, Kind.PRE_WRITE_ACK, msg.tag)]

    def on_finalize_write(self, msg):
        # Always acknowledge, including for tags already finalized here; a
        # writer whose finalize reaches a server after gossip would
        # otherwise wait on a reply that never comes.
        self._finalize(msg.tag)
        self._gc()
        return [self._reply(msg, Kind.FINALIZE_WRITE_ACK, msg.tag)] + self._gossip(msg)

    def on_finalize_read(self, msg):
        old = self.triples.get(msg.tag)
        self._finalize(msg.tag)
        payload = self.triples[msg.tag].payload
        self._gc()
        gossip = self._gossip(msg)
        if old is not None and old.label.is_gc:
            return gossip
        return [self._reply(msg, Kind.FINALIZE_READ_RESP, msg.tag, payload)] + gossip

    def on_gossip(self, msg):
        self._finalize(msg.tag)
        self._gc()
        return self._gossip(msg)


def build(config):
    params = CodecParams(config.n, config.k)
    ids = config.server_ids()
    v0 = bytes(config.value_length)
    servers = {
        sid: CasgcServer(sid, i + 1, ids, params, v0, config.delta) for i, sid in enumerate(ids)
    }
    threshold = config.quorum_threshold()

    def make_client(cid):
        return CasClient(cid, ids, threshold, params, config.value_length)

    return servers, make_client


def end_points(trace) -> dict[str, int | None]:
    """End-point (event seq) of every invoked operation, or None if it has none.

    A write ends at the first point where a quorum of servers that never
    crash in the trace all hold its tag with a finalized label; failing
    that, at its crash point. A read ends at its response or crash point.
    """
    from ..config import ScenarioConfig

    cfg = ScenarioConfig.from_dict(trace.config)
    threshold = cfg.quorum_threshold()
    events = trace.events
    crashed = {e["node"] for e in events if e["event"] == "crash"}
    stable = set(cfg.server_ids()) - crashed

    kinds, tags, responded, failed = {}, {}, {}, {}
    holders: dict[tuple, set] = {}
    reached: dict[tuple, int] = {}
    for e in events:
        kind = e["event"]
        if kind == "invoke":
            kinds[e["op"]] = e["kind"]
        elif kind == "tag":
            tags[e["op"]] = tuple(e["tag"])
        elif kind == "respond":
            responded[e["op"]] = e["seq"]
        elif kind == "crash" and e.get("op"):
            failed[e["op"]] = e["seq"]
        elif kind == "state" and e["node"] in stable:
            for rec in e["store"]:
                if not label_is_fin(rec.get("label")):
                    continue
                t = tuple(rec["tag"])
                group = holders.setdefault(t, set())
                if e["node"] not in group:
                    group.add(e["node"])
                    if len(group) >= threshold and t not in reached:
                        reached[t] = e["seq"]

    out = {}
    for op, kind in kinds.items():
        if kind == "read":
            out[op] = responded.get(op, failed.get(op))
        else:
            t = tags.get(op)
            point = reached.get(t) if t is not None else None
            out[op] = point if point is not None else failed.get(op)
    return out


def end_point_of(op: str, trace) -> int | None:
    return end_points(trace).get(op)

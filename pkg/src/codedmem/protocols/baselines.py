"""Replication baselines: multi-writer ABD and LDR.

ABD keeps one (tag, value) pair per server and moves full values in every
put and read-get. LDR splits servers into directories, which hold the
latest tag and the replicas known to store it, and replicas, which keep
every version they are sent.
"""

from __future__ import annotations

from ..core import T0, Kind, Message, Tag, next_tag
from .base import PhaseClient, Reaction, ServerNode


# -- ABD -----------------------------------------------------------------


class AbdServer(ServerNode):
    def __init__(self, node_id, initial_value: bytes):
        super().__init__(node_id)
        self.tag: Tag = T0
        self.value = initial_value

    def on_message(self, msg):
        if msg.kind == Kind.GET:
            payload = self.value if msg.meta == "read" else None
            return [Message(self.id, msg.src, msg.op, Kind.GET_RESP, self.tag, payload)]
        if msg.kind == Kind.PUT:
            if msg.tag > self.tag:
                self.tag, self.value = msg.tag, msg.payload
                self.changed = True
            return [Message(self.id, msg.src, msg.op, Kind.PUT_ACK, msg.tag)]
        return []

    def snapshot(self):
        return [{"tag": self.tag.to_json(), "size": "1"}]


class AbdClient(PhaseClient):
    def __init__(self, node_id, servers, threshold):
        super().__init__(node_id)
        self.servers = list(servers)
        self.threshold = threshold
        self.value = None
        self.tag = None

    def invoke(self, op, kind, value=None):
        self.op, self.kind, self.value, self.tag = op, kind, value, None
        self.start_phase("get")
        return Reaction([Message(self.id, s, op, Kind.GET, meta=kind) for s in self.servers])

    def on_message(self, msg):
        if self.phase == "get" and self.record(msg, Kind.GET_RESP):
            if len(self.responses) < self.threshold:
                return Reaction()
            best = max(self.responses.values(), key=lambda m: m.tag)
            if self.kind == "write":
                self.tag = next_tag(best.tag, self.id)
            else:
                self.tag, self.value = best.tag, best.payload
            self.start_phase("put")
            sends = [Message(self.id, s, self.op, Kind.PUT, self.tag, self.value) for s in self.servers]
            return Reaction(sends, tag=self.tag)
        if self.phase == "put" and self.record(msg, Kind.PUT_ACK):
            if len(self.responses) >= self.threshold:
                return self.finish(value=self.value if self.kind == "read" else None)
        return Reaction()


def build_abd(config):
    ids = config.server_ids()
    v0 = bytes(config.value_length)
    servers = {sid: AbdServer(sid, v0) for sid in ids}
    threshold = config.quorum_threshold()
    return servers, lambda cid: AbdClient(cid, ids, threshold)


# -- LDR -----------------------------------------------------------------


class LdrDirectory(ServerNode):
    def __init__(self, node_id, replicas, f):
        super().__init__(node_id)
        self.f = f
        self.tag: Tag = T0
        self.locations = frozenset(replicas)

    def on_message(self, msg):
        if msg.kind == Kind.GET_META:
            return [Message(self.id, msg.src, msg.op, Kind.GET_META_RESP, self.tag, self.locations)]
        if msg.kind == Kind.PUT_META:
            if msg.tag == self.tag:
                merged = self.locations | msg.payload
                if merged != self.locations:
                    self.locations = merged
                    self.changed = True
            elif msg.tag > self.tag and len(msg.payload) >= self.f + 1:
                self.tag, self.locations = msg.tag, frozenset(msg.payload)
                self.changed = True
            return [Message(self.id, msg.src, msg.op, Kind.PUT_META_ACK, msg.tag)]
        return []

    def snapshot(self):
        return [{"tag": self.tag.to_json(), "locs": sorted(self.locations), "size": None}]


class LdrReplica(ServerNode):
    def __init__(self, node_id, initial_value: bytes):
        super().__init__(node_id)
        self.versions: dict[Tag, bytes] = {T0: initial_value}

    def on_message(self, msg):
        if msg.kind == Kind.PUT:
            if msg.tag not in self.versions:
                self.versions[msg.tag] = msg.payload
                self.changed = True
            return [Message(self.id, msg.src, msg.op, Kind.PUT_ACK, msg.tag)]
        if msg.kind == Kind.GET:
            if msg.tag in self.versions:
                return [Message(self.id, msg.src, msg.op, Kind.GET_RESP, msg.tag, self.versions[msg.tag])]
            return []
        return []

    def snapshot(self):
        return [{"tag": t.to_json(), "size": "1"} for t in sorted(self.versions)]


def _replica_order(name):
    return int(name[3:])


class LdrClient(PhaseClient):
    def __init__(self, node_id, directories, replicas, f, threshold):
        super().__init__(node_id)
        self.directories = list(directories)
        self.replicas = sorted(replicas, key=_replica_order)
        self.f = f
        self.threshold = threshold
        self.value = None
        self.tag = None
        self.locations = None
        self.ackers: list[str] = []

    def _to_dirs(self, kind, tag=None, payload=None):
        return [Message(self.id, d, self.op, kind, tag, payload) for d in self.directories]

    def invoke(self, op, kind, value=None):
        self.op, self.kind, self.value, self.tag = op, kind, value, None
        self.locations, self.ackers = None, []
        self.start_phase("get_meta")
        return Reaction(self._to_dirs(Kind.GET_META))

    def on_message(self, msg):
        if self.phase == "get_meta" and self.record(msg, Kind.GET_META_RESP):
            if len(self.responses) < self.threshold:
                return Reaction()
            best = max(self.responses.values(), key=lambda m: m.tag)
            if self.kind == "write":
                self.tag = next_tag(best.tag, self.id)
                self.start_phase("put")
                targets = self.replicas[: 2 * self.f + 1]
                sends = [Message(self.id, r, self.op, Kind.PUT, self.tag, self.value) for r in targets]
                return Reaction(sends, tag=self.tag)
            self.tag, self.locations = best.tag, best.payload
            self.start_phase("put_meta")
            return Reaction(self._to_dirs(Kind.PUT_META, self.tag, self.locations), tag=self.tag)

        if self.phase == "put" and self.record(msg, Kind.PUT_ACK):
            self.ackers.append(msg.src)
            if len(self.ackers) >= self.f + 1:
                self.locations = frozenset(self.ackers)
                self.start_phase("put_meta")
                return Reaction(self._to_dirs(Kind.PUT_META, self.tag, self.locations))
            return Reaction()

        if self.phase == "put_meta" and self.record(msg, Kind.PUT_META_ACK):
            if len(self.responses) < self.threshold:
                return Reaction()
            if self.kind == "write":
                return self.finish()
            self.start_phase("get")
            chosen = sorted(self.locations, key=_replica_order)[: self.f + 1]
            return Reaction([Message(self.id, r, self.op, Kind.GET, self.tag) for r in chosen])

        if self.phase == "get" and self.record(msg, Kind.GET_RESP):
            return self.finish(value=msg.payload)
        return Reaction()


def build_ldr(config):
    ids = config.server_ids()
    dirs = [s for s in ids if s.startswith("dir")]
    reps = [s for s in ids if s.startswith("rep")]
    v0 = bytes(config.value_length)
    servers = {d: LdrDirectory(d, reps, config.f) for d in dirs}
    servers.update({r: LdrReplica(r, v0) for r in reps})
    threshold = config.quorum_threshold()
    return servers, lambda cid: LdrClient(cid, dirs, reps, config.f, threshold)

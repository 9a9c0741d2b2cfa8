"""Tags, labels, triples, messages and operation ids shared by all protocols."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, NamedTuple

from .codec import CodedElement

# Reserved client id of the minimum tag; real ids must be non-empty, so
# it sorts below all of them.
T0_ID = ""


class Tag(NamedTuple):
    """Version identifier, ordered lexicographically on (z, client_id)."""

    z: int
    client_id: str

    def to_json(self):
        return [self.z, self.client_id]

    @classmethod
    def from_json(cls, obj):
        return cls(int(obj[0]), str(obj[1]))

    def __str__(self):
        return f"({self.z},{self.client_id or 't0'})"


T0 = Tag(0, T0_ID)


def tag_compare(a: Tag, b: Tag) -> int:
    """Return -1, 0 or 1 as ``a`` is below, equal to or above ``b``."""
    return (a > b) - (a < b)


def next_tag(max_seen: Tag, client_id: str) -> Tag:
    return Tag(max_seen.z + 1, client_id)


class Label(enum.Enum):
    PRE = "pre"
    FIN = "fin"
    PRE_GC = "pre/gc"
    FIN_GC = "fin/gc"

    @property
    def is_fin(self) -> bool:
        return self in (Label.FIN, Label.FIN_GC)

    @property
    def is_gc(self) -> bool:
        return self in (Label.PRE_GC, Label.FIN_GC)

    def collected(self) -> "Label":
        return {Label.PRE: Label.PRE_GC, Label.FIN: Label.FIN_GC}.get(self, self)

    def finalized(self) -> "Label":
        return Label.FIN_GC if self.is_gc else Label.FIN

    def to_json(self):
        if self.is_gc:
            return [self.value.split("/")[0], "gc"]
        return self.value

    @classmethod
    def from_json(cls, obj) -> "Label":
        if isinstance(obj, list):
            return cls("/".join(obj))
        return cls(obj)


def label_is_fin(obj) -> bool:
    """True for the JSON form of 'fin' or ('fin','gc')."""
    return obj == "fin" or obj == ["fin", "gc"]


@dataclass(frozen=True)
class Triple:
    tag: Tag
    payload: Any  # CodedElement, bytes, or None
    label: Label
    registered_readers: frozenset = frozenset()

    def __post_init__(self):
        if self.label.is_gc and self.payload is not None:
            raise ValueError("gc-marked triples carry no payload")

    def to_json(self):
        out = {
            "tag": self.tag.to_json(),
            "label": self.label.to_json(),
            "size": None if self.payload is None else str(payload_cost(self.payload)),
        }
        if self.registered_readers:
            out["readers"] = sorted(self.registered_readers)
        return out


class OperationId(NamedTuple):
    client_id: str
    seq: int

    def __str__(self):
        return f"{self.client_id}#{self.seq}"

    @classmethod
    def parse(cls, text: str) -> "OperationId":
        client, _, seq = text.rpartition("#")
        return cls(client, int(seq))


class Kind(str, enum.Enum):
    QUERY = "query"
    QUERY_RESP = "query_resp"
    PRE_WRITE = "pre_write"
    PRE_WRITE_ACK = "pre_write_ack"
    FINALIZE_WRITE = "finalize_write"
    FINALIZE_WRITE_ACK = "finalize_write_ack"
    FINALIZE_READ = "finalize_read"
    FINALIZE_READ_RESP = "finalize_read_resp"
    GOSSIP = "gossip"
    GET = "get"
    GET_RESP = "get_resp"
    PUT = "put"
    PUT_ACK = "put_ack"
    GET_META = "get_meta"
    GET_META_RESP = "get_meta_resp"
    PUT_META = "put_meta"
    PUT_META_ACK = "put_meta_ack"


def payload_cost(payload) -> Fraction:
    """Communication/storage cost of a payload in value-units.

    A full value costs 1, a coded element 1/k, anything else (tags,
    location sets, acknowledgements) is metadata and costs 0.
    """
    if isinstance(payload, CodedElement):
        return payload.cost
    if isinstance(payload, (bytes, bytearray)):
        return Fraction(1)
    return Fraction(0)


def payload_kind(payload) -> str | None:
    if payload is None:
        return None
    if isinstance(payload, CodedElement):
        return "coded"
    if isinstance(payload, (bytes, bytearray)):
        return "value"
    return "meta"


@dataclass(frozen=True)
class Message:
    src: str
    dst: str
    op: str  # originating operation id ("client#seq")
    kind: Kind
    tag: Tag | None = None
    payload: Any = None
    meta: Any = field(default=None, compare=False)

    @property
    def cost(self) -> Fraction:
        return payload_cost(self.payload)

    def to_json(self):
        out = {
            "src": self.src,
            "dst": self.dst,
            "op": self.op,
            "kind": self.kind.value,
            "tag": None if self.tag is None else self.tag.to_json(),
            "payload": payload_kind(self.payload),
            "cost": str(self.cost),
        }
        if isinstance(self.payload, CodedElement):
            out["index"] = self.payload.index
        elif isinstance(self.payload, frozenset):
            out["locs"] = sorted(self.payload)
        if self.meta is not None:
            out["meta"] = self.meta
        return out

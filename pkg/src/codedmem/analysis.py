"""Post-hoc verdicts over execution traces.

Everything here reads the JSON-level events of an
:class:`~codedmem.trace.ExecutionTrace`, so it works the same on a fresh
run and on a trace file loaded from disk. Costs are exact fractions.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from fractions import Fraction
from functools import lru_cache

from .config import ScenarioConfig
from .core import label_is_fin
from .errors import TraceIntegrityError
from .protocols.casgc import end_points
from .sim import enforce_fairness

INF = float("inf")
T0_JSON = (0, "")


@dataclass
class OperationRecord:
    op_id: str
    client: str
    kind: str
    invoked: int
    value: str | None = None  # hex: written value, or value returned by a read
    responded: int | None = None
    crashed: int | None = None
    tag: tuple | None = None

    @property
    def complete(self) -> bool:
        return self.responded is not None


def operations(trace) -> dict[str, OperationRecord]:
    ops: dict[str, OperationRecord] = {}

    def find(e):
        if e.get("op") not in ops:
            raise TraceIntegrityError(f"{e['event']} at seq {e['seq']} names unknown operation {e.get('op')!r}")
        return ops[e["op"]]

    for e in trace.events:
        kind = e["event"]
        if kind == "invoke":
            ops[e["op"]] = OperationRecord(e["op"], e["node"], e["kind"], e["seq"], e.get("value"))
        elif kind == "tag":
            if e.get("tag") is None:
                raise TraceIntegrityError(f"tag event at seq {e['seq']} carries no tag")
            find(e).tag = tuple(e["tag"])
        elif kind == "respond":
            rec = find(e)
            rec.responded = e["seq"]
            if rec.kind == "read":
                rec.value = e.get("value")
            if rec.tag is None and e.get("tag") is not None:
                rec.tag = tuple(e["tag"])
        elif kind == "crash" and e.get("op"):
            find(e).crashed = e["seq"]
    return ops


# -- atomicity -----------------------------------------------------------


@dataclass
class AtomicityVerdict:
    atomic: bool
    reason: str = ""
    witness: list = field(default_factory=list)

    def to_json(self):
        return asdict(self)


def _precedes(a: OperationRecord, b: OperationRecord) -> bool:
    """The tag order used by the protocols' correctness argument."""
    if a.tag < b.tag:
        return True
    return a.tag == b.tag and a.kind == "write" and b.kind == "read"


def check_history(records, initial_value: str) -> AtomicityVerdict:
    """Check a history against the tag-induced order.

    Completed operations are checked. Writes that never completed but did
    pick a tag are kept with an open-ended interval, since their value may
    still be read. Operations without a tag are dropped, except that a
    completed one is a trace-integrity error.
    """
    ops = []
    for r in records:
        if r.complete and r.tag is None:
            raise TraceIntegrityError(f"operation {r.op_id} responded without a tag")
        if r.tag is None:
            continue
        if r.complete or r.kind == "write":
            ops.append(r)

    writes = [r for r in ops if r.kind == "write"]
    by_tag = {}
    for w in writes:
        if w.tag in by_tag:
            return AtomicityVerdict(False, "two writes share a tag", [by_tag[w.tag].op_id, w.op_id])
        by_tag[w.tag] = w

    sorted_tags = sorted(by_tag)
    for r in ops:
        if r.kind != "read":
            continue
        prior = [t for t in sorted_tags if t <= r.tag]
        expected = by_tag[prior[-1]].value if prior else initial_value
        if r.value != expected:
            source = by_tag[prior[-1]].op_id if prior else "initial value"
            return AtomicityVerdict(False, "read returned a value other than the last preceding write",
                                    [source, r.op_id])

    done = [r for r in ops if r.complete]
    for a in done:
        for b in ops:
            if a is not b and a.responded < b.invoked and _precedes(b, a):
                return AtomicityVerdict(False, "order contradicts real-time precedence", [a.op_id, b.op_id])
    return AtomicityVerdict(True)


def initial_value_hex(config: dict) -> str:
    return "00" * config.get("value_length", 16)


def check_atomicity(trace) -> AtomicityVerdict:
    return check_history(operations(trace).values(), initial_value_hex(trace.config))


def linearizable(records, initial_value: str) -> bool:
    """Exhaustive linearizability search for a read/write register.

    Completed operations must all be placed; incomplete writes may be
    placed or left out; incomplete reads are ignored.
    """
    ops = [r for r in records if r.complete or r.kind == "write"]
    n = len(ops)
    inv = [r.invoked for r in ops]
    resp = [r.responded if r.complete else INF for r in ops]
    required = 0
    for i, r in enumerate(ops):
        if r.complete:
            required |= 1 << i

    @lru_cache(maxsize=None)
    def search(placed: int, value: str) -> bool:
        if placed & required == required:
            return True
        remaining = [i for i in range(n) if not placed >> i & 1]
        horizon = min(resp[i] for i in remaining)
        for i in remaining:
            if inv[i] > horizon:
                continue
            r = ops[i]
            if r.kind == "write":
                if search(placed | 1 << i, r.value):
                    return True
            elif r.value == value and search(placed | 1 << i, value):
                return True
        return False

    return search(0, initial_value)


# -- concurrency, supersession, liveness --------------------------------


def concurrency_profile(trace) -> dict[str, int]:
    """Number of writes concurrent with each read, by end-point precedence."""
    ops = operations(trace)
    ends = end_points(trace)

    def before(a, b):
        return ends[a] is not None and ends[a] < ops[b].invoked

    out = {}
    for r in ops.values():
        if r.kind != "read":
            continue
        out[r.op_id] = sum(
            1 for w in ops.values()
            if w.kind == "write" and not before(w.op_id, r.op_id) and not before(r.op_id, w.op_id)
        )
    return out


def _fully_delivered(trace) -> dict[str, int | None]:
    """Seq at which every message carrying each op id had been delivered or dropped."""
    sent, done, last = {}, {}, {}
    msg_op = {}
    for e in trace.events:
        if e["event"] == "send":
            sent[e["op"]] = sent.get(e["op"], 0) + 1
            msg_op[e["msg"]] = e["op"]
        elif e["event"] in ("deliver", "drop"):
            op = msg_op[e["msg"]]
            done[op] = done.get(op, 0) + 1
            last[op] = e["seq"]
    return {op: (last.get(op) if done.get(op, 0) == count else None) for op, count in sent.items()}


@dataclass
class SupersessionProfile:
    omega: int
    points: list  # (seq, live write ids) at each change point
    w: int

    def live_at(self, seq: int) -> int:
        count = 0
        for point, live in self.points:
            if point > seq:
                break
            count = len(live)
        return count


def supersession_profile(trace, omega: int | None = None) -> SupersessionProfile:
    """Writes that completed their query phase and are not omega-superseded, per point.

    The initial value counts as a write with the minimum tag present from
    the start. ``omega`` defaults to delta+1.
    """
    if omega is None:
        omega = trace.config.get("delta", 0) + 1
    ops = operations(trace)
    full = _fully_delivered(trace)
    writes = [("t0", T0_JSON, 0)]
    tag_seq = {e["op"]: e["seq"] for e in trace.events if e["event"] == "tag"}
    for w in ops.values():
        if w.kind == "write" and w.tag is not None:
            writes.append((w.op_id, w.tag, tag_seq.get(w.op_id, w.invoked)))
    finishers = []  # (seq at which it can supersede, tag)
    for w in ops.values():
        if w.kind == "write" and w.complete and full.get(w.op_id) is not None:
            finishers.append((max(full[w.op_id], w.responded), w.tag))

    change = sorted({s for _, _, s in writes} | {s for s, _ in finishers})
    points = []
    for p in change:
        ready = [t for s, t in finishers if s <= p]
        live = [
            op for op, tag, s in writes
            if s <= p and sum(1 for t in ready if t > tag) < omega
        ]
        points.append((p, sorted(live)))
    w_max = max((len(live) for _, live in points), default=0)
    return SupersessionProfile(omega, points, w_max)


def _server_crashes(trace) -> list[str]:
    return [e["node"] for e in trace.events if e["event"] == "crash" and e["role"] == "server"]


@dataclass
class LivenessVerdict:
    status: str  # live | stalled | not_applicable
    reasons: list = field(default_factory=list)
    stalled: list = field(default_factory=list)
    stalled_read_concurrency: dict = field(default_factory=dict)

    def to_json(self):
        return asdict(self)


def check_liveness(trace) -> LivenessVerdict:
    """Do all operations of clients that never crash terminate?

    The claim is only checked when its hypotheses hold: the run is fair,
    at most f servers crash and, for CASGC, no read overlaps more than
    delta writes. Otherwise the verdict is ``not_applicable``.
    """
    cfg = trace.config
    ops = operations(trace)
    crashed_clients = {e["node"] for e in trace.events if e["event"] == "crash" and e["role"] == "client"}
    stalled = sorted(
        r.op_id for r in ops.values() if not r.complete and r.crashed is None and r.client not in crashed_clients
    )
    reasons = []
    halt = trace.halt or {}
    if halt.get("reason") == "budget":
        reasons.append("step budget exhausted")
    if not enforce_fairness(trace):
        reasons.append("unfair schedule: some message to a live node was never delivered")
    crashes = _server_crashes(trace)
    if cfg["protocol"] == "ldr":
        dirs = sum(1 for s in crashes if s.startswith("dir"))
        if len(crashes) - dirs > cfg["f"]:
            reasons.append(f"more than f={cfg['f']} replica crashes")
        if dirs > (cfg["directory_count"] - 1) // 2:
            reasons.append("a majority of directories crashed")
    elif len(crashes) > cfg["f"]:
        reasons.append(f"more than f={cfg['f']} server crashes")
    conc = {}
    if cfg["protocol"] == "casgc":
        profile = concurrency_profile(trace)
        over = {op: c for op, c in profile.items() if c > cfg["delta"]}
        if over:
            reasons.append(f"read concurrency exceeds delta={cfg['delta']}")
        conc = {op: profile[op] for op in stalled if op in profile}
    if reasons:
        return LivenessVerdict("not_applicable", reasons, stalled, conc)
    return LivenessVerdict("stalled" if stalled else "live", [], stalled, conc)


# -- costs ---------------------------------------------------------------


@dataclass
class CostLedger:
    op_costs: dict
    write_sup: Fraction
    read_sup: Fraction
    storage: list  # (seq, total storage over live servers)
    storage_sup: Fraction
    quiescent: list  # seqs with no message in flight

    def to_json(self):
        return {
            "op_costs": {k: str(v) for k, v in self.op_costs.items()},
            "write_cost": str(self.write_sup),
            "read_cost": str(self.read_sup),
            "storage_sup": str(self.storage_sup),
            "storage_final": str(self.storage[-1][1]) if self.storage else "0",
        }


def ledger(trace) -> CostLedger:
    ops = operations(trace)
    costs = {op: Fraction(0) for op in ops}
    per_server: dict[str, Fraction] = {}
    crashed: set[str] = set()
    storage, quiescent = [], []
    in_flight = 0
    total = Fraction(0)
    for e in trace.events:
        kind = e["event"]
        if kind == "send":
            costs[e["op"]] = costs.get(e["op"], Fraction(0)) + Fraction(e["cost"])
            in_flight += 1
        elif kind in ("deliver", "drop"):
            in_flight -= 1
        elif kind == "state" and e["node"] not in crashed:
            per_server[e["node"]] = Fraction(e["storage"])
            total = sum(per_server.values(), Fraction(0))
            storage.append((e["seq"], total))
        elif kind == "crash" and e["role"] == "server":
            crashed.add(e["node"])
            per_server.pop(e["node"], None)
            total = sum(per_server.values(), Fraction(0))
            storage.append((e["seq"], total))
        if in_flight == 0 and kind in ("deliver", "drop", "halt"):
            quiescent.append(e["seq"])
    writes = [c for op, c in costs.items() if op in ops and ops[op].kind == "write"]
    reads = [c for op, c in costs.items() if op in ops and ops[op].kind == "read"]
    return CostLedger(
        costs,
        max(writes, default=Fraction(0)),
        max(reads, default=Fraction(0)),
        storage,
        max((s for _, s in storage), default=Fraction(0)),
        quiescent,
    )


def storage_bound_violations(trace, only_quiescent=False) -> list:
    """Points where storage exceeds w(P)*N/k for a CASGC trace."""
    cfg = trace.config
    k = ScenarioConfig.from_dict(cfg).code_k
    profile = supersession_profile(trace)
    led = ledger(trace)
    check_at = set(led.quiescent) if only_quiescent else None
    out = []
    current = Fraction(0)
    series = iter(led.storage)
    nxt = next(series, None)
    for e in trace.events:
        while nxt is not None and nxt[0] <= e["seq"]:
            current = nxt[1]
            nxt = next(series, None)
        if check_at is not None and e["seq"] not in check_at:
            continue
        bound = Fraction(profile.live_at(e["seq"]) * cfg["n"], k)
        if current > bound:
            out.append({"seq": e["seq"], "storage": str(current), "bound": str(bound)})
    return out


def stored_tags(trace, at_seq: int | None = None) -> dict[str, set]:
    """Tags for which each live server holds a payload at ``at_seq`` (default: end)."""
    latest, crashed = {}, set()
    for e in trace.events:
        if at_seq is not None and e["seq"] > at_seq:
            break
        if e["event"] == "state":
            latest[e["node"]] = {tuple(r["tag"]) for r in e["store"] if r.get("size")}
        elif e["event"] == "crash":
            crashed.add(e["node"])
    return {node: tags for node, tags in latest.items() if node not in crashed}


# -- protocol invariants -------------------------------------------------


def label_violations(trace) -> list:
    """Finalized labels that regress, or payloads that reappear after collection."""
    seen: dict[tuple, dict] = {}
    out = []
    for e in trace.events:
        if e["event"] != "state":
            continue
        for rec in e["store"]:
            if "label" not in rec:
                continue
            key = (e["node"], tuple(rec["tag"]))
            prev = seen.get(key)
            gc = isinstance(rec["label"], list)
            if prev is not None:
                if prev["fin"] and not label_is_fin(rec["label"]):
                    out.append({"seq": e["seq"], "node": e["node"], "tag": rec["tag"], "issue": "fin downgraded"})
                if prev["gc"] and (not gc or rec.get("size")):
                    out.append({"seq": e["seq"], "node": e["node"], "tag": rec["tag"], "issue": "gc undone"})
            seen[key] = {"fin": label_is_fin(rec["label"]), "gc": gc}
    return out


def unanswered_read_finalizes(trace) -> list:
    """Reader finalize messages to never-crashing servers that got no coded element back."""
    crashed = {e["node"] for e in trace.events if e["event"] == "crash"}
    asked, answered = set(), set()
    for e in trace.events:
        if e["event"] != "send":
            continue
        if e["kind"] == "finalize_read" and e["dst"] not in crashed:
            asked.add((e["op"], e["dst"]))
        elif e["kind"] == "finalize_read_resp" and e["payload"] == "coded":
            answered.add((e["op"], e["src"]))
    return sorted(asked - answered)


def analyze(trace) -> dict:
    """Full JSON-ready report body for one trace."""
    cfg = trace.config
    atomicity = check_atomicity(trace)
    liveness = check_liveness(trace)
    led = ledger(trace)
    report = {
        "scenario": cfg.get("id"),
        "protocol": cfg["protocol"],
        "seed": cfg.get("scheduler", {}).get("seed"),
        "halt": trace.halt,
        "fair": enforce_fairness(trace),
        "atomicity": atomicity.to_json(),
        "liveness": liveness.to_json(),
        "ledger": led.to_json(),
        "label_violations": label_violations(trace),
    }
    if cfg["protocol"] in ("cas", "casgc", "ccoas"):
        report["concurrency"] = concurrency_profile(trace)
    if cfg["protocol"] == "casgc":
        profile = supersession_profile(trace)
        report["supersession"] = {"omega": profile.omega, "w": profile.w}
        report["storage_bound_violations"] = storage_bound_violations(trace)
    if cfg["protocol"] == "ccoas":
        report["unanswered_read_finalizes"] = [list(x) for x in unanswered_read_finalizes(trace)]
    return report

from hypothesis import given, settings
from hypothesis import strategies as st

from codedmem.codec import CodecParams, encode
from codedmem.core import T0, Kind, Label, Message, Tag, Triple
from codedmem.harness import run_scenario
from codedmem.protocols.casgc import CasgcServer, end_point_of, end_points, garbage_collect
from codedmem.sim import run
from codedmem.analysis import concurrency_profile, operations
from conftest import make_config

PARAMS = CodecParams(5, 3)
IDS = [f"s{i}" for i in range(1, 6)]
EL = encode(b"e" * 16, PARAMS)[0]


def t(z):
    return Tag(z, "w") if z else T0


def store(spec):
    return {t(z): Triple(t(z), EL if payload else None, label) for z, payload, label in spec}


def test_gc_example_delta_one():
    before = store([(0, True, Label.PRE), (1, True, Label.FIN), (2, True, Label.FIN), (3, True, Label.FIN)])
    after = garbage_collect(before, 1)
    assert after[t(0)] == Triple(t(0), None, Label.PRE_GC)
    assert after[t(1)] == Triple(t(1), None, Label.FIN_GC)
    assert after[t(2)].payload is EL and after[t(3)].payload is EL


def test_gc_below_threshold_is_noop():
    before = store([(1, True, Label.FIN), (2, True, Label.FIN), (3, True, Label.FIN)])
    assert garbage_collect(before, 2) == before


def test_gc_counts_collected_finalized_tags():
    before = store([(1, False, Label.FIN_GC), (2, True, Label.FIN), (3, True, Label.PRE)])
    # two finalized tags with delta = 0: everything under tag 2 is collected
    after = garbage_collect(before, 0)
    assert after[t(3)].payload is EL and after[t(2)].payload is EL
    after = garbage_collect(store([(1, True, Label.FIN), (2, False, Label.FIN_GC), (3, True, Label.PRE)]), 0)
    assert after[t(1)].label is Label.FIN_GC and after[t(1)].payload is None


entries = st.lists(
    st.tuples(st.integers(0, 12), st.booleans(), st.sampled_from([Label.PRE, Label.FIN])),
    max_size=10, unique_by=lambda e: e[0],
)


@settings(max_examples=200, deadline=None)
@given(entries, st.integers(0, 3))
def test_gc_postcondition_and_idempotence(spec, delta):
    before = store(spec)
    after = garbage_collect(before, delta)
    assert garbage_collect(after, delta) == after
    fins = sorted((tag for tag, tr in after.items() if tr.label.is_fin), reverse=True)
    assert set(after) == set(before)
    if len(fins) > delta + 1:
        cutoff = fins[delta]
        for tag, tr in after.items():
            if tag < cutoff:
                assert tr.payload is None and tr.label.is_gc
            else:
                assert tr == before[tag]
    else:
        assert after == before


def server(delta=1):
    return CasgcServer("s1", 1, IDS, PARAMS, bytes(16), delta)


def test_reader_finalize_on_collected_tag_gets_no_reply():
    s = server(delta=0)
    for z in (1, 2):
        s.on_message(Message("w", "s1", f"w#{z}", Kind.PRE_WRITE, t(z), EL))
        s.on_message(Message("w", "s1", f"w#{z}", Kind.FINALIZE_WRITE, t(z)))
    assert s.triples[t(1)].label is Label.FIN_GC
    out = s.on_message(Message("r", "s1", "r#1", Kind.FINALIZE_READ, t(1)))
    assert all(m.kind == Kind.GOSSIP for m in out)
    assert s.triples[t(1)].label is Label.FIN_GC


def test_query_reports_collected_finalized_tag():
    s = server(delta=0)
    s.triples = {T0: Triple(T0, None, Label.FIN_GC), t(1): Triple(t(1), EL, Label.PRE)}
    [reply] = s.on_message(Message("r", "s1", "r#1", Kind.QUERY))
    assert reply.tag == T0


def test_prewrite_triggers_gc_before_ack():
    s = server(delta=0)
    s.triples = {T0: Triple(T0, EL, Label.FIN), t(2): Triple(t(2), None, Label.FIN)}
    out = s.on_message(Message("w", "s1", "w#1", Kind.PRE_WRITE, t(1), EL))
    assert out[0].kind == Kind.PRE_WRITE_ACK
    assert s.triples[t(1)].label is Label.PRE_GC and s.triples[t(1)].payload is None
    assert s.triples[T0].payload is None


def test_writer_finalize_is_always_acknowledged():
    s = server()
    s.on_message(Message("s2", "s1", "w#1", Kind.GOSSIP, t(1)))
    out = s.on_message(Message("w", "s1", "w#1", Kind.FINALIZE_WRITE, t(1)))
    assert [m.kind for m in out] == [Kind.FINALIZE_WRITE_ACK]


def test_end_point_of_terminated_write_precedes_response():
    trace = run(make_config("casgc"))
    ops = operations(trace)
    assert end_point_of("w1#1", trace) <= ops["w1#1"].responded
    assert end_point_of("r1#1", trace) == ops["r1#1"].responded


def test_end_point_of_write_crashed_before_any_server_step():
    cfg = make_config("casgc", ops=[{"client": "w1", "kind": "write", "value": "x", "at": 0}],
                      failures={"clients": {"w1": {"after": {"event": "invoke", "op": "w1#1"}}}})
    trace = run(cfg)
    [crash] = trace.of("crash")
    assert end_point_of("w1#1", trace) == crash["seq"]


def test_crashed_writer_gets_end_point_through_gossip():
    # The writer dies right after its first finalize reaches a server; gossip
    # spreads the finalized tag to a quorum anyway.
    cfg = make_config(
        "casgc",
        ops=[{"client": "w1", "kind": "write", "value": "x", "at": 0}],
        failures={"clients": {"w1": {"after": {"event": "deliver", "kind": "finalize_write"}}}},
    )
    trace = run(cfg)
    [crash] = trace.of("crash")
    ends = end_points(trace)
    assert ends["w1#1"] is not None and ends["w1#1"] > crash["seq"]


def test_starvation_scenario():
    report, trace = run_scenario("casgc_starvation")
    assert "r1#1" not in report["responded"]
    assert report["concurrency"]["r1#1"] >= 2
    assert concurrency_profile(trace)["r1#1"] >= 2
    assert report["liveness"]["status"] == "not_applicable"
    assert report["ok"]

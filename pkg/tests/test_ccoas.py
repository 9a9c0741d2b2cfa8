from fractions import Fraction

from codedmem.analysis import ledger, unanswered_read_finalizes
from codedmem.codec import CodecParams, encode
from codedmem.core import T0, Kind, Label, Message, Tag, Triple
from codedmem.harness import random_config
from codedmem.protocols.ccoas import CcoasServer, drawback_config, drawback_scenario
from codedmem.sim import enforce_fairness, run
from conftest import make_config

PARAMS = CodecParams(5, 4)
T1 = Tag(1, "w1")
EL = encode(b"c" * 16, PARAMS)[0]


def server():
    return CcoasServer("s1", 1, PARAMS, bytes(16))


def test_initial_state():
    s = server()
    assert s.triples == {T0: Triple(T0, encode(bytes(16), PARAMS)[0], Label.FIN)}


def test_registered_readers_served_on_prewrite():
    s = server()
    assert s.on_message(Message("r1", "s1", "r1#1", Kind.FINALIZE_READ, T1)) == []
    assert s.on_message(Message("r2", "s1", "r2#4", Kind.FINALIZE_READ, T1)) == []
    assert s.triples[T1].registered_readers == {"r1#1", "r2#4"}
    out = s.on_message(Message("w1", "s1", "w1#1", Kind.PRE_WRITE, T1, EL))
    assert [(m.dst, m.op, m.kind) for m in out] == [
        ("r1", "r1#1", Kind.FINALIZE_READ_RESP),
        ("r2", "r2#4", Kind.FINALIZE_READ_RESP),
        ("w1", "w1#1", Kind.PRE_WRITE_ACK),
    ]
    assert out[0].payload == EL
    assert s.triples[T1] == Triple(T1, EL, Label.FIN)
    # re-delivery of the pre-write does not serve anyone twice
    assert [m.kind for m in s.on_message(Message("w1", "s1", "w1#1", Kind.PRE_WRITE, T1, EL))] == [
        Kind.PRE_WRITE_ACK]


def test_writer_finalize_for_unknown_tag():
    s = server()
    out = s.on_message(Message("w1", "s1", "w1#1", Kind.FINALIZE_WRITE, T1))
    assert out[0].kind == Kind.FINALIZE_WRITE_ACK
    assert s.triples[T1] == Triple(T1, None, Label.FIN)


def test_reader_finalize_with_element_present():
    s = server()
    s.on_message(Message("w1", "s1", "w1#1", Kind.PRE_WRITE, T1, EL))
    [reply] = s.on_message(Message("r1", "s1", "r1#1", Kind.FINALIZE_READ, T1))
    assert reply.payload == EL and s.triples[T1].label is Label.FIN


def test_costs_n5_f1():
    led = ledger(run(make_config("ccoas")))
    assert led.write_sup == Fraction(5, 4) and led.read_sup == Fraction(5, 4)


def test_registration_path_terminates_read():
    # hold pre-writes to s5 until the read's finalize has reached it
    cfg = make_config(
        "ccoas",
        scheduler={"mode": "scripted", "script": [{
            "hold": {"kind": "pre_write", "dst": "s5"},
            "until": {"event": "deliver", "kind": "finalize_read", "dst": "s5"}}]},
    )
    trace = run(cfg)
    assert [e["op"] for e in trace.of("respond")] == ["w1#1", "r1#1"]
    served = [e for e in trace.of("send") if e["src"] == "s5" and e["kind"] == "finalize_read_resp"]
    assert served and served[0]["payload"] == "coded"


def test_drawback_pair():
    trace, verdict = drawback_scenario("suppressed")
    assert verdict == "read stalled (budget)"
    assert not enforce_fairness(trace)
    assert drawback_scenario("fair")[1] == "read terminated"
    assert drawback_scenario("suppressed", protocol="cas")[1] == "read terminated"
    assert drawback_config("suppressed", "cas").k == 3


def test_every_live_server_answers_reads_in_fair_runs():
    template = make_config("ccoas")
    for seed in range(60):
        trace = run(random_config(template, seed))
        assert unanswered_read_finalizes(trace) == []

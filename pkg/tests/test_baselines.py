import pytest

from codedmem.analysis import check_atomicity, ledger
from codedmem.core import T0, Kind, Message, Tag
from codedmem.harness import run_scenario
from codedmem.protocols.baselines import AbdServer, LdrDirectory, LdrReplica
from codedmem.sim import run
from conftest import make_config


def test_abd_server_get_and_put():
    s = AbdServer("s1", bytes(4))
    [w] = s.on_message(Message("w1", "s1", "w1#1", Kind.GET, meta="write"))
    assert w.payload is None and w.tag == T0
    [r] = s.on_message(Message("r1", "s1", "r1#1", Kind.GET, meta="read"))
    assert r.payload == bytes(4) and r.cost == 1
    s.on_message(Message("w1", "s1", "w1#1", Kind.PUT, Tag(2, "w1"), b"new!"))
    [ack] = s.on_message(Message("w2", "s1", "w2#1", Kind.PUT, Tag(1, "w2"), b"old!"))
    assert ack.kind == Kind.PUT_ACK
    assert (s.tag, s.value) == (Tag(2, "w1"), b"new!")


def test_abd_costs():
    led = ledger(run(make_config("abd")))
    assert (led.write_sup, led.read_sup, led.storage_sup) == (5, 10, 5)


def test_abd_worst_case_script():
    report, trace = run_scenario("abd_worst_read")
    assert report["ledger"]["read_cost"] == "10/1"
    assert report["ledger"]["write_cost"] == "5/1"
    # the read started while only one put had been delivered
    first_put = next(e["seq"] for e in trace.of("deliver") if e["kind"] == "put")
    read_invoke = next(e["seq"] for e in trace.of("invoke") if e["op"] == "r1#1")
    assert read_invoke > first_put
    assert report["returned"]["r1#1"] == b"racing".hex() + "00" * 10


def test_ldr_directory_rules():
    d = LdrDirectory("dir1", ["rep1", "rep2", "rep3"], f=1)
    assert d.locations == {"rep1", "rep2", "rep3"}
    d.on_message(Message("w", "dir1", "w#1", Kind.PUT_META, Tag(1, "w"), frozenset({"rep1"})))
    assert d.tag == T0  # too few locations for a newer tag
    d.on_message(Message("w", "dir1", "w#1", Kind.PUT_META, Tag(1, "w"), frozenset({"rep1", "rep2"})))
    d.on_message(Message("r", "dir1", "r#1", Kind.PUT_META, Tag(1, "w"), frozenset({"rep3"})))
    assert d.tag == Tag(1, "w") and d.locations == {"rep1", "rep2", "rep3"}


def test_ldr_replica_keeps_every_version_and_ignores_missing():
    r = LdrReplica("rep1", bytes(2))
    r.on_message(Message("w", "rep1", "w#1", Kind.PUT, Tag(1, "w"), b"a1"))
    r.on_message(Message("w", "rep1", "w#2", Kind.PUT, Tag(2, "w"), b"a2"))
    assert len(r.versions) == 3
    assert r.on_message(Message("c", "rep1", "c#1", Kind.GET, Tag(9, "x"))) == []


@pytest.mark.parametrize("f,write,read", [(1, 3, 2), (2, 5, 3)])
def test_ldr_costs(f, write, read):
    led = ledger(run(make_config("ldr", f=f)))
    assert (led.write_sup, led.read_sup) == (write, read)


def test_ldr_storage_never_shrinks():
    _, trace = run_scenario("ldr_growth")
    series = [total for _, total in ledger(trace).storage]
    assert all(a <= b for a, b in zip(series, series[1:]))
    assert series[-1] == 3 + 20 * 3


def test_baselines_are_atomic_with_crashes():
    for name in ("abd_crash", "ldr_crash"):
        report, trace = run_scenario(name)
        assert check_atomicity(trace).atomic and report["ok"]

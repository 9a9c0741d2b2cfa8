import pytest

from codedmem.errors import TraceIntegrityError
from codedmem.harness import random_config, run_scenario
from codedmem.sim import enforce_fairness, matches, run
from codedmem.trace import ExecutionTrace
from conftest import make_config


def test_same_seed_same_trace():
    cfg = make_config(scheduler={"mode": "seeded_random", "seed": 42})
    assert run(cfg).to_jsonl() == run(cfg).to_jsonl()


def test_seeds_change_schedules():
    template = make_config()
    cfgs = [random_config(template, 5).with_seed(s) for s in range(5)]
    assert len({run(c).to_jsonl() for c in cfgs}) > 1


@pytest.mark.parametrize("protocol", ["cas", "casgc", "ccoas", "abd", "ldr"])
def test_causality_and_single_delivery(protocol):
    trace = run(random_config(make_config(protocol), 3))
    seqs = [e["seq"] for e in trace.events]
    assert seqs == sorted(set(seqs))
    sent = {e["msg"]: e["seq"] for e in trace.of("send")}
    delivered = [e for e in trace.events if e["event"] in ("deliver", "drop")]
    assert len({e["msg"] for e in delivered}) == len(delivered)
    assert all(e["seq"] > sent[e["msg"]] for e in delivered)


def test_write_terminates_with_one_prewrite_withheld():
    report, trace = run_scenario("cas_pending_prewrites")
    assert "w1#1" in report["responded"]
    assert len(trace.halt["held"]) == 1
    assert not enforce_fairness(trace)


def test_quorum_loss_stalls():
    report, trace = run_scenario("cas_quorum_loss")
    assert trace.halt["reason"] == "stalled" and trace.halt["pending_ops"] == ["w1#1"]


def test_crashed_server_drops_messages():
    cfg = make_config(failures={"servers": {"s2": 0}})
    trace = run(cfg)
    dropped = trace.of("drop")
    assert dropped and all(e["dst"] == "s2" for e in dropped)
    assert not [e for e in trace.of("send") if e["src"] == "s2"]
    assert [e["op"] for e in trace.of("respond")] == ["w1#1", "r1#1"]


def test_client_crash_keeps_sent_messages_in_flight():
    cfg = make_config(
        ops=[{"client": "w1", "kind": "write", "value": "x", "at": 0}],
        failures={"clients": {"w1": {"after": {"event": "send", "kind": "pre_write", "dst": "s5"}}}},
    )
    trace = run(cfg)
    [crash] = trace.of("crash")
    assert crash["op"] == "w1#1"
    late = [e for e in trace.of("deliver") if e["kind"] == "pre_write" and e["seq"] > crash["seq"]]
    assert len(late) == 5
    assert trace.halt["reason"] == "complete"


def test_fairness_by_mode():
    assert enforce_fairness(run(make_config()))
    assert enforce_fairness(run(make_config(scheduler={"mode": "seeded_random", "seed": 9})))
    held = make_config(scheduler={"mode": "scripted", "script": [{"hold": {"kind": "gossip"}, "skip": 3}]})
    assert not enforce_fairness(run(held))


def test_step_budget_is_flagged():
    trace = run(make_config(step_budget=10))
    assert trace.halt["reason"] == "budget" and trace.halt["steps"] == 10


def test_late_step_triggers_fire_after_quiescence():
    cfg = make_config(ops=[{"client": "w1", "kind": "write", "value": "a", "at": 0},
                           {"client": "r1", "kind": "read", "at": 5000}])
    trace = run(cfg)
    assert [e["op"] for e in trace.of("respond")] == ["w1#1", "r1#1"]


def test_quiescence_release():
    cfg = make_config(scheduler={"mode": "scripted", "script": [
        {"hold": {"kind": "finalize_write_ack", "src": "s1"}, "release": "quiescence"}]})
    trace = run(cfg)
    assert trace.of("release") and enforce_fairness(trace)


def test_matcher_count():
    assert matches({"event": "deliver", "kind": "put", "count": 3}, {"event": "deliver", "kind": "put"})
    assert not matches({"event": "deliver", "kind": "get"}, {"event": "deliver", "kind": "put"})


def test_trace_roundtrip(tmp_path):
    trace = run(make_config())
    path = tmp_path / "t.jsonl"
    trace.write(path)
    again = ExecutionTrace.read(path)
    assert again.events == trace.events and again.config == trace.config
    assert again.to_jsonl() == trace.to_jsonl()


def test_malformed_traces():
    with pytest.raises(TraceIntegrityError):
        ExecutionTrace.from_jsonl("")
    with pytest.raises(TraceIntegrityError):
        ExecutionTrace.from_jsonl('{"event": "send", "seq": 1}')
    with pytest.raises(TraceIntegrityError):
        ExecutionTrace.from_jsonl('{"event":"config","seq":0,"config":{}}\n{"event":"a","seq":2}\n{"event":"b","seq":2}')

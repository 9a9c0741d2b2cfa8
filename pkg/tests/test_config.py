import json

import pytest

from codedmem.config import ScenarioConfig
from codedmem.errors import ConfigError
from conftest import make_config


def test_defaults_and_roundtrip():
    cfg = make_config()
    assert cfg.mode == "fair_round_robin" and cfg.seed == 0
    assert cfg.ops[0].value == b"hello" + bytes(11)
    again = ScenarioConfig.from_dict(json.loads(json.dumps(cfg.to_dict())))
    assert again.to_dict() == cfg.to_dict()


def test_quorum_thresholds():
    assert make_config("cas").quorum_threshold() == 4
    assert make_config("ccoas").quorum_threshold() == 4
    assert make_config("abd").quorum_threshold() == 3
    assert make_config("ccoas").code_k == 4
    assert make_config("ldr").server_ids() == [f"dir{i}" for i in range(1, 6)] + ["rep1", "rep2", "rep3"]


@pytest.mark.parametrize(
    "overrides,field",
    [
        ({"k": 4}, "k"),
        ({"k": 5}, "k"),
        ({"f": 3}, "f"),
        ({"protocol": "paxos"}, "protocol"),
        ({"n": 300, "f": 1}, "n"),
        ({"clients": ["w1", "w1"]}, "clients"),
        ({"clients": ["s1", "r1"]}, "clients"),
        ({"clients": ["a#b", "w1", "r1"]}, "clients"),
        ({"scheduler": {"mode": "chaos"}}, "scheduler.mode"),
        ({"failures": {"servers": {"s9": 3}}}, "failures.servers"),
        ({"failures": {"clients": {"w1": -1}}}, "failures.clients.w1"),
        ({"step_budget": 0}, "step_budget"),
    ],
)
def test_field_level_errors(overrides, field):
    with pytest.raises(ConfigError) as info:
        make_config(**overrides)
    assert info.value.field == field


def test_bound_message_is_explicit():
    with pytest.raises(ConfigError, match=r"k=4 violates the quorum bound 1 <= k <= n - 2f = 3"):
        make_config(k=4)


def test_protocol_specific_fields():
    with pytest.raises(ConfigError):
        make_config("ccoas", k=3)
    with pytest.raises(ConfigError):
        make_config("ccoas", f=0)
    with pytest.raises(ConfigError):
        make_config("casgc", delta=-1)
    with pytest.raises(ConfigError):
        make_config("abd", delta=1)
    with pytest.raises(ConfigError):
        make_config("ldr", replica_count=2)


def test_op_errors():
    with pytest.raises(ConfigError, match="ops\\[0\\].client"):
        make_config(ops=[{"client": "zz", "kind": "read"}])
    with pytest.raises(ConfigError, match="ops\\[0\\].kind"):
        make_config(ops=[{"client": "w1", "kind": "cas"}])
    with pytest.raises(ConfigError, match="value"):
        make_config(ops=[{"client": "w1", "kind": "write"}])
    with pytest.raises(ConfigError, match="value_length"):
        make_config(ops=[{"client": "w1", "kind": "write", "value": "x" * 17}])
    with pytest.raises(ConfigError, match="event"):
        make_config(ops=[{"client": "w1", "kind": "read", "at": {"after": {"op": "w1#1"}}}])


def test_script_validation():
    with pytest.raises(ConfigError):
        make_config(scheduler={"mode": "scripted", "script": [{"release": "never"}]})
    with pytest.raises(ConfigError):
        make_config(scheduler={"mode": "scripted", "script": [{"hold": {}, "release": "later"}]})


def test_load_reports_bad_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    with pytest.raises(ConfigError):
        ScenarioConfig.load(path)

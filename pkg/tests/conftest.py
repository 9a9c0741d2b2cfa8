import pytest

from codedmem.config import ScenarioConfig


def make_config(protocol="cas", ops=None, **kw):
    data = {"protocol": protocol, "n": 5, "f": 1, "clients": ["w1", "r1"]}
    if protocol in ("cas", "casgc"):
        data["k"] = 3
    if protocol == "casgc":
        data["delta"] = 1
    data["ops"] = ops if ops is not None else [
        {"client": "w1", "kind": "write", "value": "hello", "at": 0},
        {"client": "r1", "kind": "read", "at": {"after": {"event": "respond", "op": "w1#1"}}},
    ]
    data.update(kw)
    return ScenarioConfig.from_dict(data)


@pytest.fixture
def config():
    return make_config

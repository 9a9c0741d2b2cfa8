"""Scenario configuration: parsing, defaults and validation.

A scenario is a JSON document::

    {
      "id": "cas_basic",
      "protocol": "cas",            # cas | casgc | ccoas | abd | ldr
      "n": 5, "f": 1, "k": 3,       # k only for cas/casgc
      "delta": 1,                   # casgc only
      "directory_count": 5,         # ldr only (defaults to n)
      "replica_count": 3,           # ldr only (defaults to 2f+1)
      "value_length": 16,
      "clients": ["w1", "r1"],
      "ops": [{"client": "w1", "kind": "write", "value": "hello", "at": 0}, ...],
      "failures": {"servers": {"s1": 40}, "clients": {}},
      "scheduler": {"mode": "seeded_random", "seed": 7, "script": [...]},
      "step_budget": 1000000,
      "expect": {...}
    }

``at`` and failure entries are *triggers*: either a scheduler step number
or ``{"after": <event matcher>}``. See :mod:`codedmem.sim` for matcher and
script semantics.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .errors import ConfigError

PROTOCOLS = ("cas", "casgc", "ccoas", "abd", "ldr")
MODES = ("seeded_random", "scripted", "fair_round_robin")
DEFAULT_STEP_BUDGET = 10**6
MAX_N = 255


@dataclass
class OpSpec:
    client: str
    kind: str
    value: bytes | None = None
    at: Any = 0

    def to_dict(self):
        out = {"client": self.client, "kind": self.kind, "at": self.at}
        if self.value is not None:
            out["value_hex"] = self.value.hex()
        return out


@dataclass
class ScenarioConfig:
    protocol: str
    n: int
    f: int
    clients: list[str]
    ops: list[OpSpec]
    k: int | None = None
    delta: int | None = None
    directory_count: int | None = None
    replica_count: int | None = None
    value_length: int = 16
    failures: dict = field(default_factory=lambda: {"servers": {}, "clients": {}})
    scheduler: dict = field(default_factory=lambda: {"mode": "fair_round_robin", "seed": 0})
    step_budget: int = DEFAULT_STEP_BUDGET
    id: str = "scenario"
    expect: dict = field(default_factory=dict)

    @property
    def seed(self):
        return self.scheduler.get("seed", 0)

    @property
    def mode(self):
        return self.scheduler.get("mode", "fair_round_robin")

    @property
    def code_k(self) -> int | None:
        """Decode threshold of the erasure code in use, if any."""
        if self.protocol in ("cas", "casgc"):
            return self.k
        if self.protocol == "ccoas":
            return self.n - self.f
        return None

    def server_ids(self) -> list[str]:
        if self.protocol == "ldr":
            return [f"dir{i}" for i in range(1, self.directory_count + 1)] + [
                f"rep{i}" for i in range(1, self.replica_count + 1)
            ]
        return [f"s{i}" for i in range(1, self.n + 1)]

    def quorum_threshold(self) -> int:
        if self.protocol in ("cas", "casgc"):
            return -(-(self.n + self.k) // 2)
        if self.protocol == "ccoas":
            return self.n - self.f
        if self.protocol == "abd":
            return self.n // 2 + 1
        return self.directory_count // 2 + 1

    def with_seed(self, seed) -> "ScenarioConfig":
        cfg = copy.deepcopy(self)
        cfg.scheduler = dict(cfg.scheduler, seed=seed)
        return cfg

    def to_dict(self) -> dict:
        out = {
            "id": self.id,
            "protocol": self.protocol,
            "n": self.n,
            "f": self.f,
            "value_length": self.value_length,
            "clients": list(self.clients),
            "ops": [op.to_dict() for op in self.ops],
            "failures": self.failures,
            "scheduler": self.scheduler,
            "step_budget": self.step_budget,
        }
        for name in ("k", "delta", "directory_count", "replica_count"):
            if getattr(self, name) is not None:
                out[name] = getattr(self, name)
        if self.expect:
            out["expect"] = self.expect
        return out

    @classmethod
    def from_dict(cls, data: dict, default_id="scenario") -> "ScenarioConfig":
        return _parse(data, default_id)

    @classmethod
    def load(cls, path) -> "ScenarioConfig":
        path = Path(path)
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"not valid JSON: {exc}", str(path)) from None
        return _parse(data, path.stem)


def _int(data, name, default=None, minimum=None):
    value = data.get(name, default)
    if value is None:
        return None
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"must be an integer, got {value!r}", name)
    if minimum is not None and value < minimum:
        raise ConfigError(f"must be >= {minimum}, got {value}", name)
    return value


def _check_trigger(trigger, where):
    if isinstance(trigger, bool):
        raise ConfigError("trigger must be a step number or {'after': matcher}", where)
    if isinstance(trigger, int):
        if trigger < 0:
            raise ConfigError("step trigger must be >= 0", where)
        return
    if isinstance(trigger, dict) and isinstance(trigger.get("after"), dict):
        if "event" not in trigger["after"]:
            raise ConfigError("event matcher needs an 'event' key", where)
        return
    raise ConfigError("trigger must be a step number or {'after': matcher}", where)


def encode_value(op: dict, length: int, where: str) -> bytes:
    if "value_hex" in op:
        raw = bytes.fromhex(op["value_hex"])
    elif "value" in op:
        raw = str(op["value"]).encode()
    else:
        raise ConfigError("write needs a 'value' or 'value_hex'", where)
    if len(raw) > length:
        raise ConfigError(f"value is {len(raw)} bytes, value_length is {length}", where)
    return raw + b"\x00" * (length - len(raw))


def _parse(data: dict, default_id: str) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("scenario must be a JSON object")
    protocol = data.get("protocol")
    if protocol not in PROTOCOLS:
        raise ConfigError(f"must be one of {', '.join(PROTOCOLS)}, got {protocol!r}", "protocol")
    f = _int(data, "f", 0, minimum=0)
    n = _int(data, "n", None if protocol != "ldr" else data.get("directory_count"), minimum=1)
    if n is None:
        raise ConfigError("required", "n")
    if n > MAX_N:
        raise ConfigError(f"at most {MAX_N} servers supported", "n")
    if n <= 2 * f:
        raise ConfigError(f"need n > 2f, got n={n}, f={f}", "f")

    k = data.get("k")
    delta = data.get("delta")
    directory_count = replica_count = None
    if protocol in ("cas", "casgc"):
        k = _int(data, "k", minimum=1)
        if k is None:
            raise ConfigError("required for coded protocols", "k")
        if k > n - 2 * f:
            raise ConfigError(f"k={k} violates the quorum bound 1 <= k <= n - 2f = {n - 2 * f}", "k")
        if k >= n:
            raise ConfigError(f"need k < n for an (n, k) code, got k={k}", "k")
    elif protocol == "ccoas":
        if k is not None:
            raise ConfigError("ccoas fixes k = n - f; do not supply k", "k")
        if f < 1:
            raise ConfigError("ccoas needs f >= 1 so that its (n, n-f) code has k < n", "f")
    elif k is not None:
        raise ConfigError(f"not used by {protocol}", "k")
    if protocol == "casgc":
        delta = _int(data, "delta", minimum=0)
        if delta is None:
            raise ConfigError("required for casgc", "delta")
    elif delta is not None:
        raise ConfigError(f"not used by {protocol}", "delta")
    if protocol == "ldr":
        directory_count = _int(data, "directory_count", n, minimum=1)
        replica_count = _int(data, "replica_count", 2 * f + 1, minimum=1)
        if replica_count < 2 * f + 1:
            raise ConfigError(f"need at least 2f+1 = {2 * f + 1} replicas", "replica_count")
    else:
        for name in ("directory_count", "replica_count"):
            if name in data:
                raise ConfigError(f"not used by {protocol}", name)

    value_length = _int(data, "value_length", 16, minimum=1)
    step_budget = _int(data, "step_budget", DEFAULT_STEP_BUDGET, minimum=1)

    clients = data.get("clients")
    if not isinstance(clients, list) or not all(isinstance(c, str) and c for c in clients):
        raise ConfigError("must be a list of non-empty strings", "clients")
    if len(set(clients)) != len(clients):
        raise ConfigError("duplicate client id", "clients")
    cfg = ScenarioConfig(protocol=protocol, n=n, f=f, clients=list(clients), ops=[],
                         k=k, delta=delta, directory_count=directory_count,
                         replica_count=replica_count)
    servers = set(cfg.server_ids())
    for c in clients:
        if "#" in c:
            raise ConfigError(f"client id {c!r} may not contain '#'", "clients")
        if c in servers:
            raise ConfigError(f"client id {c!r} collides with a server id", "clients")

    ops = []
    raw_ops = data.get("ops", [])
    if not isinstance(raw_ops, list):
        raise ConfigError("must be a list", "ops")
    for i, op in enumerate(raw_ops):
        where = f"ops[{i}]"
        if not isinstance(op, dict):
            raise ConfigError("must be an object", where)
        if op.get("client") not in clients:
            raise ConfigError(f"unknown client {op.get('client')!r}", where + ".client")
        kind = op.get("kind")
        if kind not in ("read", "write"):
            raise ConfigError(f"kind must be 'read' or 'write', got {kind!r}", where + ".kind")
        value = encode_value(op, value_length, where) if kind == "write" else None
        at = op.get("at", 0)
        _check_trigger(at, where + ".at")
        ops.append(OpSpec(op["client"], kind, value, at))

    failures = data.get("failures", {}) or {}
    failures = {"servers": dict(failures.get("servers", {})), "clients": dict(failures.get("clients", {}))}
    for node, trig in failures["servers"].items():
        if node not in servers:
            raise ConfigError(f"unknown server {node!r}", "failures.servers")
        _check_trigger(trig, f"failures.servers.{node}")
    for node, trig in failures["clients"].items():
        if node not in clients:
            raise ConfigError(f"unknown client {node!r}", "failures.clients")
        _check_trigger(trig, f"failures.clients.{node}")

    scheduler = dict(data.get("scheduler", {}) or {})
    scheduler.setdefault("mode", "fair_round_robin")
    scheduler.setdefault("seed", 0)
    if scheduler["mode"] not in MODES:
        raise ConfigError(f"must be one of {', '.join(MODES)}", "scheduler.mode")
    script = scheduler.get("script", [])
    if not isinstance(script, list):
        raise ConfigError("must be a list of directives", "scheduler.script")
    for i, directive in enumerate(script):
        where = f"scheduler.script[{i}]"
        if not isinstance(directive, dict) or not isinstance(directive.get("hold"), dict):
            raise ConfigError("directive needs a 'hold' message matcher", where)
        release = directive.get("release", "never" if directive.get("until") is None else "until")
        if release not in ("never", "quiescence", "until"):
            raise ConfigError("release must be 'never', 'quiescence' or 'until'", where)
        if directive.get("until") is not None and not isinstance(directive["until"], dict):
            raise ConfigError("until must be an event matcher", where)

    cfg.ops = ops
    cfg.value_length = value_length
    cfg.failures = failures
    cfg.scheduler = scheduler
    cfg.step_budget = step_budget
    cfg.id = str(data.get("id", default_id))
    cfg.expect = dict(data.get("expect", {}) or {})
    return cfg

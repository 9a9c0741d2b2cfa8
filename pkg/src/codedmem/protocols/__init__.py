"""Protocol registry: maps a scenario's ``protocol`` field to node factories."""

from __future__ import annotations

from . import baselines, cas, casgc, ccoas

BUILDERS = {
    "cas": cas.build,
    "casgc": casgc.build,
    "ccoas": ccoas.build,
    "abd": baselines.build_abd,
    "ldr": baselines.build_ldr,
}


def build(config):
    """Return ``(servers, make_client)`` for ``config``.

    ``servers`` maps server id to node; ``make_client(id)`` creates a client.
    """
    return BUILDERS[config.protocol](config)

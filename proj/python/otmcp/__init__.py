"""Python bindings for the otmcp adapters, mocks and benchmark tooling."""

import json
import os
import shutil

from . import _core
from ._core import (
    ModbusMock,
    MqttMock,
    OtmcpError,
    UaMock,
    aggregate,
    canonical_node_id,
    t_critical_975,
    topic_matches,
    validate_envelope as _validate_envelope,
)

__all__ = [
    "ModbusMock",
    "MqttMock",
    "OtmcpError",
    "UaMock",
    "aggregate",
    "binary",
    "canonical_node_id",
    "decode_sparkplug",
    "encode_sparkplug",
    "evaluate_oracle",
    "load_plan",
    "render_report",
    "t_critical_975",
    "topic_matches",
    "validate_envelope",
    "verify",
]


def encode_sparkplug(payload: dict) -> bytes:
    return _core.encode_sparkplug(json.dumps(payload))


def decode_sparkplug(data: bytes) -> dict:
    return json.loads(_core.decode_sparkplug(data))


def validate_envelope(envelope: dict) -> list:
    return _validate_envelope(json.dumps(envelope))


def load_plan() -> list:
    return json.loads(_core.plan_json())


def evaluate_oracle(record: dict) -> tuple:
    return _core.evaluate_oracle(json.dumps(record))


def verify(artifact_dir) -> list:
    return [
        {"id": i, "name": n, "pass": p, "detail": d}
        for i, n, p, d in _core.verify(os.fspath(artifact_dir))
    ]


def render_report(artifact_dir) -> dict:
    return _core.render_report(os.fspath(artifact_dir))


def binary() -> str:
    """Path of the otmcp command line tool, or None when it is not on PATH."""
    return os.environ.get("OTMCP_BINARY") or shutil.which("otmcp")

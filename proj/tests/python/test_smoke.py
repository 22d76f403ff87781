import json
import os
import subprocess

import pytest

import otmcp


def test_node_ids_are_canonicalised():
    assert otmcp.canonical_node_id("ns=2;s=temperature") == "ns=2;s=temperature"
    assert otmcp.canonical_node_id("i=2256") == "ns=0;i=2256"
    with pytest.raises(otmcp.OtmcpError, match="invalid_input"):
        otmcp.canonical_node_id("ns=2;x=1")


def test_topic_matching():
    assert otmcp.topic_matches("sensors/#", "sensors/line1/temp")
    assert otmcp.topic_matches("sensors/+/temp", "sensors/line1/temp")
    assert not otmcp.topic_matches("sensors/+", "sensors/line1/temp")


def test_sparkplug_round_trip():
    payload = {
        "timestamp": 1700000000000,
        "seq": 3,
        "metrics": [
            {"name": "temperature", "datatype": "Double", "value": 21.5},
            {"name": "running", "datatype": "Boolean", "value": True},
        ],
    }
    decoded = otmcp.decode_sparkplug(otmcp.encode_sparkplug(payload))
    assert decoded["seq"] == 3
    assert decoded["timestamp"] == 1700000000000
    assert [(m["name"], m["datatype"], m["value"]) for m in decoded["metrics"]] == [
        ("temperature", "Double", 21.5),
        ("running", "Boolean", True),
    ]


def test_statistics_match_reference():
    s = otmcp.aggregate([1, 2, 3, 4, 5])
    assert s["mean"] == 3
    assert s["std"] == pytest.approx(1.5811388, abs=1e-6)
    assert (s["ci95_lo"], s["ci95_hi"]) == pytest.approx((1.0367, 4.9633), abs=1e-3)
    assert otmcp.aggregate(list(range(1, 31)))["p95"] == 29
    assert otmcp.t_critical_975(9) == pytest.approx(2.262, abs=1e-3)


def test_plan_has_870_runs():
    plan = otmcp.load_plan()
    assert len(plan) == 38
    assert sum(t["repetitions"] for t in plan) == 870


def test_envelope_validation():
    good = {
        "success": True,
        "data": {"x": 1},
        "error": None,
        "meta": {"latency_ms": 0.5, "endpoint": "127.0.0.1:1502", "attempts": 1, "protocol": "modbus", "trace": {}},
    }
    assert otmcp.validate_envelope(good) == []
    assert otmcp.validate_envelope({"success": True}) != []


def test_oracle_on_synthetic_record():
    env = {
        "success": False,
        "data": None,
        "error": {"class": "range_overflow", "message": "m", "details": {}},
        "meta": {"latency_ms": 0.1, "endpoint": "e", "attempts": 1, "protocol": "modbus", "trace": {}},
    }
    call = {"tool": "write_register", "expect": "range_overflow", "envelope": env}
    assert otmcp.evaluate_oracle({"task_id": "FM2", "repetition": 1, "calls": [call]}) == (True, "")
    call["expect"] = "success"
    ok, reason = otmcp.evaluate_oracle({"task_id": "FM2", "repetition": 1, "calls": [call]})
    assert not ok and "range_overflow" in reason


def _mcp(binary, family, env, requests):
    lines = "".join(json.dumps(r) + "\n" for r in requests)
    out = subprocess.run(
        [binary, "adapter", family],
        input=lines,
        capture_output=True,
        text=True,
        timeout=20,
        env={**os.environ, **env},
    ).stdout
    return {m["id"]: m for m in map(json.loads, out.splitlines()) if "id" in m}


@pytest.mark.skipif(otmcp.binary() is None, reason="otmcp command line tool not found")
def test_in_process_mock_serves_stdio_adapter():
    mock = otmcp.ModbusMock(simulate=False)
    mock.start()
    try:
        replies = _mcp(
            otmcp.binary(),
            "modbus",
            {"MODBUS_HOST": "127.0.0.1", "MODBUS_PORT": str(mock.port)},
            [
                {"jsonrpc": "2.0", "id": 1, "method": "initialize", "params": {}},
                {"jsonrpc": "2.0", "id": 2, "method": "tools/list", "params": {}},
                {
                    "jsonrpc": "2.0",
                    "id": 3,
                    "method": "tools/call",
                    "params": {"name": "read_input_registers", "arguments": {"address": 0, "count": 4}},
                },
            ],
        )
    finally:
        mock.stop()
    assert len(replies[2]["result"]["tools"]) == 20
    envelope = json.loads(replies[3]["result"]["content"][0]["text"])
    assert envelope["success"] and len(envelope["data"]["values"]) == 4
    assert envelope["meta"]["protocol"] == "modbus"


def test_mocks_bind_ephemeral_ports():
    for cls in (otmcp.MqttMock, otmcp.UaMock):
        m = cls(simulate=False)
        m.start()
        assert m.port > 0
        m.stop()

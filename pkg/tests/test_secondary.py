"""Cross-language conformance: the external rational adapter registered over
TCP answers delegated arithmetic exactly like the reference codecs.

Skipped when the adapter build (or node) is absent; the rest of the suite
never depends on it.
"""

import json
import shutil
import subprocess
import time
from pathlib import Path

import pytest

from mitm.broker import WireClient, serve

ADAPTER = Path(__file__).resolve().parent.parent / "adapter" / "dist" / "cli.js"

pytestmark = pytest.mark.skipif(
    shutil.which("node") is None or not ADAPTER.exists(),
    reason="external adapter not built")


@pytest.fixture
def stack():
    server = serve()
    proc = subprocess.Popen(
        ["node", str(ADAPTER), "--port", str(server.port)],
        stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL)
    try:
        deadline = time.monotonic() + 10
        while "fracsys" not in server.broker.systems:
            assert time.monotonic() < deadline, "adapter never registered"
            time.sleep(0.05)
        yield server
    finally:
        proc.terminate()
        proc.wait(timeout=5)
        server.shutdown()
        server.server_close()


def test_delegated_rational_addition(stack):
    start = time.perf_counter()
    client = WireClient("127.0.0.1", stack.port)
    try:
        a = client.request("delegate", core="mitm:field?rat",
                           args=[{"expr": {"int": "2"}},
                                 {"expr": {"int": "3"}}])
        assert a["ok"]["handle"]["system"] == "fracsys"
        b = client.request("delegate", core="mitm:field?rat",
                           args=[{"expr": {"int": "1"}},
                                 {"expr": {"int": "6"}}])
        total = client.request(
            "delegate", core="mitm:field?plus",
            args=[{"handle": a["ok"]["handle"]["token"]},
                  {"handle": b["ok"]["handle"]["token"]}])
        fetched = client.request("fetch",
                                 handle=total["ok"]["handle"]["token"],
                                 codec="rational-as-tuple-of-int")
        assert fetched["ok"]["data"] == [5, 6]
    finally:
        client.close()
    assert time.perf_counter() - start < 10


def test_adapter_error_codes_over_wire(stack):
    client = WireClient("127.0.0.1", stack.port)
    try:
        a = client.request("delegate", core="mitm:field?rat",
                           args=[{"expr": {"int": "1"}},
                                 {"expr": {"int": "2"}}])
        token = a["ok"]["handle"]["token"]
        client.request("release", handle=token)
        resp = client.request("fetch", handle=token,
                              codec="rational-as-tuple-of-int")
        assert resp["err"]["code"] == "stale-handle"
    finally:
        client.close()


def test_adapter_codec_agreement_against_reference(stack):
    """The committed golden cases are re-checked by the reference codecs, so
    both sides answer to the same file."""
    from mitm.codec import default_registry
    reg = default_registry()
    cexpr = reg.parse("rational-as-tuple-of-int")
    cases = json.loads((ADAPTER.parent.parent /
                        "test" / "fixtures" / "codec_cases.json").read_text())
    assert len(cases) >= 1000
    for case in cases:
        assert reg.encode(cexpr, reg.decode(cexpr, case["raw"])) == \
            case["canonical"]

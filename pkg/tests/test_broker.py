"""Broker: alignment construction, delegation routing, handle hygiene,
cross-system transfer, and the newline-delimited JSON wire protocol."""

import json
import socket
import threading
from fractions import Fraction

import pytest

from mitm import ontology
from mitm.broker import (Broker, BrokerServer, DuplicateSystem, Transport,
                         WireClient, build_alignments, default_broker,
                         default_graph, run_script, serve)
from mitm.errors import (AmbiguousAlignment, AmbiguousTarget, ArityMismatch,
                         CodecMismatch, NoAlignment, StaleHandle,
                         UnknownSymbol, UnknownSystem)
from mitm.graph import TheoryGraph, load_graph
from mitm.systems import SetSystem
from mitm.terms import IntLit, ListLit, Sym, parse_uri

from conftest import load_fixture


def u(text):
    return parse_uri(text)


def int_list(xs):
    return ListLit(tuple(IntLit(x) for x in xs))


@pytest.fixture
def broker():
    return default_broker()


@pytest.fixture
def session(broker):
    sid = broker.open_session()
    yield broker, sid
    broker.close_session(sid)


# --- alignment construction -------------------------------------------------

def test_alignments_cover_core_symbols(broker):
    a = broker.alignments[u("mitm:card?card")]
    assert a.per_system == {"setsys": u("mitm:sagelike?cardinality"),
                            "permsys": u("mitm:gaplike?Size")}
    assert broker.alignments[u("mitm:perms?order")].per_system == \
        {"permsys": u("mitm:gaplike?ElementOrder")}
    # uncovered core symbols still have (empty) entries, never fabricated ones
    assert broker.alignments[u("mitm:poly?poly")].per_system == {}


class NullTransport(Transport):
    def call(self, op, args):
        raise AssertionError("never called")

    def encode(self, token, cexpr, registry):
        raise AssertionError("never called")

    def release(self, token):
        pass


def synthetic_graph(k: int) -> TheoryGraph:
    """One core theory with two constants and k interface theories, each
    reached by one interview."""
    s = {"sym": "syn:core?s"}
    doc = {"graph": "syn", "theories": [
        {"name": "core", "kind": "core", "constants": [
            {"name": "s", "role": "sort"},
            {"name": "f", "role": "function", "args": [s], "result": s}]}],
        "views": []}
    for i in range(k):
        doc["theories"].append({"name": f"iface{i}", "kind": "interface",
                                "constants": [
            {"name": "t", "role": "sort"},
            {"name": "g", "role": "function",
             "args": [{"sym": f"syn:iface{i}?t"}],
             "result": {"sym": f"syn:iface{i}?t"}}]})
        doc["views"].append({"name": f"iv{i}", "source": "core",
                             "target": f"iface{i}", "kind": "interview",
                             "assignments": {
                                 "s": {"sym": f"syn:iface{i}?t"},
                                 "f": {"sym": f"syn:iface{i}?g"}}})
    return load_graph(doc)


@pytest.mark.parametrize("k", [2, 3, 4])
def test_routing_table_scales_linearly(k):
    g = synthetic_graph(k)
    b = Broker(g)
    for i in range(k):
        b.register_system(f"sys{i}", f"iface{i}", NullTransport())
    # exactly one alignment per core symbol, one entry per (symbol, system)
    assert len(b.alignments) == 2
    total = sum(len(a.per_system) for a in b.alignments.values())
    assert total == 2 * k


def test_conflicting_interviews_rejected():
    doc = load_fixture("mitm.json")
    # a second interview mapping card to a different target symbol
    doc["views"].append({
        "name": "iv-sage-card-2", "source": "card", "target": "sagelike",
        "kind": "interview", "assignments": {
            "set": {"sym": "mitm:sagelike?set"},
            "card": {"sym": "mitm:sagelike?union"}}})
    b = Broker(load_graph(doc))
    with pytest.raises(AmbiguousAlignment):
        b.register_toy(SetSystem())


def test_duplicate_system_rejected(broker):
    with pytest.raises(DuplicateSystem):
        broker.register_toy(SetSystem())


# --- delegation -------------------------------------------------------------

def test_dispatch_invariance_across_systems(session):
    b, sid = session
    s = b.call(sid, "setsys", "mkset", [int_list([1, 2, 3])])
    p = b.call(sid, "permsys", "PermList", [int_list([2, 3, 1])])
    g = b.call(sid, "permsys", "GroupByGenerators", [p])
    via_set = b.delegate(sid, None, u("mitm:card?card"), [s])
    via_group = b.delegate(sid, None, u("mitm:card?card"), [g])
    assert via_set == via_group == IntLit(3)
    # the delegated route answers exactly what a direct call answers
    assert via_set == b.call(sid, "setsys", "cardinality", [s])
    assert via_group == b.call(sid, "permsys", "Size", [g])


def test_delegate_routes_to_handle_owner(session):
    b, sid = session
    p = b.call(sid, "permsys", "PermList", [int_list([2, 1])])
    assert b.delegate(sid, None, u("mitm:perms?order"), [p]) == IntLit(2)


def test_delegate_without_handle_needs_unique_coverage(session):
    b, sid = session
    # card?card is covered by both systems: ambiguous without a handle
    with pytest.raises(AmbiguousTarget):
        b.delegate(sid, None, u("mitm:card?card"), [int_list([1])])
    # perm construction is covered by permsys only: unambiguous
    h = b.delegate(sid, None, u("mitm:perms?perm_images"),
                   [int_list([2, 3, 1])])
    assert h.system == "permsys"


def test_delegate_uncovered_symbol_is_no_alignment(session):
    b, sid = session
    with pytest.raises(NoAlignment):
        b.delegate(sid, None, u("mitm:poly?poly"), [int_list([1])])


def test_interview_deletion_flips_to_no_alignment():
    doc = load_fixture("mitm.json")
    for v in doc["views"]:
        if v["name"] == "iv-sage-card":
            del v["assignments"]["card"]
    b = default_broker(load_graph(doc))
    sid = b.open_session()
    s = b.call(sid, "setsys", "mkset", [int_list([1, 2, 3])])
    with pytest.raises(NoAlignment):
        b.delegate(sid, None, u("mitm:card?card"), [s])


def test_call_validates_symbol_and_arity(session):
    b, sid = session
    with pytest.raises(UnknownSystem):
        b.call(sid, "nosys", "mkset", [])
    with pytest.raises(UnknownSymbol):
        b.call(sid, "setsys", "determinant", [])
    with pytest.raises(ArityMismatch):
        b.call(sid, "setsys", "mkset", [int_list([1]), int_list([2])])


# --- cross-system transfer by value -----------------------------------------

class SecondSetSystem(SetSystem):
    system_id = "setsys2"


def test_cross_system_argument_transferred(session):
    b, sid = session
    b.register_toy(SecondSetSystem())
    try:
        a = b.call(sid, "setsys", "mkset", [int_list([1, 2])])
        c = b.call(sid, "setsys2", "mkset", [int_list([2, 3])])
        union = b.call(sid, "setsys", "union", [a, c])
        assert union.system == "setsys"
        assert b.fetch(sid, union, b.registry.parse("list(int-literal)")) == \
            [1, 2, 3]
    finally:
        b.unregister_system("setsys2")


def test_cross_system_without_transfer_codec_fails(session):
    b, sid = session
    b.register_toy(SecondSetSystem())
    try:
        p = b.call(sid, "permsys", "GroupByGenerators",
                   [b.call(sid, "permsys", "PermList", [int_list([2, 1])])])
        # groups declare no transfer codec, so they cannot cross systems
        with pytest.raises(CodecMismatch):
            b.call(sid, "setsys2", "cardinality", [p])
    finally:
        b.unregister_system("setsys2")


# --- handles and sessions ---------------------------------------------------

def test_fetch_respects_handle_sort(session):
    b, sid = session
    s = b.call(sid, "setsys", "mkset", [int_list([3, 1])])
    assert b.fetch(sid, s, b.registry.parse("list(int-literal)")) == [1, 3]
    with pytest.raises(CodecMismatch):
        b.fetch(sid, s, b.registry.parse("permutation-as-images"))
    p = b.call(sid, "permsys", "PermList", [int_list([2, 3, 1])])
    assert b.fetch(sid, p, b.registry.parse("permutation-as-images")) == \
        [2, 3, 1]
    assert b.fetch(sid, p, b.registry.parse("permutation-as-cycles")) == \
        [[1, 2, 3]]


def test_release_and_staleness(session):
    b, sid = session
    s = b.call(sid, "setsys", "mkset", [int_list([1])])
    b.release(sid, s)
    with pytest.raises(StaleHandle):
        b.fetch(sid, s, b.registry.parse("list(int-literal)"))
    with pytest.raises(StaleHandle):
        b.release(sid, s)


def test_close_session_releases_everything(broker):
    sid = broker.open_session()
    sets = broker.systems["setsys"].transport.system
    broker.call(sid, "setsys", "mkset", [int_list([1])])
    broker.call(sid, "setsys", "mkset", [int_list([2])])
    assert broker.live_handle_count() == 2
    assert sets.live_count() == 2
    broker.close_session(sid)
    assert broker.live_handle_count() == 0
    assert sets.live_count() == 0


def test_unregister_drops_that_systems_handles(broker):
    broker.register_toy(SecondSetSystem())
    sid = broker.open_session()
    keep = broker.call(sid, "setsys", "mkset", [int_list([1])])
    broker.call(sid, "setsys2", "mkset", [int_list([2])])
    broker.unregister_system("setsys2")
    assert broker.live_handle_count() == 1
    assert broker.fetch(sid, keep, broker.registry.parse("list(int-literal)")) \
        == [1]


# --- wire protocol ----------------------------------------------------------

@pytest.fixture
def server():
    srv = serve()
    yield srv
    srv.shutdown()
    srv.server_close()


def test_golden_transcript(server):
    from conftest import FIXTURE_DIR
    lines = (FIXTURE_DIR / "transcript.jsonl").read_text().splitlines()
    expected = load_fixture("transcript_expected.json")
    assert run_script("127.0.0.1", server.port, lines) == expected


def test_malformed_line_keeps_connection(server):
    client = WireClient("127.0.0.1", server.port)
    try:
        client.sock.sendall(b"this is not json\n")
        resp = json.loads(client.rfile.readline())
        assert resp["err"]["code"] == "malformed"
        # the connection survives and still answers
        assert client.request("hello") == {"id": 1, "ok": {}}
    finally:
        client.close()


def test_unknown_kind_and_domain_errors_over_wire(server):
    client = WireClient("127.0.0.1", server.port)
    try:
        assert client.request("frobnicate")["err"]["code"] == "unknown-kind"
        resp = client.request("call", system="nosys", symbol="x", args=[])
        assert resp["err"]["code"] == "unknown-system"
        resp = client.request("call", system="setsys", symbol="nope", args=[])
        assert resp["err"]["code"] == "unknown-symbol"
        resp = client.request("fetch", handle="h999", codec="int-literal")
        assert resp["err"]["code"] == "stale-handle"
        resp = client.request("delegate", core="mitm:card?card",
                              args=[{"expr": {"list": []}}])
        assert resp["err"]["code"] == "ambiguous-target"
        resp = client.request("call", system="setsys", symbol="mkset", args=[{}])
        assert resp["err"]["code"] == "malformed"
    finally:
        client.close()


def test_sessions_are_per_connection(server):
    c1 = WireClient("127.0.0.1", server.port)
    c2 = WireClient("127.0.0.1", server.port)
    try:
        made = c1.request("call", system="setsys", symbol="mkset",
                          args=[{"expr": {"list": [{"int": "1"}]}}])
        token = made["ok"]["handle"]["token"]
        # a different connection can read the handle while it lives
        assert c2.request("fetch", handle=token,
                          codec="list(int-literal)")["ok"]["data"] == [1]
        c1.close()
    finally:
        c2.close()


# --- a remote provider over the same protocol -------------------------------

class FracProvider(threading.Thread):
    """Minimal provider: rationals as Fractions behind opaque tokens."""

    def __init__(self, port):
        super().__init__(daemon=True)
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=10)
        self.rfile = self.sock.makefile("r")
        self.objects = {}
        self.counter = 0
        self.ready = threading.Event()

    def send(self, msg):
        self.sock.sendall((json.dumps(msg) + "\n").encode())

    def _frac(self, wire_arg):
        if "handle" in wire_arg:
            return self.objects[wire_arg["handle"]]
        body = wire_arg["expr"]
        if "int" in body:
            return Fraction(int(body["int"]))
        num, den = body["app"][1]["int"], body["app"][2]["int"]
        return Fraction(int(num), int(den))

    def _wrap(self, frac):
        self.counter += 1
        token = f"f{self.counter}"
        self.objects[token] = frac
        return {"handle": {"token": token, "system": "fracsys",
                           "type": "mitm:field?rational"}}

    def run(self):
        self.send({"id": 0, "kind": "hello", "system": "fracsys",
                   "theory": "fraclike"})
        json.loads(self.rfile.readline())  # hello ack
        self.ready.set()
        for raw in self.rfile:
            msg = json.loads(raw)
            rid = msg.get("id")
            kind = msg.get("kind")
            try:
                if kind == "call" and msg["symbol"] == "mkfrac":
                    a, b = (self._frac(x) for x in msg["args"])
                    self.send({"id": rid, "ok": self._wrap(Fraction(a, b))})
                elif kind == "call" and msg["symbol"] == "plus":
                    a, b = (self._frac(x) for x in msg["args"])
                    self.send({"id": rid, "ok": self._wrap(a + b)})
                elif kind == "fetch":
                    f = self.objects[msg["handle"]]
                    self.send({"id": rid, "ok": {"data": [f.numerator,
                                                          f.denominator]}})
                elif kind == "release":
                    self.objects.pop(msg["handle"], None)
                    self.send({"id": rid, "ok": {}})
                else:
                    self.send({"id": rid,
                               "err": {"code": "system-fault",
                                       "msg": f"unhandled {kind!r}"}})
            except Exception as exc:  # pragma: no cover - diagnostic path
                self.send({"id": rid, "err": {"code": "system-fault",
                                              "msg": str(exc)}})


def test_remote_provider_round_trip(server):
    provider = FracProvider(server.port)
    provider.start()
    assert provider.ready.wait(5)
    client = WireClient("127.0.0.1", server.port)
    try:
        r1 = client.request("delegate", core="mitm:field?rat",
                            args=[{"expr": {"int": "2"}},
                                  {"expr": {"int": "3"}}])
        t1 = r1["ok"]["handle"]["token"]
        r2 = client.request("delegate", core="mitm:field?rat",
                            args=[{"expr": {"int": "1"}},
                                  {"expr": {"int": "6"}}])
        t2 = r2["ok"]["handle"]["token"]
        total = client.request("delegate", core="mitm:field?plus",
                               args=[{"handle": t1}, {"handle": t2}])
        token = total["ok"]["handle"]["token"]
        fetched = client.request("fetch", handle=token,
                                 codec="rational-as-tuple-of-int")
        assert fetched["ok"]["data"] == [5, 6]
        assert client.request("release", handle=token) == {"id": 5, "ok": {}}
    finally:
        client.close()
        provider.sock.close()

"""Handle-based delegation broker.

Systems register their interface theory; interviews from the core ontology
induce an alignment table (one entry per core symbol and system, never
pairwise), and calls on handles route through that table.  Structured
results stay inside the owning system behind opaque handles; literal-sorted
results come back immediately as expressions.

The wire protocol is newline-delimited JSON over TCP; a connection that
says hello with a system id becomes a provider and receives forwarded
call/fetch/release requests on the same socket.
"""

from __future__ import annotations

import json
import socket
import socketserver
import threading
from dataclasses import dataclass, field
from pathlib import Path

from . import ontology
from .codec import CodecExpr, CodecRegistry, default_registry
from .errors import (ArityMismatch, AmbiguousAlignment, AmbiguousTarget,
                     BindError, CodecMismatch, MitmError, NoAlignment,
                     StaleHandle, SystemFault, UnknownSymbol, UnknownSystem)
from .graph import TheoryGraph, load_graph
from .systems import PermSystem, SetSystem, ToySystem
from .terms import (Expr, Sym, SymbolUri, expr_from_json, expr_to_json,
                    parse_uri)

FIXTURES = Path(__file__).parent / "fixtures"


@dataclass(frozen=True)
class Handle:
    token: str
    system: str
    session: str
    mitm_type: SymbolUri


@dataclass(frozen=True)
class Alignment:
    core: SymbolUri
    per_system: dict[str, SymbolUri] = field(default_factory=dict)


@dataclass
class SystemRegistration:
    system_id: str
    interface_theory: str
    transport: "Transport"


# --- transports -------------------------------------------------------------

class Transport:
    """Uniform surface the broker uses to talk to a system.

    Args are ``("expr", Expr)`` or ``("object", token)``; results are
    ``("expr", Expr)`` or ``("object", token, mitm_type)``.
    """

    def call(self, op: str, args: list):
        raise NotImplementedError

    def encode(self, token: str, cexpr: CodecExpr, registry: CodecRegistry):
        raise NotImplementedError

    def release(self, token: str) -> None:
        raise NotImplementedError


class InProcessTransport(Transport):
    def __init__(self, system: ToySystem):
        self.system = system
        self._counter = 0
        self._lock = threading.Lock()

    def _next_token(self) -> str:
        with self._lock:
            self._counter += 1
            return f"{self.system.system_id}-{self._counter}"

    def call(self, op: str, args: list):
        natives = []
        for kind, *rest in args:
            if kind == "expr":
                natives.append(rest[0])
            else:
                obj, _ = self.system.get(rest[0])
                natives.append(obj)
        result = self.system.call(op, natives)
        if result[0] == "expr":
            return result
        _, obj, mitm_type = result
        token = self._next_token()
        self.system.store(token, obj, mitm_type)
        return ("object", token, mitm_type)

    def encode(self, token: str, cexpr: CodecExpr, registry: CodecRegistry):
        obj, mitm_type = self.system.get(token)
        return self.system.encode_object(obj, mitm_type, cexpr, registry)

    def release(self, token: str) -> None:
        self.system.free(token)


class RemoteTransport(Transport):
    """Forwards requests to a provider connection (see _Connection)."""

    def __init__(self, connection: "_Connection"):
        self.connection = connection

    def call(self, op: str, args: list):
        wire_args = []
        for kind, *rest in args:
            if kind == "expr":
                wire_args.append({"expr": expr_to_json(rest[0])})
            else:
                wire_args.append({"handle": rest[0]})
        body = self._roundtrip({"kind": "call", "symbol": op, "args": wire_args})
        if "expr" in body:
            return ("expr", expr_from_json(body["expr"]))
        if "handle" in body:
            h = body["handle"]
            return ("object", h["token"], parse_uri(h["type"]))
        raise SystemFault(f"provider returned no result: {body!r}")

    def encode(self, token: str, cexpr: CodecExpr, registry: CodecRegistry):
        body = self._roundtrip(
            {"kind": "fetch", "handle": token, "codec": cexpr.render()})
        if "data" not in body:
            raise SystemFault("provider returned no data")
        return body["data"]

    def release(self, token: str) -> None:
        self._roundtrip({"kind": "release", "handle": token})

    def _roundtrip(self, request: dict) -> dict:
        response = self.connection.request(request)
        if "err" in response:
            err = response["err"]
            code, msg = err.get("code", "system-fault"), err.get("msg", "")
            if code == "stale-handle":
                raise StaleHandle(msg)
            if code == "codec-mismatch":
                raise CodecMismatch(msg)
            raise SystemFault(f"{code}: {msg}")
        return response.get("ok", {})


# --- alignment construction -------------------------------------------------

def build_alignments(g: TheoryGraph,
                     registrations: list[SystemRegistration]
                     ) -> dict[SymbolUri, Alignment]:
    """One alignment per core constant; per-system images come from the
    interviews into each registered system's interface theory.

    Conflicting interviews into one system are an error, never a tie-break.
    """
    by_theory: dict[str, list[str]] = {}
    for r in registrations:
        by_theory.setdefault(r.interface_theory, []).append(r.system_id)

    core_theories = [t.name for t in g.theories.values() if t.kind == "core"]
    if not core_theories:
        core_theories = sorted({v.source for v in g.views.values()
                                if v.kind == "interview"})
    table: dict[SymbolUri, Alignment] = {}
    for tname in core_theories:
        for fc in g.flatten(tname):
            table.setdefault(fc.origin, Alignment(fc.origin, {}))

    for vname in sorted(g.views):
        v = g.views[vname]
        if v.kind != "interview":
            continue
        systems = by_theory.get(v.target, [])
        if not systems:
            continue
        for fc in g.flatten(v.source):
            img = v.assignments.get(fc.name)
            if not isinstance(img, Sym):
                continue
            entry = table.setdefault(fc.origin, Alignment(fc.origin, {}))
            for sysid in systems:
                prev = entry.per_system.get(sysid)
                if prev is not None and prev != img.uri:
                    raise AmbiguousAlignment(
                        f"{fc.origin} maps to both {prev} and {img.uri} "
                        f"in system {sysid!r}")
                entry.per_system[sysid] = img.uri
    return table


# --- the broker -------------------------------------------------------------

@dataclass
class _HandleRecord:
    system: str
    sys_token: str
    mitm_type: SymbolUri
    session: str


class Broker:
    def __init__(self, graph: TheoryGraph, registry: CodecRegistry | None = None):
        self.graph = graph
        self.registry = registry or default_registry()
        self.systems: dict[str, SystemRegistration] = {}
        self.alignments: dict[SymbolUri, Alignment] = {}
        self._handles: dict[str, _HandleRecord] = {}
        self._sessions: dict[str, set[str]] = {}
        self._lock = threading.Lock()
        self._counter = 0

    # registration -----------------------------------------------------------

    def register_system(self, system_id: str, interface_theory: str,
                        transport: Transport) -> None:
        if system_id in self.systems:
            raise DuplicateSystem(f"system {system_id!r} already registered")
        self.graph.theory(interface_theory)
        self.systems[system_id] = SystemRegistration(
            system_id, interface_theory, transport)
        self.alignments = build_alignments(self.graph, list(self.systems.values()))

    def register_toy(self, system: ToySystem) -> None:
        self.register_system(system.system_id, system.interface_theory,
                             InProcessTransport(system))

    def unregister_system(self, system_id: str) -> None:
        if self.systems.pop(system_id, None) is None:
            return
        with self._lock:
            dead = [t for t, r in self._handles.items() if r.system == system_id]
            for t in dead:
                rec = self._handles.pop(t)
                self._sessions.get(rec.session, set()).discard(t)
        self.alignments = build_alignments(self.graph, list(self.systems.values()))

    # sessions ---------------------------------------------------------------

    def open_session(self) -> str:
        with self._lock:
            self._counter += 1
            sid = f"s{self._counter}"
            self._sessions[sid] = set()
            return sid

    def close_session(self, sid: str) -> None:
        with self._lock:
            tokens = self._sessions.pop(sid, set())
            records = [(t, self._handles.pop(t)) for t in tokens
                       if t in self._handles]
        for token, rec in records:
            try:
                self.systems[rec.system].transport.release(rec.sys_token)
            except (KeyError, MitmError):
                pass

    def live_handle_count(self) -> int:
        with self._lock:
            return len(self._handles)

    # operations -------------------------------------------------------------

    def _registration(self, system_id: str) -> SystemRegistration:
        r = self.systems.get(system_id)
        if r is None:
            raise UnknownSystem(f"no system {system_id!r} registered")
        return r

    def _record(self, token: str) -> _HandleRecord:
        with self._lock:
            rec = self._handles.get(token)
        if rec is None:
            raise StaleHandle(f"handle {token!r} is not live")
        return rec

    def _wrap(self, system_id: str, sid: str, sys_token: str,
              mitm_type: SymbolUri) -> Handle:
        with self._lock:
            self._counter += 1
            token = f"h{self._counter}"
            self._handles[token] = _HandleRecord(system_id, sys_token,
                                                 mitm_type, sid)
            self._sessions.setdefault(sid, set()).add(token)
        return Handle(token, system_id, sid, mitm_type)

    def _transfer_codec(self, mitm_type: SymbolUri) -> CodecExpr:
        text = self.graph.transfer_codec(mitm_type)
        if text is None:
            raise CodecMismatch(f"sort {mitm_type} declares no transfer codec")
        return self.registry.parse(text)

    def _prepare_args(self, target: str, args: list):
        prepared = []
        for a in args:
            if isinstance(a, Handle):
                rec = self._record(a.token)
                if rec.system == target:
                    prepared.append(("object", rec.sys_token))
                else:
                    # cross-system handle: transfer by value with the
                    # declared codec of its ontology sort
                    cexpr = self._transfer_codec(rec.mitm_type)
                    raw = self._registration(rec.system).transport.encode(
                        rec.sys_token, cexpr, self.registry)
                    prepared.append(("expr", self.registry.decode(cexpr, raw)))
            elif isinstance(a, Expr):
                prepared.append(("expr", a))
            else:
                raise SystemFault(f"argument is neither expression nor handle: {a!r}")
        return prepared

    def call(self, sid: str, system_id: str, symbol: SymbolUri | str,
             args: list) -> Handle | Expr:
        reg = self._registration(system_id)
        name = symbol.name if isinstance(symbol, SymbolUri) else symbol
        flat = {fc.name: fc for fc in self.graph.flatten(reg.interface_theory)}
        fc = flat.get(name)
        if fc is None:
            raise UnknownSymbol(
                f"no symbol {name!r} in interface theory of {system_id!r}")
        if fc.role == "function" and fc.args is not None and len(args) != len(fc.args):
            raise ArityMismatch(
                f"{name!r} expects {len(fc.args)} arguments, got {len(args)}")
        result = reg.transport.call(name, self._prepare_args(system_id, args))
        if result[0] == "expr":
            return result[1]
        _, sys_token, mitm_type = result
        return self._wrap(system_id, sid, sys_token, mitm_type)

    def delegate(self, sid: str, from_system: str | None,
                 core_symbol: SymbolUri, args: list) -> Handle | Expr:
        fc = self.graph.resolve(core_symbol)
        alignment = self.alignments.get(fc.origin)
        if alignment is None or not alignment.per_system:
            raise NoAlignment(f"no system covers {core_symbol}")
        target = None
        for a in args:
            if isinstance(a, Handle):
                target = self._record(a.token).system
                break
        if target is None:
            if len(alignment.per_system) > 1:
                raise AmbiguousTarget(
                    f"{core_symbol} is covered by "
                    f"{sorted(alignment.per_system)}; name a system explicitly")
            target = next(iter(alignment.per_system))
        local = alignment.per_system.get(target)
        if local is None:
            raise NoAlignment(f"{core_symbol} has no image in system {target!r}")
        return self.call(sid, target, local, args)

    def fetch(self, sid: str, handle: Handle | str, cexpr: CodecExpr):
        token = handle.token if isinstance(handle, Handle) else handle
        rec = self._record(token)
        target = self.registry.target_type(cexpr)
        ok = self.graph.sorts_equal(target, Sym(rec.mitm_type))
        if not ok:
            declared = self.graph.transfer_codec(rec.mitm_type)
            ok = declared is not None and self.graph.sorts_equal(
                target, self.registry.target_type(self.registry.parse(declared)))
        if not ok:
            raise CodecMismatch(
                f"codec {cexpr.render()!r} does not fit an object of sort "
                f"{rec.mitm_type}")
        return self._registration(rec.system).transport.encode(
            rec.sys_token, cexpr, self.registry)

    def release(self, sid: str, handle: Handle | str) -> None:
        token = handle.token if isinstance(handle, Handle) else handle
        with self._lock:
            rec = self._handles.pop(token, None)
            if rec is not None:
                self._sessions.get(rec.session, set()).discard(token)
        if rec is None:
            raise StaleHandle(f"handle {token!r} is not live")
        self.systems[rec.system].transport.release(rec.sys_token)


class DuplicateSystem(MitmError):
    wire_code = "unknown-system"


def default_graph() -> TheoryGraph:
    return load_graph(json.loads((FIXTURES / "mitm.json").read_text()))


def default_broker(graph: TheoryGraph | None = None) -> Broker:
    """A broker over the shipped core-ontology graph with both toy systems."""
    broker = Broker(graph or default_graph())
    broker.register_toy(SetSystem())
    broker.register_toy(PermSystem())
    return broker


# --- wire server ------------------------------------------------------------

class _Connection:
    """Write side of one socket, shared between the handler thread (responses
    to the peer) and broker threads (forwarded requests to a provider)."""

    def __init__(self, wfile):
        self.wfile = wfile
        self.write_lock = threading.Lock()
        self.pending: dict[int, dict] = {}
        self.events: dict[int, threading.Event] = {}
        self.pending_lock = threading.Lock()
        self._req_counter = 10 ** 9  # far away from typical client ids
        self.closed = False

    def send(self, message: dict) -> None:
        data = (json.dumps(message) + "\n").encode()
        with self.write_lock:
            self.wfile.write(data)
            self.wfile.flush()

    def request(self, message: dict, timeout: float = 30.0) -> dict:
        with self.pending_lock:
            self._req_counter += 1
            rid = self._req_counter
            ev = threading.Event()
            self.events[rid] = ev
        self.send({"id": rid, **message})
        if not ev.wait(timeout) or self.closed:
            raise SystemFault("provider did not answer")
        with self.pending_lock:
            self.events.pop(rid, None)
            return self.pending.pop(rid)

    def fulfill(self, rid: int, message: dict) -> bool:
        with self.pending_lock:
            ev = self.events.get(rid)
            if ev is None:
                return False
            self.pending[rid] = message
            ev.set()
            return True

    def close(self):
        self.closed = True
        with self.pending_lock:
            for ev in self.events.values():
                ev.set()


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        broker: Broker = self.server.broker
        conn = _Connection(self.wfile)
        sid = broker.open_session()
        provider: str | None = None
        try:
            for raw in self.rfile:
                line = raw.strip()
                if not line:
                    continue
                try:
                    msg = json.loads(line)
                    if not isinstance(msg, dict):
                        raise ValueError("not an object")
                except ValueError:
                    conn.send({"id": None,
                               "err": {"code": "malformed",
                                       "msg": "not a JSON object line"}})
                    continue
                # a provider's responses carry ok/err instead of a kind
                if "kind" not in msg and ("ok" in msg or "err" in msg):
                    if not conn.fulfill(msg.get("id"), msg):
                        pass  # stray response; drop it
                    continue
                rid = msg.get("id")
                try:
                    kind = msg.get("kind")
                    if kind == "quit":
                        conn.send({"id": rid, "ok": {}})
                        break
                    if kind == "hello" and "system" in msg:
                        provider = self._register_provider(broker, conn, msg)
                        conn.send({"id": rid, "ok": {}})
                        continue
                    conn.send({"id": rid, "ok": self._dispatch(broker, sid, msg)})
                except MitmError as exc:
                    conn.send({"id": rid, "err": {"code": exc.wire_code,
                                                  "msg": str(exc)}})
                except (KeyError, TypeError, ValueError) as exc:
                    conn.send({"id": rid, "err": {"code": "malformed",
                                                  "msg": str(exc)}})
        finally:
            conn.close()
            broker.close_session(sid)
            if provider is not None:
                broker.unregister_system(provider)

    def _register_provider(self, broker: Broker, conn: _Connection,
                           msg: dict) -> str:
        system_id = msg["system"]
        theory = msg.get("theory") or msg.get("interface")
        if not theory:
            raise SystemFault("provider hello needs a 'theory'")
        broker.register_system(system_id, theory, RemoteTransport(conn))
        return system_id

    def _parse_symbol(self, broker: Broker, text: str):
        if "?" in text:
            return parse_uri(text, default_graph=broker.graph.id)
        return text

    def _args(self, broker: Broker, sid: str, wire_args) -> list:
        out = []
        for a in wire_args:
            if "expr" in a:
                out.append(expr_from_json(a["expr"]))
            elif "handle" in a:
                rec = broker._record(a["handle"])
                out.append(Handle(a["handle"], rec.system, rec.session,
                                  rec.mitm_type))
            else:
                raise ValueError(f"argument needs 'expr' or 'handle': {a!r}")
        return out

    def _dispatch(self, broker: Broker, sid: str, msg: dict) -> dict:
        kind = msg.get("kind")
        if kind == "hello":
            return {}
        if kind == "call":
            result = broker.call(sid, msg["system"],
                                 self._parse_symbol(broker, msg["symbol"]),
                                 self._args(broker, sid, msg.get("args", [])))
            return _result_body(result)
        if kind == "delegate":
            core = parse_uri(msg["core"], default_graph=broker.graph.id)
            result = broker.delegate(sid, None, core,
                                     self._args(broker, sid, msg.get("args", [])))
            return _result_body(result)
        if kind == "fetch":
            cexpr = broker.registry.parse(msg["codec"])
            return {"data": broker.fetch(sid, msg["handle"], cexpr)}
        if kind == "release":
            broker.release(sid, msg["handle"])
            return {}
        raise UnknownKind(f"unknown message kind {kind!r}")


class UnknownKind(MitmError):
    wire_code = "unknown-kind"


def _result_body(result) -> dict:
    if isinstance(result, Handle):
        return {"handle": {"token": result.token, "system": result.system,
                           "type": result.mitm_type.render()}}
    return {"expr": expr_to_json(result)}


class BrokerServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, broker: Broker, host: str = "127.0.0.1", port: int = 0):
        try:
            super().__init__((host, port), _Handler)
        except OSError as exc:
            raise BindError(str(exc)) from exc
        self.broker = broker

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, daemon=True)
        t.start()
        return t


def serve(graph: TheoryGraph | None = None, host: str = "127.0.0.1",
          port: int = 0) -> BrokerServer:
    """Start a broker server with the toy systems registered; caller owns
    shutdown."""
    server = BrokerServer(default_broker(graph), host, port)
    server.start()
    return server


# --- scripted client --------------------------------------------------------

class WireClient:
    def __init__(self, host: str, port: int, timeout: float = 10.0):
        self.sock = socket.create_connection((host, port), timeout=timeout)
        self.rfile = self.sock.makefile("r")
        self._id = 0

    def request(self, kind: str, **fields) -> dict:
        self._id += 1
        msg = {"id": self._id, "kind": kind, **fields}
        return self.send_raw(msg)

    def send_raw(self, msg) -> dict:
        self.sock.sendall((json.dumps(msg) + "\n").encode())
        line = self.rfile.readline()
        if not line:
            raise SystemFault("connection closed by broker")
        return json.loads(line)

    def close(self):
        try:
            self.sock.close()
        except OSError:
            pass


def run_script(host: str, port: int, lines) -> list[dict]:
    """Send each JSON line of a transcript and collect the responses."""
    client = WireClient(host, port)
    responses = []
    try:
        for line in lines:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            responses.append(client.send_raw(json.loads(line)))
    finally:
        client.close()
    return responses

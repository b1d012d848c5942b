"""Schema theories for database collections: each field is grounded by a
codec and an ontology type, so raw records translate into typed records.

Record sources are read-only: a directory of JSON-lines fixture files, or a
remote HTTP endpoint answering ``GET <base>/<collection>?field=value&_limit=n``
with ``{"data": [records]}``.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import requests

from .codec import CodecExpr, CodecRegistry, default_registry
from .errors import (DecodeError, FieldDecodeError, MissingRequiredField,
                     SourceUnavailable, TargetTypeMismatch, UnresolvedReference)
from .graph import TheoryGraph
from .terms import Apply, Expr, Sym, parse_uri


@dataclass(frozen=True)
class SchemaField:
    codec: CodecExpr
    math_type: Expr
    required: bool = True


@dataclass(frozen=True)
class DbSchema:
    collection: str
    theory: str
    fields: dict[str, SchemaField]


@dataclass(frozen=True)
class TypedRecord:
    collection: str
    values: dict[str, Expr]
    raw: dict


@dataclass
class QueryReport:
    records: list[TypedRecord] = field(default_factory=list)
    errors: list[tuple[int, str]] = field(default_factory=list)  # (index, message)


_TYPE_CTOR = re.compile(r"^(list|tuple)\((.*)\)$")


def parse_type(text: str, default_graph: str | None = None) -> Expr:
    """A type annotation: a symbol URI, or ``list(T)`` / ``tuple(T1,T2,...)``."""
    from . import ontology
    text = text.strip()
    m = _TYPE_CTOR.match(text)
    if m:
        ctor, body = m.groups()
        parts = _split_args(body)
        inner = [parse_type(p, default_graph) for p in parts]
        head = ontology.LIST if ctor == "list" else ontology.TUPLE
        if ctor == "list" and len(inner) != 1:
            raise TargetTypeMismatch(f"list(...) takes one type: {text!r}")
        return Apply(Sym(head), tuple(inner))
    return Sym(parse_uri(text, default_graph))


def _split_args(body: str) -> list[str]:
    parts, depth, cur = [], 0, ""
    for ch in body:
        if ch == "," and depth == 0:
            parts.append(cur)
            cur = ""
            continue
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        cur += ch
    parts.append(cur)
    return [p for p in (s.strip() for s in parts) if p]


def load_schema(document: dict, g: TheoryGraph,
                registry: CodecRegistry | None = None) -> DbSchema:
    """Parse and validate a schema document against the ambient graph."""
    registry = registry or default_registry()
    theory = document["theory"]
    g.theory(theory)  # raises UnresolvedReference
    flat = {fc.name: fc for fc in g.flatten(theory)}
    fields: dict[str, SchemaField] = {}
    for name, fdoc in document.get("fields", {}).items():
        cexpr = registry.parse(fdoc["codec"])
        math_type = parse_type(fdoc["type"], default_graph=g.id)
        target = registry.target_type(cexpr)
        if not g.sorts_equal(target, math_type):
            raise TargetTypeMismatch(
                f"field {name!r}: codec {cexpr.render()!r} produces a different "
                f"type than the declared one")
        fc = flat.get(name)
        if fc is None:
            raise UnresolvedReference(
                f"field {name!r} is not declared in theory {theory!r}")
        if fc.result is not None and not g.sorts_equal(fc.result, math_type):
            raise TargetTypeMismatch(
                f"field {name!r}: declared type disagrees with theory {theory!r}")
        fields[name] = SchemaField(cexpr, math_type, bool(fdoc.get("required", True)))
    return DbSchema(collection=document["collection"], theory=theory, fields=fields)


def translate_record(s: DbSchema, raw: dict,
                     registry: CodecRegistry | None = None) -> TypedRecord:
    """Decode every schema field of one raw record.

    Unknown raw fields stay in ``raw`` but never show up in ``values``.
    """
    registry = registry or default_registry()
    if not isinstance(raw, dict):
        raise FieldDecodeError("<record>", [], f"not an object: {raw!r}")
    values: dict[str, Expr] = {}
    for name, f in s.fields.items():
        if name not in raw:
            if f.required:
                raise MissingRequiredField(name)
            continue
        try:
            values[name] = registry.decode(f.codec, raw[name])
        except DecodeError as exc:
            raise FieldDecodeError(name, exc.path, exc.reason) from exc
    return TypedRecord(collection=s.collection, values=values, raw=raw)


class RecordSource:
    """Read-only provider of raw records for a collection."""

    def fetch(self, collection: str, filter: dict, limit: int) -> list[dict]:
        raise NotImplementedError


class FileSource(RecordSource):
    """One JSON-lines file per collection under a data directory."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)

    def fetch(self, collection: str, filter: dict, limit: int) -> list[dict]:
        path = self.data_dir / f"{collection}.jsonl"
        if not path.exists():
            raise SourceUnavailable(f"no fixture file {path}")
        if limit is not None and limit <= 0:
            return []
        out = []
        with path.open() as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                if all(rec.get(k) == v for k, v in filter.items()):
                    out.append(rec)
                    if limit is not None and len(out) >= limit:
                        break
        return out


class HttpSource(RecordSource):
    """GET ``<base>/<collection>`` with equality filters as query parameters."""

    def __init__(self, base_url: str, timeout: float = 10.0):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout

    def fetch(self, collection: str, filter: dict, limit: int) -> list[dict]:
        params = {k: v if isinstance(v, str) else json.dumps(v)
                  for k, v in filter.items()}
        if limit is not None:
            params["_limit"] = str(limit)
        try:
            resp = requests.get(f"{self.base_url}/{collection}",
                                params=params, timeout=self.timeout)
            resp.raise_for_status()
            body = resp.json()
        except (requests.RequestException, ValueError) as exc:
            raise SourceUnavailable(str(exc)) from exc
        data = body.get("data")
        if not isinstance(data, list):
            raise SourceUnavailable("response carries no 'data' array")
        return data


def query(s: DbSchema, src: RecordSource, filter: dict[str, Expr],
          limit: int = 10, registry: CodecRegistry | None = None) -> QueryReport:
    """Equality query: filter values are encoded with each field's codec,
    fetched from the source, and the results translated.

    Per-record translation failures are collected, not fatal.
    """
    registry = registry or default_registry()
    raw_filter = {}
    for name, value in filter.items():
        f = s.fields.get(name)
        if f is None:
            raise UnresolvedReference(f"filter on unknown field {name!r}")
        raw_filter[name] = registry.encode(f.codec, value)
    report = QueryReport()
    for i, rec in enumerate(src.fetch(s.collection, raw_filter, limit)):
        try:
            report.records.append(translate_record(s, rec, registry))
        except (MissingRequiredField, FieldDecodeError) as exc:
            report.errors.append((i, str(exc)))
    return report

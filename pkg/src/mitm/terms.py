"""The shared expression language: symbol references, application, variables,
and literals, plus structural operations and the canonical JSON encoding.

Expressions are immutable and have no binders, so substitution is plain
structural replacement and equality is plain structural comparison.
"""

from __future__ import annotations

import re
import struct
from dataclasses import dataclass, field

from .errors import MalformedUri

_SEGMENT = re.compile(r"^[^\s?:]+$")


def _check_segment(seg: str, what: str) -> None:
    if not isinstance(seg, str) or not seg or not _SEGMENT.match(seg):
        raise MalformedUri(f"bad {what} segment: {seg!r}")


@dataclass(frozen=True)
class SymbolUri:
    """Fully qualified symbol address, rendered as ``graph:theory?name``."""

    graph: str
    theory: str
    name: str

    def __post_init__(self):
        _check_segment(self.graph, "graph")
        _check_segment(self.theory, "theory")
        _check_segment(self.name, "name")

    def render(self) -> str:
        return f"{self.graph}:{self.theory}?{self.name}"

    def __str__(self) -> str:
        return self.render()


def parse_uri(text: str, default_graph: str | None = None) -> SymbolUri:
    """Parse ``graph:theory?name`` or ``theory?name`` (with an ambient graph).

    Raises MalformedUri when segments are empty or delimiters misplaced.
    """
    if not isinstance(text, str):
        raise MalformedUri(f"not a string: {text!r}")
    if text.count("?") != 1:
        raise MalformedUri(f"expected exactly one '?' in {text!r}")
    left, name = text.split("?")
    if left.count(":") > 1:
        raise MalformedUri(f"expected at most one ':' in {text!r}")
    if ":" in left:
        graph, theory = left.split(":")
    else:
        if default_graph is None:
            raise MalformedUri(f"no graph segment in {text!r} and no ambient graph")
        graph, theory = default_graph, left
    return SymbolUri(graph, theory, name)


class Expr:
    """Base class for all expression variants. Instances are immutable."""

    __slots__ = ()


@dataclass(frozen=True)
class Sym(Expr):
    uri: SymbolUri


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class IntLit(Expr):
    value: int


@dataclass(frozen=True)
class StrLit(Expr):
    value: str


@dataclass(frozen=True)
class FloatLit(Expr):
    value: float

    # bit-exact comparison: distinguishes -0.0 from 0.0, equates identical NaNs
    def __eq__(self, other):
        if not isinstance(other, FloatLit):
            return NotImplemented
        return _float_bits(self.value) == _float_bits(other.value)

    def __hash__(self):
        return hash(_float_bits(self.value))


def _float_bits(x: float) -> bytes:
    return struct.pack(">d", x)


@dataclass(frozen=True)
class Apply(Expr):
    head: Expr
    args: tuple[Expr, ...]

    def __post_init__(self):
        if isinstance(self.head, (IntLit, StrLit, FloatLit, ListLit)):
            raise ValueError("literal cannot head an application")
        if not self.args:
            raise ValueError("application needs at least one argument")
        object.__setattr__(self, "args", tuple(self.args))


@dataclass(frozen=True)
class ListLit(Expr):
    items: tuple[Expr, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))


def sym(uri_text: str, default_graph: str | None = None) -> Sym:
    """Shorthand for ``Sym(parse_uri(...))``."""
    return Sym(parse_uri(uri_text, default_graph))


def apply(head: Expr, *args: Expr) -> Apply:
    return Apply(head, tuple(args))


def substitute(e: Expr, bindings: dict[str, Expr]) -> Expr:
    """Replace every variable whose name is in ``bindings``.

    No capture concerns: the language has no binders.
    """
    if isinstance(e, Var):
        return bindings.get(e.name, e)
    if isinstance(e, Apply):
        return Apply(substitute(e.head, bindings),
                     tuple(substitute(a, bindings) for a in e.args))
    if isinstance(e, ListLit):
        return ListLit(tuple(substitute(x, bindings) for x in e.items))
    return e


def expr_equal(a: Expr, b: Expr) -> bool:
    """Structural equality; floats compared bit-exactly."""
    return a == b


def free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Apply):
        out = free_vars(e.head)
        for a in e.args:
            out |= free_vars(a)
        return out
    if isinstance(e, ListLit):
        out = set()
        for x in e.items:
            out |= free_vars(x)
        return out
    return set()


# --- canonical JSON encoding ----------------------------------------------
#
#   {"sym": "g:t?n"}  {"var": "x"}  {"app": [head, arg1, ...]}
#   {"int": "decimal-string"}  {"str": "..."}  {"float": number}
#   {"list": [...]}
#
# Integers travel as decimal strings so values beyond 53 bits stay exact.

def expr_to_json(e: Expr):
    if isinstance(e, Sym):
        return {"sym": e.uri.render()}
    if isinstance(e, Var):
        return {"var": e.name}
    if isinstance(e, Apply):
        return {"app": [expr_to_json(e.head)] + [expr_to_json(a) for a in e.args]}
    if isinstance(e, IntLit):
        return {"int": str(e.value)}
    if isinstance(e, StrLit):
        return {"str": e.value}
    if isinstance(e, FloatLit):
        return {"float": e.value}
    if isinstance(e, ListLit):
        return {"list": [expr_to_json(x) for x in e.items]}
    raise TypeError(f"not an Expr: {e!r}")


def expr_from_json(doc) -> Expr:
    if not isinstance(doc, dict) or len(doc) != 1:
        raise ValueError(f"bad expression document: {doc!r}")
    (tag, body), = doc.items()
    if tag == "sym":
        return Sym(parse_uri(body))
    if tag == "var":
        if not isinstance(body, str):
            raise ValueError("variable name must be a string")
        return Var(body)
    if tag == "app":
        if not isinstance(body, list) or len(body) < 2:
            raise ValueError("application needs a head and at least one argument")
        parts = [expr_from_json(x) for x in body]
        return Apply(parts[0], tuple(parts[1:]))
    if tag == "int":
        if isinstance(body, bool) or not isinstance(body, (str, int)):
            raise ValueError(f"integer literal must be a decimal string: {body!r}")
        return IntLit(int(body))
    if tag == "str":
        if not isinstance(body, str):
            raise ValueError("string literal body must be a string")
        return StrLit(body)
    if tag == "float":
        if isinstance(body, bool) or not isinstance(body, (int, float)):
            raise ValueError("float literal body must be a number")
        return FloatLit(float(body))
    if tag == "list":
        if not isinstance(body, list):
            raise ValueError("list literal body must be an array")
        return ListLit(tuple(expr_from_json(x) for x in body))
    raise ValueError(f"unknown expression tag {tag!r}")

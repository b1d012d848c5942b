"""Composable codecs: bidirectional translators between raw JSON-shaped data
and typed expressions of a declared ontology sort.

Codecs compose by parameterization, e.g.
``polynomial-as-reversed-list(rational-as-tuple-of-int)`` reads
``[[2,3],[0,1],[4,1]]`` as the polynomial with coefficient list
2/3, 0, 4 (constant term first).
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable

from . import ontology
from .errors import (CodecSyntaxError, DecodeError, DuplicateCodec,
                     EncodeError, ParamCountMismatch, UnknownCodec)
from .terms import (Apply, Expr, FloatLit, IntLit, ListLit, StrLit, Sym)


@dataclass(frozen=True)
class CodecExpr:
    head: str
    params: tuple[CodecExpr, ...] = ()

    def render(self) -> str:
        if not self.params:
            return self.head
        return f"{self.head}({', '.join(p.render() for p in self.params)})"


@dataclass(frozen=True)
class Codec:
    """One registered codec: identifier, parameter count (None = variadic),
    target-type construction, and the decode/encode pair."""

    id: str
    param_count: int | None
    target_type: Callable[[tuple[Expr, ...]], Expr]
    decode: Callable  # (registry, params, data, path) -> Expr
    encode: Callable  # (registry, params, expr) -> raw


class CodecRegistry:
    def __init__(self):
        self._codecs: dict[str, Codec] = {}

    def register(self, codec: Codec) -> None:
        if codec.id in self._codecs:
            raise DuplicateCodec(f"codec {codec.id!r} already registered")
        self._codecs[codec.id] = codec

    def get(self, cid: str) -> Codec:
        c = self._codecs.get(cid)
        if c is None:
            raise UnknownCodec(f"no codec {cid!r}")
        return c

    def __len__(self):
        return len(self._codecs)

    def __contains__(self, cid):
        return cid in self._codecs

    def ids(self):
        return sorted(self._codecs)

    # --- surface syntax: ident or ident(sub1, sub2, ...) -------------------

    def parse(self, text: str) -> CodecExpr:
        expr, rest = self._parse(text.strip())
        if rest.strip():
            raise CodecSyntaxError(f"trailing input {rest!r}")
        return expr

    _IDENT = re.compile(r"[A-Za-z0-9_-]+")

    def _parse(self, text: str) -> tuple[CodecExpr, str]:
        m = self._IDENT.match(text)
        if not m:
            raise CodecSyntaxError(f"expected codec identifier at {text!r}")
        head = m.group(0)
        rest = text[m.end():].lstrip()
        params: list[CodecExpr] = []
        if rest.startswith("("):
            rest = rest[1:]
            while True:
                sub, rest = self._parse(rest.lstrip())
                params.append(sub)
                rest = rest.lstrip()
                if rest.startswith(","):
                    rest = rest[1:]
                    continue
                if rest.startswith(")"):
                    rest = rest[1:]
                    break
                raise CodecSyntaxError(f"expected ',' or ')' at {rest!r}")
        expr = CodecExpr(head, tuple(params))
        self.validate(expr)
        return expr, rest

    def validate(self, cexpr: CodecExpr) -> None:
        c = self.get(cexpr.head)
        if c.param_count is not None and len(cexpr.params) != c.param_count:
            raise ParamCountMismatch(
                f"codec {c.id!r} takes {c.param_count} parameter(s), "
                f"got {len(cexpr.params)}")
        if c.param_count is None and not cexpr.params:
            raise ParamCountMismatch(f"codec {c.id!r} needs at least one parameter")

    # --- entry points ------------------------------------------------------

    def target_type(self, cexpr: CodecExpr) -> Expr:
        self.validate(cexpr)
        c = self.get(cexpr.head)
        return c.target_type(tuple(self.target_type(p) for p in cexpr.params))

    def decode(self, cexpr: CodecExpr, data) -> Expr:
        self.validate(cexpr)
        return self.get(cexpr.head).decode(self, cexpr.params, data, [])

    def encode(self, cexpr: CodecExpr, e: Expr):
        self.validate(cexpr)
        return self.get(cexpr.head).encode(self, cexpr.params, e)


def parse_codec_expr(text: str, registry: CodecRegistry | None = None) -> CodecExpr:
    return (registry or default_registry()).parse(text)


# --- builtin codecs --------------------------------------------------------

def _is_int(x) -> bool:
    return isinstance(x, int) and not isinstance(x, bool)


def _dec_int(reg, params, data, path):
    if not _is_int(data):
        raise DecodeError(path, f"not an exact integer: {data!r}")
    return IntLit(data)


def _enc_int(reg, params, e):
    if not isinstance(e, IntLit):
        raise EncodeError(f"not an integer literal: {e!r}")
    return e.value


def _dec_int_str(reg, params, data, path):
    if _is_int(data):
        return IntLit(data)
    if isinstance(data, str) and re.fullmatch(r"-?\d+", data):
        return IntLit(int(data))
    raise DecodeError(path, f"not a decimal integer string: {data!r}")


def _enc_int_str(reg, params, e):
    if not isinstance(e, IntLit):
        raise EncodeError(f"not an integer literal: {e!r}")
    return str(e.value)


def _dec_str(reg, params, data, path):
    if not isinstance(data, str):
        raise DecodeError(path, f"not a string: {data!r}")
    return StrLit(data)


def _enc_str(reg, params, e):
    if not isinstance(e, StrLit):
        raise EncodeError(f"not a string literal: {e!r}")
    return e.value


def _dec_float(reg, params, data, path):
    if isinstance(data, bool) or not isinstance(data, (int, float)):
        raise DecodeError(path, f"not a number: {data!r}")
    return FloatLit(float(data))


def _enc_float(reg, params, e):
    if not isinstance(e, FloatLit):
        raise EncodeError(f"not a float literal: {e!r}")
    return e.value


def _dec_bool(reg, params, data, path):
    if data == 0 and _is_int(data):
        return Sym(ontology.FALSE)
    if data == 1 and _is_int(data):
        return Sym(ontology.TRUE)
    raise DecodeError(path, f"not 0 or 1: {data!r}")


def _enc_bool(reg, params, e):
    if e == Sym(ontology.TRUE):
        return 1
    if e == Sym(ontology.FALSE):
        return 0
    raise EncodeError(f"not a boolean: {e!r}")


def _dec_list(reg, params, data, path):
    if not isinstance(data, list):
        raise DecodeError(path, f"not an array: {data!r}")
    (inner,) = params
    return ListLit(tuple(
        reg.get(inner.head).decode(reg, inner.params, d, path + [i])
        for i, d in enumerate(data)))


def _enc_list(reg, params, e):
    if not isinstance(e, ListLit):
        raise EncodeError(f"not a list literal: {e!r}")
    (inner,) = params
    return [reg.encode(inner, x) for x in e.items]


def _dec_tuple(reg, params, data, path):
    if not isinstance(data, list):
        raise DecodeError(path, f"not an array: {data!r}")
    if len(data) != len(params):
        raise DecodeError(path, f"expected {len(params)} components, got {len(data)}")
    return Apply(Sym(ontology.TUPLE), tuple(
        reg.get(p.head).decode(reg, p.params, d, path + [i])
        for i, (p, d) in enumerate(zip(params, data))))


def _enc_tuple(reg, params, e):
    if (not isinstance(e, Apply) or e.head != Sym(ontology.TUPLE)
            or len(e.args) != len(params)):
        raise EncodeError(f"not a {len(params)}-tuple: {e!r}")
    return [reg.encode(p, x) for p, x in zip(params, e.args)]


def rational_expr(num: int, den: int) -> Expr:
    """The canonical rational expression: reduced, positive denominator."""
    f = Fraction(num, den)
    return Apply(Sym(ontology.RATIONAL_CTOR),
                 (IntLit(f.numerator), IntLit(f.denominator)))


def _dec_rational(reg, params, data, path):
    if not isinstance(data, list) or len(data) != 2:
        raise DecodeError(path, f"not a pair: {data!r}")
    num, den = data
    if not _is_int(num):
        raise DecodeError(path + [0], f"not an exact integer: {num!r}")
    if not _is_int(den):
        raise DecodeError(path + [1], f"not an exact integer: {den!r}")
    if den == 0:
        raise DecodeError(path + [1], "zero denominator")
    return rational_expr(num, den)


def _enc_rational(reg, params, e):
    if (not isinstance(e, Apply) or e.head != Sym(ontology.RATIONAL_CTOR)
            or len(e.args) != 2
            or not all(isinstance(a, IntLit) for a in e.args)):
        raise EncodeError(f"not a rational: {e!r}")
    f = Fraction(e.args[0].value, e.args[1].value)
    return [f.numerator, f.denominator]


def _dec_poly(reg, params, data, path):
    # index i of the raw list is the degree-i coefficient (constant term first)
    if not isinstance(data, list):
        raise DecodeError(path, f"not a coefficient array: {data!r}")
    (coeff,) = params
    coeffs = ListLit(tuple(
        reg.get(coeff.head).decode(reg, coeff.params, d, path + [i])
        for i, d in enumerate(data)))
    return Apply(Sym(ontology.POLY_CTOR), (coeffs,))


def _enc_poly(reg, params, e):
    if (not isinstance(e, Apply) or e.head != Sym(ontology.POLY_CTOR)
            or len(e.args) != 1 or not isinstance(e.args[0], ListLit)):
        raise EncodeError(f"not a polynomial: {e!r}")
    (coeff,) = params
    return [reg.encode(coeff, c) for c in e.args[0].items]


def perm_expr(images: list[int]) -> Expr:
    """Canonical permutation expression; trailing fixed points trimmed."""
    imgs = list(images)
    while imgs and imgs[-1] == len(imgs):
        imgs.pop()
    return Apply(Sym(ontology.PERM_CTOR),
                 (ListLit(tuple(IntLit(i) for i in imgs)),))


def perm_images(e: Expr) -> list[int]:
    if (not isinstance(e, Apply) or e.head != Sym(ontology.PERM_CTOR)
            or len(e.args) != 1 or not isinstance(e.args[0], ListLit)
            or not all(isinstance(x, IntLit) for x in e.args[0].items)):
        raise EncodeError(f"not a permutation: {e!r}")
    return [x.value for x in e.args[0].items]


def _check_bijection(images: list[int], path):
    n = len(images)
    if sorted(images) != list(range(1, n + 1)):
        raise DecodeError(path, f"not a bijection on 1..{n}: {images!r}")


def _dec_perm_images(reg, params, data, path):
    if not isinstance(data, list) or not all(_is_int(x) for x in data):
        raise DecodeError(path, f"not an image array: {data!r}")
    _check_bijection(data, path)
    return perm_expr(data)


def _enc_perm_images(reg, params, e):
    return perm_images(e)


def cycles_to_images(cycles: list[list[int]], path=()) -> list[int]:
    degree = max((max(c) for c in cycles if c), default=0)
    images = list(range(1, degree + 1))
    seen: set[int] = set()
    for ci, cyc in enumerate(cycles):
        for p in cyc:
            if not _is_int(p) or p < 1:
                raise DecodeError(list(path) + [ci], f"bad point {p!r}")
            if p in seen:
                raise DecodeError(list(path) + [ci], f"point {p} in two cycles")
            seen.add(p)
        for i, p in enumerate(cyc):
            images[p - 1] = cyc[(i + 1) % len(cyc)]
    return images


def images_to_cycles(images: list[int]) -> list[list[int]]:
    """Canonical cycle form: each cycle starts at its smallest element,
    cycles sorted by first element, fixed points omitted."""
    done: set[int] = set()
    cycles = []
    for start in range(1, len(images) + 1):
        if start in done:
            continue
        cyc = [start]
        done.add(start)
        p = images[start - 1]
        while p != start:
            cyc.append(p)
            done.add(p)
            p = images[p - 1]
        if len(cyc) > 1:
            cycles.append(cyc)
    return cycles


def _dec_perm_cycles(reg, params, data, path):
    if not isinstance(data, list) or not all(isinstance(c, list) for c in data):
        raise DecodeError(path, f"not a cycle array: {data!r}")
    images = cycles_to_images(data, path)
    return perm_expr(images)


def _enc_perm_cycles(reg, params, e):
    return images_to_cycles(perm_images(e))


def default_registry() -> CodecRegistry:
    """All builtin codecs, freshly registered."""
    reg = CodecRegistry()
    reg.register(Codec("int-literal", 0, lambda p: Sym(ontology.INT),
                       _dec_int, _enc_int))
    reg.register(Codec("int-as-string", 0, lambda p: Sym(ontology.INT),
                       _dec_int_str, _enc_int_str))
    reg.register(Codec("string-literal", 0, lambda p: Sym(ontology.STR),
                       _dec_str, _enc_str))
    reg.register(Codec("float-literal", 0, lambda p: Sym(ontology.FLOAT),
                       _dec_float, _enc_float))
    reg.register(Codec("bool-as-int", 0, lambda p: Sym(ontology.BOOL),
                       _dec_bool, _enc_bool))
    reg.register(Codec("list", 1, lambda p: ontology.list_of(p[0]),
                       _dec_list, _enc_list))
    reg.register(Codec("tuple", None, lambda p: ontology.tuple_of(*p),
                       _dec_tuple, _enc_tuple))
    reg.register(Codec("rational-as-tuple-of-int", 0,
                       lambda p: Sym(ontology.RATIONAL_SORT),
                       _dec_rational, _enc_rational))
    reg.register(Codec("polynomial-as-reversed-list", 1,
                       lambda p: Sym(ontology.POLY_SORT),
                       _dec_poly, _enc_poly))
    reg.register(Codec("permutation-as-images", 0,
                       lambda p: Sym(ontology.PERM_SORT),
                       _dec_perm_images, _enc_perm_images))
    reg.register(Codec("permutation-as-cycles", 0,
                       lambda p: Sym(ontology.PERM_SORT),
                       _dec_perm_cycles, _enc_perm_cycles))
    return reg

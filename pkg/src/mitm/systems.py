"""Two in-process computational systems with deliberately different internal
representations: a set calculator speaking Sage-flavored names and a
permutation calculator speaking GAP-flavored names.

They exist to give the broker real, differently-shaped endpoints to route
between; neither aims at performance.
"""

from __future__ import annotations

import math
import threading

from . import ontology
from .codec import CodecRegistry, perm_expr, perm_images
from .errors import (EncodeError, NotABijection, ResourceExhausted,
                     SystemFault, TypeFault, UnknownSymbol)
from .terms import Apply, Expr, IntLit, ListLit, Sym, SymbolUri


class ToySystem:
    """In-process system: holds an object table keyed by handle token and
    answers calls on the constants of its interface theory."""

    system_id: str
    interface_theory: str

    def __init__(self):
        self._objects: dict[str, object] = {}
        self._types: dict[str, SymbolUri] = {}
        self._lock = threading.Lock()

    # object table -----------------------------------------------------------

    def store(self, token: str, obj, mitm_type: SymbolUri) -> None:
        with self._lock:
            self._objects[token] = obj
            self._types[token] = mitm_type

    def get(self, token: str):
        with self._lock:
            if token not in self._objects:
                raise SystemFault(f"{self.system_id}: unknown object {token!r}")
            return self._objects[token], self._types[token]

    def free(self, token: str) -> None:
        with self._lock:
            self._objects.pop(token, None)
            self._types.pop(token, None)

    def live_count(self) -> int:
        with self._lock:
            return len(self._objects)

    # protocol surface -------------------------------------------------------

    def call(self, op: str, args: list):
        """Run one operation. Args are Exprs or native objects; returns
        ``("expr", e)`` for literal-sorted results or
        ``("object", native, mitm_type)`` for structured ones."""
        handler = self._ops().get(op)
        if handler is None:
            raise UnknownSymbol(f"{self.system_id} has no operation {op!r}")
        return handler(*args)

    def encode_object(self, obj, mitm_type: SymbolUri, codec_expr,
                      registry: CodecRegistry):
        return registry.encode(codec_expr, self.object_expr(obj, mitm_type))

    def object_expr(self, obj, mitm_type: SymbolUri) -> Expr:
        """Canonical expression form of a native object (transfer by value)."""
        raise NotImplementedError

    def _ops(self):
        raise NotImplementedError


# --- sets -------------------------------------------------------------------

def _int_items(e) -> tuple[int, ...]:
    if isinstance(e, ListLit):
        out = []
        for x in e.items:
            if not isinstance(x, IntLit):
                raise TypeFault(f"set element is not an integer: {x!r}")
            out.append(x.value)
        return tuple(out)
    raise TypeFault(f"expected an integer list, got {e!r}")


class SetSystem(ToySystem):
    """Finite sets of integers; internal form is a sorted duplicate-free tuple."""

    system_id = "setsys"
    interface_theory = "sagelike"

    def _as_set(self, arg) -> tuple[int, ...]:
        if isinstance(arg, tuple):
            return arg
        if isinstance(arg, Expr):
            return tuple(sorted(set(_int_items(arg))))
        raise TypeFault(f"not a set: {arg!r}")

    def _mkset(self, arg):
        return ("object", tuple(sorted(set(_int_items(arg)))), ontology.SET_SORT)

    def _cardinality(self, arg):
        return ("expr", IntLit(len(self._as_set(arg))))

    def _union(self, a, b):
        merged = tuple(sorted(set(self._as_set(a)) | set(self._as_set(b))))
        return ("object", merged, ontology.SET_SORT)

    def _contains(self, a, x):
        if not isinstance(x, IntLit):
            raise TypeFault(f"membership test needs an integer, got {x!r}")
        hit = x.value in self._as_set(a)
        return ("expr", Sym(ontology.TRUE if hit else ontology.FALSE))

    def _ops(self):
        return {"mkset": self._mkset, "cardinality": self._cardinality,
                "union": self._union, "contains": self._contains}

    def object_expr(self, obj, mitm_type):
        return ListLit(tuple(IntLit(x) for x in obj))


# --- permutations -----------------------------------------------------------

def make_perm(images) -> tuple[int, ...]:
    imgs = tuple(images)
    n = len(imgs)
    if sorted(imgs) != list(range(1, n + 1)):
        raise NotABijection(f"not a bijection on 1..{n}: {list(imgs)!r}")
    return imgs


def _pad(p: tuple[int, ...], n: int) -> tuple[int, ...]:
    return p + tuple(range(len(p) + 1, n + 1))


def multiply_perms(p, q) -> tuple[int, ...]:
    """Composition: (p*q) moves a point first through q, then through p."""
    n = max(len(p), len(q))
    p, q = _pad(p, n), _pad(q, n)
    return tuple(p[q[i] - 1] for i in range(n))


def perm_order(p: tuple[int, ...]) -> int:
    order = 1
    for cyc_len in _cycle_lengths(p):
        order = math.lcm(order, cyc_len)
    return order


def _cycle_lengths(p):
    seen = set()
    for start in range(1, len(p) + 1):
        if start in seen:
            continue
        length, x = 0, start
        while x not in seen:
            seen.add(x)
            x = p[x - 1]
            length += 1
        yield length


def group_closure(generators, cap: int = 10 ** 6) -> frozenset:
    """Breadth-first closure of the generated group; bounded by ``cap``."""
    gens = [make_perm(g) for g in generators]
    n = max((len(g) for g in gens), default=0)
    gens = [_pad(g, n) for g in gens]
    identity = tuple(range(1, n + 1))
    elements = {identity}
    frontier = [identity]
    while frontier:
        nxt = []
        for el in frontier:
            for g in gens:
                prod = multiply_perms(g, el)
                if prod not in elements:
                    if len(elements) >= cap:
                        raise ResourceExhausted(
                            f"group closure exceeded {cap} elements")
                    elements.add(prod)
                    nxt.append(prod)
        frontier = nxt
    return frozenset(elements)


class PermSystem(ToySystem):
    """Permutations as 1-based image arrays, groups as explicit element sets."""

    system_id = "permsys"
    interface_theory = "gaplike"

    def __init__(self, closure_cap: int = 10 ** 6):
        super().__init__()
        self.closure_cap = closure_cap

    def _as_perm(self, arg) -> tuple[int, ...]:
        if isinstance(arg, tuple):
            return arg
        if isinstance(arg, Apply):
            return make_perm(perm_images(arg))
        if isinstance(arg, ListLit):
            return make_perm(_int_items(arg))
        raise TypeFault(f"not a permutation: {arg!r}")

    def _perm_list(self, arg):
        if isinstance(arg, Expr):
            return ("object", make_perm(_int_items(arg)), ontology.PERM_SORT)
        raise TypeFault(f"image list expected, got {arg!r}")

    def _element_order(self, arg):
        return ("expr", IntLit(perm_order(self._as_perm(arg))))

    def _product(self, a, b):
        return ("object", multiply_perms(self._as_perm(a), self._as_perm(b)),
                ontology.PERM_SORT)

    def _group_by_generators(self, arg):
        if isinstance(arg, ListLit):
            gens = [self._as_perm(x) for x in arg.items]
        elif isinstance(arg, list):
            gens = [self._as_perm(x) for x in arg]
        else:
            gens = [self._as_perm(arg)]
        return ("object", group_closure(gens, self.closure_cap),
                ontology.GROUP_SORT)

    def _size(self, arg):
        if isinstance(arg, frozenset):
            return ("expr", IntLit(len(arg)))
        raise TypeFault(f"Size needs a group, got {arg!r}")

    def _ops(self):
        return {"PermList": self._perm_list, "ElementOrder": self._element_order,
                "Product": self._product,
                "GroupByGenerators": self._group_by_generators,
                "Size": self._size}

    # convenience python-level names mirroring the internal vocabulary
    def mkperm(self, images):
        return make_perm(images)

    def order(self, p):
        return perm_order(p)

    def multiply(self, p, q):
        return multiply_perms(p, q)

    def cardinality_of_group_generated(self, perms):
        return len(group_closure(perms, self.closure_cap))

    def object_expr(self, obj, mitm_type):
        if mitm_type == ontology.PERM_SORT:
            return perm_expr(list(obj))
        if mitm_type == ontology.GROUP_SORT:
            raise EncodeError("groups have no transfer representation")
        raise EncodeError(f"cannot encode object of type {mitm_type}")

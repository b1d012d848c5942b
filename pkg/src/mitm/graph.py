"""The ontology kernel: theories with constants, includes, named structures,
and views between theories, plus flattening, signature typechecking, and
view checking.

Includes behave like inheritance (deduplicated on diamonds by the declaring
origin), structures create a prefixed, optionally instantiated copy of their
source theory, and views map source constants to target expressions.  Axioms
mapped by a view are recorded as unproven obligations; nothing here proves
anything.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import ontology
from .errors import (ArityMismatch, CycleError, DuplicateName, SortMismatch,
                     UnknownSymbol, UnresolvedReference, UntypableVariable)
from .terms import (Apply, Expr, FloatLit, IntLit, ListLit, StrLit, Sym,
                    SymbolUri, Var, expr_from_json, expr_to_json)

ROLES = ("sort", "function", "axiom", "object")


@dataclass(frozen=True)
class Constant:
    name: str
    role: str
    args: tuple[Expr, ...] | None = None
    result: Expr | None = None
    definiens: Expr | None = None
    doc: str | None = None
    transfer: str | None = None  # default transfer codec for sorts

    def validate(self):
        if self.role not in ROLES:
            raise UnresolvedReference(f"constant {self.name!r}: unknown role {self.role!r}")
        if self.role == "sort":
            if self.args is not None or self.result is not None or self.definiens is not None:
                raise SortMismatch(f"sort {self.name!r} must not carry a signature or definiens")
        elif self.role == "function":
            if self.args is None or self.result is None:
                raise SortMismatch(f"function {self.name!r} needs a full signature")
        elif self.role == "axiom":
            if self.result != Sym(ontology.PROP):
                raise SortMismatch(f"axiom {self.name!r} must result in the prop sort")
        elif self.role == "object":
            if self.result is None:
                raise SortMismatch(f"object {self.name!r} needs a result sort")
            if self.args:
                raise SortMismatch(f"object {self.name!r} must not take arguments")


@dataclass(frozen=True)
class FlatConstant:
    """A constant as seen through flattening: possibly renamed by a structure
    prefix and tagged with the URI it was originally declared under."""

    name: str
    origin: SymbolUri
    role: str
    args: tuple[Expr, ...] | None
    result: Expr | None
    definiens: Expr | None
    doc: str | None = None
    transfer: str | None = None


@dataclass(frozen=True)
class Structure:
    name: str
    source: str  # theory name within the graph
    assignments: dict[str, Expr] = field(default_factory=dict)


@dataclass(frozen=True)
class Theory:
    name: str
    meta: str | None = None
    constants: tuple[Constant, ...] = ()
    includes: tuple[str, ...] = ()
    structures: tuple[Structure, ...] = ()
    kind: str | None = None  # optional "core" / "interface" tag


@dataclass(frozen=True)
class View:
    name: str
    source: str
    target: str
    assignments: dict[str, Expr] = field(default_factory=dict)
    kind: str = "view"  # "view" or "interview"


@dataclass
class ViewReport:
    view: str
    missing: list[str] = field(default_factory=list)
    ill_typed: list[tuple[str, str]] = field(default_factory=list)  # (constant, reason)
    obligations: list[str] = field(default_factory=list)

    @property
    def clean(self) -> bool:
        return not self.missing and not self.ill_typed


@dataclass(frozen=True)
class Diagnostic:
    view: str
    kind: str  # "missing" | "ill-typed"
    subject: str
    reason: str | None = None

    def render(self) -> str:
        tail = f": {self.reason}" if self.reason else ""
        return f"view {self.view}: {self.kind} {self.subject}{tail}"


_BUILTIN_SORTS = ("int", "str", "float", "bool", "prop", "any", "sort")

_BUILTIN_CONSTANTS = {name: Constant(name, "sort") for name in _BUILTIN_SORTS}
_BUILTIN_CONSTANTS["list"] = Constant(
    "list", "function", args=(Sym(ontology.SORT),), result=Sym(ontology.SORT))
# resolvable for symbol lookup; tuple applications are arity-checked specially
_BUILTIN_CONSTANTS["tuple"] = Constant(
    "tuple", "function", args=(Sym(ontology.SORT),), result=Sym(ontology.SORT))
_BUILTIN_CONSTANTS["true"] = Constant("true", "object", result=Sym(ontology.BOOL))
_BUILTIN_CONSTANTS["false"] = Constant("false", "object", result=Sym(ontology.BOOL))


def sort_equal(a: Expr, b: Expr) -> bool:
    """Sort comparison; the builtin wildcard sort matches anything."""
    if isinstance(a, Sym) and a.uri == ontology.ANY:
        return True
    if isinstance(b, Sym) and b.uri == ontology.ANY:
        return True
    if isinstance(a, Apply) and isinstance(b, Apply):
        return (len(a.args) == len(b.args)
                and sort_equal(a.head, b.head)
                and all(sort_equal(x, y) for x, y in zip(a.args, b.args)))
    return a == b


class TheoryGraph:
    """An immutable, fully resolved collection of theories and views."""

    def __init__(self, graph_id: str, theories: dict[str, Theory],
                 views: dict[str, View]):
        self.id = graph_id
        self.theories = dict(theories)
        self.views = dict(views)
        self._flat: dict[str, tuple[FlatConstant, ...]] = {}
        self._validate()

    # --- resolution --------------------------------------------------------

    def theory(self, name: str) -> Theory:
        t = self.theories.get(name)
        if t is None:
            raise UnresolvedReference(f"no theory {name!r} in graph {self.id!r}")
        return t

    def resolve(self, uri: SymbolUri) -> FlatConstant:
        """Look a symbol up through flattening of its declaring theory."""
        if uri.graph == ontology.BUILTIN and uri.theory == ontology.BUILTIN:
            c = _BUILTIN_CONSTANTS.get(uri.name)
            if c is None:
                raise UnknownSymbol(f"no builtin {uri.name!r}")
            return FlatConstant(c.name, uri, c.role, c.args, c.result, c.definiens)
        if uri.graph != self.id:
            raise UnresolvedReference(f"{uri} does not live in graph {self.id!r}")
        for fc in self.flatten(uri.theory):
            if fc.name == uri.name:
                return fc
        raise UnknownSymbol(f"no constant {uri.name!r} in flattened {uri.theory!r}")

    # --- flattening --------------------------------------------------------

    def flatten(self, tname: str) -> tuple[FlatConstant, ...]:
        """Own constants first, then includes depth-first, then structures,
        each in declaration order; diamond includes deduplicated by origin."""
        cached = self._flat.get(tname)
        if cached is not None:
            return cached
        return self._flatten(tname, set())

    def _flatten(self, tname: str, in_progress: set[str]) -> tuple[FlatConstant, ...]:
        if tname in self._flat:
            return self._flat[tname]
        if tname in in_progress:
            raise CycleError(f"include/structure cycle through {tname!r}")
        in_progress = in_progress | {tname}
        t = self.theory(tname)

        out: list[FlatConstant] = []
        seen_origin: set[SymbolUri] = set()
        by_name: dict[str, SymbolUri] = {}

        def add(fc: FlatConstant):
            if fc.origin in seen_origin:
                return
            prev = by_name.get(fc.name)
            if prev is not None:
                raise DuplicateName(
                    f"theory {tname!r}: constant {fc.name!r} declared by both "
                    f"{prev} and {fc.origin}")
            seen_origin.add(fc.origin)
            by_name[fc.name] = fc.origin
            out.append(fc)

        for c in t.constants:
            add(FlatConstant(c.name, SymbolUri(self.id, tname, c.name), c.role,
                             c.args, c.result, c.definiens, c.doc, c.transfer))

        for inc in t.includes:
            for fc in self._flatten(inc, in_progress):
                add(fc)

        for st in t.structures:
            src_flat = self._flatten(st.source, in_progress)
            src_names = {fc.name for fc in src_flat}
            for key in st.assignments:
                if key not in src_names:
                    raise UnresolvedReference(
                        f"structure {st.name!r} in {tname!r} assigns unknown "
                        f"constant {key!r} of {st.source!r}")
            rename: dict[SymbolUri, Sym] = {}
            for fc in src_flat:
                new = Sym(SymbolUri(self.id, tname, f"{st.name}/{fc.name}"))
                rename[SymbolUri(self.id, st.source, fc.name)] = new
                rename[fc.origin] = new
            for fc in src_flat:
                new_name = f"{st.name}/{fc.name}"
                definiens = fc.definiens and _rewrite(fc.definiens, rename)
                if fc.name in st.assignments:
                    # instantiation: overrides the definiens, never the signature
                    definiens = st.assignments[fc.name]
                add(FlatConstant(
                    new_name, SymbolUri(self.id, tname, new_name), fc.role,
                    fc.args and tuple(_rewrite(a, rename) for a in fc.args),
                    fc.result and _rewrite(fc.result, rename),
                    definiens, fc.doc, fc.transfer))

        result = tuple(out)
        self._flat[tname] = result
        return result

    # --- typechecking ------------------------------------------------------

    def normalize_sort(self, e: Expr) -> Expr:
        """Rewrite every resolvable symbol to its declaring origin, so a
        constant seen through an include compares equal under both addresses."""
        if isinstance(e, Sym):
            try:
                return Sym(self.resolve(e.uri).origin)
            except (UnknownSymbol, UnresolvedReference):
                return e
        if isinstance(e, Apply):
            return Apply(self.normalize_sort(e.head),
                         tuple(self.normalize_sort(a) for a in e.args))
        if isinstance(e, ListLit):
            return ListLit(tuple(self.normalize_sort(x) for x in e.items))
        return e

    def sorts_equal(self, a: Expr, b: Expr) -> bool:
        return sort_equal(self.normalize_sort(a), self.normalize_sort(b))

    def infer_type(self, ctx: str, e: Expr,
                   var_types: dict[str, Expr] | None = None) -> Expr:
        """Infer the sort of ``e``; ``ctx`` names the ambient theory."""
        if isinstance(e, IntLit):
            return Sym(ontology.INT)
        if isinstance(e, StrLit):
            return Sym(ontology.STR)
        if isinstance(e, FloatLit):
            return Sym(ontology.FLOAT)
        if isinstance(e, ListLit):
            elem: Expr = Sym(ontology.ANY)
            for x in e.items:
                t = self.infer_type(ctx, x, var_types)
                if not self.sorts_equal(elem, t):
                    raise SortMismatch(
                        f"heterogeneous list: {render_sort(elem)} vs {render_sort(t)}")
                if isinstance(elem, Sym) and elem.uri == ontology.ANY:
                    elem = t
            return ontology.list_of(elem)
        if isinstance(e, Var):
            if var_types and e.name in var_types:
                return var_types[e.name]
            raise UntypableVariable(f"free variable {e.name!r} without annotation")
        if isinstance(e, Sym):
            fc = self.resolve(e.uri)
            if fc.role == "sort":
                return Sym(ontology.SORT)
            if fc.role in ("object", "axiom"):
                return fc.result
            # bare function symbol: only nullary functions stand as values
            if fc.args == ():
                return fc.result
            raise SortMismatch(f"function {e.uri} used without arguments")
        if isinstance(e, Apply):
            if isinstance(e.head, Sym) and e.head.uri == ontology.TUPLE:
                return ontology.tuple_of(
                    *(self.infer_type(ctx, a, var_types) for a in e.args))
            if not isinstance(e.head, Sym):
                raise SortMismatch("application head must be a symbol")
            fc = self.resolve(e.head.uri)
            if fc.role != "function" or fc.args is None:
                raise SortMismatch(f"{e.head.uri} is not applicable")
            if len(e.args) != len(fc.args):
                raise ArityMismatch(
                    f"{e.head.uri} expects {len(fc.args)} arguments, got {len(e.args)}")
            for i, (arg, want) in enumerate(zip(e.args, fc.args)):
                got = self.infer_type(ctx, arg, var_types)
                if not self.sorts_equal(got, want):
                    raise SortMismatch(
                        f"argument {i} of {e.head.uri}: expected "
                        f"{render_sort(want)}, got {render_sort(got)}")
            return fc.result
        raise SortMismatch(f"cannot type {e!r}")

    def is_sort_expr(self, e: Expr) -> bool:
        if isinstance(e, Sym):
            try:
                return self.resolve(e.uri).role == "sort"
            except (UnknownSymbol, UnresolvedReference):
                return False
        if isinstance(e, Apply) and isinstance(e.head, Sym):
            if e.head.uri in (ontology.LIST, ontology.TUPLE):
                return all(self.is_sort_expr(a) for a in e.args)
        return False

    # --- views -------------------------------------------------------------

    def view(self, name: str) -> View:
        v = self.views.get(name)
        if v is None:
            raise UnresolvedReference(f"no view {name!r} in graph {self.id!r}")
        return v

    def _view_symbol_map(self, v: View) -> dict[SymbolUri, Expr]:
        out: dict[SymbolUri, Expr] = {}
        for fc in self.flatten(v.source):
            img = v.assignments.get(fc.name)
            if img is not None:
                out[SymbolUri(self.id, v.source, fc.name)] = img
                out[fc.origin] = img
        return out

    def translate(self, e: Expr, view: View | str) -> Expr:
        """Symbol-wise replacement of source constants by their view images."""
        if isinstance(view, str):
            view = self.view(view)
        return _rewrite(e, self._view_symbol_map(view))

    def check_view(self, vname: str) -> ViewReport:
        v = self.view(vname)
        report = ViewReport(view=vname)
        flat = self.flatten(v.source)
        # unmapped source constants make dependent assignments unjudgeable;
        # report only the missing assignment, not the cascade
        unmapped = {fc.origin for fc in flat
                    if fc.definiens is None and fc.name not in v.assignments}
        for fc in flat:
            if fc.role == "axiom":
                report.obligations.append(fc.name)
            if fc.definiens is not None:
                continue
            img = v.assignments.get(fc.name)
            if img is None:
                report.missing.append(fc.name)
                continue
            if self._mentions(v, fc, unmapped):
                continue
            reason = self._check_assignment(v, fc, img)
            if reason is not None:
                report.ill_typed.append((fc.name, reason))
        return report

    def _mentions(self, v: View, fc: FlatConstant, unmapped: set) -> bool:
        if not unmapped:
            return False
        exprs = list(fc.args or ())
        if fc.result is not None:
            exprs.append(fc.result)
        for e in exprs:
            for uri in _symbols(e):
                try:
                    if self.resolve(uri).origin in unmapped:
                        return True
                except (UnknownSymbol, UnresolvedReference):
                    continue
        return False

    def _check_assignment(self, v: View, fc: FlatConstant, img: Expr) -> str | None:
        if fc.role == "sort":
            if not self.is_sort_expr(img):
                return "SortMismatch: image is not a sort"
            return None
        if fc.role == "axiom":
            # axioms stay proof obligations; any named counterpart is accepted
            return None
        if fc.role == "object":
            want = self.translate(fc.result, v)
            try:
                got = self.infer_type(v.target, img)
            except (SortMismatch, ArityMismatch, UnknownSymbol,
                    UnresolvedReference, UntypableVariable) as exc:
                return f"SortMismatch: {exc}"
            if not self.sorts_equal(got, want):
                return (f"SortMismatch: expected {render_sort(want)}, "
                        f"got {render_sort(got)}")
            return None
        # function: the image must be a function symbol of the translated signature
        if not isinstance(img, Sym):
            return "SortMismatch: function image must be a symbol"
        try:
            target_fc = self.resolve(img.uri)
        except (UnknownSymbol, UnresolvedReference) as exc:
            return f"SortMismatch: {exc}"
        if target_fc.role != "function" or target_fc.args is None:
            return f"SortMismatch: {img.uri} is not a function"
        want_args = [self.translate(a, v) for a in fc.args]
        want_result = self.translate(fc.result, v)
        if len(target_fc.args) != len(want_args):
            return (f"ArityMismatch: expected {len(want_args)} arguments, "
                    f"{img.uri} takes {len(target_fc.args)}")
        for i, (want, got) in enumerate(zip(want_args, target_fc.args)):
            if not self.sorts_equal(want, got):
                return (f"SortMismatch: argument {i} expected "
                        f"{render_sort(want)}, got {render_sort(got)}")
        if not self.sorts_equal(want_result, target_fc.result):
            return (f"SortMismatch: result expected {render_sort(want_result)}, "
                    f"got {render_sort(target_fc.result)}")
        return None

    def check_graph(self) -> list[Diagnostic]:
        """Check every view; empty iff all views are total and well typed."""
        out: list[Diagnostic] = []
        for vname in self.views:
            report = self.check_view(vname)
            for name in report.missing:
                out.append(Diagnostic(vname, "missing", name))
            for name, reason in report.ill_typed:
                out.append(Diagnostic(vname, "ill-typed", name, reason))
        return out

    # --- load-time validation ---------------------------------------------

    def _validate(self):
        if ontology.BUILTIN in self.theories:
            raise DuplicateName("theory name 'builtin' is reserved")
        for tname, t in self.theories.items():
            for c in t.constants:
                c.validate()
            for inc in t.includes:
                self.theory(inc)
            for st in t.structures:
                self.theory(st.source)
            if t.meta is not None:
                # meta pointers are represented, not enforced
                self.theory(t.meta)
        for tname in self.theories:
            self.flatten(tname)  # raises on cycles and duplicate names
        for tname, t in self.theories.items():
            for c in t.constants:
                for e in _constant_exprs(c):
                    self._resolve_all(e, f"theory {tname!r}, constant {c.name!r}")
            for st in t.structures:
                for e in st.assignments.values():
                    self._resolve_all(e, f"structure {st.name!r} in {tname!r}")
        for vname, v in self.views.items():
            src = self.theory(v.source)
            tgt = self.theory(v.target)
            flat_names = {fc.name for fc in self.flatten(v.source)}
            for key in v.assignments:
                if key not in flat_names:
                    raise UnresolvedReference(
                        f"view {vname!r} assigns unknown source constant {key!r}")
            for e in v.assignments.values():
                self._resolve_all(e, f"view {vname!r}")
            if v.kind == "interview":
                if src.kind is not None and src.kind != "core":
                    raise UnresolvedReference(
                        f"interview {vname!r} must start at a core theory")
                if tgt.kind is not None and tgt.kind != "interface":
                    raise UnresolvedReference(
                        f"interview {vname!r} must end at an interface theory")

    def _resolve_all(self, e: Expr, where: str):
        for uri in _symbols(e):
            try:
                self.resolve(uri)
            except (UnknownSymbol, UnresolvedReference) as exc:
                raise UnresolvedReference(f"{where}: {exc}") from exc

    # --- transfer codecs ---------------------------------------------------

    def transfer_codec(self, sort_uri: SymbolUri) -> str | None:
        """The declared transfer codec of a sort, or None."""
        try:
            fc = self.resolve(sort_uri)
        except (UnknownSymbol, UnresolvedReference):
            return None
        return fc.transfer


def _rewrite(e: Expr, mapping: dict[SymbolUri, Expr]) -> Expr:
    if isinstance(e, Sym):
        return mapping.get(e.uri, e)
    if isinstance(e, Apply):
        return Apply(_rewrite(e.head, mapping),
                     tuple(_rewrite(a, mapping) for a in e.args))
    if isinstance(e, ListLit):
        return ListLit(tuple(_rewrite(x, mapping) for x in e.items))
    return e


def _symbols(e: Expr):
    if isinstance(e, Sym):
        yield e.uri
    elif isinstance(e, Apply):
        yield from _symbols(e.head)
        for a in e.args:
            yield from _symbols(a)
    elif isinstance(e, ListLit):
        for x in e.items:
            yield from _symbols(x)


def _constant_exprs(c: Constant):
    if c.args:
        yield from c.args
    if c.result is not None:
        yield c.result
    if c.definiens is not None:
        yield c.definiens


def render_sort(e: Expr) -> str:
    if isinstance(e, Sym):
        return e.uri.render()
    if isinstance(e, Apply) and isinstance(e.head, Sym):
        inner = ", ".join(render_sort(a) for a in e.args)
        return f"{e.head.uri.name}({inner})"
    return repr(e)


# --- file format -----------------------------------------------------------
#
#   {"graph": id,
#    "theories": [{"name", "meta"?, "kind"?,
#                  "constants": [{"name","role","args":[ExprJSON...],
#                                 "result":ExprJSON,"def"?,"doc"?,"transfer"?}],
#                  "includes": [name...],
#                  "structures": [{"name","source","assignments":{n:ExprJSON}}]}],
#    "views": [{"name","source","target","kind"?,"assignments":{n:ExprJSON}}]}

def load_graph(document: dict) -> TheoryGraph:
    if not isinstance(document, dict) or "graph" not in document:
        raise UnresolvedReference("graph document needs a 'graph' id")
    gid = document["graph"]
    theories: dict[str, Theory] = {}
    for tdoc in document.get("theories", []):
        t = _parse_theory(tdoc)
        if t.name in theories:
            raise DuplicateName(f"theory {t.name!r} declared twice")
        theories[t.name] = t
    views: dict[str, View] = {}
    for vdoc in document.get("views", []):
        v = View(
            name=vdoc["name"], source=vdoc["source"], target=vdoc["target"],
            kind=vdoc.get("kind", "view"),
            assignments={k: expr_from_json(e)
                         for k, e in vdoc.get("assignments", {}).items()})
        if v.name in views:
            raise DuplicateName(f"view {v.name!r} declared twice")
        views[v.name] = v
    return TheoryGraph(gid, theories, views)


def _parse_theory(doc: dict) -> Theory:
    constants = []
    for cdoc in doc.get("constants", []):
        args = cdoc.get("args")
        constants.append(Constant(
            name=cdoc["name"], role=cdoc["role"],
            args=tuple(expr_from_json(a) for a in args) if args is not None else None,
            result=expr_from_json(cdoc["result"]) if "result" in cdoc else None,
            definiens=expr_from_json(cdoc["def"]) if "def" in cdoc else None,
            doc=cdoc.get("doc"), transfer=cdoc.get("transfer")))
    structures = tuple(
        Structure(name=sdoc["name"], source=sdoc["source"],
                  assignments={k: expr_from_json(e)
                               for k, e in sdoc.get("assignments", {}).items()})
        for sdoc in doc.get("structures", []))
    return Theory(name=doc["name"], meta=doc.get("meta"),
                  constants=tuple(constants),
                  includes=tuple(doc.get("includes", [])),
                  structures=structures, kind=doc.get("kind"))


def dump_flat(flat: tuple[FlatConstant, ...]) -> list[dict]:
    """JSON-friendly rendering of a flattened constant list (golden files)."""
    out = []
    for fc in flat:
        entry = {"name": fc.name, "origin": fc.origin.render(), "role": fc.role}
        if fc.args is not None:
            entry["args"] = [expr_to_json(a) for a in fc.args]
        if fc.result is not None:
            entry["result"] = expr_to_json(fc.result)
        if fc.definiens is not None:
            entry["def"] = expr_to_json(fc.definiens)
        out.append(entry)
    return out

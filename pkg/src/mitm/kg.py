"""Knowledge-graph import/export/analysis and the documentation consistency
checker.

The JSON graph shape is ``{"vertices":[{"id","kind","label"}],
"edges":[{"from","to","kind"}]}``; doc entries arrive as JSON lines
``{"name","kind","arity"?,"loc"}``.
"""

from __future__ import annotations

import json
from collections import deque
from dataclasses import dataclass, field

from . import ontology
from .errors import DuplicateVertex, UnresolvedEdge, UnresolvedReference
from .graph import TheoryGraph
from .terms import Sym

VERTEX_KINDS = ("filter", "category", "property", "attribute", "operation")
EDGE_KINDS = ("implies", "specializes", "requires")

_KIND_SHAPE = {"filter": "diamond", "category": "box", "property": "ellipse",
               "attribute": "oval", "operation": "hexagon"}


@dataclass(frozen=True)
class Vertex:
    id: str
    kind: str
    label: str


@dataclass(frozen=True)
class Edge:
    src: str
    dst: str
    kind: str


@dataclass(frozen=True)
class KnowledgeGraph:
    vertices: tuple[Vertex, ...]
    edges: tuple[Edge, ...]


def import_kg(document: dict) -> KnowledgeGraph:
    vertices = []
    ids = set()
    for vdoc in document.get("vertices", []):
        v = Vertex(vdoc["id"], vdoc.get("kind", "category"), vdoc.get("label", vdoc["id"]))
        if v.id in ids:
            raise DuplicateVertex(f"vertex {v.id!r} declared twice")
        ids.add(v.id)
        vertices.append(v)
    edges = []
    for edoc in document.get("edges", []):
        e = Edge(edoc["from"], edoc["to"], edoc.get("kind", "implies"))
        if e.src not in ids:
            raise UnresolvedEdge(f"edge from unknown vertex {e.src!r}")
        if e.dst not in ids:
            raise UnresolvedEdge(f"edge to unknown vertex {e.dst!r}")
        if e.src == e.dst:
            raise UnresolvedEdge(f"self-loop on {e.src!r}")
        edges.append(e)
    return KnowledgeGraph(tuple(vertices), tuple(edges))


def kg_stats(g: KnowledgeGraph) -> tuple[int, int, int]:
    """(vertex count, edge count, connected components of the undirected
    skeleton), components via breadth-first search."""
    adj: dict[str, list[str]] = {v.id: [] for v in g.vertices}
    for e in g.edges:
        adj[e.src].append(e.dst)
        adj[e.dst].append(e.src)
    seen: set[str] = set()
    components = 0
    for v in g.vertices:
        if v.id in seen:
            continue
        components += 1
        queue = deque([v.id])
        seen.add(v.id)
        while queue:
            for nb in adj[queue.popleft()]:
                if nb not in seen:
                    seen.add(nb)
                    queue.append(nb)
    return (len(g.vertices), len(g.edges), components)


def export_dot(g: KnowledgeGraph) -> str:
    """Deterministic DOT rendering; vertex kind becomes the node shape."""
    lines = ["digraph knowledge {"]
    for v in sorted(g.vertices, key=lambda v: v.id):
        shape = _KIND_SHAPE.get(v.kind, "box")
        lines.append(f'  "{v.id}" [label="{v.label}", shape={shape}];')
    for e in sorted(g.edges, key=lambda e: (e.src, e.dst, e.kind)):
        lines.append(f'  "{e.src}" -> "{e.dst}" [label="{e.kind}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def render_figure(g: KnowledgeGraph, path, dpi: int = 150) -> None:
    """Render the graph to an image file with a deterministic circular
    layout; one color per vertex kind."""
    import math
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    order = sorted(g.vertices, key=lambda v: v.id)
    n = max(len(order), 1)
    pos = {}
    for i, v in enumerate(order):
        angle = 2 * math.pi * i / n
        pos[v.id] = (math.cos(angle), math.sin(angle))
    colors = {"filter": "tab:blue", "category": "tab:orange",
              "property": "tab:green", "attribute": "tab:red",
              "operation": "tab:purple"}
    fig, ax = plt.subplots(figsize=(8, 8))
    for e in g.edges:
        (x1, y1), (x2, y2) = pos[e.src], pos[e.dst]
        ax.annotate("", xy=(x2, y2), xytext=(x1, y1),
                    arrowprops=dict(arrowstyle="->", color="0.6", lw=0.8))
    for v in order:
        x, y = pos[v.id]
        ax.plot(x, y, "o", ms=10, color=colors.get(v.kind, "0.4"))
        ax.annotate(v.label, (x, y), textcoords="offset points",
                    xytext=(0, 8), ha="center", fontsize=7)
    ax.set_axis_off()
    ax.set_aspect("equal")
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)


def render_degree_histogram(g: KnowledgeGraph, path, dpi: int = 150) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    degree = {v.id: 0 for v in g.vertices}
    for e in g.edges:
        degree[e.src] += 1
        degree[e.dst] += 1
    values = sorted(degree.values())
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.hist(values, bins=max(1, min(20, len(set(values)) or 1)),
            color="tab:blue", edgecolor="black")
    ax.set_xlabel("degree")
    ax.set_ylabel("vertices")
    fig.savefig(path, dpi=dpi, bbox_inches="tight")
    plt.close(fig)


# --- documentation consistency checker --------------------------------------

DOC_KINDS = ("function", "operation", "attribute", "property")


@dataclass(frozen=True)
class DocEntry:
    name: str
    documented_kind: str
    documented_arity: int | None = None
    source_location: str = ""


@dataclass
class InconsistencyReport:
    entries: list[tuple[DocEntry, str | None, str]] = field(default_factory=list)
    # mismatch kinds: missing-declaration, kind-mismatch, arity-mismatch

    @property
    def totals(self) -> dict[str, int]:
        out = {"missing-declaration": 0, "kind-mismatch": 0, "arity-mismatch": 0}
        for _, _, kind in self.entries:
            out[kind] += 1
        return out


def load_doc_entries(lines) -> list[DocEntry]:
    out = []
    for line in lines:
        line = line.strip()
        if not line:
            continue
        doc = json.loads(line)
        out.append(DocEntry(doc["name"], doc["kind"], doc.get("arity"),
                            doc.get("loc", "")))
    return out


def doc_check(entries: list[DocEntry], g: TheoryGraph,
              theory: str) -> InconsistencyReport:
    """Cross-check documented names against the flattened declarations.

    Kind conventions: function/operation document a function of any arity;
    attribute and property document unary functions, a property additionally
    needing a boolean result.
    """
    flat = {fc.name: fc for fc in g.flatten(theory)}
    report = InconsistencyReport()
    for entry in entries:
        fc = flat.get(entry.name)
        if fc is None:
            report.entries.append((entry, None, "missing-declaration"))
            continue
        if not _kind_fits(entry.documented_kind, fc):
            report.entries.append((entry, fc.role, "kind-mismatch"))
            continue
        if (entry.documented_arity is not None and fc.args is not None
                and entry.documented_arity != len(fc.args)):
            report.entries.append((entry, fc.role, "arity-mismatch"))
    return report


def _kind_fits(doc_kind: str, fc) -> bool:
    if fc.role != "function" or fc.args is None:
        return False
    if doc_kind in ("function", "operation"):
        return True
    if doc_kind == "attribute":
        return len(fc.args) == 1
    if doc_kind == "property":
        return len(fc.args) == 1 and fc.result == Sym(ontology.BOOL)
    return False

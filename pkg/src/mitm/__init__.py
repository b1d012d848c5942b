"""Math-in-the-middle interoperability toolkit.

A typed term language over a central ontology, composable codecs between raw
data and terms, a schema bridge for database records, and a handle-based
broker that routes computations between registered systems.
"""

from .errors import MitmError
from .terms import (Apply, Expr, FloatLit, IntLit, ListLit, StrLit, Sym,
                    SymbolUri, Var, expr_from_json, expr_to_json, parse_uri)
from .graph import (Constant, Diagnostic, FlatConstant, Structure, Theory,
                    TheoryGraph, View, ViewReport, load_graph)
from .codec import (Codec, CodecExpr, CodecRegistry, default_registry,
                    parse_codec_expr)
from .schema import (DbSchema, FileSource, HttpSource, QueryReport,
                     SchemaField, TypedRecord, load_schema, query,
                     translate_record)
from .systems import PermSystem, SetSystem, ToySystem
from .broker import (Alignment, Broker, BrokerServer, Handle, WireClient,
                     build_alignments, default_broker, default_graph, serve)
from .kg import (DocEntry, InconsistencyReport, KnowledgeGraph, doc_check,
                 export_dot, import_kg, kg_stats, load_doc_entries,
                 render_figure)

__version__ = "0.1.0"

__all__ = [
    "MitmError",
    "Apply", "Expr", "FloatLit", "IntLit", "ListLit", "StrLit", "Sym",
    "SymbolUri", "Var", "expr_from_json", "expr_to_json", "parse_uri",
    "Constant", "Diagnostic", "FlatConstant", "Structure", "Theory",
    "TheoryGraph", "View", "ViewReport", "load_graph",
    "Codec", "CodecExpr", "CodecRegistry", "default_registry",
    "parse_codec_expr",
    "DbSchema", "FileSource", "HttpSource", "QueryReport", "SchemaField",
    "TypedRecord", "load_schema", "query", "translate_record",
    "PermSystem", "SetSystem", "ToySystem",
    "Alignment", "Broker", "BrokerServer", "Handle", "WireClient",
    "build_alignments", "default_broker", "default_graph", "serve",
    "DocEntry", "InconsistencyReport", "KnowledgeGraph", "doc_check",
    "export_dot", "import_kg", "kg_stats", "load_doc_entries",
    "render_figure",
]

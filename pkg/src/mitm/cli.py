"""Command-line surface: graph checking, flattening, codec round trips,
database queries, the broker server and a scripted client, knowledge-graph
reports, the documentation checker, and an end-to-end demo.

Results go to stdout, diagnostics to stderr; domain errors exit with 1 and
usage errors with 2.  Every subcommand accepts ``--json`` for a
machine-readable rendering of the same facts.
"""

from __future__ import annotations

import csv
import functools
import json
import logging
import sys
from pathlib import Path

import click

from . import broker as broker_mod
from . import kg as kg_mod
from .broker import FIXTURES, default_broker, default_graph, run_script
from .codec import default_registry
from .errors import MitmError, UnresolvedReference
from .graph import dump_flat, load_graph, render_sort
from .schema import FileSource, HttpSource, load_schema, query
from .terms import IntLit, expr_from_json, expr_to_json

log = logging.getLogger("mitm")


def _setup_logging(level: str | None):
    if level:
        logging.basicConfig(level=getattr(logging, level.upper(), logging.INFO),
                            stream=sys.stderr)


def domain_errors(f):
    """Map domain exceptions onto stderr output and exit code 1."""
    @functools.wraps(f)
    def wrapper(*args, **kwargs):
        try:
            return f(*args, **kwargs)
        except MitmError as exc:
            click.echo(f"error: {exc}", err=True)
            sys.exit(1)
    return wrapper


def _load_graph_file(path: str | None):
    if path is None:
        return default_graph()
    try:
        document = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UnresolvedReference(f"cannot read graph file {path!r}: {exc}")
    return load_graph(document)


graph_option = click.option(
    "--graph", "graph_path", envvar="MITM_GRAPH", default=None,
    help="Theory graph file (defaults to the shipped core ontology).")
json_option = click.option(
    "--json", "as_json", is_flag=True, help="Machine-readable output.")


@click.group()
@click.option("--log-level", envvar="MITM_LOG", default=None,
              help="Logging level (debug, info, warning).")
def main(log_level):
    """Interoperability toolkit: typed terms, codecs, theory graphs, and a
    delegation broker between computational systems."""
    _setup_logging(log_level)


# --- graph commands ---------------------------------------------------------

@main.command()
@graph_option
@json_option
@domain_errors
def check(graph_path, as_json):
    """Check every view of a theory graph for totality and well-typedness."""
    g = _load_graph_file(graph_path)
    diagnostics = g.check_graph()
    if as_json:
        click.echo(json.dumps({
            "graph": g.id,
            "theories": len(g.theories),
            "views": len(g.views),
            "diagnostics": [
                {"view": d.view, "kind": d.kind, "subject": d.subject,
                 "reason": d.reason} for d in diagnostics],
        }))
    else:
        for d in diagnostics:
            click.echo(d.render())
        click.echo(f"graph {g.id}: {len(g.theories)} theories, "
                   f"{len(g.views)} views, {len(diagnostics)} diagnostics")
    if diagnostics:
        sys.exit(1)


@main.command()
@click.argument("theory")
@graph_option
@json_option
@domain_errors
def flatten(theory, graph_path, as_json):
    """Print the flattened constants of THEORY in declaration order."""
    g = _load_graph_file(graph_path)
    flat = g.flatten(theory)
    if as_json:
        click.echo(json.dumps(dump_flat(flat)))
        return
    for fc in flat:
        if fc.role == "function":
            sig = "(" + ", ".join(render_sort(a) for a in fc.args) + ")"
            sig += " -> " + render_sort(fc.result)
        elif fc.role in ("object", "axiom"):
            sig = " : " + render_sort(fc.result)
        else:
            sig = ""
        click.echo(f"{fc.role:8} {fc.name}{sig}  [{fc.origin.render()}]")


# --- codecs -----------------------------------------------------------------

@main.group()
def codec():
    """Encode and decode data through composable codecs."""


@codec.command()
@click.argument("codec_text")
@click.argument("data")
@json_option
@domain_errors
def decode(codec_text, data, as_json):
    """Decode raw JSON DATA through the codec into an expression."""
    registry = default_registry()
    cexpr = registry.parse(codec_text)
    try:
        raw = json.loads(data)
    except ValueError as exc:
        raise click.UsageError(f"DATA is not JSON: {exc}")
    expr = registry.decode(cexpr, raw)
    body = expr_to_json(expr)
    if as_json:
        click.echo(json.dumps({"codec": cexpr.render(), "expr": body}))
    else:
        click.echo(json.dumps(body))


@codec.command()
@click.argument("codec_text")
@click.argument("expr_json")
@json_option
@domain_errors
def encode(codec_text, expr_json, as_json):
    """Encode an expression (JSON term form) back into raw data."""
    registry = default_registry()
    cexpr = registry.parse(codec_text)
    try:
        expr = expr_from_json(json.loads(expr_json))
    except ValueError as exc:
        raise click.UsageError(f"EXPR_JSON is not a JSON term: {exc}")
    raw = registry.encode(cexpr, expr)
    if as_json:
        click.echo(json.dumps({"codec": cexpr.render(), "data": raw}))
    else:
        click.echo(json.dumps(raw))


# --- database bridge --------------------------------------------------------

@main.group()
def db():
    """Query typed views of database collections."""


@db.command(name="query")
@click.option("--schema", "schema_path", default=None,
              help="Schema file (defaults to the shipped curve schema).")
@click.option("--source", "source_spec", envvar="MITM_DATA_DIR", default=None,
              help="file:DIR or http:URL (default: shipped fixture data).")
@click.option("--filter", "filters", multiple=True, metavar="FIELD=VALUE",
              help="Equality filter; VALUE is raw JSON, bare text is a string.")
@click.option("--limit", default=10, show_default=True)
@graph_option
@json_option
@domain_errors
def db_query(schema_path, source_spec, filters, limit, graph_path, as_json):
    """Fetch records, translate them field by field, and print the result."""
    g = _load_graph_file(graph_path)
    registry = default_registry()
    path = Path(schema_path) if schema_path else FIXTURES / "ec_schema.json"
    schema = load_schema(json.loads(path.read_text()), g, registry)
    src = _record_source(source_spec)
    expr_filter = {}
    for item in filters:
        if "=" not in item:
            raise click.UsageError(f"filter must be FIELD=VALUE: {item!r}")
        name, _, value = item.partition("=")
        f = schema.fields.get(name)
        if f is None:
            raise UnresolvedReference(f"filter on unknown field {name!r}")
        try:
            raw = json.loads(value)
        except ValueError:
            raw = value
        expr_filter[name] = registry.decode(f.codec, raw)
    report = query(schema, src, expr_filter, limit=limit, registry=registry)
    for i, msg in report.errors:
        click.echo(f"record {i}: {msg}", err=True)
    if as_json:
        click.echo(json.dumps({
            "collection": schema.collection,
            "count": len(report.records),
            "records": [{k: expr_to_json(v) for k, v in r.values.items()}
                        for r in report.records],
            "errors": [{"index": i, "message": m} for i, m in report.errors],
        }))
    else:
        for r in report.records:
            click.echo(json.dumps({k: expr_to_json(v)
                                   for k, v in r.values.items()}))
        click.echo(f"{len(report.records)} records, "
                   f"{len(report.errors)} errors", err=True)


def _record_source(spec: str | None):
    if spec is None:
        return FileSource(FIXTURES / "data")
    if spec.startswith("file:"):
        return FileSource(spec[len("file:"):])
    if spec.startswith("http:") or spec.startswith("https:"):
        return HttpSource(spec)
    # a bare path means a fixture directory
    return FileSource(spec)


# --- broker server and client -----------------------------------------------

@main.command()
@graph_option
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", envvar="MITM_PORT", default=0, show_default=True)
@json_option
@domain_errors
def serve(graph_path, host, port, as_json):
    """Serve the broker with both toy systems over newline-delimited JSON."""
    g = _load_graph_file(graph_path)
    server = broker_mod.BrokerServer(default_broker(g), host, port)
    if as_json:
        click.echo(json.dumps({"host": host, "port": server.port}))
    else:
        click.echo(f"listening on {host}:{server.port}", err=True)
    sys.stdout.flush()
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.shutdown()
        server.server_close()


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", envvar="MITM_PORT", required=True, type=int)
@click.option("--script", "script_path", required=True,
              help="Transcript file, one JSON request per line.")
@json_option
@domain_errors
def client(host, port, script_path, as_json):
    """Replay a request transcript against a running broker."""
    try:
        lines = Path(script_path).read_text().splitlines()
    except OSError as exc:
        raise click.UsageError(str(exc))
    responses = run_script(host, port, lines)
    if as_json:
        click.echo(json.dumps(responses))
    else:
        for r in responses:
            click.echo(json.dumps(r))


# --- knowledge-graph reports ------------------------------------------------

@main.group()
def kg():
    """Import, analyze, and render knowledge graphs."""


def _load_kg(path: str):
    try:
        document = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise UnresolvedReference(f"cannot read graph file {path!r}: {exc}")
    return kg_mod.import_kg(document)


@kg.command()
@click.argument("path")
@click.option("--report-dir", default=None,
              help="Write a CSV summary and rendered figures to a directory.")
@json_option
@domain_errors
def stats(path, report_dir, as_json):
    """Vertex, edge, and connected-component counts."""
    g = _load_kg(path)
    v, e, c = kg_mod.kg_stats(g)
    if report_dir:
        out = Path(report_dir)
        out.mkdir(parents=True, exist_ok=True)
        degree = {vx.id: 0 for vx in g.vertices}
        for edge in g.edges:
            degree[edge.src] += 1
            degree[edge.dst] += 1
        with (out / "vertices.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["id", "kind", "label", "degree"])
            for vx in sorted(g.vertices, key=lambda x: x.id):
                w.writerow([vx.id, vx.kind, vx.label, degree[vx.id]])
        with (out / "summary.csv").open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["vertices", "edges", "components"])
            w.writerow([v, e, c])
        kg_mod.render_figure(g, out / "graph.png")
        kg_mod.render_degree_histogram(g, out / "degrees.png")
        click.echo(f"report written to {out}", err=True)
    if as_json:
        click.echo(json.dumps({"vertices": v, "edges": e, "components": c}))
    else:
        click.echo(f"vertices={v} edges={e} components={c}")


@kg.command()
@click.argument("path")
@click.option("-o", "--output", default=None, help="Write DOT here instead of stdout.")
@json_option
@domain_errors
def dot(path, output, as_json):
    """Deterministic DOT export."""
    g = _load_kg(path)
    text = kg_mod.export_dot(g)
    if output:
        Path(output).write_text(text)
        payload = {"written": output}
    else:
        payload = {"dot": text}
    if as_json:
        click.echo(json.dumps(payload))
    elif output:
        click.echo(f"wrote {output}", err=True)
    else:
        click.echo(text, nl=False)


@kg.command()
@click.argument("path")
@click.option("-o", "--output", required=True, help="Image file to render.")
@json_option
@domain_errors
def plot(path, output, as_json):
    """Render the graph to an image file."""
    g = _load_kg(path)
    kg_mod.render_figure(g, output)
    if as_json:
        click.echo(json.dumps({"written": output}))
    else:
        click.echo(f"wrote {output}", err=True)


# --- documentation checker --------------------------------------------------

@main.command(name="doc-check")
@click.argument("entries_path")
@click.option("--graph", "graph_path", default=None,
              help="Graph with the declarations (default: shipped sample).")
@click.option("--theory", default="gap", show_default=True)
@json_option
@domain_errors
def doc_check_cmd(entries_path, graph_path, theory, as_json):
    """Cross-check documented names against a theory's declarations."""
    if graph_path is None:
        graph_path = str(FIXTURES / "gapdoc.json")
    g = _load_graph_file(graph_path)
    try:
        with open(entries_path) as fh:
            entries = kg_mod.load_doc_entries(fh)
    except OSError as exc:
        raise click.UsageError(str(exc))
    report = kg_mod.doc_check(entries, g, theory)
    if as_json:
        click.echo(json.dumps({
            "entries": len(entries),
            "totals": report.totals,
            "inconsistencies": [
                {"name": e.name, "documented_kind": e.documented_kind,
                 "declared_role": role, "kind": kind,
                 "loc": e.source_location}
                for e, role, kind in report.entries],
        }))
    else:
        for e, role, kind in report.entries:
            click.echo(f"{kind}: {e.name} (documented {e.documented_kind}"
                       f"{'' if role is None else ', declared ' + role}) "
                       f"at {e.source_location}")
        t = report.totals
        click.echo(f"{len(entries)} entries: "
                   f"missing={t['missing-declaration']} "
                   f"kind={t['kind-mismatch']} arity={t['arity-mismatch']}")
    if report.entries:
        sys.exit(1)


# --- demo -------------------------------------------------------------------

@main.command()
@json_option
@domain_errors
def demo(as_json):
    """Route one computation through both toy systems via the core ontology."""
    from .terms import ListLit, parse_uri

    b = default_broker()
    sid = b.open_session()
    steps = []

    def step(text, **facts):
        steps.append({"text": text, **facts})
        if not as_json:
            click.echo(text)

    def local_name(core, system):
        uri = parse_uri(core)
        fc = b.graph.resolve(uri)
        return b.alignments[fc.origin].per_system[system].name

    def mklist(xs):
        return ListLit(tuple(IntLit(x) for x in xs))

    s = b.call(sid, "setsys", "mkset", [mklist([1, 2, 3])])
    step(f"setsys mkset [1,2,3] → handle {s.token}",
         handle=s.token, system=s.system, type=s.mitm_type.render())
    card = b.delegate(sid, None, parse_uri("mitm:card?card"), [s])
    step(f"delegated card?card → {local_name('mitm:card?card', 'setsys')} "
         f"→ {card.value}", core="mitm:card?card", system="setsys",
         result=card.value)
    p = b.call(sid, "permsys", "PermList", [mklist([2, 3, 1])])
    step(f"permsys PermList [2,3,1] → handle {p.token}",
         handle=p.token, system=p.system, type=p.mitm_type.render())
    order = b.delegate(sid, None, parse_uri("mitm:perms?order"), [p])
    step(f"delegated perms?order → {local_name('mitm:perms?order', 'permsys')} "
         f"→ {order.value}", core="mitm:perms?order", system="permsys",
         result=order.value)
    g = b.call(sid, "permsys", "GroupByGenerators", [p])
    step(f"permsys GroupByGenerators ⟨(1 2 3)⟩ → handle {g.token}",
         handle=g.token, system=g.system, type=g.mitm_type.render())
    size = b.delegate(sid, None, parse_uri("mitm:card?card"), [g])
    step(f"delegated card?card → {local_name('mitm:card?card', 'permsys')} "
         f"→ {size.value}", core="mitm:card?card", system="permsys",
         result=size.value)
    b.close_session(sid)
    if as_json:
        click.echo(json.dumps(steps))


if __name__ == "__main__":
    main()

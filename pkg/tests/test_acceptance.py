"""Acceptance suite: one test per headline guarantee, each printing a single
pass/fail line with its runtime bound.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the lines.
"""

import itertools
import json
import random
import sys
import time

import pytest

from click.testing import CliRunner

from mitm.broker import Broker, WireClient, default_broker, serve
from mitm.cli import main as cli_main
from mitm.codec import default_registry, images_to_cycles, rational_expr
from mitm.errors import NoAlignment
from mitm.graph import dump_flat, load_graph
from mitm.kg import doc_check, import_kg, kg_stats, load_doc_entries
from mitm.schema import FileSource, load_schema, query
from mitm.terms import Apply, IntLit, ListLit, StrLit, Sym, parse_uri

from conftest import FIXTURE_DIR, load_fixture
from test_broker import NullTransport, synthetic_graph
from test_kg import UnionFind
from test_schema import brute_force


class criterion:
    """Times a block, enforces its budget, and prints one PASS/FAIL line."""

    def __init__(self, name, seconds):
        self.name = name
        self.seconds = seconds

    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        elapsed = time.perf_counter() - self.start
        status = "PASS" if exc_type is None and elapsed < self.seconds else "FAIL"
        print(f"[{status}] {self.name}: {elapsed:.2f}s (budget {self.seconds}s)",
              file=sys.stderr)
        if exc_type is None:
            assert elapsed < self.seconds, \
                f"{self.name} exceeded its {self.seconds}s budget"
        return False


def int_list(xs):
    return ListLit(tuple(IntLit(x) for x in xs))


def test_codec_worked_example():
    with criterion("codec worked example (4x^2 + 2/3)", 1.0):
        reg = default_registry()
        cexpr = reg.parse(
            "polynomial-as-reversed-list(rational-as-tuple-of-int)")
        raw = [[2, 3], [0, 1], [4, 1]]
        expr = reg.decode(cexpr, raw)
        coeffs = expr.args[0].items
        assert coeffs == (rational_expr(2, 3), rational_expr(0, 1),
                          rational_expr(4, 1))
        assert reg.encode(cexpr, expr) == raw


def test_codec_round_trip_suite():
    with criterion("codec round trips: 1000 random + exhaustive S3/S4", 30.0):
        from test_codec import (SCALARS, brute_cycles, random_raw,
                                test_thousand_case_round_trips)
        reg = default_registry()
        test_thousand_case_round_trips(reg)
        img = reg.parse("permutation-as-images")
        cyc = reg.parse("permutation-as-cycles")
        for n in (3, 4):
            for perm in itertools.permutations(range(1, n + 1)):
                images = list(perm)
                assert images_to_cycles(images) == brute_cycles(images)
                assert reg.decode(cyc, images_to_cycles(images)) == \
                    reg.decode(img, images)


def test_theory_graph_suite():
    with criterion("theory graph: clean algebra fixture, golden flatten, "
                   "single-deletion mutations", 5.0):
        g = load_graph(load_fixture("algebra.json"))
        assert g.check_graph() == []
        assert dump_flat(g.flatten("Ring")) == load_fixture("ring_flat.json")
        for fixture in ("algebra.json", "mitm.json"):
            doc = load_fixture(fixture)
            for vi, view in enumerate(doc["views"]):
                for name in list(view["assignments"]):
                    mutated = load_fixture(fixture)
                    del mutated["views"][vi]["assignments"][name]
                    diagnostics = load_graph(mutated).check_graph()
                    assert len(diagnostics) == 1, (fixture, view["name"], name)
                    d = diagnostics[0]
                    assert (d.view, d.kind, d.subject) == \
                        (view["name"], "missing", name)


def test_delegation_end_to_end():
    with criterion("delegation: demo transcript, wire parity, "
                   "interview-deletion mutation", 5.0):
        result = CliRunner().invoke(cli_main, ["demo"])
        assert result.exit_code == 0, result.output
        lines = result.stdout.strip().splitlines()
        assert lines[1] == "delegated card?card → cardinality → 3"
        assert lines[-1] == "delegated card?card → Size → 3"

        # the same route over a TCP server on an ephemeral port
        server = serve()
        try:
            client = WireClient("127.0.0.1", server.port)
            made = client.request(
                "call", system="setsys", symbol="mkset",
                args=[{"expr": {"list": [{"int": "1"}, {"int": "2"},
                                         {"int": "3"}]}}])
            token = made["ok"]["handle"]["token"]
            via_set = client.request("delegate", core="mitm:card?card",
                                     args=[{"handle": token}])
            perm = client.request(
                "call", system="permsys", symbol="GroupByGenerators",
                args=[{"expr": {"app": [
                    {"sym": "mitm:perms?perm_images"},
                    {"list": [{"int": "2"}, {"int": "3"}, {"int": "1"}]}]}}])
            via_group = client.request(
                "delegate", core="mitm:card?card",
                args=[{"handle": perm["ok"]["handle"]["token"]}])
            assert via_set["ok"]["expr"] == via_group["ok"]["expr"] == \
                {"int": "3"}
            client.close()
        finally:
            server.shutdown()
            server.server_close()

        # deleting the card interview assignment flips to no-alignment
        doc = load_fixture("mitm.json")
        for v in doc["views"]:
            if v["name"] == "iv-sage-card":
                del v["assignments"]["card"]
        b = default_broker(load_graph(doc))
        sid = b.open_session()
        s = b.call(sid, "setsys", "mkset", [int_list([1, 2, 3])])
        with pytest.raises(NoAlignment):
            b.delegate(sid, None, parse_uri("mitm:card?card"), [s])


def test_alignment_scaling():
    with criterion("alignment table: one entry per (core symbol, system), "
                   "k in {2,3,4}", 5.0):
        for k in (2, 3, 4):
            g = synthetic_graph(k)
            b = Broker(g)
            for i in range(k):
                b.register_system(f"sys{i}", f"iface{i}", NullTransport())
            assert len(b.alignments) == 2
            assert sum(len(a.per_system) for a in b.alignments.values()) \
                == 2 * k
            for a in b.alignments.values():
                assert len(a.per_system) == k


def test_kg_and_doc_check():
    with criterion("kg_stats union-find oracle x100, doc_check seeded "
                   "inconsistencies 3+2+2", 10.0):
        rng = random.Random(99)
        for _ in range(100):
            n = rng.choice([2, 10, 100, 1000, 10 ** 4])
            m = rng.randrange(0, min(2 * n, 400, n * (n - 1) // 2 + 1))
            edges = set()
            while len(edges) < m:
                a, b = rng.randrange(n), rng.randrange(n)
                if a != b:
                    edges.add((min(a, b), max(a, b)))
            g = import_kg({
                "vertices": [{"id": f"v{i}"} for i in range(n)],
                "edges": [{"from": f"v{a}", "to": f"v{b}"}
                          for a, b in edges]})
            uf = UnionFind(n)
            for a, b in edges:
                uf.union(a, b)
            expect = len({uf.find(i) for i in range(n)})
            assert kg_stats(g) == (n, len(edges), expect)

        docs_graph = load_graph(load_fixture("gapdoc.json"))
        with open(FIXTURE_DIR / "doc_entries_seeded.jsonl") as fh:
            seeded = doc_check(load_doc_entries(fh), docs_graph, "gap")
        assert seeded.totals == {"missing-declaration": 3,
                                 "kind-mismatch": 2, "arity-mismatch": 2}
        assert len(seeded.entries) == 7
        with open(FIXTURE_DIR / "doc_entries_clean.jsonl") as fh:
            clean = doc_check(load_doc_entries(fh), docs_graph, "gap")
        assert clean.entries == []


def test_schema_oracle_equivalence():
    with criterion("schema bridge: 50 random filters equal brute force", 5.0):
        registry = default_registry()
        core_graph = load_graph(load_fixture("mitm.json"))
        schema = load_schema(load_fixture("ec_schema.json"), core_graph,
                             registry)
        records = [json.loads(line) for line in
                   (FIXTURE_DIR / "data" / "ec_curves.jsonl")
                   .read_text().splitlines() if line.strip()]
        src = FileSource(FIXTURE_DIR / "data")
        rng = random.Random(2024)
        makers = {"conductor": lambda r: IntLit(r["conductor"]),
                  "label": lambda r: StrLit(r["label"]),
                  "rank": lambda r: IntLit(r.get("rank", 0)),
                  "torsion_order": lambda r: IntLit(r.get("torsion_order", 1))}
        for _ in range(50):
            base = rng.choice(records)
            chosen = rng.sample(sorted(makers), rng.randrange(0, 3))
            expr_filter = {n: makers[n](base) for n in chosen}
            limit = rng.choice([0, 1, 5, 50])
            report = query(schema, src, expr_filter, limit=limit,
                           registry=registry)
            raw_filter = {n: registry.encode(schema.fields[n].codec, v)
                          for n, v in expr_filter.items()}
            assert [r.raw for r in report.records] == \
                brute_force(records, raw_filter, limit)
            assert report.errors == []

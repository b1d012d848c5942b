"""Expression language: URIs, structural operations, JSON round trips."""

import math

import pytest
from hypothesis import given, strategies as st

from mitm.errors import MalformedUri
from mitm.terms import (Apply, FloatLit, IntLit, ListLit, StrLit, Sym,
                        SymbolUri, Var, expr_from_json, expr_to_json,
                        free_vars, parse_uri, substitute)

# --- symbol URIs ------------------------------------------------------------

def test_uri_parse_render_round_trip():
    uri = parse_uri("alg:Monoid?op")
    assert uri == SymbolUri("alg", "Monoid", "op")
    assert uri.render() == "alg:Monoid?op"


def test_uri_default_graph():
    assert parse_uri("Monoid?op", "alg") == SymbolUri("alg", "Monoid", "op")
    with pytest.raises(MalformedUri):
        parse_uri("Monoid?op")


@pytest.mark.parametrize("text", [
    "", "?", "a?", "?b", "a:b", "a:b?c?d", "a::b?c", "a:b c?d", "a:?c",
    ":b?c", "a:b?", 42,
])
def test_uri_rejects_malformed(text):
    with pytest.raises(MalformedUri):
        parse_uri(text, "g")


_segment = st.text(
    st.characters(blacklist_characters="?: \t\n\r\x0b\x0c", min_codepoint=33,
                  max_codepoint=126),
    min_size=1, max_size=8)


@given(_segment, _segment, _segment)
def test_uri_render_parse_identity(g, t, n):
    uri = SymbolUri(g, t, n)
    assert parse_uri(uri.render()) == uri


# --- structural invariants --------------------------------------------------

def test_apply_rejects_literal_head_and_empty_args():
    with pytest.raises(ValueError):
        Apply(IntLit(1), (IntLit(2),))
    with pytest.raises(ValueError):
        Apply(Sym(SymbolUri("g", "t", "f")), ())


def test_float_bit_exact_equality():
    assert FloatLit(0.0) != FloatLit(-0.0)
    assert FloatLit(float("nan")) == FloatLit(float("nan"))
    assert hash(FloatLit(1.5)) == hash(FloatLit(1.5))
    assert FloatLit(1.0) != IntLit(1)


def test_int_literal_arbitrary_precision():
    big = 10 ** 60 + 7
    assert expr_from_json(expr_to_json(IntLit(big))) == IntLit(big)
    # the wire form is a decimal string, never a JSON number
    assert expr_to_json(IntLit(big)) == {"int": str(big)}


def test_substitute_and_free_vars():
    f = Sym(SymbolUri("g", "t", "f"))
    e = Apply(f, (Var("x"), ListLit((Var("y"), IntLit(1)))))
    assert free_vars(e) == {"x", "y"}
    out = substitute(e, {"x": IntLit(7)})
    assert free_vars(out) == {"y"}
    assert out.args[0] == IntLit(7)
    # the original is untouched
    assert e.args[0] == Var("x")


# --- canonical JSON ---------------------------------------------------------

def exprs():
    leaves = st.one_of(
        st.integers().map(IntLit),
        st.text(max_size=10).map(StrLit),
        st.floats(allow_nan=False).map(FloatLit),
        st.text(min_size=1, max_size=5,
                alphabet="abcxyz").map(Var),
        st.builds(lambda n: Sym(SymbolUri("g", "t", n)),
                  st.text(min_size=1, max_size=5, alphabet="fghuv")),
    )
    return st.recursive(
        leaves,
        lambda inner: st.one_of(
            st.lists(inner, max_size=4).map(lambda xs: ListLit(tuple(xs))),
            st.builds(lambda n, args: Apply(Sym(SymbolUri("g", "t", n)),
                                            tuple(args)),
                      st.text(min_size=1, max_size=5, alphabet="fgh"),
                      st.lists(inner, min_size=1, max_size=3))),
        max_leaves=20)


@given(exprs())
def test_expr_json_round_trip(e):
    assert expr_from_json(expr_to_json(e)) == e


@pytest.mark.parametrize("doc", [
    {}, {"sym": "a"}, {"app": []}, {"app": [{"int": "1"}]},
    {"int": "x"}, {"int": True}, {"float": "1.0"}, {"list": 3},
    {"unknown": 1}, {"sym": "g:t?n", "var": "x"}, [1, 2], "x",
])
def test_expr_from_json_rejects_malformed(doc):
    with pytest.raises((ValueError, MalformedUri)):
        expr_from_json(doc)


def test_negative_zero_survives_json():
    e = FloatLit(-0.0)
    back = expr_from_json(expr_to_json(e))
    assert math.copysign(1.0, back.value) == -1.0

"""Term validation, the canonical encoding, and the parsers.

The encoding tests freeze exact byte strings: these are the inputs to
every content hash, so any drift here is a format break, not a refactor.
"""

import pytest
from hypothesis import given, settings, strategies as st

from iv.errors import MalformedLine, MalformedQuery
from iv.model import (
    Atom,
    Binding,
    Literal,
    MapQuery,
    Pattern,
    Quad,
    Variable,
    canonical_serialize,
    encode_term,
    parse_fact_line,
    parse_pattern,
    parse_query,
    parse_term,
    quad_line,
)

from support import literals, q, quads, small_quads


# ---------------------------------------------------------------------------
# term validation


def test_atom_accepts_the_documented_alphabet():
    for name in ("a", "photo1", "ac:pol-1.pat-0", "a/b#c_d+e.f", "A-Z"):
        assert Atom(name).name == name


@pytest.mark.parametrize("name", ["", "a b", "é", "<x>", "a\n", 'qu"ote', None, 7])
def test_atom_rejects_bad_names(name):
    with pytest.raises(ValueError):
        Atom(name)


def test_literal_requires_str():
    assert Literal("").value == ""
    with pytest.raises(ValueError):
        Literal(7)


@pytest.mark.parametrize("name", ["", "a b", "a-b", "?x", None])
def test_variable_rejects_bad_names(name):
    with pytest.raises(ValueError):
        Variable(name)


def test_quad_field_types_are_enforced():
    with pytest.raises(ValueError):
        Quad(Literal("a"), Atom("p"), Atom("o"), Atom("me"))
    with pytest.raises(ValueError):
        Quad(Atom("s"), Literal("p"), Atom("o"), Atom("me"))
    with pytest.raises(ValueError):
        Quad(Atom("s"), Atom("p"), Variable("o"), Atom("me"))
    with pytest.raises(ValueError):
        Quad(Atom("s"), Atom("p"), Atom("o"), "me")


def test_pattern_predicate_cannot_be_a_literal():
    with pytest.raises(ValueError):
        Pattern(Variable("s"), Literal("p"), Variable("o"))
    # literals are fine in subject and object position
    Pattern(Literal("s"), Atom("p"), Literal("o"))


def test_pattern_variables_in_positional_order_without_repeats():
    p = Pattern(Variable("o"), Variable("p"), Variable("o"))
    assert p.variables() == ("o", "p")
    assert Pattern(Atom("s"), Atom("p"), Atom("o")).variables() == ()


# ---------------------------------------------------------------------------
# queries and bindings


def test_mapquery_validation():
    pat = Pattern(Variable("x"), Atom("p"), Variable("y"))
    with pytest.raises(MalformedQuery):
        MapQuery(())
    with pytest.raises(MalformedQuery):
        MapQuery((pat,) * 17)
    with pytest.raises(MalformedQuery):
        MapQuery((pat,), ("z",))  # not in any pattern
    with pytest.raises(MalformedQuery):
        MapQuery((pat,), ("?x",))  # select names are bare
    with pytest.raises(MalformedQuery):
        MapQuery(("not a pattern",))


def test_mapquery_variable_order_and_projection_default():
    first = Pattern(Variable("b"), Atom("p"), Variable("a"))
    second = Pattern(Variable("a"), Atom("p"), Variable("c"))
    query = MapQuery((first, second))
    assert query.all_variables() == ("b", "a", "c")
    assert query.effective_select == ("b", "a", "c")
    assert MapQuery((first,), ("a",)).effective_select == ("a",)


def test_binding_sorts_items_and_rejects_duplicates():
    b = Binding((("y", Atom("b")), ("x", Atom("a"))))
    assert b.items == (("x", Atom("a")), ("y", Atom("b")))
    assert b == Binding.of({"x": Atom("a"), "y": Atom("b")})
    assert b["x"] == Atom("a")
    assert b.get("missing") is None
    assert "y" in b and "z" not in b
    assert len(b) == 2
    with pytest.raises(KeyError):
        b["z"]
    with pytest.raises(ValueError):
        Binding((("x", Atom("a")), ("x", Atom("b"))))


# ---------------------------------------------------------------------------
# encoding (frozen forms)


def test_encode_term_frozen_examples():
    assert encode_term(Atom("photo1")) == "<photo1>"
    assert encode_term(Variable("x")) == "?x"
    assert encode_term(Literal("plain")) == '"plain"'
    assert encode_term(Literal('say "hi"')) == '"say \\"hi\\""'
    assert encode_term(Literal("a\\b")) == '"a\\\\b"'
    assert encode_term(Literal("two\nlines")) == '"two\\nlines"'
    with pytest.raises(TypeError):
        encode_term("bare string")


def test_escape_order_keeps_encodings_distinct():
    # the classic collision: a literal backslash-n vs a real newline
    assert encode_term(Literal("a\\n")) != encode_term(Literal("a\n"))


def test_quad_line_frozen_form():
    assert quad_line(q("a", "b", '"hi"')) == '<a> <b> "hi" @alice'
    assert quad_line(q("a", "b", "c", "bob")) == "<a> <b> <c> @bob"


def test_canonical_serialize_frozen_bytes():
    facts = [q("z", "y", "x", "bob"), q("a", "b", "c"), q("a", "b", '"hi"')]
    want = b'<a> <b> "hi" @alice\n<a> <b> <c> @alice\n<z> <y> <x> @bob\n'
    assert canonical_serialize(facts) == want
    assert len(want) == 56


def test_canonical_serialize_ignores_order_and_duplicates():
    facts = [q("a", "b", "c"), q("d", "e", "f")]
    assert canonical_serialize(facts) == canonical_serialize(list(reversed(facts)))
    assert canonical_serialize(facts * 3) == canonical_serialize(facts)
    assert canonical_serialize([]) == b""


@given(quads)
def test_fact_line_round_trip(quad):
    assert parse_fact_line(quad_line(quad)) == quad
    assert parse_fact_line(quad_line(quad).encode("utf-8")) == quad


@given(literals, literals)
def test_encode_term_injective_on_literals(a, b):
    assert (encode_term(a) == encode_term(b)) == (a.value == b.value)


@settings(max_examples=50)
@given(st.lists(small_quads, max_size=8))
def test_serialize_is_permutation_invariant(facts):
    assert canonical_serialize(facts) == canonical_serialize(
        sorted(facts, key=quad_line)
    )


# ---------------------------------------------------------------------------
# parsing errors


@pytest.mark.parametrize(
    "line",
    [
        "",
        "<a> <b> <c>",  # missing author
        "<a> <b> <c> @x @y",
        "<a> <b> <c> <d> @x",
        "?v <b> <c> @x",  # variable in a ground fact
        "<a> ?v <c> @x",
        '<a> <b> "unterminated @x',
        '<a> <b> "bad\\q" @x',  # unknown escape
        '<a> <b> "dangling\\',
        "<a> <b> <c> @",  # empty author
        "<a> <b e> <c> @x",  # space inside atom
        "<a> <b> <c> @x junk",
        "@x <a> <b> <c>",
        "; <a> <b> @x",
    ],
)
def test_parse_fact_line_rejects(line):
    with pytest.raises(MalformedLine):
        parse_fact_line(line)


def test_parse_fact_line_rejects_raw_newline_inside_literal():
    with pytest.raises(MalformedLine):
        parse_fact_line('<a> <b> "two\nlines" @x')


def test_parse_fact_line_rejects_non_utf8_bytes():
    with pytest.raises(MalformedLine):
        parse_fact_line(b"<a> <b> <c> @x\xff")


def test_parse_term_single_term_only():
    assert parse_term("<a>") == Atom("a")
    assert parse_term(' "hi there" ') == Literal("hi there")
    assert parse_term("?x") == Variable("x")
    for text in ("", "<a> <b>", "@x", ";", "<a>;"):
        with pytest.raises(MalformedQuery):
            parse_term(text)


def test_parse_pattern():
    p = parse_pattern("?s <likes> ?o")
    assert p == Pattern(Variable("s"), Atom("likes"), Variable("o"))
    for text in ("?s <likes>", "?s <p> ?o ; ?a <p> ?b", "?s <p> ?o @alice"):
        with pytest.raises(MalformedQuery):
            parse_pattern(text)


def test_parse_query():
    query = parse_query('?s <type> <Photo> ; ?s <caption> ?c')
    assert query.patterns == (
        Pattern(Variable("s"), Atom("type"), Atom("Photo")),
        Pattern(Variable("s"), Atom("caption"), Variable("c")),
    )
    assert query.select == ()
    # whitespace and newlines between tokens are free
    assert parse_query("?s\n<type>\t<Photo>") .patterns == query.patterns[:1]


@pytest.mark.parametrize(
    "text",
    [
        "",
        "   ",
        "?s <p>",  # two terms
        "?s <p> ?o ;",  # trailing empty pattern
        '?s "lit" ?o',  # literal predicate
        "?s <p> ?o @alice",  # author has no place in patterns
        "?s <p> ?o ; ?x",
    ],
)
def test_parse_query_rejects(text):
    with pytest.raises(MalformedQuery):
        parse_query(text)


@given(quads)
def test_query_text_round_trip_for_ground_patterns(quad):
    text = " ".join(encode_term(t) for t in quad.triple())
    query = parse_query(text)
    assert query.patterns == (Pattern(*quad.triple()),)

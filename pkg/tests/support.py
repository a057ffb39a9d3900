"""Builders and hypothesis strategies shared across the test modules."""

import hypothesis.strategies as st

from iv.model import Atom, Literal, MapQuery, Pattern, Quad, Variable

ALICE = Atom("alice")
BOB = Atom("bob")
CAROL = Atom("carol")

# Frozen digests, computed independently with `sha256sum` over the
# documented object byte layout (`<kind> SP <len> LF <body>`).
# sha256("factset 0\n"):
EMPTY_FACTSET = "741ef6aad4b936e2fc86fd2acee26c340407cd84bb9e1f949b3b950deab050c0"
# sha256("factset 56\n" + three sorted fact lines; see test_model):
THREE_QUAD_FACTSET = "ccf2d282df95854d4d444e4546692477c0fe2e401a8e1dc920cf0f5ec7339ba2"
# sha256 of the 100-byte root commit object: empty tree, author alice,
# seq 0, msg "init":
ALICE_ROOT_COMMIT = "27f8ab97387bed5eed1cb98571fa63794d5e81f1720bc8a792d983108a42a6c2"


def q(s, p, o, author="alice") -> Quad:
    """Terse quad builder; a quoted object string becomes a Literal."""
    if isinstance(o, (Atom, Literal)):
        obj = o
    elif o.startswith('"'):
        obj = Literal(o[1:-1])
    else:
        obj = Atom(o)
    return Quad(Atom(s), Atom(p), obj, Atom(author))


# full-width strategies: arbitrary valid terms
ATOM_ALPHABET = "abcdefgXYZ0123456789_:./#+-"
VAR_ALPHABET = "abcxyz_019"

atoms = st.builds(Atom, st.text(ATOM_ALPHABET, min_size=1, max_size=12))
literals = st.builds(Literal, st.text(max_size=24))
variables = st.builds(Variable, st.text(VAR_ALPHABET, min_size=1, max_size=6))
objects = st.one_of(atoms, literals)
quads = st.builds(Quad, atoms, atoms, objects, atoms)

# desk-scale strategies: tiny pools so joins actually hit
_SMALL_ATOMS = [Atom("a"), Atom("b"), Atom("c")]
_SMALL_OBJECTS = [Atom("a"), Atom("b"), Literal("v"), Literal("w")]
_SMALL_TERMS = [Atom("a"), Atom("b"), Variable("x"), Variable("y")]

small_quads = st.builds(
    Quad,
    st.sampled_from(_SMALL_ATOMS),
    st.sampled_from(_SMALL_ATOMS),
    st.sampled_from(_SMALL_OBJECTS),
    st.sampled_from([Atom("alice"), Atom("bob")]),
)
small_factsets = st.frozensets(small_quads, max_size=6)
small_patterns = st.builds(
    Pattern,
    st.sampled_from(_SMALL_TERMS),
    st.sampled_from([Atom("a"), Atom("b"), Variable("p")]),
    st.sampled_from(_SMALL_TERMS + [Literal("v")]),
)
small_queries = st.builds(
    lambda ps: MapQuery(tuple(ps)), st.lists(small_patterns, min_size=1, max_size=3)
)

from __future__ import annotations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triguard.extension import isomorphic
from triguard.model import (
    Atom,
    Constant,
    Null,
    Query,
    Rule,
    Substitution,
    Variable,
    apply_substitution,
    is_connected,
    mgu,
    unifiers,
)
from triguard.parser import parse_atoms, parse_rule

X, Y, Z, V, W = (Variable(n) for n in "XYZVW")
X1, Z1, X2, Y2, Z2 = (Variable(n) for n in ("X1", "Z1", "X2", "Y", "Z2"))
c1, c2 = Constant("c1"), Constant("c2")


def atoms(text):
    return parse_atoms(text)


def test_apply_identity():
    assert apply_substitution(atoms("t(X,Y)"), Substitution()) == tuple(atoms("t(X,Y)"))


def test_apply_renames_v_to_z1():
    theta = Substitution({X1: X1, V: Z1})
    assert apply_substitution(atoms("t(X1,V)"), theta) == tuple(atoms("t(X1,Z1)"))


def test_apply_grounds_with_null():
    theta = Substitution({X: c1, Y: c2, Z: Null(1)})
    out = apply_substitution(atoms("t(X,Y), u(Y,Z)"), theta)
    assert out == (Atom("t", (c1, c2)), Atom("u", (c2, Null(1))))


def test_constants_are_fixed_points():
    theta = Substitution({X: c2})
    assert theta(c1) == c1
    assert theta(Null(3)) == Null(3)


def test_substitution_rejects_non_variable_keys():
    with pytest.raises(TypeError):
        Substitution({c1: X})


def test_mgu_u_atoms_merges_middle_positions():
    s1 = atoms("u(X1,V,W,Z1)")
    s2 = atoms("u(X2,Y,Y,Z2)")
    theta = mgu(s1, s2)
    assert theta is not None
    assert theta(W) == theta(V) == theta(Y2)
    assert theta(X2) == theta(X1)
    assert theta(Z2) == theta(Z1)
    assert theta.apply_all(s1) == theta.apply_all(s2)


def test_mgu_of_variables_is_renaming():
    theta = mgu(atoms("t(X,Y)"), atoms("t(A,B)"))
    assert theta is not None and theta.is_renaming()


def test_mgu_constant_clash():
    assert mgu(atoms("t(c1,X)"), atoms("t(c2,Y)")) is None


def test_mgu_relation_clash():
    assert mgu(atoms("t(X,Y)"), atoms("u(A,B)")) is None


def test_unifiers_enumerate_every_pairing():
    left, right = atoms("t(X,Y), t(Y,X)"), atoms("t(A,B), t(C,D)")
    out = list(unifiers(left, right))
    # both one-to-one pairings plus the ones collapsing a side onto one atom
    assert len(out) == 4
    for theta in out:
        assert set(theta.apply_all(left)) == set(theta.apply_all(right))


def test_unifier_collapsing_two_left_atoms():
    theta = mgu(atoms("t(X,Y), t(Y,X)"), atoms("t(A,A)"))
    assert theta is not None
    assert theta(X) == theta(Y) == theta(Variable("A"))


def test_is_connected_cases():
    assert is_connected(atoms("t(X,Y)"))
    assert is_connected(atoms("t(X,Y), u(Y,Z)"))
    assert not is_connected(atoms("t(X,Y), u(W,Z)"))
    with pytest.raises(ValueError):
        is_connected(())


def test_rule_existentials_and_frontier():
    r = parse_rule("t(X,Y) -> t(Y,Z), u(Y,Z)")
    assert r.existentials == {Z}
    assert r.frontier == {Y}
    assert r.body_variables == {X, Y}


def test_rule_without_existentials():
    assert parse_rule("t(X,Y) -> t(X,Y)").existentials == frozenset()


def test_rule_rejects_nulls_and_empty_parts():
    with pytest.raises(ValueError):
        Rule("r", (Atom("t", (Null(1),)),), (Atom("t", (X,)),))
    with pytest.raises(ValueError):
        Rule("r", (), (Atom("t", (X,)),))


def test_query_rejects_nulls():
    with pytest.raises(ValueError):
        Query((Atom("t", (Null(1), X)),))


def test_nulls_ordered_by_index():
    assert sorted([Null(3), Null(1), Null(2)]) == [Null(1), Null(2), Null(3)]
    assert str(Null(7)) == "_:n7"


# -- properties ---------------------------------------------------------------

NAMES = ["X", "Y", "Z", "W"]
term_st = st.one_of(
    st.sampled_from(NAMES).map(Variable),
    st.sampled_from(["a", "b"]).map(Constant),
    st.integers(1, 3).map(Null),
)
atom_st = st.builds(lambda r, args: Atom(r, tuple(args)), st.sampled_from(["p", "q"]),
                    st.lists(term_st, min_size=2, max_size=2))
subst_st = st.dictionaries(st.sampled_from(NAMES).map(Variable), term_st, max_size=4).map(Substitution)


@given(st.lists(atom_st, max_size=5), subst_st, subst_st)
def test_composition_law(atom_list, t1, t2):
    once = apply_substitution(apply_substitution(atom_list, t1), t2)
    assert once == apply_substitution(atom_list, t2.compose(t1))


@given(subst_st, st.lists(st.sampled_from(NAMES).map(Variable), max_size=4))
def test_restriction_agrees_on_domain(theta, dom):
    r = theta.restrict(dom)
    for v in dom:
        assert r(v) == theta(v)
    for v in map(Variable, NAMES):
        if v not in dom:
            assert r(v) == v


var_atom_left = st.builds(lambda r, a: Atom(r, tuple(Variable(f"L{k}") for k in a)),
                          st.sampled_from(["p", "q"]), st.lists(st.integers(0, 3), min_size=2, max_size=2))
var_atom_right = st.builds(lambda r, a: Atom(r, tuple(Variable(f"R{k}") if k < 4 else Constant("a") for k in a)),
                           st.sampled_from(["p", "q"]), st.lists(st.integers(0, 4), min_size=2, max_size=2))


@settings(max_examples=200)
@given(st.lists(var_atom_left, min_size=1, max_size=2), st.lists(var_atom_right, min_size=1, max_size=2))
def test_mgu_symmetric_up_to_renaming(s1, s2):
    a = mgu(s1, s2)
    b = mgu(s2, s1)
    if a is None:
        assert b is None
        return
    assert set(a.apply_all(s1)) == set(a.apply_all(s2))
    left = sorted(a.apply_all(s1), key=Atom.sort_key)
    found = [sorted(u.apply_all(s2), key=Atom.sort_key) for u in unifiers(s2, s1)]
    assert any(isomorphic((f, ()), (left, ())) for f in found)


@settings(max_examples=200)
@given(st.lists(var_atom_left, min_size=1, max_size=2), st.lists(var_atom_right, min_size=1, max_size=2))
def test_mgu_is_idempotent(s1, s2):
    theta = mgu(s1, s2)
    if theta is not None:
        once = theta.apply_all(list(s1) + list(s2))
        assert theta.apply_all(once) == once

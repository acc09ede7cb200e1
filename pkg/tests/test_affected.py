from __future__ import annotations

import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from triguard.affected import (
    ExistentialDepGraph,
    NullAnalysis,
    NullSymbol,
    build_dep_graph,
    compute_null_sets,
    cyc_null,
    link_vars,
    var_hat,
)
from triguard.baselines import random_program
from triguard.model import Variable
from triguard.parser import parse_atoms, parse_program, parse_rule

V = Variable


def test_head_existential_position_is_singleton():
    r = parse_rule("t(X) -> u(X,Z)", "s")
    table = compute_null_sets([r])
    assert table.get("s", "head", 0, 1) == {NullSymbol("s", "Z")}


def test_head_universal_position_without_nulls_is_empty():
    r = parse_rule("t(X) -> u(X,Z)", "s")
    assert compute_null_sets([r]).get("s", "head", 0, 0) == frozenset()


def test_sigma2_body_t2_receives_sigma11_null(sigma2):
    table = compute_null_sets(sigma2.rules)
    # s12's body atom t(X,Y), second argument
    assert NullSymbol("s11", "Z") in table.get("s12", "body", 0, 1)


def test_no_recursion_no_edges():
    r = parse_rule("t(X) -> u(X,Z)", "s")
    g = build_dep_graph([r], compute_null_sets([r]))
    assert g.edges == frozenset()
    assert cyc_null(g) == frozenset()


def test_sigma2_self_loop(sigma2):
    g = build_dep_graph(sigma2.rules, compute_null_sets(sigma2.rules))
    n = NullSymbol("s11", "Z")
    assert (n, n) in g.edges
    assert cyc_null(g) == {n}


def test_sigma3_self_loop(sigma3):
    g = build_dep_graph(sigma3.rules, compute_null_sets(sigma3.rules))
    n = NullSymbol("s31", "Z")
    assert (n, n) in g.edges


def test_cyc_null_reachability_clause():
    a, b, c = NullSymbol("r", "A"), NullSymbol("r", "B"), NullSymbol("r", "C")
    g = ExistentialDepGraph(frozenset({a, b, c}), frozenset({(a, a), (a, b), (b, c)}))
    assert cyc_null(g) == {a, b, c}


def test_var_hat_unreached_relations():
    prog = parse_program("t(X,Y) -> t(Y,Z).")
    assert var_hat(prog.rules, parse_atoms("w(X,Y)")) == frozenset()


def test_var_hat_sigma2(sigma2):
    body = sigma2.rules[1].body
    assert var_hat(sigma2.rules, body) >= {V("X"), V("Y"), V("Z")}


def test_var_hat_sigma3(sigma3):
    body = parse_atoms("t(X1,V), s(V), t(V,Z1)")
    assert var_hat(sigma3.rules, body) >= {V("X1"), V("V"), V("Z1")}


def test_link_vars(sigma2, sigma3):
    body = parse_atoms("t(X,Y), u(Y,Z)")
    assert link_vars(sigma2.rules, body, body[0], body[1]) == {V("Y")}
    b3 = parse_atoms("t(X1,V), s(V), t(V,Z1)")
    assert link_vars(sigma3.rules, b3, b3[0], b3[2]) == {V("V")}
    disjoint = parse_atoms("t(X,Y), u(W,Z)")
    assert link_vars(sigma2.rules, disjoint, disjoint[0], disjoint[1]) == frozenset()


def test_link_vars_requires_members(sigma2):
    body = parse_atoms("t(X,Y), u(Y,Z)")
    with pytest.raises(ValueError):
        link_vars(sigma2.rules, body, body[0], parse_atoms("t(A,B)")[0])


def test_null_set_json_rows(sigma2):
    rows = compute_null_sets(sigma2.rules).to_json()
    assert {"rule", "side", "atom", "arg", "nulls"} == set(rows[0])


# -- properties ---------------------------------------------------------------


def _programs(seed: int, n: int):
    rng = random.Random(seed)
    return [random_program(rng) for _ in range(n)]


def _one_round(rules, table):
    """Independent evaluation of the three equations over a given table."""
    out = dict(table.entries)
    pos = {}
    for r in rules:
        for i, a in enumerate(r.head):
            for j in range(a.arity):
                pos.setdefault((a.relation, j), set()).update(table.entries[(r.id, "head", i, j)])
    for r in rules:
        for i, a in enumerate(r.body):
            for j in range(a.arity):
                out[(r.id, "body", i, j)] = frozenset(pos.get((a.relation, j), ()))
        for i, a in enumerate(r.head):
            for j, t in enumerate(a.args):
                if t in r.existentials:
                    out[(r.id, "head", i, j)] = frozenset({NullSymbol(r.id, t.name)})
                elif isinstance(t, Variable):
                    sets = [out[(r.id, "body", k, m)] for k, b in enumerate(r.body)
                            for m, s in enumerate(b.args) if s == t]
                    acc = sets[0]
                    for s in sets[1:]:
                        acc = acc & s
                    out[(r.id, "head", i, j)] = acc
    return out


def test_table_is_a_fixpoint():
    for rules in _programs(7, 150):
        table = compute_null_sets(rules)
        assert _one_round(rules, table) == table.entries


def test_body_null_sets_monotone_under_rule_addition():
    rng = random.Random(11)
    for _ in range(150):
        rules = random_program(rng, max_rules=4)
        if len(rules) < 2:
            continue
        small = compute_null_sets(rules[:-1])
        big = compute_null_sets(rules)
        for key, syms in small.entries.items():
            if key[1] == "body":
                assert syms <= big.entries[key]


def test_var_hat_within_body_variables():
    for rules in _programs(3, 100):
        analysis = NullAnalysis(rules)
        for r in rules:
            assert analysis.var_hat(r.body) <= {v for a in r.body for v in a.variables()}


@st.composite
def _graphs(draw):
    n = draw(st.integers(1, 12))
    nodes = [NullSymbol("g", f"N{k}") for k in range(n)]
    edges = draw(st.sets(st.tuples(st.sampled_from(nodes), st.sampled_from(nodes)), max_size=20))
    return ExistentialDepGraph(frozenset(nodes), frozenset(edges))


def _oracle_cyc_null(g: ExistentialDepGraph) -> set:
    nodes = sorted(g.nodes)
    idx = {n: k for k, n in enumerate(nodes)}
    n = len(nodes)
    reach = [[False] * n for _ in range(n)]
    for s, t in g.edges:
        reach[idx[s]][idx[t]] = True
    for k in range(n):
        for i in range(n):
            if reach[i][k]:
                for j in range(n):
                    if reach[k][j]:
                        reach[i][j] = True
    on_cycle = {i for i in range(n) if reach[i][i]}
    return {nodes[j] for j in range(n) if j in on_cycle or any(reach[i][j] for i in on_cycle)}


@settings(max_examples=300)
@given(_graphs())
def test_cyc_null_matches_transitive_closure_oracle(g):
    assert cyc_null(g) == _oracle_cyc_null(g)

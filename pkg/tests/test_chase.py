from __future__ import annotations

import itertools
import random

import pytest

from triguard.chase import (
    ChaseInstance,
    ResourceError,
    answer_bcq,
    bounded_nulls_at,
    chase_step,
    chase_to_level,
    interchangeable,
)
from triguard.model import Atom, Constant, Null, Query, Substitution, Variable, is_connected
from triguard.parser import parse_atoms, parse_program
from triguard.serialize import chase_json

A = parse_atoms
c1, c2 = Constant("c1"), Constant("c2")
n = Null


def atom_strs(inst):
    return {str(a) for a in inst.atoms()}


# -- chase step --------------------------------------------------------------------


def test_chase_step_sigma11(sigma2_q):
    inst = ChaseInstance.from_database(sigma2_q.facts)
    s11 = sigma2_q.rules[0]
    out = chase_step(inst, s11, Substitution({Variable("X"): c1, Variable("Y"): c2}))
    new = [ca for ca in out if ca.level == 1]
    assert {str(ca.atom) for ca in new} == {"t(c2,_:n1)", "u(c2,_:n1)"}
    assert out.next_null == 2
    assert len(inst) == 2  # input untouched


def test_refiring_a_trigger_changes_nothing(sigma2_q):
    s11 = sigma2_q.rules[0]
    eta = Substitution({Variable("X"): c1, Variable("Y"): c2})
    once = chase_step(ChaseInstance.from_database(sigma2_q.facts), s11, eta)
    twice = chase_step(once, s11, eta)
    assert atom_strs(twice) == atom_strs(once)
    assert twice.next_null == once.next_null


def test_datalog_step_adds_no_nulls():
    prog = parse_program("e(a,b). r: e(X,Y) -> p(Y,X).")
    out = chase_step(ChaseInstance.from_database(prog.facts), prog.rules[0],
                     Substitution({Variable("X"): Constant("a"), Variable("Y"): Constant("b")}))
    assert "p(b,a)" in atom_strs(out) and out.next_null == 1


def test_chase_step_precondition(sigma2_q):
    with pytest.raises(ValueError):
        chase_step(ChaseInstance.from_database(sigma2_q.facts), sigma2_q.rules[0],
                   Substitution({Variable("X"): c2, Variable("Y"): c1}))
    with pytest.raises(ValueError):
        chase_step(ChaseInstance.from_database(sigma2_q.facts), sigma2_q.rules[0], Substitution())


# -- chase to level ------------------------------------------------------------------


def test_level_zero_is_the_database(sigma2_q):
    inst = chase_to_level(sigma2_q.facts, sigma2_q.rules, 0)
    assert set(inst.atoms()) == set(sigma2_q.facts)


def test_sigma2_chain_and_pulled_nulls(sigma2_q):
    inst = chase_to_level(sigma2_q.facts, sigma2_q.rules, 3)
    got = atom_strs(inst)
    assert {"t(c2,_:n1)", "t(_:n1,_:n2)", "t(_:n2,_:n3)"} <= got
    four = chase_to_level(sigma2_q.facts, sigma2_q.rules, 4)
    ca = four.get(Atom("t", (n(1), n(3))))
    assert ca is not None and ca.level == 4 and ca.rule == "s12"


def test_datalog_saturates_without_nulls():
    prog = parse_program("e(a,b). e(b,c). e(c,d). s1: e(X,Y) -> p(X,Y). s2: p(X,Y), e(Y,Z) -> p(X,Z).")
    levels = [chase_to_level(prog.facts, prog.rules, k) for k in range(6)]
    assert len(levels[4]) == len(levels[5]) == 3 + 6
    assert not levels[5].nulls()


def test_null_counter_and_indices(sigma2_q):
    inst = chase_to_level(sigma2_q.facts, sigma2_q.rules, 4)
    assert [m.index for m in inst.nulls()] == list(range(1, inst.next_null))


def test_monotone_in_level(sigma2_q, sigma1):
    for rules in (sigma2_q.rules, sigma1.rules):
        prev = set()
        for k in range(6):
            cur = set(chase_to_level(sigma2_q.facts, rules, k).atoms())
            assert prev <= cur
            prev = cur


def _naive_chase(facts, rules, k):
    """Independent oracle: full re-join each level, no delta bookkeeping."""
    atoms: dict[Atom, tuple[int, int]] = {}
    for a in sorted(set(facts), key=Atom.sort_key):
        atoms[a] = (0, len(atoms))
    fired = set()
    nxt = 1
    for level in range(1, k + 1):
        snapshot = list(atoms.items())
        triggers = []
        for ri, r in enumerate(rules):
            for combo in itertools.product(snapshot, repeat=len(r.body)):
                eta = {}
                ok = True
                for pat, (fact, _) in zip(r.body, combo):
                    if pat.relation != fact.relation or pat.arity != fact.arity:
                        ok = False
                        break
                    for p, t in zip(pat.args, fact.args):
                        if isinstance(p, Variable):
                            if eta.setdefault(p, t) != t:
                                ok = False
                        elif p != t:
                            ok = False
                    if not ok:
                        break
                if ok and max(lv for _, (lv, _) in combo) == level - 1:
                    triggers.append(((ri, tuple(seq for _, (_, seq) in combo)), ri, eta))
        for _, ri, eta in sorted(triggers, key=lambda t: t[0]):
            key = (ri, frozenset(eta.items()))
            if key in fired:
                continue
            fired.add(key)
            r = rules[ri]
            ext = dict(eta)
            for z in r.ordered_existentials():
                ext[z] = Null(nxt)
                nxt += 1
            for h in r.head:
                a = Atom(h.relation, tuple(ext.get(t, t) for t in h.args))
                if a not in atoms:
                    atoms[a] = (level, len(atoms))
    return [(str(a), lv) for a, (lv, _) in atoms.items()], nxt


def test_matches_naive_oracle(sigma1, sigma2_q, sigma3):
    cases = [(sigma2_q.facts, sigma2_q.rules, 4), (sigma2_q.facts, sigma1.rules, 6),
             (A("t(a,b), t(b,c)"), sigma3.rules, 4)]
    rng = random.Random(3)
    from triguard.baselines import random_program

    for _ in range(25):
        rules = random_program(rng, max_rules=3, max_arity=2)
        facts = []
        for r in rules:
            for a in r.body:
                facts.append(Atom(a.relation, tuple(Constant(rng.choice("ab")) for _ in a.args)))
        cases.append((facts, rules, 3))
    for facts, rules, k in cases:
        inst = chase_to_level(facts, rules, k)
        want, nxt = _naive_chase(facts, rules, k)
        assert [(str(ca.atom), ca.level) for ca in inst] == want
        assert inst.next_null == nxt


def test_levels_follow_parents(sigma2_q):
    inst = chase_to_level(sigma2_q.facts, sigma2_q.rules, 4)
    by_seq = {ca.seq: ca for ca in inst}
    for ca in inst:
        if ca.rule is None:
            assert ca.level == 0
        else:
            assert ca.level == 1 + max(by_seq[p].level for p in ca.parents)


def test_deterministic_output(sigma2_q):
    a = chase_json(chase_to_level(sigma2_q.facts, sigma2_q.rules, 4))
    b = chase_json(chase_to_level(sigma2_q.facts, sigma2_q.rules, 4))
    assert a == b


def test_atom_cap(sigma2_q, monkeypatch):
    with pytest.raises(ResourceError):
        chase_to_level(sigma2_q.facts, sigma2_q.rules, 6, max_atoms=50)
    monkeypatch.setenv("TG_MAX_ATOMS", "40")
    with pytest.raises(ResourceError):
        chase_to_level(sigma2_q.facts, sigma2_q.rules, 6)


def test_negative_level_rejected(sigma2_q):
    with pytest.raises(ValueError):
        chase_to_level(sigma2_q.facts, sigma2_q.rules, -1)


# -- queries -------------------------------------------------------------------------


def test_q2_not_entailed_up_to_depth_6(sigma2_q):
    ans = answer_bcq(sigma2_q.facts, sigma2_q.rules, sigma2_q.queries[0], depth_limit=6)
    assert ans.outcome == "no" and not ans.certified


def test_query_matching_database():
    ans = answer_bcq(A("t(c1,c2)"), [], Query(tuple(A("t(X,Y)"))))
    assert ans.outcome == "yes" and ans.level == 0
    assert ans.hom == Substitution({Variable("X"): c1, Variable("Y"): c2})


def test_query_found_at_level_one(sigma2_q):
    ans = answer_bcq(sigma2_q.facts, sigma2_q.rules, Query(tuple(A("t(c2,Y)"))))
    assert ans.outcome == "yes" and ans.level == 1
    assert ans.hom[Variable("Y")] == n(1)


def test_yes_is_sound(sigma2_q, sigma1):
    q = Query(tuple(A("t(X,Y), u(Y,Z), t(Z,W)")))
    for rules in (sigma2_q.rules, sigma1.rules):
        ans = answer_bcq(sigma2_q.facts, rules, q)
        assert ans.outcome == "yes"
        inst = chase_to_level(sigma2_q.facts, rules, ans.level)
        assert set(ans.hom.apply_all(q.body)) <= set(inst.atoms())


def test_complete_chase_certifies_no():
    prog = parse_program("e(a,b). s: e(X,Y) -> p(Y).")
    ans = answer_bcq(prog.facts, prog.rules, Query(tuple(A("p(a)"))))
    assert ans.outcome == "no" and ans.certified


def test_auto_certifies_for_tg_program(sigma1, sigma2_q):
    q = sigma2_q.queries[0]
    ans = answer_bcq(sigma2_q.facts, sigma1.rules, q, depth_limit=6, auto=True)
    assert ans.outcome == "no" and ans.certified
    ans2 = answer_bcq(sigma2_q.facts, sigma2_q.rules, q, depth_limit=6, auto=True)
    assert ans2.outcome == "no" and not ans2.certified


def test_budget_gives_unknown(sigma2_q):
    ans = answer_bcq(sigma2_q.facts, sigma2_q.rules, sigma2_q.queries[0], depth_limit=8, max_atoms=30)
    assert ans.outcome == "unknown" and ans.exit_code == 2


# -- interchangeable nulls ------------------------------------------------------------


def test_interchangeable_vacuous():
    facts = [Atom("t", (n(1), c1)), Atom("t", (c2, n(2)))]
    assert interchangeable(n(1), n(2), A("t(U,V)"), facts)


def test_interchangeable_via_merge_target():
    facts = [Atom("t", (n(1), n(2))), Atom("t", (n(3), n(3)))]
    assert interchangeable(n(1), n(2), A("t(U,V)"), facts)


def test_not_interchangeable_without_merge_target():
    facts = [Atom("t", (n(1), n(2)))]
    assert not interchangeable(n(1), n(2), A("t(U,V)"), facts)


def test_interchangeable_rejects_constant_shapes():
    with pytest.raises(ValueError):
        interchangeable(n(1), n(2), A("t(U,c)"), [Atom("t", (n(1), n(2)))])


def test_interchangeable_cap():
    # complete graph with loops: every merge succeeds, so every embedding is visited
    facts = [Atom("t", (n(i), n(j))) for i in range(1, 8) for j in range(1, 8)]
    with pytest.raises(ResourceError):
        interchangeable(n(1), n(2), A("t(U,V), t(V,W), t(W,X)"), facts, cap=100)


def exhaustive_interchangeable(ni, nj, shape, facts):
    """All injective embeddings times all null maps, no pruning."""
    facts = set(facts)
    if not is_connected(shape):
        return True
    terms = sorted({t for a in facts for t in a.args}, key=str)
    nulls = sorted({t for a in facts for t in a.args if isinstance(t, Null)})
    vs = sorted({v for a in shape for v in a.variables()}, key=lambda v: v.name)
    for image in itertools.permutations(terms, len(vs)):
        theta = dict(zip(vs, image))
        placed = [Atom(a.relation, tuple(theta[t] for t in a.args)) for a in shape]
        if not set(placed) <= facts or ni not in image or nj not in image:
            continue
        own = sorted({t for t in image if isinstance(t, Null)})
        found = False
        for target in itertools.product(nulls, repeat=len(own)):
            m = dict(zip(own, target))
            if m[ni] != m[nj]:
                continue
            if all(Atom(a.relation, tuple(m.get(t, t) for t in a.args)) in facts for a in placed):
                found = True
                break
        if not found:
            return False
    return True


def random_instance(rng: random.Random, n_nulls: int = 6, n_atoms: int = 10):
    pool = [n(i) for i in range(1, n_nulls + 1)] + [c1]
    facts = set()
    while len(facts) < n_atoms:
        rel = rng.choice(["t", "u"])
        facts.add(Atom(rel, (rng.choice(pool), rng.choice(pool))))
    return sorted(facts, key=Atom.sort_key)


SHAPES = [A("t(U,V)"), A("t(U,V), u(V,W)"), A("t(U,U)"), A("t(U,V), t(V,W)"), A("u(U,V), t(W,V)")]


def test_agrees_with_exhaustive_enumerator():
    rng = random.Random(99)
    for _ in range(60):
        facts = random_instance(rng, rng.randint(2, 6), rng.randint(3, 12))
        shape = rng.choice(SHAPES)
        nulls = sorted({t for a in facts for t in a.args if isinstance(t, Null)})
        for ni, nj in itertools.combinations(nulls, 2):
            assert interchangeable(ni, nj, shape, facts) == exhaustive_interchangeable(ni, nj, shape, facts)


def test_bounded_nulls_sigma1(sigma1, sigma2_q):
    shapes = [sigma2_q.queries[0].body] + [r.body for r in sigma1.rules]
    inst = chase_to_level(sigma2_q.facts, sigma1.rules, 6)
    assert bounded_nulls_at(inst, 3, shapes)
    assert not bounded_nulls_at(chase_to_level(sigma2_q.facts, sigma1.rules, 3), 0, shapes)

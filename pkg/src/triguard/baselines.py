"""Reference checkers for weakly-acyclic, guarded and sticky rule sets.

These are the textbook syntactic classes, used as baselines the
triangular-guardedness check must contain.  Each one is polynomial and
always answers yes or no.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

import networkx as nx

from .model import Atom, Rule, Variable, variables_of

Position = tuple[str, int]  # (relation, 0-based argument index)


@dataclass(frozen=True)
class PositionGraph:
    nodes: frozenset[Position]
    normal_edges: frozenset[tuple[Position, Position]]
    special_edges: frozenset[tuple[Position, Position]]

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.normal_edges, special=False)
        for e in self.special_edges:
            g.add_edge(*e, special=True)
        return g


def _positions(atoms: Sequence[Atom], var: Variable) -> list[Position]:
    return [(a.relation, i) for a in atoms for i in a.positions_of(var)]


def position_graph(rules: Sequence[Rule]) -> PositionGraph:
    """Dependency graph over argument positions (Fagin et al.'s weak acyclicity).

    For every frontier variable at body position ``p``: a normal edge to each
    head position holding that variable, and a special edge to each head
    position holding an existential variable.
    """
    nodes = {(a.relation, i) for r in rules for a in r.body + r.head for i in range(a.arity)}
    normal, special = set(), set()
    for r in rules:
        ex_pos = [p for z in r.ordered_existentials() for p in _positions(r.head, z)]
        for x in r.frontier:
            for p in _positions(r.body, x):
                normal.update((p, q) for q in _positions(r.head, x))
                special.update((p, q) for q in ex_pos)
    return PositionGraph(frozenset(nodes), frozenset(normal), frozenset(special))


def is_weakly_acyclic(rules: Sequence[Rule]) -> bool:
    """No cycle of the position graph goes through a special edge."""
    g = position_graph(rules)
    comp = {}
    for k, scc in enumerate(nx.strongly_connected_components(g.to_networkx())):
        for n in scc:
            comp[n] = k
    return not any(comp[p] == comp[q] for p, q in g.special_edges)


def is_guarded(rules: Sequence[Rule]) -> bool:
    """Every rule has a body atom holding all of its body variables."""
    for r in rules:
        need = r.body_variables
        if not any(need <= a.variables() for a in r.body):
            return False
    return True


def sticky_marking(rules: Sequence[Rule]) -> dict[str, frozenset[Variable]]:
    """Marked body variables per rule (Cali, Gottlob and Pieris' stickiness marking).

    Start: a body variable missing from some head atom is marked.  Step: when
    a marked variable sits at body position ``p`` of any rule, every rule
    whose head holds a variable at ``p`` gets that variable marked in its body.
    """
    marked: dict[str, set[Variable]] = {}
    for r in rules:
        marked[r.id] = {v for v in r.body_variables if any(v not in h.variables() for h in r.head)}
    while True:
        hot: set[Position] = set()
        for r in rules:
            for v in marked[r.id]:
                hot.update(_positions(r.body, v))
        changed = False
        for r in rules:
            for h in r.head:
                for i, t in enumerate(h.args):
                    if isinstance(t, Variable) and t in r.body_variables and (h.relation, i) in hot:
                        if t not in marked[r.id]:
                            marked[r.id].add(t)
                            changed = True
        if not changed:
            return {k: frozenset(v) for k, v in marked.items()}


def is_sticky(rules: Sequence[Rule]) -> bool:
    """No marked variable occurs more than once in a rule body."""
    marks = sticky_marking(rules)
    for r in rules:
        for v in marks[r.id]:
            if len(_positions(r.body, v)) > 1:
                return False
    return True


# -- random programs -------------------------------------------------------------


def random_program(rng: random.Random, max_rules: int = 4, max_arity: int = 3,
                   relations: int = 3, max_body: int = 3, max_head: int = 2) -> list[Rule]:
    """A small random rule set over a fixed random schema."""
    schema = {f"r{k}": rng.randint(1, max_arity) for k in range(relations)}
    names = list(schema)
    rules = []
    for k in range(rng.randint(1, max_rules)):
        pool = [Variable(v) for v in "XYZW"[: rng.randint(1, 4)]]
        body = []
        for _ in range(rng.randint(1, max_body)):
            rel = rng.choice(names)
            body.append(Atom(rel, tuple(rng.choice(pool) for _ in range(schema[rel]))))
        bvars = sorted(variables_of(body), key=lambda v: v.name)
        ex = [Variable(f"E{j}") for j in range(rng.randint(0, 2))]
        head = []
        for _ in range(rng.randint(1, max_head)):
            rel = rng.choice(names)
            head.append(Atom(rel, tuple(rng.choice(bvars + ex) for _ in range(schema[rel]))))
        rules.append(Rule(f"s{k + 1}", tuple(body), tuple(head)))
    return rules


def random_corpus(seed: int, size: int, **kwargs) -> list[list[Rule]]:
    rng = random.Random(seed)
    return [random_program(rng, **kwargs) for _ in range(size)]

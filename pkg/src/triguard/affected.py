"""Null-sets, the existential dependency graph and cyclically-affected variables.

A null symbol ``n_Z^r`` stands for every labeled null that rule ``r`` can
invent for its existential variable ``Z``.  The null-set of an argument
position tells which of those symbols may show up there during a chase.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import reduce
from typing import Iterable, Literal, Sequence

import networkx as nx

from .model import Atom, Rule, Variable, variables_of


@dataclass(frozen=True, order=True)
class NullSymbol:
    rule: str
    variable: str

    def __str__(self) -> str:
        return f"n_{self.variable}^{self.rule}"


Side = Literal["body", "head"]
# (rule id, side, atom index within that side, 0-based argument index)
Occurrence = tuple[str, Side, int, int]
NullSet = frozenset[NullSymbol]

_EMPTY: NullSet = frozenset()


@dataclass(frozen=True)
class NullSetTable:
    entries: dict[Occurrence, NullSet]
    # union of head null-sets per (relation, position): what a body
    # position of that relation can receive
    positions: dict[tuple[str, int], NullSet]

    def get(self, rule: str, side: Side, atom: int, arg: int) -> NullSet:
        return self.entries[(rule, side, atom, arg)]

    def at_position(self, relation: str, arg: int) -> NullSet:
        return self.positions.get((relation, arg), _EMPTY)

    def symbols(self) -> set[NullSymbol]:
        out: set[NullSymbol] = set()
        for s in self.entries.values():
            out |= s
        return out

    def to_json(self) -> list[dict]:
        rows = []
        for (rule, side, atom, arg), syms in sorted(self.entries.items()):
            rows.append({
                "rule": rule,
                "side": side,
                "atom": atom,
                "arg": arg + 1,
                "nulls": sorted(str(s) for s in syms),
            })
        return rows


def _body_intersection(entries: dict[Occurrence, NullSet], rule: Rule, var: Variable) -> NullSet:
    sets = [
        entries[(rule.id, "body", i, j)]
        for i, atom in enumerate(rule.body)
        for j, t in enumerate(atom.args)
        if t == var
    ]
    # unreachable for well-formed rules: head universals occur in the body
    assert sets, f"{var} has no body occurrence in {rule.id}"
    return reduce(frozenset.intersection, sets)


def compute_null_sets(rules: Sequence[Rule]) -> NullSetTable:
    """Least fixpoint of the head/body null-set equations.

    Head positions holding an existential ``Z`` get ``{n_Z^r}``; head positions
    holding a universal variable get the intersection over that variable's body
    positions; body positions get the union over all head positions of the same
    relation and index.  Head positions holding a constant carry no null.
    """
    entries: dict[Occurrence, NullSet] = {}
    for r in rules:
        ex = r.existentials
        for side, atoms in (("body", r.body), ("head", r.head)):
            for i, a in enumerate(atoms):
                for j, t in enumerate(a.args):
                    if side == "head" and t in ex:
                        entries[(r.id, side, i, j)] = frozenset({NullSymbol(r.id, t.name)})
                    else:
                        entries[(r.id, side, i, j)] = _EMPTY

    while True:
        positions: dict[tuple[str, int], NullSet] = {}
        for r in rules:
            for i, a in enumerate(r.head):
                for j in range(a.arity):
                    key = (a.relation, j)
                    positions[key] = positions.get(key, _EMPTY) | entries[(r.id, "head", i, j)]
        changed = False
        for r in rules:
            for i, a in enumerate(r.body):
                for j, t in enumerate(a.args):
                    new = positions.get((a.relation, j), _EMPTY)
                    if new != entries[(r.id, "body", i, j)]:
                        entries[(r.id, "body", i, j)] = new
                        changed = True
            ex = r.existentials
            for i, a in enumerate(r.head):
                for j, t in enumerate(a.args):
                    if isinstance(t, Variable) and t not in ex:
                        new = _body_intersection(entries, r, t)
                        if new != entries[(r.id, "head", i, j)]:
                            entries[(r.id, "head", i, j)] = new
                            changed = True
        if not changed:
            return NullSetTable(entries, positions)


def intersect_nullset(rules: Sequence[Rule], table: NullSetTable, rule: Rule, var: Variable) -> NullSet:
    """Null symbols that can reach *every* body occurrence of ``var`` in ``rule``."""
    return _body_intersection(table.entries, rule, var)


@dataclass(frozen=True)
class ExistentialDepGraph:
    nodes: frozenset[NullSymbol]
    edges: frozenset[tuple[NullSymbol, NullSymbol]]

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from(self.edges)
        return g

    def to_dot(self) -> str:
        lines = ["digraph existential_dependencies {"]
        for n in sorted(self.nodes):
            lines.append(f'  "{n}";')
        for s, t in sorted(self.edges):
            lines.append(f'  "{s}" -> "{t}";')
        lines.append("}")
        return "\n".join(lines) + "\n"


def build_dep_graph(rules: Sequence[Rule], table: NullSetTable) -> ExistentialDepGraph:
    nodes = frozenset(table.symbols())
    edges = set()
    for r in rules:
        if not r.existentials:
            continue
        targets = [NullSymbol(r.id, z.name) for z in r.ordered_existentials()]
        for y in r.frontier:
            for source in intersect_nullset(rules, table, r, y):
                edges.update((source, t) for t in targets)
    return ExistentialDepGraph(nodes, frozenset(edges))


def cyc_null(graph: ExistentialDepGraph) -> frozenset[NullSymbol]:
    """Nodes on a cycle (self-loops included) plus everything reachable from them."""
    g = graph.to_networkx()
    on_cycle = set()
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1:
            on_cycle |= comp
        else:
            (n,) = comp
            if g.has_edge(n, n):
                on_cycle.add(n)
    out = set(on_cycle)
    for n in on_cycle:
        out |= nx.descendants(g, n)
    return frozenset(out)


class NullAnalysis:
    """Caches the per-program tables used by var-hat and link queries."""

    def __init__(self, rules: Sequence[Rule]):
        self.rules = tuple(rules)
        self.table = compute_null_sets(self.rules)
        self.graph = build_dep_graph(self.rules, self.table)
        self.cyclic = cyc_null(self.graph)

    def reaching(self, body: Iterable[Atom], var: Variable) -> NullSet:
        """Intersection, over every occurrence of ``var`` in ``body``, of the
        null symbols that the occurrence's position can receive."""
        sets = [
            self.table.at_position(a.relation, j)
            for a in body
            for j, t in enumerate(a.args)
            if t == var
        ]
        if not sets:
            return _EMPTY
        return reduce(frozenset.intersection, sets)

    def var_hat(self, body: Iterable[Atom]) -> frozenset[Variable]:
        body = tuple(body)
        if not self.cyclic:
            return frozenset()
        return frozenset(v for v in variables_of(body) if self.reaching(body, v) & self.cyclic)

    def link_vars(self, body: Sequence[Atom], b1: Atom, b2: Atom, hat: frozenset[Variable] | None = None) -> frozenset[Variable]:
        if b1 not in body or b2 not in body:
            raise ValueError(f"link atoms must belong to the body: {b1}, {b2}")
        if hat is None:
            hat = self.var_hat(body)
        return frozenset(b1.variables() & b2.variables() & hat)


def var_hat(rules: Sequence[Rule], body: Iterable[Atom]) -> frozenset[Variable]:
    return NullAnalysis(rules).var_hat(body)


def link_vars(rules: Sequence[Rule], body: Sequence[Atom], b1: Atom, b2: Atom) -> frozenset[Variable]:
    return NullAnalysis(rules).link_vars(body, b1, b2)

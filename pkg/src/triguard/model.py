"""Terms, atoms, rules and substitutions.

Everything here is immutable.  Terms are plain frozen dataclasses, so two
terms are equal exactly when they are structurally equal; atoms compare
the same way.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence, Union


@dataclass(frozen=True, slots=True)
class Variable:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Constant:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True, slots=True)
class Null:
    """Labeled null ``n<index>``; nulls are ordered by index."""

    index: int

    def __str__(self) -> str:
        return f"_:n{self.index}"

    def __lt__(self, other: "Null") -> bool:
        return self.index < other.index


Term = Union[Variable, Constant, Null]


def term_key(term: Term) -> tuple:
    """Total order on terms: constants, then nulls, then variables."""
    if isinstance(term, Constant):
        return (0, term.name)
    if isinstance(term, Null):
        return (1, term.index)
    return (2, term.name)


def is_var(term: Term) -> bool:
    return isinstance(term, Variable)


@dataclass(frozen=True, slots=True)
class Atom:
    relation: str
    args: tuple[Term, ...] = ()

    @property
    def arity(self) -> int:
        return len(self.args)

    def terms(self) -> set[Term]:
        return set(self.args)

    def variables(self) -> set[Variable]:
        return {t for t in self.args if isinstance(t, Variable)}

    def constants(self) -> set[Constant]:
        return {t for t in self.args if isinstance(t, Constant)}

    def nulls(self) -> set[Null]:
        return {t for t in self.args if isinstance(t, Null)}

    def positions_of(self, term: Term) -> tuple[int, ...]:
        """0-based argument positions holding ``term`` (arg(a) restricted to it)."""
        return tuple(i for i, t in enumerate(self.args) if t == term)

    def sort_key(self) -> tuple:
        return (self.relation, tuple(term_key(t) for t in self.args))

    def __str__(self) -> str:
        return f"{self.relation}({','.join(str(t) for t in self.args)})"


def variables_of(atoms: Iterable[Atom]) -> set[Variable]:
    out: set[Variable] = set()
    for a in atoms:
        out.update(a.variables())
    return out


def nulls_of(atoms: Iterable[Atom]) -> set[Null]:
    out: set[Null] = set()
    for a in atoms:
        out.update(a.nulls())
    return out


def ordered_variables(atoms: Iterable[Atom]) -> list[Variable]:
    """Variables in order of first occurrence."""
    seen: dict[Variable, None] = {}
    for a in atoms:
        for t in a.args:
            if isinstance(t, Variable):
                seen.setdefault(t)
    return list(seen)


def dedup(atoms: Iterable[Atom]) -> tuple[Atom, ...]:
    """Set semantics with stable order."""
    return tuple(dict.fromkeys(atoms))


class Substitution(Mapping[Variable, Term]):
    """Finite map from variables to terms; identity everywhere else."""

    __slots__ = ("_map", "_hash")

    def __init__(self, mapping: Mapping[Variable, Term] | Iterable[tuple[Variable, Term]] = ()):
        items = dict(mapping)
        for k in items:
            if not isinstance(k, Variable):
                raise TypeError(f"substitution domain must be variables, got {k!r}")
        self._map = items
        self._hash = None

    def __getitem__(self, key: Variable) -> Term:
        return self._map[key]

    def __iter__(self) -> Iterator[Variable]:
        return iter(self._map)

    def __len__(self) -> int:
        return len(self._map)

    def __eq__(self, other) -> bool:
        if isinstance(other, Substitution):
            return self._map == other._map
        return NotImplemented

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._map.items()))
        return self._hash

    def __repr__(self) -> str:
        body = ", ".join(f"{k}->{v}" for k, v in sorted(self._map.items(), key=lambda kv: kv[0].name))
        return "{" + body + "}"

    def __call__(self, term: Term) -> Term:
        if isinstance(term, Variable):
            return self._map.get(term, term)
        return term

    def apply(self, atom: Atom) -> Atom:
        return Atom(atom.relation, tuple(self(t) for t in atom.args))

    def apply_all(self, atoms: Iterable[Atom]) -> tuple[Atom, ...]:
        return dedup(self.apply(a) for a in atoms)

    def restrict(self, domain: Iterable[Term]) -> "Substitution":
        keep = set(domain)
        return Substitution((k, v) for k, v in self._map.items() if k in keep)

    def compose(self, inner: "Substitution") -> "Substitution":
        """``self ∘ inner``: apply ``inner`` first, then ``self``."""
        out = {k: self(v) for k, v in inner.items()}
        for k, v in self._map.items():
            out.setdefault(k, v)
        return Substitution((k, v) for k, v in out.items() if k != v)

    def is_renaming(self) -> bool:
        vals = list(self._map.values())
        return all(isinstance(v, Variable) for v in vals) and len(set(vals)) == len(vals)


def apply_substitution(atoms: Iterable[Atom], theta: Substitution) -> tuple[Atom, ...]:
    return theta.apply_all(atoms)


@dataclass(frozen=True)
class Rule:
    """A TGD ``body -> exists Z. head``.

    Existential variables are the head variables missing from the body.  When
    ``declared`` is given (an explicit ``exists`` prefix) it must agree.
    """

    id: str
    body: tuple[Atom, ...]
    head: tuple[Atom, ...]
    declared: frozenset[Variable] | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "body", dedup(self.body))
        object.__setattr__(self, "head", dedup(self.head))
        if not self.body:
            raise ValueError(f"rule {self.id}: empty body")
        if not self.head:
            raise ValueError(f"rule {self.id}: empty head")
        for a in self.body + self.head:
            if a.nulls():
                raise ValueError(f"rule {self.id}: labeled null in {a}")
        if self.declared is not None and self.declared != self.existentials:
            raise ValueError(
                f"rule {self.id}: declared existentials "
                f"{sorted(v.name for v in self.declared)} disagree with "
                f"{sorted(v.name for v in self.existentials)}"
            )

    @property
    def body_variables(self) -> frozenset[Variable]:
        return frozenset(variables_of(self.body))

    @property
    def existentials(self) -> frozenset[Variable]:
        return frozenset(variables_of(self.head) - variables_of(self.body))

    @property
    def frontier(self) -> frozenset[Variable]:
        return frozenset(variables_of(self.head) & variables_of(self.body))

    def ordered_existentials(self) -> list[Variable]:
        ex = self.existentials
        return [v for v in ordered_variables(self.head) if v in ex]

    def relations(self) -> set[str]:
        return {a.relation for a in self.body + self.head}

    def __str__(self) -> str:
        return f"{', '.join(map(str, self.body))} -> {', '.join(map(str, self.head))}"


@dataclass(frozen=True)
class Query:
    body: tuple[Atom, ...]

    def __post_init__(self):
        object.__setattr__(self, "body", dedup(self.body))
        if not self.body:
            raise ValueError("query with empty body")
        for a in self.body:
            if a.nulls():
                raise ValueError(f"labeled null in query atom {a}")

    def __str__(self) -> str:
        return "?- " + ", ".join(map(str, self.body))


def max_arity(rules: Iterable[Rule]) -> int:
    return max((a.arity for r in rules for a in r.body + r.head), default=0)


def is_connected(atoms: Sequence[Atom]) -> bool:
    if not atoms:
        raise ValueError("connectedness is undefined for an empty tuple")
    return all(atoms[i].terms() & atoms[i + 1].terms() for i in range(len(atoms) - 1))


# -- unification -------------------------------------------------------------


class _UnionFind:
    # Representative preference: rigid terms, then preferred variables, then
    # left-side variables, then right-side variables.  Two rigid terms never
    # merge.
    def __init__(self, left_vars: set[Variable], prefer: set[Variable] = frozenset()):
        self.parent: dict[Term, Term] = {}
        self.left = left_vars
        self.prefer = prefer

    def find(self, t: Term) -> Term:
        root = t
        while root in self.parent:
            root = self.parent[root]
        while t in self.parent and self.parent[t] != root:
            self.parent[t], t = root, self.parent[t]
        return root

    def rank(self, t: Term) -> int:
        if not isinstance(t, Variable):
            return 0
        if t in self.prefer:
            return 1
        return 2 if t in self.left else 3

    def union(self, s: Term, t: Term) -> bool:
        r1, r2 = self.find(s), self.find(t)
        if r1 == r2:
            return True
        k1, k2 = self.rank(r1), self.rank(r2)
        if k1 == 0 and k2 == 0:
            return False
        if k1 < k2:
            self.parent[r2] = r1
        else:
            self.parent[r1] = r2
        return True


def unify_pairs(pairs: Iterable[tuple[Atom, Atom]], prefer: Iterable[Variable] = ()) -> Substitution | None:
    """Most general unifier making each ``(left, right)`` pair equal.

    Constants and nulls are rigid.  Variables in ``prefer``, then variables
    from left atoms, are preferred as class representatives, so left terms
    survive when the caller keeps the left side fixed.  The result is
    idempotent.
    """
    pairs = list(pairs)
    left_vars = variables_of(l for l, _ in pairs)
    uf = _UnionFind(left_vars, set(prefer))
    for left, right in pairs:
        if left.relation != right.relation or left.arity != right.arity:
            return None
        for s, t in zip(left.args, right.args):
            if not uf.union(s, t):
                return None
    out = {}
    for t in list(uf.parent):
        if isinstance(t, Variable):
            root = uf.find(t)
            if root != t:
                out[t] = root
    return Substitution(out)


def edge_covers(left: Sequence[Atom], right: Sequence[Atom]) -> Iterator[tuple[tuple[Atom, Atom], ...]]:
    """Atom pairings (same relation and arity) touching every atom on both sides.

    Each right atom picks a left partner, then each left atom still unpaired
    picks a right partner.  Every minimal edge cover arises this way, and a
    set unifier of ``left`` and ``right`` equalises some minimal cover, so
    these pairings suffice for set unification.
    """
    def ok(l: Atom, r: Atom) -> bool:
        return l.relation == r.relation and l.arity == r.arity

    options = [[l for l in left if ok(l, r)] for r in right]
    back = {l: [r for r in right if ok(l, r)] for l in left}
    if any(not o for o in options) or any(not b for b in back.values()):
        return
    seen: set[frozenset] = set()
    for choice in itertools.product(*options):
        pairs = list(zip(choice, right))
        missing = [l for l in left if l not in choice]
        for extra in itertools.product(*(back[l] for l in missing)):
            edges = pairs + list(zip(missing, extra))
            key = frozenset(edges)
            if key not in seen:
                seen.add(key)
                yield tuple(edges)


def unifiers(s1: Iterable[Atom], s2: Iterable[Atom]) -> Iterator[Substitution]:
    """All unifiers of two atom sets, one per atom pairing, in a fixed order."""
    left, right = dedup(s1), dedup(s2)
    if not left or not right:
        return
    seen = set()
    for pairing in edge_covers(left, right):
        theta = unify_pairs(pairing)
        if theta is not None and theta not in seen:
            seen.add(theta)
            yield theta


def mgu(s1: Iterable[Atom], s2: Iterable[Atom]) -> Substitution | None:
    """Most general unifier of two variable-disjoint atom sets, or ``None``.

    When several atom pairings are possible the first successful one (in
    input order) is returned; :func:`unifiers` enumerates all of them.
    """
    return next(unifiers(s1, s2), None)


def match(pattern: Atom, target: Atom, binding: Mapping[Variable, Term] | None = None) -> dict[Variable, Term] | None:
    """One-way matching: extend ``binding`` so that ``pattern`` maps onto ``target``."""
    if pattern.relation != target.relation or pattern.arity != target.arity:
        return None
    out = dict(binding or {})
    for p, t in zip(pattern.args, target.args):
        if isinstance(p, Variable):
            bound = out.get(p)
            if bound is None:
                out[p] = t
            elif bound != t:
                return None
        elif p != t:
            return None
    return out

"""Body/head pair closure of a rule set, and the variable markup procedure.

Every rule contributes a pair ``<body, head>``.  Two pairs compose when some
head atoms of the first unify with some body atoms of a renamed copy of the
second; the composite keeps the first body (under the unifier), adds the
second body's leftover atoms and takes the second head.  Pairs are kept up to
variable renaming.

The closure is infinite for many recursive programs (leftover atoms can
chain forever), so it is computed under a body-size horizon: composites
whose body exceeds ``max_body`` atoms are not kept.  By default tracks grow
one rule at a time (the right operand is always a rule's own pair).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .model import (
    Atom,
    Constant,
    Null,
    Rule,
    Substitution,
    Variable,
    dedup,
    edge_covers,
    max_arity,
    unify_pairs,
    variables_of,
)

DEFAULT_MAX_PAIRS = 10_000
DEFAULT_SUBSET_CAP = 4


def default_max_body(rules: Sequence[Rule]) -> int:
    return 1 + max((len(r.body) for r in rules), default=1)


def default_max_rounds(rules: Sequence[Rule]) -> int:
    return max(1, 2 * len(rules) * max(1, max_arity(rules)))


# -- canonical form ------------------------------------------------------------


def _encode(atom: Atom, numbering: dict[Variable, int]) -> tuple[tuple, dict[Variable, int]]:
    fresh: dict[Variable, int] = {}
    codes = []
    for t in atom.args:
        if isinstance(t, Variable):
            n = numbering.get(t)
            if n is None:
                n = fresh.get(t)
                if n is None:
                    n = fresh[t] = len(numbering) + len(fresh)
            codes.append((0, n))
        elif isinstance(t, Constant):
            codes.append((1, t.name))
        else:
            codes.append((2, t.index))
    return (atom.relation, tuple(codes)), fresh


def canonical_form(body: Sequence[Atom], head: Sequence[Atom]) -> tuple[tuple, dict[Variable, int]]:
    """Isomorphism-invariant key of ``<body, head>`` and the numbering achieving it.

    The key is the lexicographically least encoding over all atom orders (body
    atoms first), numbering variables by first occurrence.  Only ties are
    branched on, so the search stays small except on highly symmetric pairs.
    """
    groups = (tuple(dedup(body)), tuple(dedup(head)))
    best: list = [None, None]

    def search(g: int, remaining: tuple[Atom, ...], numbering: dict[Variable, int], prefix: list):
        if not remaining:
            if g == 0:
                search(1, groups[1], numbering, prefix + ["|"])
                return
            key = tuple(prefix)
            if best[0] is None or key < best[0]:
                best[0], best[1] = key, dict(numbering)
            return
        encoded = [(_encode(a, numbering), i) for i, a in enumerate(remaining)]
        low = min(e[0][0] for e in encoded)
        if best[0] is not None:
            # prune branches that already lose to the best full key
            cand = tuple(prefix + [low])
            if cand > best[0][: len(cand)]:
                return
        for (code, fresh), i in encoded:
            if code != low:
                continue
            nxt = dict(numbering)
            nxt.update(fresh)
            search(g, remaining[:i] + remaining[i + 1:], nxt, prefix + [code])

    search(0, groups[0], {}, [])
    return best[0], best[1]


def canonical_key(body: Sequence[Atom], head: Sequence[Atom]) -> tuple:
    return canonical_form(body, head)[0]


def isomorphic(p: tuple[Sequence[Atom], Sequence[Atom]], q: tuple[Sequence[Atom], Sequence[Atom]]) -> bool:
    return canonical_key(*p) == canonical_key(*q)


# -- pairs ---------------------------------------------------------------------


@dataclass(frozen=True)
class Derivation:
    """How a composite pair was obtained from two earlier pairs."""

    left: int
    right: int
    renaming: Substitution  # applied to the right pair first
    pairing: tuple[tuple[Atom, Atom], ...]  # (head atom of left, renamed body atom of right)
    unifier: Substitution

    @property
    def head_part(self) -> tuple[Atom, ...]:
        return dedup(h for h, _ in self.pairing)

    @property
    def body_part(self) -> tuple[Atom, ...]:
        return dedup(b for _, b in self.pairing)


@dataclass(frozen=True)
class ExtensionPair:
    body: tuple[Atom, ...]
    head: tuple[Atom, ...]
    round: int
    index: int
    provenance: str | Derivation  # rule id for base pairs
    key: tuple = field(repr=False, compare=False)

    def variables(self) -> set[Variable]:
        return variables_of(self.body + self.head)

    def __str__(self) -> str:
        return f"<{{{', '.join(map(str, self.body))}}}, {{{', '.join(map(str, self.head))}}}>"


def _fresh_name(base: str, taken: set[str]) -> str:
    name = base + "'"
    while name in taken:
        name += "'"
    return name


def rename_apart(pair_vars: Iterable[Variable], avoid: set[Variable]) -> Substitution:
    """Rename only the clashing variables, by priming them."""
    taken = {v.name for v in avoid} | {v.name for v in pair_vars}
    out = {}
    for v in sorted(set(pair_vars), key=lambda v: v.name):
        if v in avoid:
            name = _fresh_name(v.name, taken)
            taken.add(name)
            out[v] = Variable(name)
    return Substitution(out)


def compose(left: ExtensionPair, right: ExtensionPair, renaming: Substitution,
            pairing: Sequence[tuple[Atom, Atom]]) -> tuple[tuple[Atom, ...], tuple[Atom, ...], Substitution] | None:
    """Compose ``left`` with renamed ``right`` through ``pairing``.

    Returns ``(body, head, unifier)`` or ``None`` when the pairing does not
    unify or the unifier would bind a body variable of ``left`` that does
    not take part in the unification.
    """
    body1 = variables_of(left.body)
    mu = unify_pairs(pairing, prefer=body1)
    if mu is None:
        return None
    head_part = variables_of(h for h, _ in pairing)
    if any(v in mu for v in body1 - head_part):
        return None
    # the unifier may only send a head variable to a term of the left body or
    # a constant, so invented values of the left pair never reach the result
    anchors = {mu(t) for a in left.body for t in a.args}
    for v in head_part - body1:
        if not isinstance(mu(v), Constant) and mu(v) not in anchors:
            return None
    body2 = renaming.apply_all(right.body)
    head2 = renaming.apply_all(right.head)
    unified = set(mu.apply_all(b for _, b in pairing))
    leftovers = [a for a in mu.apply_all(body2) if a not in unified]
    body = dedup(list(mu.apply_all(left.body)) + leftovers)
    head = mu.apply_all(head2)
    return body, head, mu


def replay(pairs: Sequence[ExtensionPair], pair: ExtensionPair) -> tuple[tuple[Atom, ...], tuple[Atom, ...]]:
    """Re-run a stored derivation; base pairs replay to themselves."""
    d = pair.provenance
    if not isinstance(d, Derivation):
        return pair.body, pair.head
    out = compose(pairs[d.left], pairs[d.right], d.renaming, d.pairing)
    assert out is not None, "recorded derivation no longer unifies"
    return out[0], out[1]


@dataclass
class Extension:
    pairs: list[ExtensionPair]
    saturated: bool
    rounds: int  # last completed round k
    reason: str = ""
    max_body: int = 0
    dropped: int = 0

    def __iter__(self):
        # allows ``pairs, saturated = compute_extension(...)``
        yield self.pairs
        yield self.saturated


class ExtensionBuilder:
    """Round-by-round computation of the pair closure under budgets."""

    def __init__(self, rules: Sequence[Rule], max_rounds: int | None = None,
                 max_pairs: int = DEFAULT_MAX_PAIRS, subset_cap: int = DEFAULT_SUBSET_CAP,
                 max_body: int | None = None, linear: bool = True):
        self.rules = tuple(rules)
        self.max_rounds = default_max_rounds(rules) if max_rounds is None else max_rounds
        if self.max_rounds < 1:
            raise ValueError("max_rounds must be at least 1")
        self.max_body = default_max_body(rules) if max_body is None else max_body
        if self.max_body < 1:
            raise ValueError("max_body must be at least 1")
        self.linear = linear
        self.dropped = 0  # composites discarded by the body horizon
        self.base_count = 0
        self.max_pairs = max_pairs
        self.subset_cap = subset_cap
        self.pairs: list[ExtensionPair] = []
        self.keys: dict[tuple, int] = {}
        self.rounds = -1
        self.saturated = False
        self.exhausted = False
        self.reason = ""
        self._delta_start = 0
        self._capped = False

    def _add(self, body, head, round_, provenance, sink: list) -> bool:
        key = canonical_key(body, head)
        if key in self.keys:
            return False
        self.keys[key] = -1
        sink.append((body, head, round_, provenance, key))
        return True

    def base(self) -> list[ExtensionPair]:
        staged: list = []
        for r in self.rules:
            self._add(r.body, r.head, 0, r.id, staged)
        self._commit(staged)
        self.base_count = len(self.pairs)
        self.rounds = 0
        if not self.rules:
            self.saturated = True
        return self.pairs

    def _commit(self, staged: list) -> None:
        for body, head, round_, prov, key in staged:
            idx = len(self.pairs)
            self.keys[key] = idx
            self.pairs.append(ExtensionPair(body, head, round_, idx, prov, key))

    def candidates(self, left: ExtensionPair, right: ExtensionPair) -> Iterator[tuple[Substitution, tuple]]:
        """All (renaming, pairing) combinations worth trying for ``left`` then ``right``."""
        renaming = rename_apart(right.variables(), left.variables())
        body2 = renaming.apply_all(right.body)
        by_rel: dict[tuple[str, int], list[Atom]] = {}
        for h in left.head:
            by_rel.setdefault((h.relation, h.arity), []).append(h)
        usable = [b for b in body2 if (b.relation, b.arity) in by_rel]
        top = min(len(usable), self.subset_cap)
        if len(usable) > self.subset_cap:
            self._capped = True
        for size in range(1, top + 1):
            for subset in itertools.combinations(usable, size):
                # H'1 ranges over head subsets that can all meet the chosen body atoms
                heads = dedup(h for b in subset for h in by_rel[(b.relation, b.arity)])
                for k in range(1, len(heads) + 1):
                    for part in itertools.combinations(heads, k):
                        for pairing in edge_covers(part, subset):
                            yield renaming, pairing

    def step(self) -> list[ExtensionPair]:
        """Compute the next round; returns the pairs it added."""
        if self.saturated or self.exhausted:
            return []
        if self.rounds >= self.max_rounds:
            self.exhausted = True
            self.reason = f"round budget {self.max_rounds} reached"
            return []
        delta_start = self._delta_start
        old = list(self.pairs)
        staged: list = []
        next_round = self.rounds + 1
        rights = range(self.base_count) if self.linear else range(len(old))
        for i, left in enumerate(old):
            for j in rights:
                right = old[j]
                if i < delta_start and j < delta_start:
                    continue
                for renaming, pairing in self.candidates(left, right):
                    out = compose(left, right, renaming, pairing)
                    if out is None:
                        continue
                    body, head, mu = out
                    if len(body) > self.max_body:
                        self.dropped += 1
                        continue
                    prov = Derivation(i, j, renaming, pairing, mu)
                    if self._add(body, head, next_round, prov, staged):
                        if len(old) + len(staged) > self.max_pairs:
                            for s in staged:
                                del self.keys[s[4]]
                            self.exhausted = True
                            self.reason = f"pair budget {self.max_pairs} exceeded in round {next_round}"
                            return []
        self._delta_start = len(old)
        self._commit(staged)
        self.rounds = next_round
        if not staged:
            if self._capped:
                self.exhausted = True
                self.reason = f"subset cap {self.subset_cap} limited round {next_round}"
            else:
                self.saturated = True
        return self.pairs[len(old):]

    def result(self) -> Extension:
        return Extension(list(self.pairs), self.saturated, self.rounds, self.reason,
                         self.max_body, self.dropped)


def extension_base(rules: Sequence[Rule]) -> list[ExtensionPair]:
    return ExtensionBuilder(rules).base()


def extension_step(pairs: Sequence[ExtensionPair], rules: Sequence[Rule],
                   subset_cap: int = DEFAULT_SUBSET_CAP, max_body: int | None = None,
                   linear: bool = True) -> list[ExtensionPair]:
    """One closure round over ``pairs``: returns ``pairs`` plus the new composites."""
    last = max((p.round for p in pairs), default=0)
    b = ExtensionBuilder(rules, max_rounds=last + 1, max_pairs=10**9, subset_cap=subset_cap,
                         max_body=max_body, linear=linear)
    b.pairs = list(pairs)
    b.keys = {p.key: p.index for p in pairs}
    b.base_count = sum(1 for p in pairs if p.round == 0)
    b.rounds = last
    b.step()
    return b.pairs


def compute_extension(rules: Sequence[Rule], max_rounds: int | None = None,
                      max_pairs: int = DEFAULT_MAX_PAIRS,
                      subset_cap: int = DEFAULT_SUBSET_CAP,
                      max_body: int | None = None, linear: bool = True) -> Extension:
    b = ExtensionBuilder(rules, max_rounds, max_pairs, subset_cap, max_body, linear)
    b.base()
    while not (b.saturated or b.exhausted):
        b.step()
    return b.result()


# -- markup --------------------------------------------------------------------


@dataclass(frozen=True)
class MarkupResult:
    marked: frozenset[Variable]  # marked variables of the first atom
    marked_c: frozenset[Variable]
    rounds: int


def mark_vars(a: Atom, c: Atom, a_prime: Atom) -> MarkupResult:
    """Markup over the track ``a -> c -> a'`` (``a`` and ``a'`` share a relation).

    Start: a variable of ``a`` missing from ``c`` is marked in ``a``; a
    variable of ``c`` missing from ``a'`` is marked in ``c``.  Then repeat:
    a variable marked in ``c`` gets marked in ``a``; a variable ``X`` of ``a'``
    gets marked in ``c`` once every variable of ``a`` at the positions where
    ``a'`` holds ``X`` is marked.
    """
    if a.relation != a_prime.relation or a.arity != a_prime.arity:
        raise ValueError(f"markup needs atoms of one relation, got {a} and {a_prime}")
    va, vc, vp = a.variables(), c.variables(), a_prime.variables()
    in_a = {x for x in va if x not in vc}
    in_c = {x for x in vc if x not in vp}
    rounds = 0
    while True:
        new_a = {x for x in in_c if x in va} - in_a
        new_c = set()
        for x in vp & vc:
            if x in in_c:
                continue
            at = [a.args[i] for i in a_prime.positions_of(x)]
            if all(isinstance(t, Variable) and t in in_a for t in at):
                new_c.add(x)
        if not new_a and not new_c:
            return MarkupResult(frozenset(in_a), frozenset(in_c), rounds)
        in_a |= new_a
        in_c |= new_c
        rounds += 1

"""Recursive triangular components and the triangular-guardedness check.

An RTC is a pair ``<B, H>`` of the extension together with two body atoms
``a`` and ``b``, a head atom ``c`` carrying variables ``x`` (from ``a``) and
``z`` (from ``b``), and an atom ``a'`` closing the cycle back to ``a``.  A
program is a member when every RTC has a body atom holding both ``x`` and
``z``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Sequence

from .affected import NullAnalysis
from .extension import (
    DEFAULT_MAX_PAIRS,
    DEFAULT_SUBSET_CAP,
    ExtensionBuilder,
    ExtensionPair,
    mark_vars,
    rename_apart,
)
from .model import Atom, Constant, Rule, Substitution, Term, Variable, match


# -- witnesses -----------------------------------------------------------------


@dataclass(frozen=True)
class Direct:
    """The head atom ``c`` is itself ``a'``."""

    kind: str = field(default="direct", init=False)


@dataclass(frozen=True)
class ViaPair:
    """``c`` feeds a body atom of another pair whose head atom yields ``a'``."""

    pair: ExtensionPair
    renaming: Substitution  # keeps the other pair apart from <B, H>
    body_atom: Atom  # renamed body atom of the other pair mapped onto c
    head_atom: Atom  # renamed head atom of the other pair mapped onto a'
    eta: Substitution
    kind: str = field(default="via-pair", init=False)


Cycle = Direct | ViaPair


@dataclass(frozen=True)
class Rtc:
    pair: ExtensionPair
    a: Atom
    b: Atom
    c: Atom
    x: Variable
    z: Variable
    a_prime: Atom
    theta: Substitution  # a theta == a_prime
    cycle: Cycle
    path: tuple[Atom, ...]
    links: tuple[frozenset[Variable], ...]  # link variables between consecutive path atoms
    y_prime: Variable
    y_prime_step: int  # index i with y_prime in links[i]
    marked: frozenset[Variable]  # m-var(a, c, a')
    guard: Atom | None

    @property
    def guarded(self) -> bool:
        return self.guard is not None

    def sort_key(self) -> tuple:
        return (
            0 if isinstance(self.cycle, Direct) else 1,
            self.pair.round,
            self.pair.index,
            self.pair.body.index(self.a),
            self.pair.body.index(self.b),
            self.pair.head.index(self.c),
            self.x.name,
            self.z.name,
            self.a_prime.sort_key(),
        )

    def __str__(self) -> str:
        return f"({self.pair}, <{self.a}, {self.b}, {self.c}>, <{self.x}, {self.z}>, {self.a_prime})"


def find_guard(body: Iterable[Atom], x: Variable, z: Variable) -> Atom | None:
    for d in body:
        vs = d.variables()
        if x in vs and z in vs:
            return d
    return None


# -- closing atom a' -----------------------------------------------------------


def _variable_image(a: Atom, target: Atom) -> Substitution | None:
    """theta over var(a) into variables with ``a theta == target``."""
    out = match(a, target)
    if out is None or any(not isinstance(t, Variable) for t in out.values()):
        return None
    return Substitution(out)


class _Classes:
    """Union-find over a' slots; a class may be pinned to one term."""

    def __init__(self):
        self.parent: dict[object, object] = {}
        self.value: dict[object, Term] = {}

    def find(self, k):
        while k in self.parent:
            k = self.parent[k]
        return k

    def union(self, k1, k2) -> bool:
        r1, r2 = self.find(k1), self.find(k2)
        if r1 == r2:
            return True
        v1, v2 = self.value.get(r1), self.value.get(r2)
        if v1 is not None and v2 is not None and v1 != v2:
            return False
        self.parent[r2] = r1
        if v1 is None and v2 is not None:
            self.value[r1] = v2
        return True

    def pin(self, k, term: Term) -> bool:
        r = self.find(k)
        v = self.value.get(r)
        if v is not None:
            return v == term
        self.value[r] = term
        return True


def closing_atoms(a: Atom, x: Variable, pattern: Atom, free: frozenset[Variable],
                  avoid: set[Variable]) -> Iterator[Atom]:
    """Most general atoms ``a'`` that instantiate ``pattern`` and are variable images of ``a``.

    Variables of ``pattern`` listed in ``free`` may be instantiated at will;
    every other term is kept.  Free variables become fresh, except that one of
    them may become ``x`` so that ``x`` occurs in ``a'``.
    """
    if pattern.relation != a.relation or pattern.arity != a.arity:
        return
    cls = _Classes()
    # slots: ("h", var) for free pattern variables, ("a", var) for variables of a
    for i, (s, t) in enumerate(zip(pattern.args, a.args)):
        if isinstance(s, Variable) and s in free:
            slot = ("h", s)
        else:
            slot = ("p", i)
            if not cls.pin(slot, s):
                return
        if isinstance(t, Variable):
            if not cls.union(("a", t), slot):
                return
        elif not cls.pin(slot, t):
            # a constant in a must reappear unchanged in a'
            return
    roots = []
    for t in a.args:
        if isinstance(t, Variable):
            r = cls.find(("a", t))
            v = cls.value.get(r)
            if v is not None and not isinstance(v, Variable):
                # a variable position of a must hold a variable in a'
                return
            if r not in roots:
                roots.append(r)
    free_roots = [r for r in roots if r not in cls.value]
    taken = {v.name for v in avoid} | {x.name}
    names: dict[object, Variable] = {}
    counter = itertools.count(1)
    for r in free_roots:
        while True:
            name = f"F{next(counter)}"
            if name not in taken:
                break
        names[r] = Variable(name)

    def build(choice) -> Atom:
        args = []
        for t in a.args:
            if not isinstance(t, Variable):
                args.append(t)
                continue
            r = cls.find(("a", t))
            if r in cls.value:
                args.append(cls.value[r])
            elif r == choice:
                args.append(x)
            else:
                args.append(names[r])
        return Atom(a.relation, tuple(args))

    if any(cls.value.get(r) == x for r in roots):
        yield build(None)
        return
    for r in free_roots:
        yield build(r)


# -- search --------------------------------------------------------------------


@dataclass
class _PathFinder:
    body: tuple[Atom, ...]
    links: dict[tuple[int, int], frozenset[Variable]]

    def find(self, start: int, end: int, good) -> tuple[list[int], int, Variable] | None:
        """Shortest simple path start..end over linked atoms that uses at
        least one edge carrying a good variable, with the witness edge and
        variable."""
        n = len(self.body)

        def dfs(node: int, path: list[int], witness, limit: int):
            if node == end:
                return (list(path), *witness) if witness is not None else None
            if len(path) == limit:
                return None
            for nxt in range(n):
                if nxt in path:
                    continue
                link = self.links.get((node, nxt))
                if not link:
                    continue
                w = witness
                if w is None:
                    ys = sorted((y for y in link if good(y)), key=lambda v: v.name)
                    if ys:
                        w = (len(path) - 1, ys[0])
                path.append(nxt)
                hit = dfs(nxt, path, w, limit)
                path.pop()
                if hit is not None:
                    return hit
            return None

        for limit in range(2, n + 1):
            hit = dfs(start, [start], None, limit)
            if hit is not None:
                return hit
        return None


class RtcSearch:
    """Finds RTCs over a growing list of extension pairs."""

    def __init__(self, rules: Sequence[Rule], analysis: NullAnalysis | None = None):
        self.rules = tuple(rules)
        self.analysis = analysis or NullAnalysis(self.rules)
        self._hat: dict[int, frozenset[Variable]] = {}
        self._seen: set[tuple] = set()

    def var_hat(self, pair: ExtensionPair) -> frozenset[Variable]:
        hat = self._hat.get(pair.index)
        if hat is None:
            hat = self._hat[pair.index] = self.analysis.var_hat(pair.body)
        return hat

    def _skeletons(self, pair: ExtensionPair):
        """(a, b, c, x, z) combinations meeting the structural conditions."""
        hat = self.var_hat(pair)
        if len(hat) < 2:
            return
        for c in pair.head:
            cv = sorted(c.variables() & hat, key=lambda v: v.name)
            for x, z in itertools.permutations(cv, 2):
                for a in pair.body:
                    if x not in a.variables():
                        continue
                    for b in pair.body:
                        if b == a or z not in b.variables():
                            continue
                        yield a, b, c, x, z

    def _templates(self, c: Atom, partners: Sequence[ExtensionPair]) -> list[tuple]:
        """Distinct instantiation patterns for a' when ``c`` feeds a partner's body.

        Each entry is ``(pattern, free, partner, body_atom, head_atom)``: the
        partner head atom with variables fixed by mapping ``body_atom`` onto
        ``c`` substituted, and its remaining variables listed in ``free``.
        """
        out: dict[tuple, tuple] = {}
        for other in partners:
            for b2 in other.body:
                fixed = match(b2, c)
                if fixed is None:
                    continue
                for h2 in other.head:
                    free_vars = [v for v in dict.fromkeys(h2.args) if isinstance(v, Variable) and v not in fixed]
                    marks = {v: Variable(f"?{k}") for k, v in enumerate(free_vars)}
                    pattern = Atom(h2.relation, tuple(
                        marks[t] if t in marks else fixed.get(t, t) if isinstance(t, Variable) else t
                        for t in h2.args
                    ))
                    key = (pattern.relation, pattern.args)
                    if key not in out:
                        out[key] = (pattern, frozenset(marks.values()), other, b2, h2)
        return list(out.values())

    @staticmethod
    def _via_witness(pair: ExtensionPair, c: Atom, a_prime: Atom, other: ExtensionPair,
                     b2: Atom, h2: Atom) -> ViaPair:
        renaming = rename_apart(other.variables(), pair.variables())
        rb, rh = renaming.apply(b2), renaming.apply(h2)
        eta = dict(match(rb, c))
        for s, t in zip(rh.args, a_prime.args):
            if isinstance(s, Variable):
                eta.setdefault(s, t)
        return ViaPair(other, renaming, rb, rh, Substitution(eta))

    def search(self, pair: ExtensionPair, partners: Sequence[ExtensionPair],
               direct: bool = True) -> Iterator[Rtc]:
        hat = self.var_hat(pair)
        if len(hat) < 2:
            return
        body = pair.body
        links: dict[tuple[int, int], frozenset[Variable]] = {}
        for i, j in itertools.permutations(range(len(body)), 2):
            lk = frozenset(body[i].variables() & body[j].variables() & hat)
            if lk:
                links[(i, j)] = lk
        finder = _PathFinder(body, links)
        own = pair.variables()
        templates: dict[Atom, list[tuple]] = {}
        seen = self._seen
        for a, b, c, x, z in self._skeletons(pair):
            closings: list[tuple] = []
            if direct:
                theta = _variable_image(a, c)
                if theta is not None:
                    closings.append((c, None))
            if partners:
                if c not in templates:
                    templates[c] = self._templates(c, partners)
                for entry in templates[c]:
                    pattern, free = entry[0], entry[1]
                    for a_prime in closing_atoms(a, x, pattern, free, own):
                        closings.append((a_prime, entry))
            for a_prime, entry in closings:
                if x not in a_prime.variables():
                    continue
                key = (pair.index, a, b, c, x, z, a_prime)
                if key in seen:
                    continue
                seen.add(key)
                marked = mark_vars(a, c, a_prime).marked
                ap_vars = a_prime.variables()

                def good(y: Variable) -> bool:
                    if y in (x, z):
                        return False
                    if y not in ap_vars:
                        return True
                    return all(a.args[i] in marked for i in a_prime.positions_of(y))

                found = finder.find(body.index(a), body.index(b), good)
                if found is None:
                    continue
                theta = _variable_image(a, a_prime)
                cycle = Direct() if entry is None else self._via_witness(pair, c, a_prime, *entry[2:])
                path_idx, step, y_prime = found
                path = tuple(body[i] for i in path_idx)
                link_sets = tuple(links[(path_idx[k], path_idx[k + 1])] for k in range(len(path_idx) - 1))
                yield Rtc(pair, a, b, c, x, z, a_prime, theta, cycle, path, link_sets,
                          y_prime, step, marked, find_guard(body, x, z))


def find_rtcs(rules: Sequence[Rule], pairs: Sequence[ExtensionPair]) -> list[Rtc]:
    """Every RTC over ``pairs``, one per (pair, a, b, c, x, z, a') combination, in witness order."""
    s = RtcSearch(rules)
    out = []
    for p in pairs:
        out.extend(s.search(p, pairs))
    out.sort(key=Rtc.sort_key)
    return out


def validate_rtc(rules: Sequence[Rule], rtc: Rtc) -> list[str]:
    """Independent re-check of every RTC condition; returns the violated ones."""
    errors = []
    analysis = NullAnalysis(rules)
    B, H = rtc.pair.body, rtc.pair.head
    hat = analysis.var_hat(B)
    if rtc.a not in B or rtc.b not in B or rtc.a == rtc.b:
        errors.append("a and b must be distinct body atoms")
    if rtc.c not in H:
        errors.append("c must be a head atom")
    if rtc.theta.apply(rtc.a) != rtc.a_prime or not all(isinstance(t, Variable) for t in rtc.theta.values()):
        errors.append("a theta must equal a' with theta into variables")
    if isinstance(rtc.cycle, Direct):
        if rtc.c != rtc.a_prime:
            errors.append("direct cycle needs c == a'")
    else:
        v = rtc.cycle
        other_vars = set()
        for at in v.renaming.apply_all(v.pair.body + v.pair.head):
            other_vars |= at.variables()
        if other_vars & (set().union(*(at.variables() for at in B + H))):
            errors.append("renamed partner pair must be variable-disjoint")
        if v.body_atom not in v.renaming.apply_all(v.pair.body) or v.head_atom not in v.renaming.apply_all(v.pair.head):
            errors.append("partner atoms must come from the renamed partner pair")
        if v.eta.apply(v.body_atom) != rtc.c or v.eta.apply(v.head_atom) != rtc.a_prime:
            errors.append("eta must map the partner atoms onto c and a'")
        if any(not isinstance(t, (Variable, Constant)) for t in v.eta.values()):
            errors.append("eta ranges over constants and variables")
    x, z = rtc.x, rtc.z
    if x == z or not {x, z} <= hat:
        errors.append("x, z must be distinct cyclically affected variables")
    if x not in rtc.a.variables() or z not in rtc.b.variables():
        errors.append("x in a and z in b")
    if not {x, z} <= rtc.c.variables() or x not in rtc.a_prime.variables():
        errors.append("x, z in c and x in a'")
    path = rtc.path
    if len(set(path)) != len(path) or not path or path[0] != rtc.a or path[-1] != rtc.b:
        errors.append("path must be distinct atoms from a to b")
    for k in range(len(path) - 1):
        if not analysis.link_vars(B, path[k], path[k + 1], hat):
            errors.append(f"no link variable between {path[k]} and {path[k + 1]}")
    y = rtc.y_prime
    if not (0 <= rtc.y_prime_step < len(path) - 1) or y not in analysis.link_vars(B, path[rtc.y_prime_step], path[rtc.y_prime_step + 1], hat) or y in (x, z):
        errors.append("y' must be a link variable other than x and z")
    elif y in rtc.a_prime.variables():
        marked = mark_vars(rtc.a, rtc.c, rtc.a_prime).marked
        if not all(rtc.a.args[i] in marked for i in rtc.a_prime.positions_of(y)):
            errors.append("y' positions in a' must hold marked variables of a")
    holders = [d for d in B if {x, z} <= d.variables()]
    if (rtc.guard is None) != (not holders) or (rtc.guard is not None and rtc.guard not in holders):
        errors.append("guard must be a body atom holding x and z, present exactly when one exists")
    return errors


# -- verdict -------------------------------------------------------------------


@dataclass
class Verdict:
    outcome: str  # "member" | "non-member" | "unknown"
    witness: Rtc | None = None
    reason: str = ""
    rounds: int = 0
    pairs: int = 0
    rtcs: int = 0

    @property
    def exit_code(self) -> int:
        return {"member": 0, "non-member": 1, "unknown": 2}[self.outcome]


def is_triangularly_guarded(rules: Sequence[Rule], max_rounds: int | None = None,
                            max_pairs: int = DEFAULT_MAX_PAIRS,
                            subset_cap: int = DEFAULT_SUBSET_CAP,
                            max_body: int | None = None, linear: bool = True) -> Verdict:
    """Decide membership, growing the extension round by round.

    The search stops early once an unguarded RTC whose head atom closes the
    cycle directly is found; otherwise the earliest unguarded RTC wins.
    """
    rules = tuple(rules)
    builder = ExtensionBuilder(rules, max_rounds, max_pairs, subset_cap, max_body, linear)
    search = RtcSearch(rules)
    builder.base()
    best: Rtc | None = None
    count = 0
    done = 0
    while True:
        pairs = builder.pairs
        fresh = pairs[done:]
        for p in pairs[:done]:
            for r in search.search(p, fresh, direct=False):
                count += 1
                if not r.guarded and (best is None or r.sort_key() < best.sort_key()):
                    best = r
        for p in fresh:
            for r in search.search(p, pairs):
                count += 1
                if not r.guarded and (best is None or r.sort_key() < best.sort_key()):
                    best = r
        done = len(pairs)
        if best is not None and isinstance(best.cycle, Direct):
            break
        if builder.saturated or builder.exhausted:
            break
        builder.step()
    common = dict(rounds=builder.rounds, pairs=len(builder.pairs), rtcs=count)
    if best is not None:
        return Verdict("non-member", best, "unguarded RTC", **common)
    if builder.saturated:
        return Verdict("member", None,
                       f"extension saturated (bodies up to {builder.max_body} atoms); every RTC is guarded",
                       **common)
    return Verdict("unknown", None, builder.reason, **common)

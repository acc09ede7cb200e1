"""Level-tracked oblivious chase, boolean query answering and null interchangeability.

The chase runs breadth first: level ``L`` fires every trigger whose body
image has maximum level ``L - 1``.  Within a level, triggers are ordered by
rule position and then by the creation order of the atoms they match, so
null names are reproducible.
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Sequence

from .model import Atom, Constant, Null, Query, Rule, Substitution, Term, Variable, is_connected

DEFAULT_MAX_ATOMS = 50_000
DEFAULT_DEPTH_LIMIT = 8
DEFAULT_EMBEDDING_CAP = 10**6


class ResourceError(RuntimeError):
    """A safety cap was exceeded."""


def max_atoms_from_env(default: int = DEFAULT_MAX_ATOMS) -> int:
    raw = os.environ.get("TG_MAX_ATOMS")
    if raw is None or raw == "":
        return default
    value = int(raw)
    if value < 1:
        raise ValueError("TG_MAX_ATOMS must be positive")
    return value


@dataclass(frozen=True)
class ChaseAtom:
    atom: Atom
    level: int
    seq: int  # creation order
    rule: str | None = None  # None for database atoms
    trigger: Substitution | None = None
    parents: tuple[int, ...] = ()  # seq of the matched body atoms


class ChaseInstance:
    """Atoms with levels and provenance, plus the next free null index."""

    def __init__(self, atoms: Iterable[ChaseAtom] = (), next_null: int = 1):
        self._atoms: dict[Atom, ChaseAtom] = {}
        self._by_rel: dict[str, list[ChaseAtom]] = {}
        self._by_seq: list[ChaseAtom] = []
        self.next_null = next_null
        self.null_level: dict[Null, int] = {}
        self.fired: set[tuple[str, Substitution]] = set()  # oblivious: each trigger once
        for ca in atoms:
            self._insert(ca)

    @classmethod
    def from_database(cls, facts: Iterable[Atom]) -> "ChaseInstance":
        inst = cls()
        for a in sorted(set(facts), key=Atom.sort_key):
            if a.variables():
                raise ValueError(f"database atom {a} contains variables")
            if a.nulls():
                raise ValueError(f"database atom {a} contains labeled nulls")
            inst._insert(ChaseAtom(a, 0, len(inst._by_seq)))
        return inst

    def _insert(self, ca: ChaseAtom) -> None:
        self._atoms[ca.atom] = ca
        self._by_rel.setdefault(ca.atom.relation, []).append(ca)
        self._by_seq.append(ca)
        for n in ca.atom.nulls():
            self.null_level.setdefault(n, ca.level)

    def copy(self) -> "ChaseInstance":
        out = ChaseInstance(next_null=self.next_null)
        for ca in self._by_seq:
            out._insert(ca)
        out.fired = set(self.fired)
        return out

    def __contains__(self, atom: Atom) -> bool:
        return atom in self._atoms

    def __len__(self) -> int:
        return len(self._atoms)

    def __iter__(self) -> Iterator[ChaseAtom]:
        return iter(self._by_seq)

    def get(self, atom: Atom) -> ChaseAtom | None:
        return self._atoms.get(atom)

    def atoms(self, max_level: int | None = None) -> list[Atom]:
        return [ca.atom for ca in self._by_seq if max_level is None or ca.level <= max_level]

    def atom_set(self) -> frozenset[Atom]:
        return frozenset(self._atoms)

    def with_relation(self, relation: str) -> list[ChaseAtom]:
        return self._by_rel.get(relation, [])

    def nulls(self) -> list[Null]:
        return sorted(self.null_level)

    @property
    def max_level(self) -> int:
        return max((ca.level for ca in self._by_seq), default=0)

    def __repr__(self) -> str:
        return f"ChaseInstance({len(self)} atoms, next_null={self.next_null})"


# -- chase ---------------------------------------------------------------------


def _matches(body: Sequence[Atom], instance: ChaseInstance, pools: Sequence[Sequence[ChaseAtom]],
             binding: dict[Variable, Term], k: int = 0) -> Iterator[tuple[dict[Variable, Term], tuple[ChaseAtom, ...]]]:
    if k == len(body):
        yield binding, ()
        return
    pattern = body[k]
    for ca in pools[k]:
        target = ca.atom
        if target.arity != pattern.arity:
            continue
        new = binding
        ok = True
        for p, t in zip(pattern.args, target.args):
            if isinstance(p, Variable):
                bound = new.get(p)
                if bound is None:
                    if new is binding:
                        new = dict(binding)
                    new[p] = t
                elif bound != t:
                    ok = False
                    break
            elif p != t:
                ok = False
                break
        if not ok:
            continue
        for full, rest in _matches(body, instance, pools, new, k + 1):
            yield full, (ca,) + rest


def _fire(instance: ChaseInstance, rule: Rule, eta: Mapping[Variable, Term],
          level: int, parents: tuple[int, ...]) -> list[ChaseAtom]:
    trigger = Substitution({v: eta[v] for v in sorted(rule.body_variables, key=lambda v: v.name)})
    if (rule.id, trigger) in instance.fired:
        return []
    instance.fired.add((rule.id, trigger))
    ext = dict(eta)
    for z in rule.ordered_existentials():
        ext[z] = Null(instance.next_null)
        instance.next_null += 1
    added = []
    for h in rule.head:
        atom = Atom(h.relation, tuple(ext.get(t, t) if isinstance(t, Variable) else t for t in h.args))
        old = instance.get(atom)
        if old is not None:
            # breadth-first order means the stored level is already minimal
            continue
        ca = ChaseAtom(atom, level, len(instance), rule.id, trigger, parents)
        instance._insert(ca)
        added.append(ca)
    return added


def chase_step(instance: ChaseInstance, rule: Rule, eta: Mapping[Variable, Term]) -> ChaseInstance:
    """Apply one trigger and return the extended copy of ``instance``.

    A trigger that was already applied leaves the copy unchanged, counter included.
    """
    missing = [v for v in rule.body_variables if v not in eta]
    if missing:
        raise ValueError(f"trigger leaves {sorted(v.name for v in missing)} unassigned")
    parents = []
    for b in rule.body:
        img = Atom(b.relation, tuple(eta.get(t, t) if isinstance(t, Variable) else t for t in b.args))
        ca = instance.get(img)
        if ca is None:
            raise ValueError(f"trigger for {rule.id} needs {img}, which is not in the instance")
        parents.append(ca)
    out = instance.copy()
    level = 1 + max(ca.level for ca in parents)
    _fire(out, rule, {v: eta[v] for v in rule.body_variables}, level, tuple(ca.seq for ca in parents))
    return out


class Chaser:
    """Grows a chase one level at a time."""

    def __init__(self, facts: Iterable[Atom], rules: Sequence[Rule], max_atoms: int | None = None):
        self.rules = tuple(rules)
        self.instance = ChaseInstance.from_database(facts)
        self.level = 0
        self.max_atoms = max_atoms_from_env() if max_atoms is None else max_atoms
        if len(self.instance) > self.max_atoms:
            raise ResourceError(f"database has more than {self.max_atoms} atoms")
        self.quiet = False  # a level added nothing, so no later level can

    def triggers(self, level: int) -> list[tuple[tuple, int, dict[Variable, Term], tuple[ChaseAtom, ...]]]:
        """Triggers whose body image has maximum level ``level - 1``, in firing order."""
        prev = level - 1
        inst = self.instance
        found: dict[tuple, tuple] = {}
        for ri, rule in enumerate(self.rules):
            body = rule.body
            old = [[ca for ca in inst.with_relation(b.relation) if ca.level <= prev] for b in body]
            new = [[ca for ca in pool if ca.level == prev] for pool in old]
            if not any(new):
                continue
            for k in range(len(body)):
                if not new[k]:
                    continue
                # atom k is the first one drawn from the newest level
                pools = [
                    [ca for ca in old[i] if ca.level < prev] if i < k else (new[k] if i == k else old[i])
                    for i in range(len(body))
                ]
                for eta, matched in _matches(body, inst, pools, {}):
                    key = (ri, tuple(ca.seq for ca in matched))
                    if key not in found:
                        found[key] = (key, ri, eta, matched)
        return [found[k] for k in sorted(found)]

    def step(self) -> list[ChaseAtom]:
        """Compute the next level; returns the atoms it added."""
        level = self.level + 1
        added: list[ChaseAtom] = []
        for _, ri, eta, matched in self.triggers(level):
            added.extend(_fire(self.instance, self.rules[ri], eta, level, tuple(ca.seq for ca in matched)))
            if len(self.instance) > self.max_atoms:
                raise ResourceError(f"chase exceeded {self.max_atoms} atoms at level {level}")
        self.level = level
        if not added:
            self.quiet = True
        return added

    def run_to(self, k: int) -> ChaseInstance:
        while self.level < k:
            self.step()
        return self.instance


def chase_to_level(facts: Iterable[Atom], rules: Sequence[Rule], k: int,
                   max_atoms: int | None = None) -> ChaseInstance:
    """All chase atoms of level at most ``k``."""
    if k < 0:
        raise ValueError("level must be non-negative")
    return Chaser(facts, rules, max_atoms).run_to(k)


# -- queries -------------------------------------------------------------------


def homomorphisms(atoms: Sequence[Atom], instance: ChaseInstance | Iterable[Atom]) -> Iterator[Substitution]:
    """Maps of the variables of ``atoms`` sending every atom into ``instance``."""
    if not isinstance(instance, ChaseInstance):
        inst = ChaseInstance()
        for a in instance:
            if a not in inst:
                inst._insert(ChaseAtom(a, 0, len(inst)))
        instance = inst
    pools = [instance.with_relation(a.relation) for a in atoms]
    for eta, _ in _matches(tuple(atoms), instance, pools, {}):
        yield Substitution(eta)


@dataclass(frozen=True)
class Answer:
    outcome: str  # "yes" | "no" | "unknown"
    hom: Substitution | None = None
    level: int | None = None  # level at which the match was found
    certified: bool = False
    depth: int = 0  # deepest level computed
    reason: str = ""

    @property
    def exit_code(self) -> int:
        return {"yes": 0, "no": 1, "unknown": 2}[self.outcome]


def _query_match(query: Query, instance: ChaseInstance) -> Substitution | None:
    return next(homomorphisms(query.body, instance), None)


def answer_bcq(facts: Iterable[Atom], rules: Sequence[Rule], query: Query,
               depth_limit: int = DEFAULT_DEPTH_LIMIT, auto: bool = False,
               max_atoms: int | None = None, tg_verdict=None) -> Answer:
    """Evaluate a boolean query over the chase, level by level.

    Without ``auto`` a miss up to ``depth_limit`` gives an uncertified No.  With
    ``auto`` and a triangularly-guarded program, levels keep growing until the
    nulls of three consecutive fresh levels are all interchangeable with older
    ones for the query body and every rule body; then the No is certified.
    That stopping test is a heuristic stand-in for the unknown bound on
    distinguishable nulls, not a decision procedure.
    """
    chaser = Chaser(facts, rules, max_atoms)
    try:
        hom = _query_match(query, chaser.instance)
        if hom is not None:
            return Answer("yes", hom, 0, depth=0)
        while chaser.level < depth_limit and not chaser.quiet:
            chaser.step()
            hom = _query_match(query, chaser.instance)
            if hom is not None:
                return Answer("yes", hom, chaser.level, depth=chaser.level)
    except ResourceError as exc:
        return Answer("unknown", depth=chaser.level, reason=str(exc))
    if chaser.quiet:
        return Answer("no", certified=True, depth=chaser.level,
                      reason=f"chase is complete at level {chaser.level - 1}")
    if not auto:
        return Answer("no", depth=chaser.level, reason=f"no match up to level {depth_limit}")
    if tg_verdict is None:
        from .tg import is_triangularly_guarded

        tg_verdict = is_triangularly_guarded(rules)
    if tg_verdict.outcome != "member":
        return Answer("no", depth=chaser.level,
                      reason=f"no match up to level {depth_limit}; program is not known to be TG")
    shapes = [tuple(query.body)] + [tuple(r.body) for r in rules]
    try:
        for n in range(0, depth_limit + 1):
            while chaser.level < n + 3 and not chaser.quiet:
                chaser.step()
                hom = _query_match(query, chaser.instance)
                if hom is not None:
                    return Answer("yes", hom, chaser.level, depth=chaser.level)
            if bounded_nulls_at(chaser.instance, n, shapes):
                return Answer("no", certified=True, depth=chaser.level,
                              reason=f"nulls beyond level {n} are interchangeable with older ones")
    except ResourceError as exc:
        return Answer("unknown", depth=chaser.level, reason=str(exc))
    return Answer("no", depth=chaser.level, reason="interchangeability test did not settle")


# -- interchangeable nulls -----------------------------------------------------


def embeddings(shape: Sequence[Atom], atoms: Iterable[Atom]) -> Iterator[dict[Variable, Term]]:
    """Injective maps of the variables of ``shape`` with every image atom in ``atoms``."""
    atoms = list(atoms)
    by_rel: dict[str, list[Atom]] = {}
    for a in atoms:
        by_rel.setdefault(a.relation, []).append(a)

    def go(k: int, binding: dict[Variable, Term], used: set[Term]):
        if k == len(shape):
            yield dict(binding)
            return
        pattern = shape[k]
        for target in by_rel.get(pattern.relation, ()):
            if target.arity != pattern.arity:
                continue
            added = []
            ok = True
            for p, t in zip(pattern.args, target.args):
                if isinstance(p, Variable):
                    b = binding.get(p)
                    if b is None:
                        if t in used:
                            ok = False
                            break
                        binding[p] = t
                        used.add(t)
                        added.append(p)
                    elif b != t:
                        ok = False
                        break
                elif p != t:
                    ok = False
                    break
            if ok:
                yield from go(k + 1, binding, used)
            for p in added:
                used.discard(binding.pop(p))

    yield from go(0, {}, set())


def _merge_exists(image: Sequence[Atom], ni: Null, nj: Null, atoms: frozenset[Atom],
                  by_rel: dict[str, list[Atom]], budget: list[int]) -> bool:
    """Some null map sending ni and nj to one null keeps ``image`` inside ``atoms``."""
    # nulls of the image become variables; ni and nj share one variable
    names: dict[Null, Variable] = {}
    for a in image:
        for t in a.args:
            if isinstance(t, Null) and t not in names:
                names[t] = Variable(f"_n{t.index}")
    names[nj] = names[ni]
    pattern = [Atom(a.relation, tuple(names.get(t, t) for t in a.args)) for a in image]
    merged = names[ni]

    def go(k: int, binding: dict[Variable, Term]) -> bool:
        budget[0] -= 1
        if budget[0] < 0:
            raise ResourceError("interchangeability search exceeded its candidate cap")
        if k == len(pattern):
            return True
        p = pattern[k]
        for target in by_rel.get(p.relation, ()):
            new = dict(binding)
            ok = True
            for s, t in zip(p.args, target.args):
                if isinstance(s, Variable):
                    if not isinstance(t, Null):
                        ok = False  # nulls map to nulls
                        break
                    b = new.get(s)
                    if b is None:
                        new[s] = t
                    elif b != t:
                        ok = False
                        break
                elif s != t:
                    ok = False
                    break
            if ok and go(k + 1, new):
                return True
        return False

    del merged
    return go(0, {})


def interchangeable(ni: Null, nj: Null, shape: Sequence[Atom], instance: ChaseInstance | Iterable[Atom],
                    cap: int = DEFAULT_EMBEDDING_CAP) -> bool:
    """Whether ``ni`` and ``nj`` are interchangeable for ``shape`` within ``instance``.

    Every injective embedding of the (connected) shape that uses both nulls
    must admit a null-to-null map merging them whose image stays inside the
    instance.  Embeddings of a disconnected shape are never considered.
    """
    if any(t for a in shape for t in a.args if not isinstance(t, Variable)):
        raise ValueError("interchangeability shapes contain variables only")
    atoms = instance.atom_set() if isinstance(instance, ChaseInstance) else frozenset(instance)
    shape = tuple(shape)
    if not shape or not is_connected(shape):
        return True
    by_rel: dict[str, list[Atom]] = {}
    for a in sorted(atoms, key=Atom.sort_key):
        by_rel.setdefault(a.relation, []).append(a)
    budget = [cap]
    for theta in embeddings(shape, sorted(atoms, key=Atom.sort_key)):
        budget[0] -= 1
        if budget[0] < 0:
            raise ResourceError("interchangeability search exceeded its candidate cap")
        used = set(theta.values())
        if ni not in used or nj not in used:
            continue
        image = [Atom(a.relation, tuple(theta.get(t, t) for t in a.args)) for a in shape]
        if not _merge_exists(image, ni, nj, atoms, by_rel, budget):
            return False
    return True


def bounded_nulls_at(instance: ChaseInstance, n: int, shapes: Sequence[Sequence[Atom]],
                     window: int = 3, cap: int = DEFAULT_EMBEDDING_CAP) -> bool:
    """Every null born in levels n+1..n+window is interchangeable, for every shape,
    with some null born at level n or earlier; judged inside ``instance``."""
    old = [m for m, lv in sorted(instance.null_level.items()) if lv <= n]
    fresh = [m for m, lv in sorted(instance.null_level.items()) if n < lv <= n + window]
    for nj in fresh:
        for shape in shapes:
            if not any(interchangeable(ni, nj, shape, instance, cap) for ni in old):
                return False
    return True

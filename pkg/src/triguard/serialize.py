"""Canonical text for programs and versioned JSON for analysis artifacts.

Every JSON document carries ``"format": 1`` and a ``"kind"`` tag; the
schema ships next to this module as ``schemas/triguard.schema.json``.
Atoms and terms are written as their surface strings, nulls as ``_:n<i>``.
"""

from __future__ import annotations

import json
from importlib import resources
from typing import Any, Iterable, Mapping, Sequence

from .affected import NullAnalysis
from .chase import Answer, ChaseInstance
from .extension import Derivation, ExtensionPair
from .model import Atom, Rule
from .parser import Program
from .tg import Direct, Rtc, Verdict

FORMAT = 1


# -- text ------------------------------------------------------------------------


def rule_text(rule: Rule) -> str:
    return f"{rule.id}: {rule}."


def program_text(program: Program) -> str:
    """Sorted facts, then rules in input order with labels, then queries."""
    lines = [f"{a}." for a in sorted(set(program.facts), key=Atom.sort_key)]
    lines += [rule_text(r) for r in program.rules]
    lines += [f"{q}." for q in program.queries]
    return "".join(line + "\n" for line in lines)


# -- JSON building blocks -------------------------------------------------------------


def _atoms(atoms: Iterable[Atom]) -> list[str]:
    return [str(a) for a in atoms]


def _subst(theta: Mapping) -> dict[str, str]:
    return {str(k): str(v) for k, v in sorted(theta.items(), key=lambda kv: kv[0].name)}


def _names(vs: Iterable) -> list[str]:
    return sorted(str(v) for v in vs)


def pair_json(pair: ExtensionPair) -> dict[str, Any]:
    prov = pair.provenance
    if isinstance(prov, Derivation):
        provenance = {
            "left": prov.left,
            "right": prov.right,
            "renaming": _subst(prov.renaming),
            "pairing": [[str(h), str(b)] for h, b in prov.pairing],
            "unifier": _subst(prov.unifier),
        }
    else:
        provenance = {"rule": prov}
    return {
        "index": pair.index,
        "round": pair.round,
        "body": _atoms(pair.body),
        "head": _atoms(pair.head),
        "provenance": provenance,
    }


def rtc_json(rtc: Rtc) -> dict[str, Any]:
    if isinstance(rtc.cycle, Direct):
        cycle: dict[str, Any] = {"kind": "direct"}
    else:
        v = rtc.cycle
        cycle = {
            "kind": "via-pair",
            "pair": v.pair.index,
            "renaming": _subst(v.renaming),
            "body_atom": str(v.body_atom),
            "head_atom": str(v.head_atom),
            "eta": _subst(v.eta),
        }
    return {
        "pair": pair_json(rtc.pair),
        "a": str(rtc.a),
        "b": str(rtc.b),
        "c": str(rtc.c),
        "X": str(rtc.x),
        "Z": str(rtc.z),
        "a_prime": str(rtc.a_prime),
        "theta": _subst(rtc.theta),
        "cycle": cycle,
        "path": _atoms(rtc.path),
        "links": [_names(s) for s in rtc.links],
        "y_prime": str(rtc.y_prime),
        "y_prime_step": rtc.y_prime_step,
        "marked": _names(rtc.marked),
        "guard": None if rtc.guard is None else str(rtc.guard),
        "guarded": rtc.guarded,
    }


def verdict_json(verdict: Verdict, cls: str = "tg") -> dict[str, Any]:
    return {
        "format": FORMAT,
        "kind": "verdict",
        "class": cls,
        "outcome": verdict.outcome,
        "reason": verdict.reason,
        "rounds": verdict.rounds,
        "pairs": verdict.pairs,
        "rtcs": verdict.rtcs,
        "witness": None if verdict.witness is None else rtc_json(verdict.witness),
    }


def chase_json(instance: ChaseInstance, depth: int | None = None) -> dict[str, Any]:
    return {
        "format": FORMAT,
        "kind": "chase",
        "depth": instance.max_level if depth is None else depth,
        "next_null": instance.next_null,
        "atoms": [
            {
                "seq": ca.seq,
                "atom": str(ca.atom),
                "level": ca.level,
                "rule": ca.rule,
                "trigger": None if ca.trigger is None else _subst(ca.trigger),
                "parents": list(ca.parents),
            }
            for ca in instance
        ],
    }


def answer_json(answer: Answer, query=None) -> dict[str, Any]:
    return {
        "format": FORMAT,
        "kind": "answer",
        "query": None if query is None else str(query),
        "outcome": answer.outcome,
        "certified": answer.certified,
        "level": answer.level,
        "depth": answer.depth,
        "hom": None if answer.hom is None else _subst(answer.hom),
        "reason": answer.reason,
    }


def pairs_json(pairs: Sequence[ExtensionPair], saturated: bool, rounds: int) -> dict[str, Any]:
    return {
        "format": FORMAT,
        "kind": "pairs",
        "saturated": saturated,
        "rounds": rounds,
        "pairs": [pair_json(p) for p in pairs],
    }


def explain_json(analysis: NullAnalysis, pairs: Sequence[ExtensionPair], saturated: bool,
                 rounds: int, rtcs: Sequence[Rtc]) -> dict[str, Any]:
    g = analysis.graph
    return {
        "format": FORMAT,
        "kind": "explain",
        "null_sets": analysis.table.to_json(),
        "graph": {
            "nodes": sorted(str(n) for n in g.nodes),
            "edges": sorted([str(s), str(t)] for s, t in g.edges),
        },
        "cyc_null": sorted(str(n) for n in analysis.cyclic),
        "saturated": saturated,
        "rounds": rounds,
        "pairs": [dict(pair_json(p), var_hat=_names(analysis.var_hat(p.body))) for p in pairs],
        "rtcs": [rtc_json(r) for r in rtcs],
    }


def dumps(obj: Any) -> str:
    """Stable JSON text: insertion-ordered keys, two-space indent, trailing newline."""
    return json.dumps(obj, indent=2, ensure_ascii=False) + "\n"


def serialize(x: Program | ExtensionPair | Rtc | ChaseInstance | Verdict | Answer) -> str:
    if isinstance(x, Program):
        return program_text(x)
    if isinstance(x, ExtensionPair):
        return dumps(dict({"format": FORMAT, "kind": "pair"}, **pair_json(x)))
    if isinstance(x, Rtc):
        return dumps(dict({"format": FORMAT, "kind": "rtc"}, **rtc_json(x)))
    if isinstance(x, ChaseInstance):
        return dumps(chase_json(x))
    if isinstance(x, Verdict):
        return dumps(verdict_json(x))
    if isinstance(x, Answer):
        return dumps(answer_json(x))
    raise TypeError(f"cannot serialize {type(x).__name__}")


def load_schema() -> dict[str, Any]:
    text = resources.files("triguard").joinpath("schemas/triguard.schema.json").read_text(encoding="utf-8")
    return json.loads(text)


__all__ = [
    "FORMAT",
    "answer_json",
    "chase_json",
    "dumps",
    "explain_json",
    "load_schema",
    "pair_json",
    "pairs_json",
    "program_text",
    "rtc_json",
    "serialize",
    "verdict_json",
]

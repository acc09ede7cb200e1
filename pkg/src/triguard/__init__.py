"""Triangular-guardedness analysis and level-bounded chase for existential rules."""

from __future__ import annotations

from .baselines import is_guarded, is_sticky, is_weakly_acyclic
from .chase import Answer, ChaseInstance, ResourceError, answer_bcq, chase_to_level, interchangeable
from .extension import ExtensionPair, compute_extension, mark_vars
from .model import Atom, Constant, Null, Query, Rule, Substitution, Variable, mgu
from .parser import ParseError, Program, parse_program
from .serialize import serialize
from .tg import Rtc, Verdict, find_rtcs, is_triangularly_guarded

__version__ = "0.1.0"

__all__ = [
    "Answer",
    "Atom",
    "ChaseInstance",
    "Constant",
    "ExtensionPair",
    "Null",
    "ParseError",
    "Program",
    "Query",
    "ResourceError",
    "Rtc",
    "Rule",
    "Substitution",
    "Variable",
    "Verdict",
    "answer_bcq",
    "chase_to_level",
    "compute_extension",
    "find_rtcs",
    "interchangeable",
    "is_guarded",
    "is_sticky",
    "is_triangularly_guarded",
    "is_weakly_acyclic",
    "mark_vars",
    "mgu",
    "parse_program",
    "serialize",
]

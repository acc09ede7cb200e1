"""``tg`` command line: check, chase, ask, explain.

Exit codes: 0 member/yes, 1 non-member/no, 2 unknown, 3 usage, input or
parse errors, 4 a safety cap hit where no three-valued answer exists.
"""

from __future__ import annotations

import argparse
import os
import sys
from dataclasses import dataclass
from typing import Sequence, TextIO

from .affected import NullAnalysis
from .baselines import is_guarded, is_sticky, is_weakly_acyclic
from .chase import DEFAULT_DEPTH_LIMIT, ChaseInstance, ResourceError, answer_bcq, chase_to_level
from .extension import DEFAULT_MAX_PAIRS, Derivation, compute_extension
from .model import Query
from .parser import ParseError, Program, parse_atoms, parse_program
from .serialize import answer_json, chase_json, dumps, explain_json, pairs_json, rule_text, verdict_json
from .tg import Verdict, find_rtcs, is_triangularly_guarded

EXIT_ERROR = 3
EXIT_RESOURCE = 4


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    command: str  # check | chase | ask | explain
    path: str
    cls: str = "tg"
    depth: int = 0
    depth_limit: int = DEFAULT_DEPTH_LIMIT
    auto: bool = False
    query: str | None = None
    max_rounds: int | None = None
    max_pairs: int = DEFAULT_MAX_PAIRS
    max_body: int | None = None
    max_atoms: int | None = None
    fmt: str = "text"  # text | json | dot
    pairs: bool = False

    def __post_init__(self):
        if self.command not in ("check", "chase", "ask", "explain"):
            raise UsageError(f"unknown command {self.command!r}")
        for name in ("max_rounds", "max_pairs", "max_body", "max_atoms"):
            v = getattr(self, name)
            if v is not None and v < 1:
                raise UsageError(f"{name.replace('_', '-')} must be positive")
        if self.depth < 0 or self.depth_limit < 0:
            raise UsageError("depths must be non-negative")


def _load(path: str) -> Program:
    if path == "-":
        return parse_program(sys.stdin.read())
    with open(path, encoding="utf-8") as fh:
        return parse_program(fh.read())


# -- check -----------------------------------------------------------------------


def _baseline(prog: Program, cls: str) -> Verdict:
    test = {"wa": is_weakly_acyclic, "guarded": is_guarded, "sticky": is_sticky}[cls]
    ok = test(prog.rules)
    return Verdict("member" if ok else "non-member", None, f"{cls} test {'passed' if ok else 'failed'}")


def _check(cfg: RunConfig, prog: Program, out: TextIO) -> int:
    if cfg.cls == "tg":
        verdict = is_triangularly_guarded(prog.rules, cfg.max_rounds, cfg.max_pairs, max_body=cfg.max_body)
    else:
        verdict = _baseline(prog, cfg.cls)
    if cfg.fmt == "json":
        out.write(dumps(verdict_json(verdict, cfg.cls)))
        return verdict.exit_code
    out.write(f"{verdict.outcome}: {verdict.reason}\n")
    if cfg.cls == "tg":
        out.write(f"rounds={verdict.rounds} pairs={verdict.pairs} rtcs={verdict.rtcs}\n")
    if verdict.witness is not None:
        w = verdict.witness
        out.write(f"witness: {w}\n")
        out.write(f"  path: {' - '.join(map(str, w.path))}  via {w.y_prime}\n")
        out.write(f"  cycle: {w.cycle.kind}\n")
        out.write("  no body atom holds both " f"{w.x} and {w.z}\n")
    return verdict.exit_code


# -- chase -----------------------------------------------------------------------


def chase_dot(inst: ChaseInstance) -> str:
    lines = ["digraph chase {", "  rankdir=LR;", "  node [shape=box];"]
    for ca in inst:
        label = f"{ca.atom}\\nlevel {ca.level}"
        lines.append(f'  a{ca.seq} [label="{label}"];')
    for ca in inst:
        for p in ca.parents:
            lines.append(f'  a{p} -> a{ca.seq} [label="{ca.rule}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _chase(cfg: RunConfig, prog: Program, out: TextIO) -> int:
    inst = chase_to_level(prog.facts, prog.rules, cfg.depth, cfg.max_atoms)
    if cfg.fmt == "json":
        out.write(dumps(chase_json(inst, cfg.depth)))
    elif cfg.fmt == "dot":
        out.write(chase_dot(inst))
    else:
        for ca in inst:
            src = "" if ca.rule is None else f"  [{ca.rule}]"
            out.write(f"{ca.level}\t{ca.atom}{src}\n")
    return 0


# -- ask -------------------------------------------------------------------------


def _ask(cfg: RunConfig, prog: Program, out: TextIO) -> int:
    if cfg.query is not None:
        text = cfg.query.strip()
        text = text[2:] if text.startswith("?-") else text
        query = Query(tuple(parse_atoms(text.rstrip().rstrip("."))))
    elif len(prog.queries) == 1:
        query = prog.queries[0]
    else:
        raise UsageError(f"expected one query in the file or --query, found {len(prog.queries)}")
    ans = answer_bcq(prog.facts, prog.rules, query, cfg.depth_limit, cfg.auto, cfg.max_atoms)
    if cfg.fmt == "json":
        out.write(dumps(answer_json(ans, query)))
        return ans.exit_code
    if ans.outcome == "yes":
        out.write(f"yes: {ans.hom!r} at level {ans.level}\n")
    elif ans.outcome == "no":
        out.write(f"no ({'certified' if ans.certified else 'not certified'}): {ans.reason}\n")
    else:
        out.write(f"unknown: {ans.reason}\n")
    return ans.exit_code


# -- explain ---------------------------------------------------------------------


def _explain(cfg: RunConfig, prog: Program, out: TextIO) -> int:
    rules = prog.rules
    analysis = NullAnalysis(rules)
    if cfg.fmt == "dot":
        out.write(analysis.graph.to_dot())
        return 0
    ext = compute_extension(rules, cfg.max_rounds, cfg.max_pairs, max_body=cfg.max_body)
    if cfg.pairs:
        out.write(dumps(pairs_json(ext.pairs, ext.saturated, ext.rounds)))
        return 0
    rtcs = find_rtcs(rules, ext.pairs)
    if cfg.fmt == "json":
        out.write(dumps(explain_json(analysis, ext.pairs, ext.saturated, ext.rounds, rtcs)))
        return 0
    w = out.write
    w("rules:\n")
    for r in rules:
        w(f"  {rule_text(r)}\n")
    w("existential dependency graph:\n")
    for s, t in sorted(analysis.graph.edges):
        w(f"  {s} -> {t}\n")
    if not analysis.graph.edges:
        w("  (no edges)\n")
    w(f"cyc-null: {{{', '.join(sorted(str(n) for n in analysis.cyclic))}}}\n")
    state = "saturated" if ext.saturated else f"not saturated ({ext.reason})"
    w(f"extension: {len(ext.pairs)} pairs, {ext.rounds} rounds, {state}, "
      f"bodies up to {ext.max_body} atoms, {ext.dropped} larger composites dropped\n")
    for p in ext.pairs:
        src = p.provenance if not isinstance(p.provenance, Derivation) else f"{p.provenance.left} + {p.provenance.right}"
        hat = ", ".join(sorted(v.name for v in analysis.var_hat(p.body)))
        w(f"  [{p.index}] round {p.round} from {src}: {p}  var-hat={{{hat}}}\n")
    unguarded = sum(1 for r in rtcs if not r.guarded)
    w(f"rtcs: {len(rtcs)} ({unguarded} unguarded)\n")
    for r in rtcs:
        status = f"guarded by {r.guard}" if r.guarded else "UNGUARDED"
        w(f"  [{r.pair.index}] {r}  {r.cycle.kind}  {status}\n")
    if unguarded:
        w("verdict: non-member\n")
    elif ext.saturated:
        w("verdict: member\n")
    else:
        w("verdict: unknown\n")
    return 0


# -- entry -----------------------------------------------------------------------


def run(cfg: RunConfig, out: TextIO | None = None, err: TextIO | None = None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    try:
        prog = _load(cfg.path)
    except ParseError as exc:
        err.write(f"tg: {cfg.path}:{exc}\n")
        return EXIT_ERROR
    except (OSError, UnicodeDecodeError) as exc:
        err.write(f"tg: cannot read {cfg.path}: {getattr(exc, 'strerror', None) or exc}\n")
        return EXIT_ERROR
    except ValueError as exc:
        err.write(f"tg: {cfg.path}: {exc}\n")
        return EXIT_ERROR
    handler = {"check": _check, "chase": _chase, "ask": _ask, "explain": _explain}[cfg.command]
    try:
        return handler(cfg, prog, out)
    except (UsageError, ParseError) as exc:
        err.write(f"tg: {exc}\n")
        return EXIT_ERROR
    except ResourceError as exc:
        err.write(f"tg: {exc}\n")
        return EXIT_RESOURCE


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        # argparse's own exit status 2 would read as "unknown"
        self.print_usage(sys.stderr)
        self.exit(EXIT_ERROR, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return v


def _natural(text: str) -> int:
    v = int(text)
    if v < 0:
        raise argparse.ArgumentTypeError("must be a non-negative integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tg", description="Triangular-guardedness checks and level-bounded chase.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def budgets(sp):
        sp.add_argument("--max-rounds", type=_positive, help="extension rounds (default 2*|rules|*max arity)")
        sp.add_argument("--max-pairs", type=_positive, default=DEFAULT_MAX_PAIRS)
        sp.add_argument("--max-body", type=_positive, help="largest pair body kept (default 1 + largest rule body)")

    c = sub.add_parser("check", help="class membership")
    c.add_argument("file")
    c.add_argument("--class", dest="cls", choices=["tg", "wa", "guarded", "sticky"], default="tg")
    c.add_argument("--json", action="store_true")
    budgets(c)

    ch = sub.add_parser("chase", help="chase up to a level")
    ch.add_argument("file")
    ch.add_argument("--depth", type=_natural, required=True)
    g = ch.add_mutually_exclusive_group()
    g.add_argument("--json", action="store_true")
    g.add_argument("--dot", action="store_true")
    ch.add_argument("--max-atoms", type=_positive, help="safety cap (default $TG_MAX_ATOMS or 50000)")

    a = sub.add_parser("ask", help="boolean query answering")
    a.add_argument("file")
    a.add_argument("--depth-limit", type=_natural, default=DEFAULT_DEPTH_LIMIT)
    a.add_argument("--auto", action="store_true", help="try to certify a No for TG programs")
    a.add_argument("--query", help="query text overriding the one in the file")
    a.add_argument("--json", action="store_true")
    a.add_argument("--max-atoms", type=_positive)

    e = sub.add_parser("explain", help="audit trail behind a verdict")
    e.add_argument("file")
    g = e.add_mutually_exclusive_group()
    g.add_argument("--pairs", action="store_true", help="extension pairs with provenance as JSON")
    g.add_argument("--dot", action="store_true", help="existential dependency graph as DOT")
    g.add_argument("--json", action="store_true")
    budgets(e)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    fmt = "json" if getattr(ns, "json", False) else "dot" if getattr(ns, "dot", False) else "text"
    return RunConfig(
        command=ns.command,
        path=ns.file,
        cls=getattr(ns, "cls", "tg"),
        depth=getattr(ns, "depth", 0),
        depth_limit=getattr(ns, "depth_limit", DEFAULT_DEPTH_LIMIT),
        auto=getattr(ns, "auto", False),
        query=getattr(ns, "query", None),
        max_rounds=getattr(ns, "max_rounds", None),
        max_pairs=getattr(ns, "max_pairs", DEFAULT_MAX_PAIRS),
        max_body=getattr(ns, "max_body", None),
        max_atoms=getattr(ns, "max_atoms", None),
        fmt=fmt,
        pairs=getattr(ns, "pairs", False),
    )


def main(argv: Sequence[str] | None = None) -> int:
    ns = build_parser().parse_args(argv)
    try:
        cfg = config_from_args(ns)
    except UsageError as exc:
        sys.stderr.write(f"tg: {exc}\n")
        return EXIT_ERROR
    try:
        code = run(cfg)
        sys.stdout.flush()
    except BrokenPipeError:
        # reader went away (e.g. piped into head); not an error of ours
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return 0
    return code


if __name__ == "__main__":
    sys.exit(main())

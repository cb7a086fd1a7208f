"""``triguard`` command line.

Every subcommand except ``graph`` prints a JSON report (sorted keys, stable
across runs) or, with ``--format text``, a short human summary. Exit codes:

    0  member / entailed / saturated / no violations
    1  non-member (witness in the report) / probe violations found
    2  usage error, unreadable file or parse error
    3  inconclusive: a cap tripped, or the query is unknown up to the depth
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

from . import __version__
from .baselines import ALL_BASELINES, GenParams, random_ruleset
from .chase import (DEFAULT_MAX_ATOMS, VARIANT, ChaseError, bcq_holds, bounded_nulls_probe,
                    chase_to_level, probe_bounds)
from .extension import DEFAULT_MAX_PAIRS, DEFAULT_MAX_UNFOLDINGS, ExtensionSet, bound_B, saturate
from .nulls import analyze, graph_to_dot
from .parser import ParseError, format_program, parse_atoms, parse_facts, parse_program, parse_query
from .rtc import find_rtcs, is_triangularly_guarded, witness_order_key
from .syntax import Database, Program, RuleError

EXIT_OK, EXIT_NO, EXIT_USAGE, EXIT_UNKNOWN = 0, 1, 2, 3

ENV_MAX_PAIRS = "TRIGUARD_MAX_PAIRS"
ENV_MAX_UNFOLDINGS = "TRIGUARD_MAX_UNFOLDINGS"
DEFAULT_DEPTH = 5


class UsageError(Exception):
    pass


@dataclass
class Report:
    command: str
    result: dict
    exit_code: int
    inputs: Dict[str, dict] = field(default_factory=dict)
    settings: dict = field(default_factory=dict)
    text: List[str] = field(default_factory=list)
    timings: Dict[str, float] = field(default_factory=dict)

    def document(self, with_timings: bool = False) -> dict:
        doc = {
            "tool": "triguard",
            "version": __version__,
            "command": self.command,
            "inputs": self.inputs,
            "settings": self.settings,
            "exit_code": self.exit_code,
            "result": self.result,
        }
        if with_timings:
            doc["timings"] = {k: round(v, 6) for k, v in self.timings.items()}
        return doc


def render_json(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2, ensure_ascii=False) + "\n"


# -- inputs -----------------------------------------------------------------------------


def _read(path: str, role: str, inputs: Dict[str, dict]) -> str:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read {role} file {path!r}: {exc.strerror or exc}") from None
    inputs[role] = {"path": path, "sha256": hashlib.sha256(raw).hexdigest()}
    try:
        return raw.decode("utf-8")
    except UnicodeDecodeError:
        raise UsageError(f"{role} file {path!r} is not UTF-8") from None


def _parse(kind: str, text: str, path: str):
    fn = {"rules": parse_program, "facts": parse_facts, "query": parse_query, "shape": parse_atoms}[kind]
    try:
        return fn(text)
    except (ParseError, RuleError) as exc:
        raise UsageError(f"{path}: {exc}") from None


def _load_program(args, inputs) -> Program:
    return _parse("rules", _read(args.rules, "rules", inputs), args.rules)


def _load_facts(path: Optional[str], inputs) -> Database:
    if path is None:
        return Database(frozenset())
    return _parse("facts", _read(path, "facts", inputs), path)


def _env_int(name: str, default: int) -> int:
    raw = os.environ.get(name)
    if raw is None or raw == "":
        return default
    try:
        value = int(raw)
    except ValueError:
        raise UsageError(f"{name}={raw!r} is not an integer") from None
    if value < 1:
        raise UsageError(f"{name} must be positive")
    return value


def _caps(args) -> Tuple[int, Optional[int]]:
    max_pairs = args.max_pairs if args.max_pairs is not None else _env_int(ENV_MAX_PAIRS, DEFAULT_MAX_PAIRS)
    unf = args.max_unfoldings if args.max_unfoldings is not None else \
        _env_int(ENV_MAX_UNFOLDINGS, DEFAULT_MAX_UNFOLDINGS)
    if max_pairs < 1 or unf < 1:
        raise UsageError("caps must be positive")
    return max_pairs, unf


class _Clock:
    def __init__(self) -> None:
        self.marks: Dict[str, float] = {}

    def run(self, name: str, fn: Callable, *a, **kw):
        t = time.perf_counter()
        out = fn(*a, **kw)
        self.marks[name] = time.perf_counter() - t
        return out


# -- subcommands ------------------------------------------------------------------------


def _tg_exit(outcome: str) -> int:
    return {"TG": EXIT_OK, "NotTG": EXIT_NO}.get(outcome, EXIT_UNKNOWN)


def cmd_classify(args) -> Report:
    inputs: Dict[str, dict] = {}
    program = _load_program(args, inputs)
    clock = _Clock()
    max_pairs, unf = _caps(args)
    wanted = ["wa", "guarded", "sticky", "shy", "tg"] if args.cls == "all" else [args.cls]
    verdicts = {}
    text = []
    code = EXIT_OK
    for name in wanted:
        if name == "tg":
            v = clock.run("tg", is_triangularly_guarded, program, max_pairs=max_pairs, max_unfoldings=unf)
            verdicts["tg"] = v.to_dict()
            text.append(f"TG: {v.outcome} ({v.reason})")
            if v.witness is not None:
                w = v.witness
                text.append("  pair " + str(w.pair))
                text.append(f"  triangle a={w.a} b={w.b} c={w.c}; pivots {w.x},{w.z}; a'={w.a_prime}")
            own = _tg_exit(v.outcome)
        else:
            v = clock.run(name, ALL_BASELINES[name], program)
            verdicts[name] = v.to_dict()
            text.append(f"{v.class_name}: {'member' if v.member else 'not a member'} ({v.evidence})")
            own = EXIT_OK if v.member else EXIT_NO
        # with several classes the TG verdict decides the exit code
        if len(wanted) == 1 or name == "tg":
            code = own
    settings = {"class": args.cls, "max_pairs": max_pairs, "max_unfoldings": unf}
    return Report("classify", {"verdicts": verdicts}, code, inputs, settings, text, clock.marks)


def _extension_dict(ext: ExtensionSet) -> dict:
    return {
        "iterations": ext.iteration,
        "saturated": ext.saturated,
        "capped": ext.capped,
        "cap_reason": ext.cap_reason,
        "base_size": ext.base_size,
        "size": len(ext.pairs),
        "pairs": [
            dict(p.to_dict(), detached_shapes=sorted(str(a) for a in d))
            for p, d in zip(ext.pairs, ext.detached or [frozenset()] * len(ext.pairs))
        ],
    }


def cmd_extend(args) -> Report:
    inputs: Dict[str, dict] = {}
    program = _load_program(args, inputs)
    clock = _Clock()
    max_pairs, unf = _caps(args)
    ext = clock.run("saturate", saturate, program, max_pairs=max_pairs, max_unfoldings=unf)
    result = _extension_dict(ext)
    result["bound"] = bound_B(program).to_dict()
    text = [f"{len(ext.pairs)} pairs after {ext.iteration} rounds"
            + (f" (capped: {ext.cap_reason})" if ext.capped else "")]
    text += [f"  [{p.id}] {p}" for p in ext.pairs]
    settings = {"max_pairs": max_pairs, "max_unfoldings": unf}
    return Report("extend", result, EXIT_UNKNOWN if ext.capped else EXIT_OK, inputs, settings, text,
                  clock.marks)


def cmd_rtc(args) -> Report:
    inputs: Dict[str, dict] = {}
    program = _load_program(args, inputs)
    clock = _Clock()
    max_pairs, unf = _caps(args)
    ext = clock.run("saturate", saturate, program, max_pairs=max_pairs, max_unfoldings=unf)
    found = clock.run("search", lambda: sorted(find_rtcs(program, ext), key=witness_order_key))
    unguarded = [w for w in found if not w.guarded]
    listed = [w.to_dict() if args.explain else {
        "pair": str(w.pair), "triangle": [str(w.a), str(w.b), str(w.c)],
        "pivots": [w.x.name, w.z.name], "guard": None if w.guard is None else str(w.guard),
    } for w in found]
    result = {
        "extension_size": len(ext.pairs),
        "capped": ext.capped,
        "cap_reason": ext.cap_reason,
        "rtc_count": len(found),
        "unguarded_count": len(unguarded),
        "rtcs": listed,
    }
    if unguarded:
        code = EXIT_NO
    elif ext.capped:
        code = EXIT_UNKNOWN
    else:
        code = EXIT_OK
    text = [f"{len(found)} RTCs, {len(unguarded)} unguarded"
            + (f" (capped: {ext.cap_reason})" if ext.capped else "")]
    for w in found:
        text.append(f"  {'guarded by ' + str(w.guard) if w.guard else 'UNGUARDED'}: {w.pair} "
                    f"triangle ({w.a}, {w.b}, {w.c}) pivots {w.x},{w.z}")
    settings = {"explain": args.explain, "max_pairs": max_pairs, "max_unfoldings": unf}
    return Report("rtc", result, code, inputs, settings, text, clock.marks)


def _depth(args) -> int:
    if args.depth < 0:
        raise UsageError("depth must be non-negative")
    return args.depth


def cmd_chase(args) -> Report:
    inputs: Dict[str, dict] = {}
    program = _load_program(args, inputs)
    db = _load_facts(args.facts, inputs)
    clock = _Clock()
    inst = clock.run("chase", chase_to_level, db, program, _depth(args), args.max_atoms)
    doc = inst.to_dict()
    result = {"variant": VARIANT, "depth": inst.depth, "size": len(inst), "nulls": len(inst.nulls()),
              "truncated": inst.truncated, "truncation": inst.truncation}
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8") as fh:
                fh.write(render_json(doc))
        except OSError as exc:
            raise UsageError(f"cannot write {args.out!r}: {exc.strerror or exc}") from None
        result["out"] = args.out
    else:
        result["instance"] = doc
    text = [f"chase to depth {inst.depth}: {len(inst)} atoms, {len(inst.nulls())} nulls"]
    text += [f"  L{inst.level[a]} {a}" for a in inst.atoms]
    settings = {"depth": args.depth, "max_atoms": args.max_atoms}
    return Report("chase", result, EXIT_UNKNOWN if inst.truncated else EXIT_OK, inputs, settings, text,
                  clock.marks)


def cmd_ask(args) -> Report:
    inputs: Dict[str, dict] = {}
    program = _load_program(args, inputs)
    db = _load_facts(args.facts, inputs)
    query = _parse("query", _read(args.query, "query", inputs), args.query)
    clock = _Clock()
    v = clock.run("ask", bcq_holds, db, program, query, _depth(args), args.max_atoms)
    text = [f"{v.outcome} (depth {v.depth})"]
    if v.witness:
        text.append("  witness " + ", ".join(f"{k}={t}" for k, t in v.witness))
    settings = {"depth": args.depth, "max_atoms": args.max_atoms, "variant": VARIANT}
    return Report("ask", v.to_dict(), EXIT_OK if v.entailed else EXIT_UNKNOWN, inputs, settings, text,
                  clock.marks)


def cmd_nullsets(args) -> Report:
    inputs: Dict[str, dict] = {}
    program = _load_program(args, inputs)
    an = analyze(program)
    occurrences = []
    for occ, toks in sorted(an.table.entries.items()):
        occurrences.append({"rule": occ.rule_label, "part": occ.part, "atom": occ.atom_index,
                            "arg": occ.arg_index, "nulls": [str(t) for t in sorted(toks)]})
    var_hat = {r.label: sorted(v.name for v in an.var_hat(r.body)) for r in program.rules}
    result = {
        "tokens": [str(t) for t in sorted(an.table.tokens())],
        "cyclic": [str(t) for t in sorted(an.cyclic)],
        "edges": [[str(a), str(b)] for a, b in sorted(an.graph.edges)],
        "occurrences": occurrences,
        "var_hat": var_hat,
    }
    text = ["cyclic: " + (", ".join(result["cyclic"]) or "(none)")]
    text += [f"  {label}: VAR-hat = {{{', '.join(vs)}}}" for label, vs in var_hat.items()]
    return Report("nullsets", result, EXIT_OK, inputs, {}, text)


def cmd_probe(args) -> Report:
    inputs: Dict[str, dict] = {}
    program = _load_program(args, inputs)
    db = _load_facts(args.facts, inputs)
    shape = _parse("shape", args.shape, "--shape")
    if not 0 <= args.n_small < args.n_big or args.k < 0:
        raise UsageError("need 0 <= n_small < n_big and k >= 0")
    clock = _Clock()
    rep = clock.run("probe", bounded_nulls_probe, db, program, shape, args.n_small, args.n_big, args.k,
                    args.max_atoms)
    result = rep.to_dict()
    result["shape"] = [str(a) for a in shape]
    if args.bounds:
        max_pairs, unf = _caps(args)
        result["bounds"] = clock.run("bounds", probe_bounds, db, program, shape, max_pairs).to_dict()
    if rep.violations:
        code = EXIT_NO
    elif rep.truncated:
        code = EXIT_UNKNOWN
    else:
        code = EXIT_OK
    text = [f"{len(rep.late_nulls)} late nulls checked, {len(rep.violations)} without an interchangeable early null"]
    text += [f"  violation: {v.null} (level {v.level})" for v in rep.violations]
    settings = {"n_small": args.n_small, "n_big": args.n_big, "k": args.k, "max_atoms": args.max_atoms}
    return Report("probe", result, code, inputs, settings, text, clock.marks)


def cmd_gen(args) -> Report:
    try:
        g = GenParams(seed=args.seed, max_rules=args.max_rules, max_body_atoms=args.max_body_atoms,
                      max_arity=args.max_arity, n_predicates=args.n_predicates, n_variables=args.n_variables,
                      existential_probability=args.existential_probability, max_head_atoms=args.max_head_atoms)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    program = random_ruleset(g)
    src = format_program(program)
    settings = {k: getattr(g, k) for k in g.__dataclass_fields__}
    return Report("gen", {"program": src, "rules": len(program.rules)}, EXIT_OK, {}, settings,
                  src.rstrip("\n").split("\n"))


# -- argument parsing -------------------------------------------------------------------


def _cap_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-pairs", type=int, default=None,
                   help=f"extension size cap (default ${ENV_MAX_PAIRS} or {DEFAULT_MAX_PAIRS})")
    p.add_argument("--max-unfoldings", type=int, default=None,
                   help=f"unfolding attempts cap (default ${ENV_MAX_UNFOLDINGS} or {DEFAULT_MAX_UNFOLDINGS})")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--format", choices=("json", "text"), default="json")
    p.add_argument("--timings", action="store_true", help="add wall-clock timings (breaks byte-identity)")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="triguard", description="Triangular-guardedness checker and bounded chase.")
    ap.add_argument("--version", action="version", version=f"triguard {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("classify", help="class membership verdicts")
    p.add_argument("rules")
    p.add_argument("--class", dest="cls", choices=("wa", "guarded", "sticky", "shy", "tg", "all"), default="tg")
    _cap_flags(p)
    _common(p)
    p.set_defaults(fn=cmd_classify)

    p = sub.add_parser("extend", help="saturate the extension set")
    p.add_argument("rules")
    _cap_flags(p)
    _common(p)
    p.set_defaults(fn=cmd_extend)

    p = sub.add_parser("rtc", help="list triangular components of the saturated extension")
    p.add_argument("rules")
    p.add_argument("--explain", action="store_true", help="include every witness field")
    _cap_flags(p)
    _common(p)
    p.set_defaults(fn=cmd_rtc)

    for name, fn, hlp in (("chase", cmd_chase, "bounded chase"), ("ask", cmd_ask, "boolean query answering")):
        p = sub.add_parser(name, help=hlp)
        p.add_argument("rules")
        p.add_argument("facts")
        if name == "ask":
            p.add_argument("query")
        else:
            p.add_argument("--out", default=None, help="write the instance JSON here")
        p.add_argument("--depth", type=int, default=DEFAULT_DEPTH)
        p.add_argument("--max-atoms", type=int, default=DEFAULT_MAX_ATOMS)
        _common(p)
        p.set_defaults(fn=fn)

    p = sub.add_parser("graph", help="existential dependency graph as DOT")
    p.add_argument("rules")
    p.set_defaults(fn=None)

    p = sub.add_parser("nullsets", help="null-sets, cyclic tokens and VAR-hat per rule")
    p.add_argument("rules")
    _common(p)
    p.set_defaults(fn=cmd_nullsets)

    p = sub.add_parser("probe", help="bounded interchangeable-nulls probe")
    p.add_argument("rules")
    p.add_argument("facts")
    p.add_argument("--shape", required=True, help="conjunction such as 't(X,Y), u(Y,Z)'")
    p.add_argument("--n-small", type=int, default=2)
    p.add_argument("--n-big", type=int, default=4)
    p.add_argument("-k", type=int, default=2)
    p.add_argument("--max-atoms", type=int, default=DEFAULT_MAX_ATOMS)
    p.add_argument("--bounds", action="store_true", help="also compute m, N and N' over the saturated set")
    _cap_flags(p)
    _common(p)
    p.set_defaults(fn=cmd_probe)

    p = sub.add_parser("gen", help="seeded random rule set")
    d = GenParams()
    p.add_argument("--seed", type=int, default=d.seed)
    p.add_argument("--max-rules", type=int, default=d.max_rules)
    p.add_argument("--max-body-atoms", type=int, default=d.max_body_atoms)
    p.add_argument("--max-arity", type=int, default=d.max_arity)
    p.add_argument("--n-predicates", type=int, default=d.n_predicates)
    p.add_argument("--n-variables", type=int, default=d.n_variables)
    p.add_argument("--existential-probability", type=float, default=d.existential_probability)
    p.add_argument("--max-head-atoms", type=int, default=d.max_head_atoms)
    _common(p)
    p.set_defaults(fn=cmd_gen)
    return ap


def run(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "graph":
            inputs: Dict[str, dict] = {}
            an = analyze(_load_program(args, inputs))
            out.write(graph_to_dot(an.graph, an.cyclic))
            return EXIT_OK
        report: Report = args.fn(args)
    except (UsageError, ChaseError) as exc:
        err.write(f"triguard: error: {exc}\n")
        return EXIT_USAGE
    if args.format == "text":
        out.write("\n".join(report.text) + "\n")
    else:
        out.write(render_json(report.document(args.timings)))
    return report.exit_code


def main(argv: Optional[Sequence[str]] = None) -> int:
    code = run(argv)
    sys.exit(code)


if __name__ == "__main__":
    main()

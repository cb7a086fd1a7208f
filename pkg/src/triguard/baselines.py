"""Membership checks for weakly-acyclic, guarded, sticky and shy programs, plus a random generator.

Definitions used:

* WA: the position graph has a normal edge from every body position of a
  frontier variable to each of its head positions, and a special edge from it
  to every head position of an existential variable. Member iff no cycle goes
  through a special edge.
* Guarded: every rule body has an atom containing all body variables.
* Sticky: mark every body variable missing from some head atom; then, whenever
  a head position of a rule holds a variable and that position is marked in
  some body, mark the variable in the rule's body. Member iff no marked
  variable occurs twice in one body.
* Shy: with the null-sets of the affectedness analysis, a variable is
  protected in a rule when the intersection of its body null-sets is empty.
  Member iff (1) every variable occurring in two or more body atoms is
  protected, and (2) no two distinct unprotected frontier variables, occurring
  in different body atoms, share an invading null token.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Dict, FrozenSet, List, Optional, Set, Tuple

from .nulls import NullToken, compute_null_sets
from .syntax import Atom, Program, Rule, Variable

Position = Tuple[str, int]


@dataclass(frozen=True)
class ClassVerdict:
    class_name: str
    member: bool
    evidence: str = ""

    def to_dict(self) -> dict:
        return {"class": self.class_name, "member": self.member, "evidence": self.evidence}


def _pos(p: Position) -> str:
    return f"{p[0]}[{p[1] + 1}]"


# -- weak acyclicity ---------------------------------------------------------------


def position_graph(program: Program) -> Tuple[Set[Tuple[Position, Position]], Set[Tuple[Position, Position]]]:
    normal: Set[Tuple[Position, Position]] = set()
    special: Set[Tuple[Position, Position]] = set()
    for rule in program.rules:
        ex_positions = [(h.predicate, j) for h in rule.head for j, t in enumerate(h.args)
                        if t in rule.existential_vars]
        for x in rule.frontier:
            body_positions = [(a.predicate, j) for a in rule.body for j, t in enumerate(a.args) if t == x]
            head_positions = [(h.predicate, j) for h in rule.head for j, t in enumerate(h.args) if t == x]
            for bp in body_positions:
                for hp in head_positions:
                    normal.add((bp, hp))
                for ep in ex_positions:
                    special.add((bp, ep))
    return normal, special


def _path(adj: Dict[Position, List[Position]], src: Position, dst: Position) -> Optional[List[Position]]:
    prev: Dict[Position, Optional[Position]] = {src: None}
    queue = [src]
    while queue:
        nxt = []
        for u in queue:
            if u == dst:
                out = [u]
                while prev[out[-1]] is not None:
                    out.append(prev[out[-1]])  # type: ignore[arg-type]
                return out[::-1]
            for v in adj.get(u, ()):
                if v not in prev:
                    prev[v] = u
                    nxt.append(v)
        queue = nxt
    return None


def is_weakly_acyclic(program: Program) -> ClassVerdict:
    normal, special = position_graph(program)
    adj: Dict[Position, List[Position]] = {}
    for u, v in sorted(normal | special):
        adj.setdefault(u, []).append(v)
    for u, v in sorted(special):
        back = _path(adj, v, u)
        if back is not None:
            cycle = [u] + back
            return ClassVerdict("WA", False, "cycle through special edge " + _pos(u) + " => " + _pos(v) + ": "
                                + " -> ".join(_pos(p) for p in cycle))
    return ClassVerdict("WA", True, "no cycle through a special edge")


# -- guardedness ------------------------------------------------------------------------


def is_guarded(program: Program) -> ClassVerdict:
    for rule in program.rules:
        body_vars = frozenset(v for a in rule.body for v in a.var_set())
        if not any(a.var_set() >= body_vars for a in rule.body):
            return ClassVerdict("GUARDED", False, f"rule {rule.label} has no body atom with all of "
                                + ",".join(sorted(v.name for v in body_vars)))
    return ClassVerdict("GUARDED", True, "every rule body has a guard")


# -- stickiness --------------------------------------------------------------------------


def sticky_marking(program: Program) -> FrozenSet[Tuple[str, Variable]]:
    marked: Set[Tuple[str, Variable]] = set()
    for rule in program.rules:
        for x in rule.universal_vars:
            if any(x not in h.var_set() for h in rule.head):
                marked.add((rule.label, x))
    changed = True
    while changed:
        changed = False
        positions = {(a.predicate, j) for rule in program.rules for a in rule.body
                     for j, t in enumerate(a.args) if (rule.label, t) in marked}
        for rule in program.rules:
            for h in rule.head:
                for j, t in enumerate(h.args):
                    if isinstance(t, Variable) and t not in rule.existential_vars \
                            and (h.predicate, j) in positions and (rule.label, t) not in marked:
                        marked.add((rule.label, t))
                        changed = True
    return frozenset(marked)


def is_sticky(program: Program) -> ClassVerdict:
    marked = sticky_marking(program)
    for rule in program.rules:
        for label, x in sorted(marked):
            if label != rule.label:
                continue
            count = sum(1 for a in rule.body for t in a.args if t == x)
            if count > 1:
                return ClassVerdict("STICKY", False, f"marked variable {x} occurs {count} times in the body of {rule.label}")
    return ClassVerdict("STICKY", True, "no marked variable is repeated in a body")


# -- shyness -----------------------------------------------------------------------------


def is_shy(program: Program) -> ClassVerdict:
    table = compute_null_sets(program)
    for rule in program.rules:
        invading: Dict[Variable, FrozenSet[NullToken]] = {
            x: table.rule_intersection(program, rule.label, x) for x in sorted(rule.universal_vars)
        }
        for x, toks in invading.items():
            atoms_with_x = [a for a in rule.body if x in a.var_set()]
            if len(atoms_with_x) > 1 and toks:
                return ClassVerdict("SHY", False, f"{rule.label}: join variable {x} is attacked by "
                                    + ",".join(str(t) for t in sorted(toks)))
        frontier = sorted(v for v in rule.frontier if invading[v])
        for i, x in enumerate(frontier):
            for y in frontier[i + 1:]:
                shared = invading[x] & invading[y]
                if not shared:
                    continue
                split = any(x in a.var_set() and y not in a.var_set() for a in rule.body) and \
                    any(y in a.var_set() and x not in a.var_set() for a in rule.body)
                together = any({x, y} <= a.var_set() for a in rule.body)
                if split and not together:
                    return ClassVerdict("SHY", False, f"{rule.label}: {x} and {y} from different body atoms are "
                                        "both attacked by " + ",".join(str(t) for t in sorted(shared)))
    return ClassVerdict("SHY", True, "every join is protected")


# -- random programs ------------------------------------------------------------------------


@dataclass(frozen=True)
class GenParams:
    seed: int = 0
    max_rules: int = 3
    max_body_atoms: int = 2
    max_arity: int = 3
    n_predicates: int = 3
    n_variables: int = 4
    existential_probability: float = 0.3
    max_head_atoms: int = 2

    def __post_init__(self) -> None:
        for name in ("max_rules", "max_body_atoms", "max_arity", "n_predicates", "n_variables", "max_head_atoms"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be at least 1")
        if not 0.0 <= self.existential_probability <= 1.0:
            raise ValueError("existential_probability must lie in [0, 1]")
        if self.seed < 0:
            raise ValueError("seed must be non-negative")


def random_ruleset(g: GenParams) -> Program:
    """A random program, deterministic in ``g.seed``; small arities and shared variables are favoured."""
    rng = random.Random(g.seed)
    arity_weights = [1.0 / (k + 1) for k in range(g.max_arity)]
    arities = {f"p{i}": rng.choices(range(1, g.max_arity + 1), weights=arity_weights)[0]
               for i in range(g.n_predicates)}
    preds = sorted(arities)
    pool = [Variable(f"X{i}") for i in range(g.n_variables)]
    rules: List[Rule] = []
    for r in range(rng.randint(1, g.max_rules)):
        body: List[Atom] = []
        used: List[Variable] = []
        for _ in range(rng.randint(1, g.max_body_atoms)):
            p = rng.choice(preds)
            args = []
            for _ in range(arities[p]):
                if used and rng.random() < 0.5:
                    v = rng.choice(used)
                else:
                    v = rng.choice(pool)
                args.append(v)
                if v not in used:
                    used.append(v)
            body.append(Atom(p, tuple(args)))
        body_vars = sorted(set(used))
        head: List[Atom] = []
        exist: List[Variable] = []
        for _ in range(rng.randint(1, g.max_head_atoms)):
            p = rng.choice(preds)
            args = []
            for _ in range(arities[p]):
                if rng.random() < g.existential_probability:
                    if exist and rng.random() < 0.5:
                        v = rng.choice(exist)
                    else:
                        v = Variable(f"Z{len(exist)}")
                        exist.append(v)
                else:
                    v = rng.choice(body_vars)
                args.append(v)
            head.append(Atom(p, tuple(args)))
        rules.append(Rule(tuple(body), tuple(head), frozenset(exist), f"r{r + 1}"))
    return Program(tuple(rules))


ALL_BASELINES = {
    "wa": is_weakly_acyclic,
    "guarded": is_guarded,
    "sticky": is_sticky,
    "shy": is_shy,
}

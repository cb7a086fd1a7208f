"""Null-set propagation, the existential dependency graph and cyclically-affected variables."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, List, Mapping, NamedTuple, Optional, Set, Tuple

from .syntax import Atom, Program, Variable, vars_of


@dataclass(frozen=True, order=True)
class NullToken:
    """The placeholder for the nulls invented by existential ``var_name`` of ``rule_label``."""

    rule_label: str
    var_name: str

    def __str__(self) -> str:
        return f"n_{self.rule_label}_{self.var_name}"


class Occurrence(NamedTuple):
    rule_label: str
    part: str  # "body" or "head"
    atom_index: int
    arg_index: int


@dataclass(frozen=True)
class NullSetTable:
    entries: Mapping[Occurrence, FrozenSet[NullToken]]
    body_sets: Mapping[Tuple[str, int], FrozenSet[NullToken]]
    rounds: int = 0

    def __getitem__(self, occ: Occurrence) -> FrozenSet[NullToken]:
        return self.entries[occ]

    def position(self, predicate: str, index: int) -> FrozenSet[NullToken]:
        """Union of the head null-sets for ``predicate[index]`` (what a body atom sees)."""
        return self.body_sets.get((predicate, index), frozenset())

    def tokens(self) -> FrozenSet[NullToken]:
        return frozenset(t for s in self.entries.values() for t in s)

    def rule_intersection(self, program: Program, label: str, var: Variable) -> FrozenSet[NullToken]:
        """Intersection of the body null-sets of every occurrence of ``var`` in ``label``'s body."""
        rule = program.rule(label)
        sets = [
            self.entries[Occurrence(label, "body", i, j)]
            for i, a in enumerate(rule.body)
            for j, t in enumerate(a.args)
            if t == var
        ]
        return _intersect(sets)


def _intersect(sets: List[FrozenSet[NullToken]]) -> FrozenSet[NullToken]:
    if not sets:
        return frozenset()
    out = sets[0]
    for s in sets[1:]:
        out = out & s
    return out


def compute_null_sets(program: Program) -> NullSetTable:
    """Least fixpoint of the null-set equations.

    An existential head position holds its own token; a universal head position
    holds the intersection of the body sets of its variable; a body position
    ``p[i]`` holds the union of every head set at ``p[i]`` in the program.
    """
    head_sets: Dict[Occurrence, FrozenSet[NullToken]] = {}
    by_position: Dict[Tuple[str, int], List[Occurrence]] = {}
    for rule in program.rules:
        for i, a in enumerate(rule.head):
            for j, t in enumerate(a.args):
                occ = Occurrence(rule.label, "head", i, j)
                if t in rule.existential_vars:
                    head_sets[occ] = frozenset({NullToken(rule.label, t.name)})
                else:
                    head_sets[occ] = frozenset()
                by_position.setdefault((a.predicate, j), []).append(occ)

    body_sets: Dict[Tuple[str, int], FrozenSet[NullToken]] = {}

    def position_set(pred: str, j: int) -> FrozenSet[NullToken]:
        out: FrozenSet[NullToken] = frozenset()
        for occ in by_position.get((pred, j), ()):
            out = out | head_sets[occ]
        return out

    rounds = 0
    changed = True
    while changed:
        changed = False
        rounds += 1
        for key in sorted(by_position):
            body_sets[key] = position_set(*key)
        for rule in program.rules:
            for i, a in enumerate(rule.head):
                for j, t in enumerate(a.args):
                    if not isinstance(t, Variable) or t in rule.existential_vars:
                        continue
                    occ = Occurrence(rule.label, "head", i, j)
                    new = _intersect([
                        body_sets.get((b.predicate, k), frozenset())
                        for b in rule.body
                        for k, s in enumerate(b.args)
                        if s == t
                    ])
                    if new != head_sets[occ]:
                        # the equations are monotone, so sets only grow
                        head_sets[occ] = new | head_sets[occ]
                        changed = True

    entries: Dict[Occurrence, FrozenSet[NullToken]] = dict(head_sets)
    for rule in program.rules:
        for i, a in enumerate(rule.body):
            for j, _ in enumerate(a.args):
                entries[Occurrence(rule.label, "body", i, j)] = body_sets.get((a.predicate, j), frozenset())
    entries = dict(sorted(entries.items()))
    return NullSetTable(entries, dict(sorted(body_sets.items())), rounds)


@dataclass(frozen=True)
class ExistentialDependencyGraph:
    nodes: FrozenSet[NullToken]
    edges: FrozenSet[Tuple[NullToken, NullToken]]

    def successors(self, n: NullToken) -> List[NullToken]:
        return sorted(m for (k, m) in self.edges if k == n)

    def adjacency(self) -> Dict[NullToken, List[NullToken]]:
        adj: Dict[NullToken, List[NullToken]] = {n: [] for n in sorted(self.nodes)}
        for k, m in sorted(self.edges):
            adj.setdefault(k, []).append(m)
        return adj


def build_dependency_graph(program: Program, table: Optional[NullSetTable] = None) -> ExistentialDependencyGraph:
    table = table or compute_null_sets(program)
    edges: Set[Tuple[NullToken, NullToken]] = set()
    for rule in program.rules:
        if not rule.existential_vars:
            continue
        targets = [NullToken(rule.label, z.name) for z in sorted(rule.existential_vars)]
        for y in sorted(rule.frontier):
            for src in table.rule_intersection(program, rule.label, y):
                for dst in targets:
                    edges.add((src, dst))
    return ExistentialDependencyGraph(table.tokens(), frozenset(edges))


def _reachable(adj: Mapping[NullToken, List[NullToken]], starts: Iterable[NullToken]) -> Set[NullToken]:
    seen: Set[NullToken] = set()
    stack = list(starts)
    while stack:
        n = stack.pop()
        for m in adj.get(n, ()):
            if m not in seen:
                seen.add(m)
                stack.append(m)
    return seen


def cyc_null(graph: ExistentialDependencyGraph) -> FrozenSet[NullToken]:
    """Tokens lying on a cycle, closed under reachability."""
    adj = graph.adjacency()
    on_cycle = {n for n in adj if n in _reachable(adj, [n])}
    return frozenset(on_cycle | _reachable(adj, on_cycle))


@dataclass(frozen=True)
class NullAnalysis:
    """Everything the triangular checks need from the null-set machinery, computed once."""

    program: Program
    table: NullSetTable
    graph: ExistentialDependencyGraph
    cyclic: FrozenSet[NullToken]

    def var_hat(self, body: Iterable[Atom]) -> FrozenSet[Variable]:
        occurrences: Dict[Variable, FrozenSet[NullToken]] = {}
        for a in body:
            for j, t in enumerate(a.args):
                if isinstance(t, Variable):
                    s = self.table.position(a.predicate, j)
                    occurrences[t] = occurrences[t] & s if t in occurrences else s
        return frozenset(v for v, s in occurrences.items() if s & self.cyclic)

    def link_vars(self, body: Iterable[Atom], b1: Atom, b2: Atom,
                  hat: Optional[FrozenSet[Variable]] = None) -> FrozenSet[Variable]:
        if hat is None:
            hat = self.var_hat(body)
        return (b1.var_set() & b2.var_set()) & hat


@lru_cache(maxsize=256)
def analyze(program: Program) -> NullAnalysis:
    table = compute_null_sets(program)
    graph = build_dependency_graph(program, table)
    return NullAnalysis(program, table, graph, cyc_null(graph))


def var_hat(program: Program, body: Iterable[Atom]) -> FrozenSet[Variable]:
    return analyze(program).var_hat(body)


def link_vars(program: Program, body: Iterable[Atom], b1: Atom, b2: Atom) -> FrozenSet[Variable]:
    return analyze(program).link_vars(list(body), b1, b2)


def graph_to_dot(graph: ExistentialDependencyGraph, cyclic: Optional[FrozenSet[NullToken]] = None) -> str:
    cyclic = cyc_null(graph) if cyclic is None else cyclic
    adj = graph.adjacency()
    on_cycle = {n for n in adj if n in _reachable(adj, [n])}
    lines = ["digraph existential_dependencies {"]
    for n in sorted(graph.nodes):
        attrs = [f'label="{n}"']
        if n in on_cycle:
            attrs += ["style=filled", 'fillcolor="lightcoral"', "peripheries=2"]
        elif n in cyclic:
            attrs += ["style=filled", 'fillcolor="lightyellow"']
        lines.append(f'  "{n}" [{", ".join(attrs)}];')
    for a, b in sorted(graph.edges):
        lines.append(f'  "{a}" -> "{b}";')
    lines.append("}")
    return "\n".join(lines) + "\n"

"""Variable markup over an ``(a, c, a')`` triple and the marked-variable set M-VAR."""

from __future__ import annotations

from dataclasses import dataclass
from typing import FrozenSet, Set

from .syntax import Atom, Variable


class MarkupError(ValueError):
    pass


@dataclass(frozen=True)
class MarkupState:
    marked_in_a: FrozenSet[int]
    marked_in_c: FrozenSet[int]
    round: int

    def to_dict(self) -> dict:
        return {
            "marked_in_a": sorted(self.marked_in_a),
            "marked_in_c": sorted(self.marked_in_c),
            "round": self.round,
        }


def _positions(at: Atom, v: Variable) -> Set[int]:
    return {i for i, t in enumerate(at.args) if t == v}


def markup_fixpoint(a: Atom, c: Atom, a_prime: Atom) -> MarkupState:
    """Run the markup to its fixpoint.

    Marks in ``c`` flow back into ``a`` for every variable of ``c`` whose
    positions in ``c`` are all marked. Marks in ``a`` flow into ``c`` for every
    variable of ``a_prime`` whose positions, read in ``a``, are all marked.
    """
    if a.predicate != a_prime.predicate or a.arity != a_prime.arity:
        raise MarkupError(f"markup needs REL(a) = REL(a'), got {a.predicate} and {a_prime.predicate}")
    c_vars = c.var_set()
    ap_vars = a_prime.var_set()
    in_a: Set[int] = {i for i, t in enumerate(a.args) if isinstance(t, Variable) and t not in c_vars}
    in_c: Set[int] = {i for i, t in enumerate(c.args) if isinstance(t, Variable) and t not in ap_vars}
    rounds = 0
    while True:
        new_a, new_c = set(in_a), set(in_c)
        for x in c.variables():
            if _positions(c, x) <= in_c:
                new_a |= _positions(a, x)
        for x in a_prime.variables():
            if _positions(a_prime, x) <= in_a:
                new_c |= _positions(c, x)
        if new_a == in_a and new_c == in_c:
            break
        in_a, in_c = new_a, new_c
        rounds += 1
    return MarkupState(frozenset(in_a), frozenset(in_c), rounds)


def m_var(a: Atom, c: Atom, a_prime: Atom) -> FrozenSet[Variable]:
    """Variables of ``a`` every occurrence of which is marked at the fixpoint."""
    state = markup_fixpoint(a, c, a_prime)
    return frozenset(x for x in a.var_set() if _positions(a, x) <= state.marked_in_a)

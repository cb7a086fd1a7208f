"""Worked example programs and a small curated corpus used by tests and the CLI."""

from __future__ import annotations

from typing import Dict

from .parser import parse_facts, parse_program, parse_query
from .syntax import Database, Program, Query

SIGMA1 = """\
s11: t(X,Y) -> exists Z: t(Y,Z), u(Y,Z).
s12: t(X,Y), u(Y,Z) -> t(Y,Z), u(X,Y).
"""

SIGMA2 = """\
s11: t(X,Y) -> exists Z: t(Y,Z), u(Y,Z).
s12: t(X,Y), u(Y,Z) -> t(X,Z), u(X,Y).
"""

SIGMA3 = """\
s31: t(X,Y) -> exists Z: t(Y,Z).
s32: t(X,Y) -> s(X), s(Y).
s33: t(X1,V), s(V), t(W,Z1) -> u(X1,V,W,Z1).
s34: u(X2,Y,Y,Z2) -> v(X2,Z2).
s35: v(X3,Z3) -> t(X3,Z3).
"""

D2 = """\
t(c1,c2).
u(c1,c2).
"""

Q2 = "?- t(X,X).\n"

# Extra programs exercising each baseline class and a few TG/non-TG boundaries.
CURATED: Dict[str, str] = {
    "sigma1": SIGMA1,
    "sigma2": SIGMA2,
    "sigma3": SIGMA3,
    "datalog_tc": "e(X,Y) -> p(X,Y).\np(X,Y), e(Y,Z) -> p(X,Z).\n",
    "weakly_acyclic": "emp(X) -> exists D: works(X,D).\nworks(X,D) -> dept(D).\n",
    "guarded_chain": "r(X,Y) -> exists Z: r(Y,Z), g(X,Y,Z).\ng(X,Y,Z), r(Y,Z) -> q(X,Z).\n",
    "linear_succ": "t(X,Y) -> exists Z: t(Y,Z).\n",
    "sticky_join": "p(X,Y), q(Y,Z) -> exists W: r(X,Y,Z,W).\nr(X,Y,Z,W) -> exists V: s(Y,W), p(Y,V).\n",
    "shy_example": "p(X) -> exists Y: e(X,Y).\ne(X,Y) -> p(Y).\ne(X,Y), c(Y) -> d(X).\n",
    "unguarded_cycle": "t(X,Y) -> exists Z: t(Y,Z).\nt(X,Y), t(Y,Z) -> t(X,Z).\n",
    "constants": "t(X,a) -> exists Z: t(Z,X).\nt(X,Y), t(Y,X) -> s(X).\n",
}

FACTS: Dict[str, str] = {
    "sigma1": D2,
    "sigma2": D2,
    "sigma3": "t(c1,c2).\n",
    "datalog_tc": "e(a,b).\ne(b,c).\n",
    "weakly_acyclic": "emp(ann).\n",
    "guarded_chain": "r(a,b).\n",
    "linear_succ": "t(a,b).\n",
    "sticky_join": "p(a,b).\nq(b,c).\n",
    "shy_example": "p(a).\nc(a).\n",
    "unguarded_cycle": "t(a,b).\n",
    "constants": "t(b,a).\n",
}


def sigma1() -> Program:
    return parse_program(SIGMA1)


def sigma2() -> Program:
    return parse_program(SIGMA2)


def sigma3() -> Program:
    return parse_program(SIGMA3)


def d2() -> Database:
    return parse_facts(D2)


def q2() -> Query:
    return parse_query(Q2)


def curated() -> Dict[str, Program]:
    return {name: parse_program(text) for name, text in CURATED.items()}


def curated_facts() -> Dict[str, Database]:
    return {name: parse_facts(text) for name, text in FACTS.items()}

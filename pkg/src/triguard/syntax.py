"""Terms, atoms, rules and the substitution machinery shared by every module."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterable, Iterator, List, Mapping, Optional, Sequence, Tuple, Union


class RuleError(ValueError):
    """Raised when a rule, program, database or query violates its invariants."""


class _Tagged(tuple):
    """Terms are tagged pairs so that hashing and equality stay in C.

    The tag keeps the three kinds disjoint: ``Variable("a") != Constant("a")``.
    """

    __slots__ = ()
    _tag = ""

    def __new__(cls, value):
        return tuple.__new__(cls, (cls._tag, value))

    def __getnewargs__(self):
        return (self[1],)

    def __repr__(self) -> str:
        return f"{type(self).__name__}({self[1]!r})"


class Variable(_Tagged):
    __slots__ = ()
    _tag = "v"

    @property
    def name(self) -> str:
        return self[1]

    def __str__(self) -> str:
        return self[1]


class Constant(_Tagged):
    __slots__ = ()
    _tag = "c"

    @property
    def name(self) -> str:
        return self[1]

    def __str__(self) -> str:
        name = self[1]
        if name and (name[0].islower() or name[0].isdigit()) and name.replace("_", "a").isalnum():
            return name
        return "'" + name.replace("\\", "\\\\").replace("'", "\\'") + "'"


class Null(_Tagged):
    __slots__ = ()
    _tag = "n"

    def __new__(cls, index: int):
        if not isinstance(index, int) or index < 1:
            raise ValueError("null indices are positive")
        return tuple.__new__(cls, (cls._tag, index))

    @property
    def index(self) -> int:
        return self[1]

    def __str__(self) -> str:
        return f"_n{self[1]}"


Term = Union[Variable, Constant, Null]
Substitution = Dict[Variable, Term]

_KIND_ORDER = {Variable: 0, Constant: 1, Null: 2}


def term_key(t: Term) -> Tuple[int, Union[str, int]]:
    """Total order on terms: variables, then constants, then nulls."""
    if isinstance(t, Null):
        return (2, t.index)
    return (_KIND_ORDER[type(t)], t.name)


@dataclass(frozen=True, slots=True)
class Atom:
    predicate: str
    args: Tuple[Term, ...] = ()
    # caches; atoms are hashed and scanned constantly during saturation
    _hash: int = field(default=0, init=False, repr=False, compare=False)
    _vars: frozenset = field(default=frozenset(), init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "_hash", hash((self.predicate, self.args)))
        object.__setattr__(self, "_vars", frozenset(t for t in self.args if isinstance(t, Variable)))

    def __hash__(self) -> int:
        return self._hash

    def __eq__(self, other: object) -> bool:
        if self is other:
            return True
        if not isinstance(other, Atom):
            return NotImplemented
        return self._hash == other._hash and self.predicate == other.predicate and self.args == other.args

    @property
    def arity(self) -> int:
        return len(self.args)

    def variables(self) -> List[Variable]:
        """Variables in order of first occurrence."""
        seen: List[Variable] = []
        for t in self.args:
            if isinstance(t, Variable) and t not in seen:
                seen.append(t)
        return seen

    def var_set(self) -> frozenset:
        return self._vars

    def nulls(self) -> frozenset:
        return frozenset(t for t in self.args if isinstance(t, Null))

    def constants(self) -> frozenset:
        return frozenset(t for t in self.args if isinstance(t, Constant))

    def positions_of(self, t: Term) -> Tuple[int, ...]:
        return tuple(i for i, s in enumerate(self.args) if s == t)

    def sort_key(self):
        return (self.predicate, tuple(term_key(t) for t in self.args))

    def __str__(self) -> str:
        return f"{self.predicate}({','.join(str(t) for t in self.args)})"


def atom(predicate: str, *args: Union[Term, str]) -> Atom:
    """Convenience constructor: uppercase strings become variables, others constants."""
    terms = []
    for a in args:
        if isinstance(a, str):
            terms.append(Variable(a) if a[:1].isupper() else Constant(a))
        else:
            terms.append(a)
    return Atom(predicate, tuple(terms))


def vars_of(atoms: Iterable[Atom]) -> frozenset:
    return frozenset(v for a in atoms for v in a.args if isinstance(v, Variable))


def nulls_of(atoms: Iterable[Atom]) -> frozenset:
    return frozenset(t for a in atoms for t in a.args if isinstance(t, Null))


def constants_of(atoms: Iterable[Atom]) -> frozenset:
    return frozenset(t for a in atoms for t in a.args if isinstance(t, Constant))


def terms_of(atoms: Iterable[Atom]) -> frozenset:
    return frozenset(t for a in atoms for t in a.args)


def _dedup(atoms: Iterable[Atom]) -> Tuple[Atom, ...]:
    out: List[Atom] = []
    seen = set()
    for a in atoms:
        if a not in seen:
            seen.add(a)
            out.append(a)
    return tuple(out)


@dataclass(frozen=True)
class Rule:
    body: Tuple[Atom, ...]
    head: Tuple[Atom, ...]
    existential_vars: frozenset = frozenset()
    label: str = ""

    def __post_init__(self) -> None:
        object.__setattr__(self, "body", _dedup(self.body))
        object.__setattr__(self, "head", _dedup(self.head))
        ex = frozenset(Variable(v) if isinstance(v, str) else v for v in self.existential_vars)
        object.__setattr__(self, "existential_vars", ex)
        if not self.body:
            raise RuleError(f"rule {self.label!r}: empty body")
        if not self.head:
            raise RuleError(f"rule {self.label!r}: empty head")
        for a in self.body + self.head:
            if a.nulls():
                raise RuleError(f"rule {self.label!r}: labeled nulls are not allowed in rules")
        body_vars = vars_of(self.body)
        head_vars = vars_of(self.head)
        if ex & body_vars:
            names = ", ".join(sorted(v.name for v in ex & body_vars))
            raise RuleError(f"rule {self.label!r}: existential variable(s) {names} occur in the body")
        if not ex <= head_vars:
            names = ", ".join(sorted(v.name for v in ex - head_vars))
            raise RuleError(f"rule {self.label!r}: existential variable(s) {names} do not occur in the head")
        unsafe = head_vars - ex - body_vars
        if unsafe:
            names = ", ".join(sorted(v.name for v in unsafe))
            raise RuleError(f"rule {self.label!r}: head variable(s) {names} are neither existential nor in the body")

    @property
    def frontier(self) -> frozenset:
        """Universally quantified variables shared by body and head."""
        return vars_of(self.head) - self.existential_vars

    @property
    def universal_vars(self) -> frozenset:
        return vars_of(self.body)

    def atoms(self) -> Tuple[Atom, ...]:
        return self.body + self.head

    def __str__(self) -> str:
        body = ", ".join(str(a) for a in self.body)
        head = ", ".join(str(a) for a in self.head)
        ex = ""
        if self.existential_vars:
            ex = "exists " + ",".join(sorted(v.name for v in self.existential_vars)) + ": "
        return f"{self.label}: {body} -> {ex}{head}."


def _check_arities(atoms: Iterable[Atom], schema: Dict[str, int], where: str) -> None:
    for a in atoms:
        known = schema.setdefault(a.predicate, a.arity)
        if known != a.arity:
            raise RuleError(
                f"{where}: predicate {a.predicate!r} used with arity {a.arity} and {known}"
            )


@dataclass(frozen=True)
class Program:
    rules: Tuple[Rule, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "rules", tuple(self.rules))
        labels = [r.label for r in self.rules]
        dupes = sorted({l for l in labels if labels.count(l) > 1})
        if dupes:
            raise RuleError(f"duplicate rule label(s): {', '.join(dupes)}")
        schema: Dict[str, int] = {}
        for r in self.rules:
            _check_arities(r.atoms(), schema, f"rule {r.label!r}")

    @property
    def schema(self) -> Dict[str, int]:
        schema: Dict[str, int] = {}
        for r in self.rules:
            for a in r.atoms():
                schema.setdefault(a.predicate, a.arity)
        return dict(sorted(schema.items()))

    def rule(self, label: str) -> Rule:
        for r in self.rules:
            if r.label == label:
                return r
        raise KeyError(label)

    def constants(self) -> frozenset:
        return constants_of(a for r in self.rules for a in r.atoms())

    def atoms(self) -> List[Atom]:
        return [a for r in self.rules for a in r.atoms()]

    def has_existentials(self) -> bool:
        return any(r.existential_vars for r in self.rules)

    def __len__(self) -> int:
        return len(self.rules)

    def __str__(self) -> str:
        return "\n".join(str(r) for r in self.rules)


@dataclass(frozen=True)
class Database:
    facts: frozenset = frozenset()

    def __post_init__(self) -> None:
        facts = frozenset(self.facts)
        object.__setattr__(self, "facts", facts)
        for f in facts:
            if f.var_set() or f.nulls():
                raise RuleError(f"database fact {f} is not ground over constants")
        _check_arities(sorted(facts, key=Atom.sort_key), {}, "database")

    def sorted_facts(self) -> List[Atom]:
        return sorted(self.facts, key=Atom.sort_key)

    def domain(self) -> frozenset:
        return constants_of(self.facts)


@dataclass(frozen=True)
class Query:
    body: Tuple[Atom, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "body", _dedup(self.body))
        if not self.body:
            raise RuleError("query body is empty")
        for a in self.body:
            if a.nulls():
                raise RuleError("labeled nulls are not allowed in queries")
        _check_arities(self.body, {}, "query")

    def __str__(self) -> str:
        return "?- " + ", ".join(str(a) for a in self.body) + "."


# -- substitutions -----------------------------------------------------------


def apply(a: Atom, s: Mapping[Variable, Term]) -> Atom:
    """Replace each variable of ``a`` bound by ``s``; constants and nulls are fixed."""
    if not s:
        return a
    return Atom(a.predicate, tuple(s.get(t, t) if isinstance(t, Variable) else t for t in a.args))


def apply_all(atoms: Iterable[Atom], s: Mapping[Variable, Term]) -> List[Atom]:
    return [apply(a, s) for a in atoms]


def apply_term(t: Term, s: Mapping[Variable, Term]) -> Term:
    if isinstance(t, Variable):
        return s.get(t, t)
    return t


def compose(outer: Mapping[Variable, Term], inner: Mapping[Variable, Term]) -> Substitution:
    """``outer ∘ inner``: first apply ``inner``, then ``outer``."""
    out: Substitution = {v: apply_term(t, outer) for v, t in inner.items()}
    for v, t in outer.items():
        out.setdefault(v, t)
    return {v: t for v, t in out.items() if t != v}


def rename_apart(atoms: Sequence[Atom], suffix: str) -> Tuple[List[Atom], Substitution]:
    ren: Substitution = {v: Variable(v.name + suffix) for v in sorted(vars_of(atoms))}
    return [apply(a, ren) for a in atoms], ren


# -- unification ---------------------------------------------------------------


def _var_rank(side: int, v: Variable) -> Tuple[int, str]:
    return (side, v.name)


def mgu(a1: Atom, a2: Atom) -> Optional[Tuple[Substitution, Substitution]]:
    """Most general unifier of two atoms with separate variable namespaces.

    Returns ``(theta1, theta2)`` with ``apply(a1, theta1) == apply(a2, theta2)``, or
    ``None`` when predicates or arities differ or two constants clash. When two
    variables meet, the smaller one by ``(side, name)`` represents the class; a
    constant (or null) always represents its class.
    """
    if a1.predicate != a2.predicate or a1.arity != a2.arity:
        return None
    parent: Dict[tuple, tuple] = {}

    def node(side: int, t: Term) -> tuple:
        return (side, t) if isinstance(t, Variable) else (9, t)

    def find(x: tuple) -> tuple:
        root = x
        while parent.get(root, root) != root:
            root = parent[root]
        while parent.get(x, x) != root:
            parent[x], x = root, parent[x]
        return root

    def better(x: tuple, y: tuple) -> bool:
        if x[0] == 9:
            return True
        if y[0] == 9:
            return False
        return _var_rank(x[0], x[1]) < _var_rank(y[0], y[1])

    for s, t in zip(a1.args, a2.args):
        x, y = find(node(1, s)), find(node(2, t))
        if x == y:
            continue
        if x[0] == 9 and y[0] == 9:
            return None
        if better(x, y):
            parent[y] = x
        else:
            parent[x] = y

    theta1: Substitution = {}
    theta2: Substitution = {}
    for side, at, theta in ((1, a1, theta1), (2, a2, theta2)):
        for v in at.var_set():
            rep = find((side, v))[1]
            if rep != v:
                theta[v] = rep
    return theta1, theta2


def unify_in(a1: Atom, a2: Atom) -> Optional[Substitution]:
    """MGU of two atoms sharing one variable namespace (used after renaming apart)."""
    if a1.predicate != a2.predicate or a1.arity != a2.arity:
        return None
    s: Substitution = {}

    def walk(t: Term) -> Term:
        while isinstance(t, Variable) and t in s:
            t = s[t]
        return t

    for x, y in zip(a1.args, a2.args):
        x, y = walk(x), walk(y)
        if x == y:
            continue
        if isinstance(x, Variable) and isinstance(y, Variable):
            lo, hi = (x, y) if x.name <= y.name else (y, x)
            s[hi] = lo
        elif isinstance(x, Variable):
            s[x] = y
        elif isinstance(y, Variable):
            s[y] = x
        else:
            return None
    return {v: walk(v) for v in s}


def match(pattern: Atom, target: Atom, s: Optional[Mapping[Variable, Term]] = None) -> Optional[Substitution]:
    """One-way matching: extend ``s`` so that ``apply(pattern, s) == target``."""
    if pattern.predicate != target.predicate or pattern.arity != target.arity:
        return None
    out: Substitution = dict(s) if s else {}
    for p, t in zip(pattern.args, target.args):
        if isinstance(p, Variable):
            bound = out.get(p)
            if bound is None:
                out[p] = t
            elif bound != t:
                return None
        elif p != t:
            return None
    return out


# -- homomorphism search -------------------------------------------------------


def find_homomorphisms(
    pattern: Iterable[Atom],
    target: Iterable[Atom],
    partial: Optional[Mapping[Variable, Term]] = None,
) -> Iterator[Substitution]:
    """Lazily enumerate every ``h`` with ``apply(pattern, h) ⊆ target``.

    Pattern atoms are tried in order of descending variable count; candidate
    target atoms are tried in input order (sets are sorted first).
    """
    pat = list(pattern)
    if isinstance(target, (set, frozenset)):
        tgt = sorted(target, key=Atom.sort_key)
    else:
        tgt = list(target)
    index: Dict[Tuple[str, int], List[Atom]] = {}
    for a in tgt:
        index.setdefault((a.predicate, a.arity), []).append(a)
    yield from homomorphisms_indexed(pat, index, partial)


def homomorphisms_indexed(
    pattern: Sequence[Atom],
    index: Mapping[Tuple[str, int], Sequence[Atom]],
    partial: Optional[Mapping[Variable, Term]] = None,
) -> Iterator[Substitution]:
    """``find_homomorphisms`` over a target already bucketed by (predicate, arity)."""
    pat = list(pattern)
    order = sorted(range(len(pat)), key=lambda i: -len(pat[i].var_set()))
    ordered = [pat[i] for i in order]

    def search(i: int, s: Substitution) -> Iterator[Substitution]:
        if i == len(ordered):
            yield dict(s)
            return
        p = ordered[i]
        for cand in index.get((p.predicate, p.arity), ()):
            ext = match(p, cand, s)
            if ext is not None:
                yield from search(i + 1, ext)

    start: Substitution = dict(partial) if partial else {}
    yield from search(0, start)


def format_substitution(s: Mapping[Variable, Term]) -> Dict[str, str]:
    return {v.name: str(t) for v, t in sorted(s.items(), key=lambda kv: kv[0].name)}

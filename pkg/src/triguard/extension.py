"""Body/head pairs of the rule extension, their saturation, and the bound B(Σ).

Pairs are stored in a canonical form: variables renamed ``V1, V2, ...`` so that
isomorphic pairs collide. Saturation stops at the canonical fixpoint.

Each body atom carries a *lineage*: the set of ``(base pair id, atom type)``
combinations used to unfold its ancestors. An atom is never unfolded again with
a combination already in its lineage. Along any unfolding path the number of
distinct combinations is at most ``|Σ0| · |R| · BELL(maxa + |CONST|)``, which is
exactly the exponent ``d`` of B(Σ); the cut therefore keeps the derivation tree
within the depth that B(Σ) accounts for while keeping the saturation finite.

Unfolded pairs keep only the body atoms connected to the head through shared
variables. The other atoms can never hold a pivot, a link path or a guard; what
they contribute is the set of atoms a second pair may match onto ``c``. That
set is kept per pair as ``detached``: every single-atom shape reachable by
unfolding a cut atom, which is finite because such unfoldings only produce
instances of base body atoms.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Tuple

from .syntax import (
    Atom,
    Constant,
    Null,
    Program,
    Substitution,
    Term,
    Variable,
    apply,
    term_key,
    unify_in,
    vars_of,
)

DEFAULT_MAX_PAIRS = 100_000
DEFAULT_MAX_UNFOLDINGS = 250_000
BODY_LIMIT_FACTOR = 8
_CANON_NODE_LIMIT = 20000
_REFINE_THRESHOLD = 24

AtomType = Tuple[str, Tuple]
Lineage = FrozenSet[Tuple[int, AtomType]]


def atom_type(a: Atom) -> AtomType:
    """Predicate plus equality pattern; constants are kept, variables numbered."""
    seen: Dict[Term, int] = {}
    pattern = []
    for t in a.args:
        if isinstance(t, Constant):
            pattern.append(("c", t.name))
        else:
            pattern.append(("v", seen.setdefault(t, len(seen))))
    return (a.predicate, tuple(pattern))


@dataclass(frozen=True)
class Step:
    """One unfolding: ``base_id``'s head was unified with ``atom`` of pair ``parent_id``."""

    base_id: int
    parent_id: int
    atom: Atom
    unifier: Tuple[Tuple[str, str], ...]

    def to_dict(self) -> dict:
        return {
            "base_pair": self.base_id,
            "parent_pair": self.parent_id,
            "unified_atom": str(self.atom),
            "mgu": dict(self.unifier),
        }


@dataclass(frozen=True)
class ExtensionPair:
    body: Tuple[Atom, ...]
    head: Atom
    lineage: Tuple[Lineage, ...] = ()
    provenance: Tuple[Step, ...] = ()
    id: int = -1
    iteration: int = 0
    # atoms cut from the body because no variable path reaches the head
    detached: Tuple[Atom, ...] = field(default=(), compare=False)

    @property
    def key(self) -> tuple:
        return (self.body, self.head, self.lineage)

    def variables(self) -> FrozenSet[Variable]:
        return vars_of(self.body + (self.head,))

    def __str__(self) -> str:
        return "<{" + ", ".join(str(a) for a in self.body) + "}, " + str(self.head) + ">"

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "iteration": self.iteration,
            "body": [str(a) for a in self.body],
            "head": str(self.head),
            "provenance": [s.to_dict() for s in self.provenance],
            "detached": [str(a) for a in self.detached],
        }


def atom_shape(a: Atom) -> Atom:
    """``a`` with variables renamed ``U1, U2, ...`` by first occurrence."""
    ren: Dict[Variable, Variable] = {}
    for t in a.args:
        if isinstance(t, Variable) and t not in ren:
            ren[t] = Variable(f"U{len(ren) + 1}")
    return apply(a, ren)


def split_detached(body: Sequence[Atom], head: Atom) -> Tuple[List[int], List[int]]:
    """Indices of body atoms connected to the head by shared variables, and the rest."""
    reach = set(head.var_set())
    attached = [False] * len(body)
    changed = True
    while changed:
        changed = False
        for i, a in enumerate(body):
            if not attached[i] and a.var_set() & reach:
                attached[i] = True
                reach |= a.var_set()
                changed = True
    return [i for i in range(len(body)) if attached[i]], [i for i in range(len(body)) if not attached[i]]


@dataclass(frozen=True)
class ExtensionSet:
    pairs: Tuple[ExtensionPair, ...] = ()
    iteration: int = 0
    saturated: bool = False
    capped: bool = False
    cap_reason: str = ""
    base_size: int = 0
    # per pair (aligned with ``pairs``): detached atom shapes co-occurring with its head
    detached: Tuple[FrozenSet[Atom], ...] = ()

    def keys(self) -> FrozenSet[tuple]:
        return frozenset(p.key for p in self.pairs)

    def shapes(self) -> FrozenSet[Tuple[Tuple[Atom, ...], Atom]]:
        """Canonical ``(body, head)`` forms with lineage annotations dropped."""
        return frozenset(canonical_shape(p.body, p.head) for p in self.pairs)

    def base(self) -> Tuple[ExtensionPair, ...]:
        return self.pairs[: self.base_size]

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[ExtensionPair]:
        return iter(self.pairs)


# -- canonical form --------------------------------------------------------------


def _term_code(t: Term, names: Dict[Variable, int]) -> tuple:
    if isinstance(t, Variable):
        return (0, names[t])
    return (1,) + term_key(t)


_LINEAGE_KEYS: Dict[Lineage, tuple] = {}


def _lineage_key(l: Lineage) -> tuple:
    k = _LINEAGE_KEYS.get(l)
    if k is None:
        k = _LINEAGE_KEYS[l] = tuple(sorted(l))
    return k


def _canonicalize(
    body: Sequence[Atom], head: Atom, lineage: Sequence[Lineage]
) -> Tuple[Tuple[Atom, ...], Atom, Tuple[Lineage, ...]]:
    lin_keys = [_lineage_key(l) for l in lineage]
    variables = sorted(vars_of(list(body) + [head]))
    vidx = {v: k for k, v in enumerate(variables)}
    specs = []
    occ: List[List[Tuple[int, int]]] = [[] for _ in variables]
    for i, a in enumerate(body):
        local: Dict[Term, int] = {}
        spec = []
        for j, t in enumerate(a.args):
            if isinstance(t, Variable):
                spec.append((vidx[t], local.setdefault(t, len(local))))
                occ[vidx[t]].append((i, j))
            else:
                spec.append((-1, term_key(t)))
        specs.append(spec)

    def rank(values: List) -> List[int]:
        table = {x: k for k, x in enumerate(sorted(set(values)))}
        return [table[x] for x in values]

    cols = rank([tuple(j for j, t in enumerate(head.args) if t == v) for v in variables])

    def signatures() -> List[tuple]:
        return [
            (a.predicate, tuple((0, cols[k], loc) if k >= 0 else (1,) + loc for k, loc in specs[i]))
            for i, a in enumerate(body)
        ]

    n_classes = len(set(cols))
    # refinement only pays off when the tie groups allow many orderings
    tie_orderings = 1
    for c in Counter(signatures()).values():
        tie_orderings *= math.factorial(c)
    rounds = len(variables) if tie_orderings > _REFINE_THRESHOLD else 0
    for _ in range(rounds):
        srank = rank(signatures())
        new_cols = rank([(cols[k], tuple(sorted((srank[i], j) for i, j in occ[k]))) for k in range(len(variables))])
        k = len(set(new_cols))
        cols = new_cols
        if k == n_classes:
            break
        n_classes = k
    colour = {v: cols[k] for k, v in enumerate(variables)}

    def atom_sig(a: Atom, i: int) -> tuple:
        return (a.predicate, tuple((0, colour[variables[k]], loc) if k >= 0 else (1,) + loc
                                   for k, loc in specs[i]))

    sigs = [atom_sig(a, i) for i, a in enumerate(body)]
    order = sorted(range(len(body)), key=lambda i: sigs[i])
    groups: List[List[int]] = []
    for i in order:
        if groups and sigs[groups[-1][0]] == sigs[i]:
            groups[-1].append(i)
        else:
            groups.append([i])

    group_of = [gi for gi, g in enumerate(groups) for _ in g]
    n = len(body)
    names: Dict[Variable, int] = {}
    used = [False] * n
    cand: List[int] = []
    prefix: List[tuple] = []
    best: Optional[List[tuple]] = None
    leaves: List[Tuple[Tuple[int, ...], Dict[Variable, int]]] = []
    budget = [_CANON_NODE_LIMIT]

    def codes(args: Tuple[Term, ...], added: List[Variable]) -> tuple:
        out = []
        for t in args:
            if isinstance(t, Variable):
                k = names.get(t)
                if k is None:
                    k = names[t] = len(names)
                    added.append(t)
                out.append((0, k))
            else:
                out.append((1,) + term_key(t))
        return tuple(out)

    # branch and bound over tie orderings; every ordering reaching the least shape is kept
    def search(pos: int) -> None:
        nonlocal best, leaves
        if budget[0] <= 0:
            return
        budget[0] -= 1
        if pos == n:
            added: List[Variable] = []
            full = prefix + [codes(head.args, added)]
            if best is None or full < best:
                best, leaves = full, [(tuple(cand), dict(names))]
            elif full == best:
                leaves.append((tuple(cand), dict(names)))
            for v in added:
                del names[v]
            return
        for i in groups[group_of[pos]]:
            if used[i]:
                continue
            added = []
            prefix.append((body[i].predicate, codes(body[i].args, added)))
            if best is None or prefix <= best[:pos + 1]:
                used[i] = True
                cand.append(i)
                search(pos + 1)
                cand.pop()
                used[i] = False
            prefix.pop()
            for v in added:
                del names[v]

    search(0)
    # the shape decides first, lineage only breaks ties between automorphic orderings
    cand_t, names = min(leaves, key=lambda leaf: tuple(lin_keys[i] for i in leaf[0]))
    best = (None, cand_t, names)

    _, cand, names = best
    ren = {v: Variable(f"V{k + 1}") for v, k in names.items()}
    new_body = tuple(apply(body[i], ren) for i in cand)
    new_lineage = tuple(lineage[i] for i in cand)
    return new_body, apply(head, ren), new_lineage


def canonical_shape(body: Sequence[Atom], head: Atom) -> Tuple[Tuple[Atom, ...], Atom]:
    """Canonical ``(body, head)`` of a pair, ignoring lineage; equal iff isomorphic."""
    body = list(dict.fromkeys(body))
    b, h, _ = _canonicalize(body, head, [frozenset()] * len(body))
    return b, h


def make_pair(body: Sequence[Atom], head: Atom, lineage: Optional[Sequence[Lineage]] = None,
              provenance: Tuple[Step, ...] = (), id: int = -1, iteration: int = 0,
              trim: bool = False) -> ExtensionPair:
    """Canonical pair; with ``trim`` the atoms not connected to the head move to ``detached``."""
    merged: Dict[Atom, Lineage] = {}
    lineage = list(lineage) if lineage is not None else [frozenset()] * len(body)
    for a, l in zip(body, lineage):
        merged[a] = merged[a] | l if a in merged else l
    atoms, lins = list(merged), list(merged.values())
    cut: Tuple[Atom, ...] = ()
    if trim:
        keep, drop = split_detached(atoms, head)
        if drop:
            cut = tuple(sorted({atom_shape(atoms[i]) for i in drop}, key=Atom.sort_key))
            atoms, lins = [atoms[i] for i in keep], [lins[i] for i in keep]
    b, h, l = _canonicalize(atoms, head, lins)
    return ExtensionPair(b, h, l, provenance, id, iteration, cut)


# -- construction ------------------------------------------------------------------


def sigma0(program: Program) -> ExtensionSet:
    """One pair per (rule, head atom)."""
    pairs: List[ExtensionPair] = []
    seen = set()
    for rule in program.rules:
        for h in rule.head:
            p = make_pair(rule.body, h, id=len(pairs))
            if p.key not in seen:
                seen.add(p.key)
                pairs.append(p)
    return ExtensionSet(tuple(pairs), 0, False, False, "", len(pairs))


def _rename_base(pair: ExtensionPair) -> Tuple[List[Atom], Atom]:
    ren = {v: Variable("_b" + v.name) for v in pair.variables()}
    return [apply(a, ren) for a in pair.body], apply(pair.head, ren)


def unfold(base: ExtensionPair, pair: ExtensionPair, index: int,
           renamed_base: Optional[Tuple[List[Atom], Atom]] = None) -> Optional[ExtensionPair]:
    """Unify ``base``'s head with body atom ``index`` of ``pair`` and build the new pair.

    Returns ``None`` when the atoms do not unify or the unfolding repeats a
    ``(base, atom type)`` combination already in the atom's lineage.
    """
    b1, h1 = renamed_base or _rename_base(base)
    b = pair.body[index]
    s = unify_in(h1, b)
    if s is None:
        return None
    unified = apply(b, s)
    combo = (base.id, atom_type(unified))
    lin_b = pair.lineage[index] if pair.lineage else frozenset()
    if combo in lin_b:
        return None
    child_lineage = lin_b | {combo}
    body: List[Atom] = []
    lineage: List[Lineage] = []
    for a in b1:
        body.append(apply(a, s))
        lineage.append(child_lineage)
    for j, a in enumerate(pair.body):
        if j == index:
            continue
        img = apply(a, s)
        if img == unified:
            continue
        body.append(img)
        lineage.append(pair.lineage[j] if pair.lineage else frozenset())
    head = apply(pair.head, s)
    unifier = tuple(sorted((v.name, str(t)) for v, t in s.items()))
    step = Step(base.id, pair.id, b, unifier)
    return make_pair(body, head, lineage, pair.provenance + (step,), trim=True)


def _body_limit(program: Program, max_body: Optional[int]) -> int:
    if max_body is not None:
        return max_body
    maxb = max((len(r.body) for r in program.rules), default=1)
    return BODY_LIMIT_FACTOR * maxb


def extend_step(base: ExtensionSet, current: ExtensionSet, *, max_body: Optional[int] = None,
                reverse: bool = False) -> ExtensionSet:
    """Σ^{i+1} from Σ^0 and Σ^i: every unfolding of a base head into a body atom of a current pair.

    New pairs are trimmed to their head-connected atoms and deduplicated up to
    canonical form and lineage dominance.
    """
    pairs = list(current.pairs)
    store = _Store(pairs)
    capped = current.capped
    reason = current.cap_reason
    base_pairs = list(base.pairs)
    cur_pairs = list(current.pairs)
    if reverse:
        base_pairs.reverse()
        cur_pairs.reverse()
    n_before = len(pairs)
    for bp in base_pairs:
        renamed = _rename_base(bp)
        for cp in cur_pairs:
            indices = range(len(cp.body))
            for idx in reversed(indices) if reverse else indices:
                new = unfold(bp, cp, idx, renamed)
                if new is None:
                    continue
                if max_body is not None and len(new.body) > max_body:
                    capped, reason = True, f"body size limit {max_body} exceeded"
                    continue
                if store.subsumer(new) is not None:
                    continue
                store.add(new, len(pairs))
                pairs.append(new)
    # drop pairs dominated by a later sibling, then number them in canonical order
    fresh = pairs[n_before:]
    fresh = [p for p in fresh if not any(q is not p and q.body == p.body and q.head == p.head and q.lineage != p.lineage
                                         and all(x <= y for x, y in zip(q.lineage, p.lineage)) for q in fresh)]
    fresh.sort(key=lambda p: (tuple(a.sort_key() for a in p.body), p.head.sort_key(),
                              tuple(_lineage_key(l) for l in p.lineage)))
    pairs[n_before:] = [_with_id(p, n_before + k, current.iteration + 1) for k, p in enumerate(fresh)]
    grown = len(pairs) > len(current.pairs)
    return ExtensionSet(tuple(pairs), current.iteration + 1, not grown and not capped, capped, reason,
                        current.base_size or base.base_size)


class _Store:
    """Pairs grouped by shape; a pair is redundant if a stored one of the same shape has pointwise smaller lineage.

    Smaller lineage cuts fewer unfoldings, so the stored pair derives every
    shape the redundant one would.
    """

    def __init__(self, pairs: Iterable[ExtensionPair] = ()) -> None:
        self.by_shape: Dict[tuple, List[Tuple[Tuple[Lineage, ...], int]]] = {}
        for k, p in enumerate(pairs):
            self.add(p, k)

    def subsumer(self, p: ExtensionPair) -> Optional[int]:
        """Position of a stored pair that makes ``p`` redundant."""
        for lineage, pos in self.by_shape.get((p.body, p.head), ()):
            if all(a <= b for a, b in zip(lineage, p.lineage)):
                return pos
        return None

    def add(self, p: ExtensionPair, pos: int) -> None:
        self.by_shape.setdefault((p.body, p.head), []).append((p.lineage, pos))


def _with_id(p: ExtensionPair, id: int, iteration: int) -> ExtensionPair:
    return ExtensionPair(p.body, p.head, p.lineage, p.provenance, id, iteration, p.detached)


class DetachedClosure:
    """Single-atom shapes reachable from an atom by repeated unfolding with the base pairs."""

    def __init__(self, base: Sequence[ExtensionPair]) -> None:
        self._renamed = [_rename_base(bp) for bp in base]
        self._succ: Dict[Atom, FrozenSet[Atom]] = {}
        self._closure: Dict[Atom, FrozenSet[Atom]] = {}

    def successors(self, shape: Atom) -> FrozenSet[Atom]:
        out = self._succ.get(shape)
        if out is None:
            found = set()
            for b1, h1 in self._renamed:
                s = unify_in(h1, shape)
                if s is not None:
                    found.update(atom_shape(apply(a, s)) for a in b1)
            out = self._succ[shape] = frozenset(found)
        return out

    def __call__(self, shapes: Iterable[Atom]) -> FrozenSet[Atom]:
        result: set = set()
        for start in shapes:
            cached = self._closure.get(start)
            if cached is None:
                seen = {start}
                stack = [start]
                while stack:
                    for nxt in self.successors(stack.pop()):
                        if nxt not in seen:
                            seen.add(nxt)
                            stack.append(nxt)
                cached = self._closure[start] = frozenset(seen)
            result |= cached
        return frozenset(result)


class Saturator:
    """Round-by-round saturation; ``step`` returns the pairs first found in the round.

    Rounds are semi-naive: round ``i+1`` only unfolds into pairs first found in
    round ``i``, since every older pair was already combined with all of Σ0.

    Detached shapes follow derivation edges: when a redundant pair is dropped,
    its shapes move to the stored pair that covers it and on to everything
    derived from that pair. ``take_detached`` drains the growth since its last call.
    """

    def __init__(self, program: Program, max_pairs: int = DEFAULT_MAX_PAIRS,
                 max_body: Optional[int] = None, max_unfoldings: Optional[int] = DEFAULT_MAX_UNFOLDINGS) -> None:
        self.program = program
        self.max_pairs = max_pairs
        self.max_unfoldings = max_unfoldings
        self.limit = _body_limit(program, max_body)
        self.base = sigma0(program)
        self._renamed = [_rename_base(bp) for bp in self.base.pairs]
        self.closure = DetachedClosure(self.base.pairs)
        self.pairs: List[ExtensionPair] = []
        self.detached: List[set] = []
        self.children: List[set] = []
        self._updates: Dict[int, set] = {}
        self.store = _Store()
        self.iteration = 0
        self.unfoldings = 0
        for bp in self.base.pairs[:max_pairs]:
            trimmed = make_pair(bp.body, bp.head, bp.lineage, bp.provenance, bp.id, 0, trim=True)
            self._admit(trimmed, self.closure(trimmed.detached))
        self.frontier: List[ExtensionPair] = list(self.pairs)
        self.capped = len(self.base.pairs) > max_pairs
        self.reason = f"max_pairs {max_pairs} exceeded" if self.capped else ""
        self.exhausted = self.capped

    def _admit(self, p: ExtensionPair, shapes: FrozenSet[Atom]) -> ExtensionPair:
        stored = _with_id(p, len(self.pairs), self.iteration)
        self.store.add(stored, stored.id)
        self.pairs.append(stored)
        self.detached.append(set(shapes))
        self.children.append(set())
        if shapes:
            self._updates.setdefault(stored.id, set()).update(shapes)
        return stored

    def _grow(self, pos: int, shapes: FrozenSet[Atom]) -> None:
        work = [(pos, shapes)]
        while work:
            k, extra = work.pop()
            delta = extra - self.detached[k]
            if not delta:
                continue
            self.detached[k] |= delta
            self._updates.setdefault(k, set()).update(delta)
            work.extend((c, delta) for c in self.children[k])

    def take_detached(self) -> List[Tuple[ExtensionPair, FrozenSet[Atom]]]:
        out = [(self.pairs[k], frozenset(v)) for k, v in sorted(self._updates.items())]
        self._updates = {}
        return out

    @property
    def done(self) -> bool:
        return self.exhausted or not self.frontier

    def step(self) -> List[ExtensionPair]:
        if self.done:
            return []
        self.iteration += 1
        found: List[ExtensionPair] = []
        for cp in self.frontier:
            for bp, rb in zip(self.base.pairs, self._renamed):
                for idx in range(len(cp.body)):
                    self.unfoldings += 1
                    if self.max_unfoldings is not None and self.unfoldings > self.max_unfoldings:
                        return self._stop(found, f"max_unfoldings {self.max_unfoldings} exceeded")
                    new = unfold(bp, cp, idx, rb)
                    if new is None:
                        continue
                    if len(new.body) > self.limit:
                        self.capped, self.reason = True, f"body size limit {self.limit} exceeded"
                        continue
                    shapes = frozenset(self.detached[cp.id]) | self.closure(new.detached)
                    pos = self.store.subsumer(new)
                    if pos is not None:
                        self.children[cp.id].add(pos)
                        self._grow(pos, shapes)
                        continue
                    if len(self.pairs) >= self.max_pairs:
                        return self._stop(found, f"max_pairs {self.max_pairs} exceeded")
                    stored = self._admit(new, shapes)
                    self.children[cp.id].add(stored.id)
                    found.append(stored)
        self.frontier = found
        return found

    def _stop(self, found: List[ExtensionPair], reason: str) -> List[ExtensionPair]:
        self.capped, self.reason = True, reason
        self.exhausted = True
        self.frontier = []
        return found

    def result(self) -> ExtensionSet:
        saturated = not self.frontier and not self.capped
        return ExtensionSet(tuple(self.pairs), self.iteration, saturated, self.capped, self.reason,
                            self.base.base_size, tuple(frozenset(d) for d in self.detached))


def saturate(program: Program, max_pairs: int = DEFAULT_MAX_PAIRS,
             max_body: Optional[int] = None, max_unfoldings: Optional[int] = DEFAULT_MAX_UNFOLDINGS) -> ExtensionSet:
    """Iterate unfolding to the canonical fixpoint, or until a resource cap trips.

    Caps are reported through ``capped``/``cap_reason`` rather than raised.
    """
    s = Saturator(program, max_pairs, max_body, max_unfoldings)
    while not s.done:
        s.step()
    return s.result()


# -- the bound B(Σ) ---------------------------------------------------------------


@lru_cache(maxsize=None)
def bell(n: int) -> int:
    """Bell numbers by ``BELL(n+1) = Σ_k C(n,k)·BELL(k)``, ``BELL(0) = 1``."""
    if n < 0:
        raise ValueError("n must be non-negative")
    if n == 0:
        return 1
    m = n - 1
    return sum(math.comb(m, k) * bell(k) for k in range(m + 1))


@dataclass(frozen=True)
class BoundReport:
    maxb: int
    maxa: int
    n_constants: int
    sigma0_size: int
    n_predicates: int
    d: int
    bound: int

    def to_dict(self) -> dict:
        return {
            "maxb": self.maxb,
            "maxa": self.maxa,
            "n_constants": self.n_constants,
            "sigma0_size": self.sigma0_size,
            "n_predicates": self.n_predicates,
            "d": str(self.d),
            "bound_bits": self.bound.bit_length(),
            "bound": str(self.bound) if self.bound.bit_length() <= 4096 else None,
        }


def bound_B(program: Program) -> BoundReport:
    maxb = max((len(r.body) for r in program.rules), default=0)
    schema = program.schema
    maxa = max(schema.values(), default=0)
    n_const = len(program.constants())
    s0 = len(sigma0(program).pairs)
    d = s0 * len(schema) * bell(maxa + n_const)
    return BoundReport(maxb, maxa, n_const, s0, len(schema), d, maxb ** d)


# -- type equivalence -----------------------------------------------------------------


def type_equivalent(a1: Atom, a2: Atom) -> bool:
    """Is there a bijection of terms fixing constants and shared variables that maps a1 onto a2?"""
    if a1.predicate != a2.predicate or a1.arity != a2.arity:
        return False
    shared = a1.var_set() & a2.var_set()
    fwd: Dict[Term, Term] = {}
    bwd: Dict[Term, Term] = {}
    for s, t in zip(a1.args, a2.args):
        if fwd.setdefault(s, t) != t or bwd.setdefault(t, s) != s:
            return False
    for s, t in fwd.items():
        fixed_s = isinstance(s, Constant) or s in shared
        fixed_t = isinstance(t, Constant) or t in shared
        if (fixed_s or fixed_t) and s != t:
            return False
    return True

"""Recursive triangular-components over the rule extension, and the TG decision.

A witness is searched per ``(pair, a, b, X, Z)``. Cheap conditions (2, 4 and
the link path of 5(a)) are checked first; the candidate ``a'`` is then taken
either as ``c`` itself or from a second pair whose body has an atom that maps
onto ``c``. Free variables of the second pair's head are tried over the
variables of ``a`` and ``c``, the pivots, the link variables, program constants
and fresh variables. Any other variable of the pair plays no role in the
conditions, so it behaves exactly like a fresh one.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterator, List, Optional, Sequence, Tuple

from .extension import DEFAULT_MAX_PAIRS, DEFAULT_MAX_UNFOLDINGS, ExtensionPair, ExtensionSet, Saturator
from .markup import MarkupState, m_var, markup_fixpoint
from .nulls import NullAnalysis, analyze
from .syntax import Atom, Constant, Program, Term, Variable, apply, match, vars_of

HEAD_EQUALS_A_PRIME = "HeadEqualsAPrime"
SECOND_PAIR = "SecondPair"

_MAX_PATHS = 20_000


@dataclass(frozen=True)
class RtcWitness:
    pair: ExtensionPair
    a: Atom
    b: Atom
    c: Atom
    x: Variable
    z: Variable
    a_prime: Atom
    theta: Tuple[Tuple[str, str], ...]
    via: str
    link_path: Tuple[Atom, ...]
    link_vars: Tuple[Variable, ...]
    link_index: int
    failing_link_var: Variable
    markup_evidence: MarkupState
    m_var: Tuple[str, ...]
    second_pair: Optional[ExtensionPair] = None
    second_atom: Optional[Atom] = None
    eta: Tuple[Tuple[str, str], ...] = ()
    guard: Optional[Atom] = None

    @property
    def guarded(self) -> bool:
        return self.guard is not None

    def triangle(self) -> Tuple[Atom, Atom, Atom]:
        return (self.a, self.b, self.c)

    def to_dict(self) -> dict:
        out = {
            "pair": self.pair.to_dict(),
            "condition_2": {"a": str(self.a), "b": str(self.b), "c": str(self.c)},
            "condition_3": {
                "a_prime": str(self.a_prime),
                "theta": dict(self.theta),
                "via": self.via,
            },
            "condition_4": {"x": self.x.name, "z": self.z.name},
            "condition_5": {
                "path": [str(d) for d in self.link_path],
                "link_vars": [y.name for y in self.link_vars],
                "link_index": self.link_index,
                "failing_link_var": self.failing_link_var.name,
                "m_var": list(self.m_var),
                "markup": self.markup_evidence.to_dict(),
            },
            "guard": str(self.guard) if self.guard is not None else None,
        }
        if self.second_pair is not None:
            out["condition_3"]["second_pair"] = self.second_pair.to_dict()
            out["condition_3"]["second_atom"] = str(self.second_atom)
            out["condition_3"]["eta"] = dict(self.eta)
        return out


@dataclass(frozen=True)
class TgVerdict:
    outcome: str  # "TG", "NotTG" or "Inconclusive"
    witness: Optional[RtcWitness] = None
    reason: str = ""
    pairs_explored: int = 0
    iterations: int = 0
    saturated: bool = False
    rtcs_checked: int = 0

    @property
    def member(self) -> Optional[bool]:
        return {"TG": True, "NotTG": False}.get(self.outcome)

    def to_dict(self) -> dict:
        return {
            "class": "TG",
            "outcome": self.outcome,
            "member": self.member,
            "reason": self.reason,
            "pairs_explored": self.pairs_explored,
            "iterations": self.iterations,
            "saturated": self.saturated,
            "guarded_rtcs_seen": self.rtcs_checked,
            "witness": self.witness.to_dict() if self.witness else None,
        }


def guard_exists(body: Sequence[Atom], x: Variable, z: Variable) -> Optional[Atom]:
    """First body atom (in the given order) mentioning both pivots."""
    for d in body:
        vs = d.var_set()
        if x in vs and z in vs:
            return d
    return None


def var_image(a: Atom, target: Atom) -> Optional[Dict[Variable, Variable]]:
    """θ with ``aθ = target`` mapping variables to variables only."""
    s = match(a, target)
    if s is None or any(not isinstance(t, Variable) for t in s.values()):
        return None
    return s


# -- link paths ------------------------------------------------------------------


def _link_matrix(body: Sequence[Atom], hat: FrozenSet[Variable]) -> List[List[FrozenSet[Variable]]]:
    n = len(body)
    vs = [(d.var_set() & hat) for d in body]
    return [[vs[i] & vs[j] if i != j else frozenset() for j in range(n)] for i in range(n)]


def _simple_paths(body: Sequence[Atom], hat: FrozenSet[Variable], ia: int, ib: int, link=None
                  ) -> List[Tuple[Tuple[int, ...], Tuple[FrozenSet[Variable], ...]]]:
    n = len(body)
    if link is None:
        link = _link_matrix(body, hat)
    out: List[Tuple[Tuple[int, ...], Tuple[FrozenSet[Variable], ...]]] = []

    def dfs(path: List[int]) -> None:
        if len(out) >= _MAX_PATHS:
            return
        last = path[-1]
        if last == ib:
            out.append((tuple(path), tuple(link[path[k]][path[k + 1]] for k in range(len(path) - 1))))
            return
        for j in range(n):
            if j not in path and link[last][j]:
                path.append(j)
                dfs(path)
                path.pop()

    dfs([ia])
    out.sort(key=lambda p: (len(p[0]), p[0]))
    return out


def _eligible_links(paths, x: Variable, z: Variable) -> Dict[Variable, Tuple[Tuple[int, ...], Tuple[Variable, ...], int]]:
    """For every eligible Y', the first (shortest, then lexicographic) path and edge carrying it."""
    found: Dict[Variable, Tuple[Tuple[int, ...], Tuple[Variable, ...], int]] = {}
    for idxs, links in paths:
        for k, ls in enumerate(links):
            for y in sorted(ls - {x, z}):
                if y not in found:
                    chosen = tuple(y if i == k else min(l) for i, l in enumerate(links))
                    found[y] = (idxs, chosen, k)
    return dict(sorted(found.items()))


def _condition_5b(a: Atom, a_prime: Atom, y: Variable, mv: FrozenSet[Variable]) -> bool:
    if y not in a_prime.var_set():
        return True
    return all(a.args[i] in mv for i, t in enumerate(a_prime.args) if t == y)


# -- second-pair templates -------------------------------------------------------------


@dataclass(frozen=True)
class _Template:
    head: Atom                      # h' after η on the matched atom; free variables start with "_s"
    pair: ExtensionPair
    atom: Atom                      # the body atom of the renamed second pair matched onto c
    eta: Tuple[Tuple[str, str], ...]


def _rename_second(pair: ExtensionPair) -> Tuple[List[Atom], Atom]:
    """Body (attached atoms, then detached shapes) and head with every variable prefixed ``_s``."""
    ren = {v: Variable("_s" + v.name) for v in vars_of(pair.body + pair.detached + (pair.head,))}
    return [apply(d, ren) for d in pair.body + pair.detached], apply(pair.head, ren)


class _TemplateIndex:
    """Append-only index of second pairs, giving a' templates per ``(c, predicate)``."""

    def __init__(self) -> None:
        self.pairs: List[ExtensionPair] = []
        self._renamed: List[Tuple[List[Atom], Atom]] = []
        self._cache: Dict[Tuple[Atom, str], Tuple[List[_Template], int]] = {}

    def add(self, pairs: Sequence[ExtensionPair]) -> None:
        for p in pairs:
            self.pairs.append(p)
            self._renamed.append(_rename_second(p))

    def add_detached(self, updates: Sequence[Tuple[ExtensionPair, FrozenSet[Atom]]]) -> None:
        """Detached shapes that now co-occur with a pair's head; only those shapes are matched."""
        for p, shapes in updates:
            view = ExtensionPair(p.body, p.head, p.lineage, p.provenance, p.id, p.iteration,
                                 tuple(sorted(shapes, key=Atom.sort_key)))
            body, head = _rename_second(view)
            self.pairs.append(view)
            self._renamed.append((body[len(p.body):], head))

    def templates(self, c: Atom, predicate: str) -> List[_Template]:
        key = (c, predicate)
        found, upto = self._cache.get(key, ([], 0))
        for k in range(upto, len(self.pairs)):
            body, head = self._renamed[k]
            if head.predicate != predicate:
                continue
            seen = set()
            for beta in body:
                eta = match(beta, c)
                if eta is None:
                    continue
                img = apply(head, eta)
                if img in seen:
                    continue
                seen.add(img)
                found.append(_Template(img, self.pairs[k], beta,
                                       tuple(sorted((v.name, str(t)) for v, t in eta.items()))))
        self._cache[key] = (found, len(self.pairs))
        return found


def _instantiations(template: Atom, pool: Sequence[Term]) -> Iterator[Tuple[Atom, Dict[Variable, Term]]]:
    free = [v for v in template.variables() if v.name.startswith("_s")]
    if not free:
        yield template, {}
        return
    assignment: Dict[Variable, Term] = {}

    def rec(k: int, n_fresh: int) -> Iterator[Tuple[Atom, Dict[Variable, Term]]]:
        if k == len(free):
            yield apply(template, assignment), dict(assignment)
            return
        options = list(pool) + [Variable(f"F{j + 1}") for j in range(n_fresh + 1)]
        for t in options:
            assignment[free[k]] = t
            fresh = n_fresh + 1 if t == Variable(f"F{n_fresh + 1}") else n_fresh
            yield from rec(k + 1, fresh)
        del assignment[free[k]]

    yield from rec(0, 0)


# -- the search -----------------------------------------------------------------------


@dataclass
class _Candidate:
    pair: ExtensionPair
    a: Atom
    b: Atom
    x: Variable
    z: Variable
    links: Dict[Variable, Tuple[Tuple[int, ...], Tuple[Variable, ...], int]]
    guard: Optional[Atom]
    template_pos: int = 0
    done: bool = False


class RtcSearch:
    """Incremental witness search: feed pairs as saturation finds them."""

    def __init__(self, program: Program, unguarded_only: bool = False) -> None:
        self.program = program
        self.analysis: NullAnalysis = analyze(program)
        self.unguarded_only = unguarded_only
        self.index = _TemplateIndex()
        self.pending: List[_Candidate] = []
        self.constants = sorted(program.constants())

    def _candidates(self, pair: ExtensionPair) -> List[_Candidate]:
        body = pair.body
        c = pair.head
        hat = self.analysis.var_hat(body)
        pivots = sorted(c.var_set() & hat)
        if len(pivots) < 2:
            return []
        out: List[_Candidate] = []
        paths_cache: Dict[Tuple[int, int], list] = {}
        link = _link_matrix(body, hat)
        for ia, a in enumerate(body):
            avars = a.var_set()
            for ib, b in enumerate(body):
                if ia == ib:
                    continue
                bvars = b.var_set()
                for x in pivots:
                    if x not in avars:
                        continue
                    for z in pivots:
                        if z == x or z not in bvars:
                            continue
                        guard = guard_exists(body, x, z)
                        if guard is not None and self.unguarded_only:
                            continue
                        if (ia, ib) not in paths_cache:
                            paths_cache[(ia, ib)] = _simple_paths(body, hat, ia, ib, link)
                        links = _eligible_links(paths_cache[(ia, ib)], x, z)
                        if links:
                            out.append(_Candidate(pair, a, b, x, z, links, guard))
        return out

    def _witness(self, cand: _Candidate, a_prime: Atom, theta, via: str,
                 template: Optional[_Template]) -> Optional[RtcWitness]:
        if cand.x not in a_prime.var_set():
            return None
        mv = m_var(cand.a, cand.pair.head, a_prime)
        for y, (idxs, chosen, k) in cand.links.items():
            if _condition_5b(cand.a, a_prime, y, mv):
                body = cand.pair.body
                return RtcWitness(
                    pair=cand.pair, a=cand.a, b=cand.b, c=cand.pair.head, x=cand.x, z=cand.z,
                    a_prime=a_prime, theta=tuple(sorted((v.name, str(t)) for v, t in theta.items())),
                    via=via, link_path=tuple(body[i] for i in idxs), link_vars=chosen, link_index=k,
                    failing_link_var=y, markup_evidence=markup_fixpoint(cand.a, cand.pair.head, a_prime),
                    m_var=tuple(sorted(v.name for v in mv)),
                    second_pair=template.pair if template else None,
                    second_atom=template.atom if template else None,
                    eta=template.eta if template else (), guard=cand.guard,
                )
        return None

    def _try_head(self, cand: _Candidate) -> Optional[RtcWitness]:
        c = cand.pair.head
        theta = var_image(cand.a, c)
        if theta is None:
            return None
        return self._witness(cand, c, theta, HEAD_EQUALS_A_PRIME, None)

    def _try_templates(self, cand: _Candidate) -> Optional[RtcWitness]:
        c = cand.pair.head
        templates = self.index.templates(c, cand.a.predicate)
        relevant = cand.a.var_set() | c.var_set() | {cand.x} | set(cand.links)
        pool: List[Term] = sorted(relevant) + [Constant(k) if isinstance(k, str) else k for k in self.constants]
        while cand.template_pos < len(templates):
            t = templates[cand.template_pos]
            cand.template_pos += 1
            for a_prime, _ in _instantiations(t.head, pool):
                theta = var_image(cand.a, a_prime)
                if theta is None:
                    continue
                w = self._witness(cand, a_prime, theta, SECOND_PAIR, t)
                if w is not None:
                    return w
        return None

    def feed(self, pairs: Sequence[ExtensionPair],
             detached: Sequence[Tuple[ExtensionPair, FrozenSet[Atom]]] = ()) -> Iterator[RtcWitness]:
        """Add pairs (and detached shapes); yield every witness that has become constructible."""
        self.index.add(pairs)
        self.index.add_detached(detached)
        for cand in self.pending:
            if cand.done:
                continue
            w = self._try_templates(cand)
            if w is not None:
                cand.done = True
                yield w
        for p in pairs:
            for cand in self._candidates(p):
                w = self._try_head(cand) or self._try_templates(cand)
                if w is not None:
                    cand.done = True
                    yield w
                else:
                    self.pending.append(cand)
        self.pending = [c for c in self.pending if not c.done]


def find_rtcs(program: Program, ext: ExtensionSet) -> Iterator[RtcWitness]:
    """Every witness constructible from ``ext`` (one per pair, triangle and pivot choice)."""
    search = RtcSearch(program)
    search.index.add(ext.pairs)
    search.index.add_detached([(p, d) for p, d in zip(ext.pairs, ext.detached) if d])
    for p in ext.pairs:
        for cand in search._candidates(p):
            w = search._try_head(cand) or search._try_templates(cand)
            if w is not None:
                yield w


def pair_order_key(p: ExtensionPair) -> tuple:
    return (p.iteration, len(p.body), p.head.sort_key(), tuple(d.sort_key() for d in p.body))


def witness_order_key(w: RtcWitness) -> tuple:
    """Witnesses with ``a' = c`` first, then by pair, pivots in head order, triangle and pivots."""
    return (0 if w.via == HEAD_EQUALS_A_PRIME else 1, pair_order_key(w.pair),
            (w.c.args.index(w.x), w.c.args.index(w.z)), w.a.sort_key(),
            w.b.sort_key(), w.x, w.z, w.a_prime.sort_key())


def _no_pivots_possible(program: Program, base: ExtensionSet) -> str:
    """A reason why no pair of the extension can have two pivots, or ``""``.

    Unfolding only merges head variables, so a head never gains distinct
    variables over its base pair; and without cyclic nulls no variable is
    cyclically affected.
    """
    if not analyze(program).cyclic:
        return "no null token lies on or after a cycle, so no variable is cyclically affected"
    if all(len(p.head.var_set() & frozenset(v for a in p.body for v in a.var_set())) < 2 for p in base.pairs):
        return "no head has two distinct body variables, so no pair has two pivots"
    return ""


def is_triangularly_guarded(program: Program, max_pairs: int = DEFAULT_MAX_PAIRS,
                            max_body: Optional[int] = None,
                            max_unfoldings: Optional[int] = DEFAULT_MAX_UNFOLDINGS) -> TgVerdict:
    """Saturate round by round and stop at the first round that yields an unguarded witness.

    The reported witness is the least one of that round under ``witness_order_key``,
    so it does not depend on enumeration order. A witness that needs a second
    pair is held for one more round: when the unfolding it relies on produces a
    witness with ``a' = c``, that self-contained one is reported instead.
    """
    sat = Saturator(program, max_pairs, max_body, max_unfoldings)
    quiet = _no_pivots_possible(program, sat.base)
    if quiet:
        return TgVerdict("TG", None, quiet, len(sat.pairs), 0, False)
    search = RtcSearch(program, unguarded_only=True)
    new = list(sat.pairs)
    held: Optional[RtcWitness] = None
    while True:
        found = sorted(search.feed(new, sat.take_detached()), key=witness_order_key)
        if held is not None:
            direct = [w for w in found if w.via == HEAD_EQUALS_A_PRIME]
            best = direct[0] if direct else held
            return TgVerdict("NotTG", best, "unguarded recursive triangular-component",
                             len(sat.pairs), sat.iteration, False)
        if found:
            held = found[0]
            if held.via == HEAD_EQUALS_A_PRIME or sat.done:
                return TgVerdict("NotTG", held, "unguarded recursive triangular-component",
                                 len(sat.pairs), sat.iteration, False)
        if sat.done:
            break
        new = sat.step()
    res = sat.result()
    if res.capped:
        return TgVerdict("Inconclusive", None, res.cap_reason, len(res), res.iteration, False)
    return TgVerdict("TG", None, "every recursive triangular-component is guarded",
                     len(res), res.iteration, True)


def validate_witness(program: Program, ext: ExtensionSet, w: RtcWitness) -> List[str]:
    """Re-check the conditions from the witness fields alone; returns the failed ones."""
    errors: List[str] = []
    keys = {p.key: k for k, p in enumerate(ext.pairs)}
    B, h = w.pair.body, w.pair.head
    if w.pair.key not in keys:
        errors.append("1: pair not in the extension")
    if w.a not in B or w.b not in B or w.a == w.b or w.c != h:
        errors.append("2: triangle")
    if apply(w.a, {Variable(k): Variable(v) for k, v in w.theta}) != w.a_prime:
        errors.append("3: theta")
    if w.via == HEAD_EQUALS_A_PRIME:
        if w.a_prime != w.c:
            errors.append("3a: a' differs from c")
    else:
        sp = w.second_pair
        if sp is None or sp.key not in keys:
            errors.append("3b: second pair not in the extension")
        else:
            body2, head2 = _rename_second(sp)
            shapes = ext.detached[keys[sp.key]] if ext.detached else frozenset()
            cut = body2[len(sp.body):]
            eta = match(w.second_atom, w.c) if w.second_atom in body2 else None
            if w.second_atom in cut and sp.detached[cut.index(w.second_atom)] not in shapes:
                errors.append("3b: detached atom not recorded for the second pair")
            if eta is None:
                errors.append("3b: c not in B'η")
            elif match(apply(head2, eta), w.a_prime) is None:
                errors.append("3b: a' is not an image of h'")
    hat = analyze(program).var_hat(B)
    if not ({w.x, w.z} <= hat and w.x != w.z and w.x in w.a.var_set() and w.z in w.b.var_set()
            and {w.x, w.z} <= w.c.var_set() and w.x in w.a_prime.var_set()):
        errors.append("4: pivots")
    path = w.link_path
    if not path or path[0] != w.a or path[-1] != w.b or len(set(path)) != len(path) or any(d not in B for d in path):
        errors.append("5a: path ends")
    else:
        for i in range(len(path) - 1):
            ls = (path[i].var_set() & path[i + 1].var_set()) & hat
            if w.link_vars[i] not in ls:
                errors.append(f"5a: edge {i}")
        k = w.link_index
        ls = (path[k].var_set() & path[k + 1].var_set()) & hat
        mv = m_var(w.a, w.c, w.a_prime)
        if w.failing_link_var not in ls - {w.x, w.z} or not _condition_5b(w.a, w.a_prime, w.failing_link_var, mv):
            errors.append("5b: marked link variable")
    if guard_exists(B, w.x, w.z) != w.guard:
        errors.append("guard field")
    return errors

"""Level-by-level oblivious chase, BCQ answering up to a depth, and the bounded-null probe.

Every trigger (rule, body substitution) fires exactly once. A firing whose head
atoms are all present already is logged but adds nothing; with existential
variables the fresh nulls make the head new, so only full rules are affected.
Triggers of one level are fired in a fixed order: rule index, then the images
of the body variables sorted by variable name.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Sequence, Set, Tuple

from .extension import bound_B, saturate
from .syntax import (
    Atom,
    Constant,
    Database,
    Null,
    Program,
    Query,
    Rule,
    Substitution,
    Term,
    Variable,
    apply,
    find_homomorphisms,
    homomorphisms_indexed,
    match,
    term_key,
    vars_of,
)

DEFAULT_MAX_ATOMS = 200_000
VARIANT = "oblivious chase with duplicate suppression"


class ChaseError(ValueError):
    pass


@dataclass(frozen=True)
class Firing:
    rule_label: str
    trigger: Tuple[Tuple[str, Term], ...]   # body substitution, sorted by variable name
    level: int
    nulls: Tuple[Tuple[str, Null], ...]     # fresh nulls for the existential variables
    added: Tuple[Atom, ...]

    def to_dict(self) -> dict:
        return {
            "rule": self.rule_label,
            "trigger": {k: str(v) for k, v in self.trigger},
            "level": self.level,
            "nulls": {k: str(v) for k, v in self.nulls},
            "added": [str(a) for a in self.added],
        }


@dataclass(frozen=True)
class LabeledInstance:
    atoms: Tuple[Atom, ...]
    level: Dict[Atom, int]
    provenance: Dict[Atom, Tuple[str, Tuple[Tuple[str, Term], ...]]]
    next_null: int = 1
    firings: Tuple[Firing, ...] = ()
    depth: int = 0
    truncated: bool = False
    truncation: str = ""

    def __contains__(self, a: Atom) -> bool:
        return a in self.level

    def __len__(self) -> int:
        return len(self.atoms)

    def atom_set(self) -> FrozenSet[Atom]:
        return frozenset(self.atoms)

    def nulls(self) -> List[Null]:
        seen: Set[Null] = set()
        for a in self.atoms:
            seen |= a.nulls()
        return sorted(seen, key=lambda n: n.index)

    def null_levels(self) -> Dict[Null, int]:
        """Level at which each null first appears."""
        out: Dict[Null, int] = {}
        for a in self.atoms:
            for n in a.nulls():
                lv = self.level[a]
                if n not in out or lv < out[n]:
                    out[n] = lv
        return dict(sorted(out.items(), key=lambda kv: kv[0].index))

    def up_to(self, k: int) -> "LabeledInstance":
        keep = tuple(a for a in self.atoms if self.level[a] <= k)
        return LabeledInstance(keep, {a: self.level[a] for a in keep},
                               {a: self.provenance[a] for a in keep if a in self.provenance},
                               self.next_null, tuple(f for f in self.firings if f.level <= k),
                               min(k, self.depth), self.truncated, self.truncation)

    def to_dict(self) -> dict:
        return {
            "variant": VARIANT,
            "depth": self.depth,
            "truncated": self.truncated,
            "truncation": self.truncation,
            "next_null": self.next_null,
            "atoms": [
                {
                    "atom": str(a),
                    "level": self.level[a],
                    "provenance": None if a not in self.provenance else {
                        "rule": self.provenance[a][0],
                        "trigger": {k: str(v) for k, v in self.provenance[a][1]},
                    },
                }
                for a in self.atoms
            ],
        }


def _trigger_key(rule_index: int, trigger: Tuple[Tuple[str, Term], ...]) -> tuple:
    return (rule_index, tuple(term_key(t) for _, t in trigger))


class _Builder:
    """Mutable chase state; published as ``LabeledInstance`` snapshots."""

    def __init__(self, db: Database) -> None:
        self.atoms: List[Atom] = list(db.sorted_facts())
        self.level: Dict[Atom, int] = {a: 0 for a in self.atoms}
        self.provenance: Dict[Atom, Tuple[str, Tuple[Tuple[str, Term], ...]]] = {}
        self.by_pred: Dict[str, List[Atom]] = {}
        for a in self.atoms:
            self.by_pred.setdefault(a.predicate, []).append(a)
        self.next_null = 1
        self.firings: List[Firing] = []
        self.fired: Set[Tuple[str, Tuple[Tuple[str, Term], ...]]] = set()
        self.depth = 0
        self.truncated = False
        self.truncation = ""

    def fire(self, rule: Rule, trigger: Tuple[Tuple[str, Term], ...], level: int) -> Firing:
        s: Substitution = {Variable(k): v for k, v in trigger}
        nulls = []
        for z in sorted(rule.existential_vars):
            n = Null(self.next_null)
            self.next_null += 1
            s[z] = n
            nulls.append((z.name, n))
        added = []
        for h in rule.head:
            img = apply(h, s)
            if img not in self.level:
                self.level[img] = level
                self.provenance[img] = (rule.label, trigger)
                self.atoms.append(img)
                self.by_pred.setdefault(img.predicate, []).append(img)
                added.append(img)
        f = Firing(rule.label, trigger, level, tuple(nulls), tuple(added))
        self.fired.add((rule.label, trigger))
        self.firings.append(f)
        return f

    def snapshot(self) -> LabeledInstance:
        return LabeledInstance(tuple(self.atoms), dict(self.level), dict(self.provenance), self.next_null,
                               tuple(self.firings), self.depth, self.truncated, self.truncation)


def _triggers_at(b: _Builder, program: Program, j: int) -> List[Tuple[int, Rule, Tuple[Tuple[str, Term], ...]]]:
    """New triggers of level ``j``: body images over level ≤ j-1 touching level j-1."""
    index: Dict[Tuple[str, int], List[Atom]] = {}
    fresh: Dict[Tuple[str, int], List[Atom]] = {}
    for a in b.atoms:
        lv = b.level[a]
        if lv <= j - 1:
            index.setdefault((a.predicate, a.arity), []).append(a)
            if lv == j - 1:
                fresh.setdefault((a.predicate, a.arity), []).append(a)
    found: Dict[Tuple[int, Tuple[Tuple[str, Term], ...]], Rule] = {}
    for ri, rule in enumerate(program.rules):
        body_vars = sorted(vars_of(rule.body))
        body = list(rule.body)
        for pin, pa in enumerate(body):
            rest = body[:pin] + body[pin + 1:]
            for cand in fresh.get((pa.predicate, pa.arity), ()):
                start = match(pa, cand)
                if start is None:
                    continue
                for h in homomorphisms_indexed(rest, index, start):
                    trigger = tuple((v.name, h[v]) for v in body_vars)
                    if (rule.label, trigger) not in b.fired:
                        found[(ri, trigger)] = rule
    return sorted(((ri, rule, t) for (ri, t), rule in found.items()), key=lambda x: _trigger_key(x[0], x[2]))


def chase_levels(db: Database, program: Program, k: int,
                 max_atoms: int = DEFAULT_MAX_ATOMS) -> Iterator[LabeledInstance]:
    """Yield the instance after each level 0..k (stops early on truncation)."""
    if k < 0:
        raise ChaseError("depth must be non-negative")
    b = _Builder(db)
    yield b.snapshot()
    for j in range(1, k + 1):
        triggers = _triggers_at(b, program, j)
        for _, rule, trigger in triggers:
            if len(b.atoms) >= max_atoms:
                b.truncated = True
                b.truncation = f"instance size cap {max_atoms} reached at level {j}"
                break
            b.fire(rule, trigger, j)
        b.depth = j
        if b.truncated:
            b.depth = j - 1
            yield b.snapshot()
            return
        yield b.snapshot()


def chase_to_level(db: Database, program: Program, k: int,
                   max_atoms: int = DEFAULT_MAX_ATOMS) -> LabeledInstance:
    last = None
    for last in chase_levels(db, program, k, max_atoms):
        pass
    assert last is not None
    return last


def chase_step(inst: LabeledInstance, rule: Rule, trigger: Substitution) -> LabeledInstance:
    """Fire one trigger on a published instance and return the extended instance."""
    body_imgs = [apply(a, trigger) for a in rule.body]
    for img in body_imgs:
        if img not in inst.level:
            raise ChaseError(f"trigger does not embed the body: {img} is missing")
    body_vars = sorted(vars_of(rule.body))
    missing = [v for v in body_vars if v not in trigger]
    if missing:
        raise ChaseError(f"trigger leaves {missing[0]} unbound")
    b = _Builder(Database(frozenset()))
    b.atoms = list(inst.atoms)
    b.level = dict(inst.level)
    b.provenance = dict(inst.provenance)
    b.next_null = inst.next_null
    b.firings = list(inst.firings)
    b.depth = inst.depth
    level = 1 + max(inst.level[a] for a in body_imgs)
    b.fire(rule, tuple((v.name, trigger[v]) for v in body_vars), level)
    b.depth = max(inst.depth, level)
    return b.snapshot()


def replay(db: Database, program: Program, firings: Sequence[Firing], depth: Optional[int] = None) -> LabeledInstance:
    """Re-fire a firing log in order; reconstructs the instance that produced it.

    The log cannot tell how many idle levels followed the last firing, so pass
    the original ``depth`` for an exact copy.
    """
    b = _Builder(db)
    for f in sorted(firings, key=lambda f: f.level):
        b.fire(program.rule(f.rule_label), f.trigger, f.level)
        b.depth = max(b.depth, f.level)
    if depth is not None:
        b.depth = max(b.depth, depth)
    return b.snapshot()


# -- BCQ answering -------------------------------------------------------------------


@dataclass(frozen=True)
class BcqVerdict:
    outcome: str  # "Entailed" or "UnknownUpTo"
    depth: int
    witness: Optional[Tuple[Tuple[str, Term], ...]] = None
    level: Optional[int] = None
    truncated: bool = False

    @property
    def entailed(self) -> bool:
        return self.outcome == "Entailed"

    def to_dict(self) -> dict:
        return {
            "outcome": self.outcome,
            "depth": self.depth,
            "level": self.level,
            "truncated": self.truncated,
            "witness": None if self.witness is None else {k: str(v) for k, v in self.witness},
        }


def bcq_holds(db: Database, program: Program, query: Query, k: int,
              max_atoms: int = DEFAULT_MAX_ATOMS) -> BcqVerdict:
    """Entailed with a witness if the query maps into chase^k; never claims non-entailment."""
    last = None
    for inst in chase_levels(db, program, k, max_atoms):
        last = inst
        for h in find_homomorphisms(list(query.body), list(inst.atoms)):
            w = tuple(sorted((v.name, t) for v, t in h.items()))
            return BcqVerdict("Entailed", k, w, inst.depth, inst.truncated)
    assert last is not None
    return BcqVerdict("UnknownUpTo", last.depth, None, None, last.truncated)


# -- interchangeable nulls ---------------------------------------------------------------


def _null_connected(atoms: Sequence[Atom]) -> bool:
    if len(atoms) <= 1:
        return True
    seen = {0}
    stack = [0]
    while stack:
        i = stack.pop()
        ni = atoms[i].nulls()
        for j in range(len(atoms)):
            if j not in seen and ni & atoms[j].nulls():
                seen.add(j)
                stack.append(j)
    return len(seen) == len(atoms)


def _shape_images(shape: Sequence[Atom], inst_atoms: Sequence[Atom]) -> Iterator[Tuple[Atom, ...]]:
    """Images of the shape under injective variable maps, kept once each."""
    seen: Set[Tuple[Atom, ...]] = set()
    for h in find_homomorphisms(list(shape), list(inst_atoms)):
        images = list(h.values())
        if len(set(images)) != len(images):
            continue
        img = tuple(apply(a, h) for a in shape)
        if img not in seen:
            seen.add(img)
            yield img


def _mergeable(image: Tuple[Atom, ...], ni: Null, nj: Null, inst_atoms: Sequence[Atom]) -> bool:
    """Is there θ' on the image's nulls, into nulls, with θ'(ni) = θ'(nj), keeping it inside?"""
    ren: Dict[Term, Variable] = {}
    merged = Variable("_N0")
    for a in image:
        for n in a.nulls():
            if n not in ren:
                ren[n] = merged if n in (ni, nj) else Variable(f"_N{n.index}")
    pattern = [Atom(a.predicate, tuple(ren.get(t, t) for t in a.args)) for a in image]
    for h in find_homomorphisms(pattern, list(inst_atoms)):
        if all(isinstance(t, Null) for t in h.values()):
            return True
    return False


def interchangeable(ni: Null, nj: Null, shape: Sequence[Atom], inst: LabeledInstance) -> bool:
    """Exhaustive check of shape-interchangeability on a finite instance."""
    if ni == nj:
        return True
    if any(not isinstance(t, Variable) for a in shape for t in a.args):
        raise ChaseError("shape atoms may only contain variables")
    relevant = [a for a in inst.atoms if a.predicate in {s.predicate for s in shape}]
    for image in _shape_images(shape, relevant):
        nulls = set().union(*(a.nulls() for a in image))
        if ni not in nulls or nj not in nulls:
            continue
        if not _null_connected(image):
            continue
        if not _mergeable(image, ni, nj, relevant):
            return False
    return True


# -- Theorem-4 quantities and the probe -----------------------------------------------------


@dataclass(frozen=True)
class ProbeBounds:
    m: int
    n_cap: int
    d: int
    max_pair_vars: int
    exponent: int
    pairs_exact: bool
    n_prime_log10: float
    _n_prime: Optional[int] = field(default=None, repr=False)

    @property
    def n_prime(self) -> Optional[int]:
        """N^N when it fits in memory (about a million bits), else ``None``."""
        return self._n_prime

    def to_dict(self) -> dict:
        return {
            "m": str(self.m),
            "n_cap": str(self.n_cap),
            "n_prime": None if self._n_prime is None else str(self._n_prime),
            "n_prime_log10": self.n_prime_log10 if math.isfinite(self.n_prime_log10) else None,
            "d": str(self.d),
            "max_pair_vars": self.max_pair_vars,
            "exponent": self.exponent,
            "pairs_exact": self.pairs_exact,
        }


_N_PRIME_BIT_LIMIT = 1 << 20


def n_prime_of(n: int) -> Optional[int]:
    if n <= 1:
        return 1
    if n * n.bit_length() > _N_PRIME_BIT_LIMIT:
        return None
    return n ** n


def probe_bounds(db: Database, program: Program, shape: Sequence[Atom],
                 max_pairs: int = 100_000) -> ProbeBounds:
    """m, N and N' of the bounded-null argument, with the pair maximum taken over the saturated set."""
    rep = bound_B(program)
    ext = saturate(program, max_pairs=max_pairs)
    max_vars = max((len(p.variables()) for p in ext.pairs), default=0)
    maxa = rep.maxa
    shape_vars = len(vars_of(shape))
    m = rep.d * max_vars * maxa * shape_vars
    exponent = len(db.domain()) + rep.n_constants + shape_vars
    n_cap = m ** exponent
    try:
        log10 = float(n_cap) * math.log10(n_cap) if n_cap > 1 else 0.0
    except OverflowError:
        log10 = math.inf
    return ProbeBounds(m, n_cap, rep.d, max_vars, exponent, not ext.capped, log10, n_prime_of(n_cap))


@dataclass(frozen=True)
class ProbeViolation:
    null: Null
    level: int
    checked_against: Tuple[Null, ...]

    def to_dict(self) -> dict:
        return {"null": str(self.null), "level": self.level,
                "checked_against": [str(n) for n in self.checked_against]}


@dataclass(frozen=True)
class ProbeReport:
    n_small: int
    n_big: int
    k: int
    early_nulls: Tuple[Null, ...]
    late_nulls: Tuple[Null, ...]
    matches: Tuple[Tuple[Null, Null], ...]
    violations: Tuple[ProbeViolation, ...]
    instance_size: int
    truncated: bool

    def to_dict(self) -> dict:
        return {
            "n_small": self.n_small,
            "n_big": self.n_big,
            "k": self.k,
            "early_nulls": [str(n) for n in self.early_nulls],
            "late_nulls": [str(n) for n in self.late_nulls],
            "matches": {str(j): str(i) for j, i in self.matches},
            "violations": [v.to_dict() for v in self.violations],
            "violation_count": len(self.violations),
            "instance_size": self.instance_size,
            "truncated": self.truncated,
        }


def bounded_nulls_probe(db: Database, program: Program, shape: Sequence[Atom], n_small: int,
                        n_big: int, k: int, max_atoms: int = DEFAULT_MAX_ATOMS) -> ProbeReport:
    """For each null first created in levels (n_big, n_big+k], look for an interchangeable early null.

    Early nulls are those of chase^n_small; interchangeability is judged on chase^(n_big+k).
    """
    if not n_small < n_big:
        raise ChaseError("n_small must be smaller than n_big")
    inst = chase_to_level(db, program, n_big + k, max_atoms)
    born = inst.null_levels()
    early = tuple(n for n, lv in born.items() if lv <= n_small)
    late = tuple(n for n, lv in born.items() if n_big < lv <= n_big + k)
    matches = []
    violations = []
    for nj in late:
        partner = next((ni for ni in early if interchangeable(ni, nj, shape, inst)), None)
        if partner is None:
            violations.append(ProbeViolation(nj, born[nj], early))
        else:
            matches.append((nj, partner))
    return ProbeReport(n_small, n_big, k, early, late, tuple(matches), tuple(violations), len(inst),
                       inst.truncated)

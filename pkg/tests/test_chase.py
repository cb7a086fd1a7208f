import itertools
import math

import pytest

from triguard import corpus
from triguard.chase import (ChaseError, bcq_holds, bounded_nulls_probe, chase_step, chase_to_level, interchangeable,
                            probe_bounds, replay)
from triguard.extension import bound_B, saturate
from triguard.parser import parse_atoms, parse_facts, parse_program, parse_query
from triguard.syntax import Constant, Database, Null, Variable, apply, atom

D2 = corpus.d2()
EMPTY = parse_program("")


def ground(pred, *args):
    """Atom over constants and nulls; integers stand for nulls."""
    from triguard.syntax import Atom

    return Atom(pred, tuple(Null(a) if isinstance(a, int) else Constant(a) for a in args))


# -- single steps ----------------------------------------------------------------------------


def test_sigma2_first_step():
    inst = chase_to_level(D2, corpus.sigma2(), 0)
    r = corpus.sigma2().rule("s11")
    out = chase_step(inst, r, {Variable("X"): Constant("c1"), Variable("Y"): Constant("c2")})
    assert ground("t", "c2", 1) in out and ground("u", "c2", 1) in out
    assert out.level[ground("t", "c2", 1)] == 1


def test_successive_steps_take_fresh_nulls_in_order():
    p = corpus.sigma2()
    r = p.rule("s11")
    inst = chase_to_level(D2, p, 0)
    inst = chase_step(inst, r, {Variable("X"): Constant("c1"), Variable("Y"): Constant("c2")})
    inst = chase_step(inst, r, {Variable("X"): Constant("c2"), Variable("Y"): Null(1)})
    assert ground("t", 1, 2) in inst
    assert inst.next_null == 3


def test_full_rule_with_present_head_adds_nothing():
    p = parse_program("r: t(X,Y) -> t(X,Y).\n")
    inst = chase_to_level(parse_facts("t(a,b)."), p, 0)
    out = chase_step(inst, p.rule("r"), {Variable("X"): Constant("a"), Variable("Y"): Constant("b")})
    assert out.atom_set() == inst.atom_set()
    assert len(out.firings) == len(inst.firings) + 1


def test_step_rejects_a_non_trigger():
    p = corpus.sigma2()
    inst = chase_to_level(D2, p, 0)
    with pytest.raises(ChaseError):
        chase_step(inst, p.rule("s11"), {Variable("X"): Constant("c2"), Variable("Y"): Constant("c1")})


# -- chase_to_level ---------------------------------------------------------------------------


def test_empty_program_keeps_the_database():
    inst = chase_to_level(D2, EMPTY, 3)
    assert inst.atom_set() == D2.facts
    assert set(inst.level.values()) == {0}


def test_level_one_of_d2_sigma2():
    inst = chase_to_level(D2, corpus.sigma2(), 1)
    assert {ground("t", "c2", 1), ground("u", "c2", 1)} <= inst.atom_set()
    assert max(inst.level.values()) == 1


def test_sigma2_pulls_nulls_together():
    inst = chase_to_level(D2, corpus.sigma2(), 4)
    atoms = inst.atom_set()
    # t-chain c2 -> n1 -> n2 ... plus the shortcut edges from the second rule
    assert ground("t", "c2", 1) in atoms and ground("t", 1, 2) in atoms
    shortcuts = {a for a in atoms if a.predicate == "t" and all(isinstance(t, Null) for t in a.args)}
    chain = {a for a in shortcuts if a.args[1].index == a.args[0].index + 1}
    assert shortcuts - chain


def test_negative_depth_is_an_error():
    with pytest.raises(ChaseError):
        chase_to_level(D2, EMPTY, -1)


def test_size_cap_truncates_with_a_report():
    inst = chase_to_level(D2, corpus.sigma2(), 10, max_atoms=15)
    assert inst.truncated and "15" in inst.truncation


@pytest.mark.parametrize("name", sorted(corpus.CURATED))
def test_level_soundness(name):
    p, db = corpus.curated()[name], corpus.curated_facts()[name]
    inst = chase_to_level(db, p, 4)
    for a in inst.atoms:
        if a in db.facts:
            assert inst.level[a] == 0
            continue
        label, trig = inst.provenance[a]
        s = {Variable(k): v for k, v in trig}
        body = [apply(b, s) for b in p.rule(label).body]
        assert inst.level[a] == 1 + max(inst.level[b] for b in body)


@pytest.mark.parametrize("name", sorted(corpus.CURATED))
def test_replay_is_byte_identical(name):
    import json

    p, db = corpus.curated()[name], corpus.curated_facts()[name]
    inst = chase_to_level(db, p, 4)
    again = replay(db, p, inst.firings, inst.depth)
    assert json.dumps(again.to_dict(), sort_keys=True) == json.dumps(inst.to_dict(), sort_keys=True)


# -- an independent naive chase ---------------------------------------------------------------


def _tkey(t):
    return (1, t.name) if isinstance(t, Constant) else (2, t.index)


def naive_chase(db, program, k):
    """Straight transcription: at level j fire, in order, every unfired trigger whose body
    image lies in levels < j and touches level j-1; new nulls are numbered in firing order."""
    level = {a: 0 for a in db.facts}
    fired = set()
    nxt = 1
    for j in range(1, k + 1):
        old = [a for a, lv in level.items() if lv <= j - 1]
        dom = sorted({t for a in old for t in a.args}, key=_tkey)
        todo = []
        for ri, r in enumerate(program.rules):
            vs = sorted({v for b in r.body for v in b.var_set()}, key=lambda v: v.name)
            for vals in itertools.product(dom, repeat=len(vs)):
                s = dict(zip(vs, vals))
                img = [apply(b, s) for b in r.body]
                if not all(i in level and level[i] <= j - 1 for i in img):
                    continue
                if max(level[i] for i in img) != j - 1 or (ri, vals) in fired:
                    continue
                todo.append((ri, tuple(_tkey(v) for v in vals), vals, s))
        for ri, _, vals, s in sorted(todo, key=lambda x: x[:2]):
            fired.add((ri, vals))
            r = program.rules[ri]
            s = dict(s)
            for z in sorted(r.existential_vars, key=lambda v: v.name):
                s[z] = Null(nxt)
                nxt += 1
            for h in r.head:
                level.setdefault(apply(h, s), j)
    return level


@pytest.mark.parametrize("name", sorted(corpus.CURATED))
def test_agrees_with_naive_chase_to_depth_4(name):
    p, db = corpus.curated()[name], corpus.curated_facts()[name]
    assert chase_to_level(db, p, 4).level == naive_chase(db, p, 4)


def test_agrees_with_naive_chase_on_d2_sigma2():
    assert chase_to_level(D2, corpus.sigma2(), 4).level == naive_chase(D2, corpus.sigma2(), 4)


# -- BCQ ------------------------------------------------------------------------------------


def test_q2_is_unknown_up_to_5():
    v = bcq_holds(D2, corpus.sigma2(), corpus.q2(), 5)
    assert v.outcome == "UnknownUpTo" and not v.entailed


def test_q2_on_a_reflexive_fact():
    v = bcq_holds(parse_facts("t(c1,c1)."), EMPTY, corpus.q2(), 3)
    assert v.outcome == "Entailed" and dict(v.witness) == {"X": Constant("c1")}


def test_database_facts_answer_at_depth_zero():
    v = bcq_holds(D2, corpus.sigma2(), parse_query("?- t(X,Y), u(X,Y)."), 0)
    assert v.entailed


def test_entailed_witness_revalidates():
    p = corpus.sigma2()
    q = parse_query("?- t(X,Y), t(Y,Z), u(X,Z).")
    v = bcq_holds(D2, p, q, 4)
    assert v.entailed
    s = {Variable(k): t for k, t in v.witness}
    inst = chase_to_level(D2, p, 4).atom_set()
    assert all(apply(a, s) in inst for a in q.body)


# -- interchangeability -------------------------------------------------------------------------


def test_a_null_is_interchangeable_with_itself():
    inst = chase_to_level(D2, corpus.sigma2(), 2)
    assert interchangeable(Null(1), Null(1), parse_atoms("t(X,Y)"), inst)


def test_vacuous_when_the_shape_never_holds_both():
    inst = chase_to_level(D2, corpus.sigma2(), 3)
    together = {frozenset(a.nulls()) for a in inst.atoms if a.predicate == "u"}
    apart = [(x, y) for x, y in itertools.combinations(inst.nulls(), 2) if not any({x, y} <= s for s in together)]
    assert apart
    for x, y in apart:
        assert interchangeable(x, y, parse_atoms("u(X,Y)"), inst)


def test_n1_and_a_joined_null_of_sigma2_differ():
    # some t(n1, nk) is derived and no t(n, n) ever is, so merging n1 with nk leaves the instance
    inst = chase_to_level(D2, corpus.sigma2(), 4)
    joined = sorted({a.args[1] for a in inst.atoms if a.predicate == "t" and a.args[0] == Null(1)
                     and isinstance(a.args[1], Null)}, key=lambda n: n.index)
    assert joined
    for nk in joined:
        assert not interchangeable(Null(1), nk, parse_atoms("t(X,Y)"), inst)


def test_last_null_of_sigma2_is_vacuously_interchangeable_at_depth_4():
    inst = chase_to_level(D2, corpus.sigma2(), 4)
    last = max(inst.nulls(), key=lambda n: n.index)
    assert not any({Null(1), last} <= set(a.nulls()) for a in inst.atoms)
    assert interchangeable(Null(1), last, parse_atoms("t(X,Y)"), inst)


def test_shape_with_constants_is_rejected():
    inst = chase_to_level(D2, corpus.sigma2(), 1)
    with pytest.raises(ChaseError):
        interchangeable(Null(1), Null(2), [atom("t", "X", "c1")], inst)


# -- the probe ---------------------------------------------------------------------------------


def test_probe_bounds_trivial_shape():
    b = probe_bounds(Database(frozenset()), EMPTY, [])
    assert b.n_cap == 1 and b.n_prime == 1


def test_probe_bounds_arithmetic_d2_sigma2():
    p = corpus.sigma2()
    shape = parse_atoms("t(X,Y)")
    b = probe_bounds(D2, p, shape)
    rep = bound_B(p)
    max_vars = max(len(q.variables()) for q in saturate(p))
    m = rep.d * max_vars * 2 * 2
    n = m ** (2 + 0 + 2)
    assert b.d == rep.d and b.m == m and b.n_cap == n
    assert b.n_prime is None or b.n_prime == n ** n
    assert math.isclose(b.n_prime_log10, n * math.log10(n))


def test_probe_sigma1_has_no_violations():
    r = bounded_nulls_probe(D2, corpus.sigma1(), parse_atoms("t(X,Y), u(Y,Z)"), 2, 4, 2)
    assert r.late_nulls and not r.violations


def test_probe_sigma2_has_a_violation():
    r = bounded_nulls_probe(D2, corpus.sigma2(), parse_atoms("t(X,Y)"), 2, 4, 2)
    assert len(r.violations) >= 1


def test_probe_empty_program_is_vacuous():
    r = bounded_nulls_probe(D2, EMPTY, parse_atoms("t(X,Y)"), 1, 2, 1)
    assert not r.early_nulls and not r.late_nulls and not r.violations


def test_probe_requires_ordered_bounds():
    with pytest.raises(ChaseError):
        bounded_nulls_probe(D2, EMPTY, parse_atoms("t(X,Y)"), 3, 3, 1)

from hypothesis import given
from hypothesis import strategies as st

from strategies import programs
from triguard import corpus
from triguard.nulls import (ExistentialDependencyGraph, NullToken, Occurrence, analyze, build_dependency_graph,
                            compute_null_sets, cyc_null, graph_to_dot, link_vars, var_hat)
from triguard.parser import parse_atoms, parse_program
from triguard.syntax import Variable, vars_of

N11 = NullToken("s11", "Z")


def V(*names):
    return frozenset(Variable(n) for n in names)


def test_existential_position_holds_its_own_token():
    table = compute_null_sets(corpus.sigma2())
    # head t(Y,Z) of s11, second argument
    assert table[Occurrence("s11", "head", 0, 1)] == {N11}
    assert table[Occurrence("s11", "head", 1, 1)] == {N11}


def test_no_existentials_means_no_tokens():
    table = compute_null_sets(parse_program(corpus.CURATED["datalog_tc"]))
    assert all(not s for s in table.entries.values())
    assert table.tokens() == frozenset()


def test_sigma1_hand_fixpoint():
    """Hand-run equations for Σ1 with the single token n = n_s11_Z.

    Head sets: s11 t(Y,Z) -> t1 := T2, t2 := {n}; u(Y,Z) -> u1 := T2, u2 := {n}.
    s12 t(Y,Z) -> t1 := T2 ∩ U1, t2 := U2; u(X,Y) -> u1 := T1, u2 := T2 ∩ U1.
    Body unions: T1 = T2 ∪ (T2∩U1), T2 = {n} ∪ U2, U1 = T2 ∪ T1, U2 = {n} ∪ (T2∩U1).
    Least solution: every position holds {n}.
    """
    table = compute_null_sets(corpus.sigma1())
    n = {N11}
    assert table[Occurrence("s12", "body", 1, 1)] == n  # u(Y,Z), argument 2
    assert table[Occurrence("s12", "body", 0, 0)] == n
    assert table[Occurrence("s12", "head", 0, 0)] == n  # t(Y,Z): Y meets t[2] ∩ u[1]
    assert table.position("t", 0) == n and table.position("u", 1) == n


def test_intersection_drops_unshared_tokens():
    # p[1] only ever holds n_r1_Z, q[1] only n_r2_W; a join on X sees nothing
    p = parse_program("r1: a(X) -> exists Z: p(Z).\nr2: a(X) -> exists W: q(W).\nr3: p(X), q(X) -> b(X).\n")
    table = compute_null_sets(p)
    assert table.rule_intersection(p, "r3", Variable("X")) == frozenset()
    assert table[Occurrence("r3", "body", 0, 0)] == {NullToken("r1", "Z")}


def test_fixpoint_round_bound():
    for p in corpus.curated().values():
        t = compute_null_sets(p)
        positions = sum(p.schema.values())
        assert t.rounds <= max(1, len(t.tokens()) * positions) + 1


# -- dependency graph ------------------------------------------------------------------


def test_sigma2_graph_by_hand():
    # s11's frontier Y sits at t[2], whose set is {n}; s12 invents nothing
    g = build_dependency_graph(corpus.sigma2())
    assert g.nodes == {N11}
    assert g.edges == {(N11, N11)}


def test_single_rule_self_loop():
    g = build_dependency_graph(parse_program("r: t(X,Y) -> exists Z: t(Y,Z).\n"))
    z = NullToken("r", "Z")
    assert g.edges == {(z, z)}
    assert cyc_null(g) == {z}


def test_no_existentials_empty_graph():
    g = build_dependency_graph(parse_program(corpus.CURATED["datalog_tc"]))
    assert not g.nodes and not g.edges
    assert cyc_null(g) == frozenset()


def test_weakly_acyclic_example_graph_is_acyclic():
    g = build_dependency_graph(parse_program(corpus.CURATED["weakly_acyclic"]))
    assert cyc_null(g) == frozenset()


def test_cyc_null_clauses():
    a, b, c = NullToken("r", "A"), NullToken("r", "B"), NullToken("r", "C")
    g = ExistentialDependencyGraph(frozenset({a, b, c}), frozenset({(a, a), (a, b)}))
    assert cyc_null(g) == {a, b}
    assert cyc_null(ExistentialDependencyGraph(frozenset({a, b}), frozenset({(a, b)}))) == frozenset()


def _closure_matrix(nodes, edges):
    reach = {(u, v) for u, v in edges}
    for k in nodes:
        for i in nodes:
            for j in nodes:
                if (i, k) in reach and (k, j) in reach:
                    reach.add((i, j))
    return reach


@given(st.integers(1, 12).flatmap(
    lambda n: st.tuples(st.just(n), st.sets(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=20))))
def test_cyc_null_against_transitive_closure(data):
    n, raw = data
    nodes = [NullToken("r", f"Z{i}") for i in range(n)]
    edges = {(nodes[i], nodes[j]) for i, j in raw}
    reach = _closure_matrix(nodes, edges)
    on_cycle = {u for u in nodes if (u, u) in reach}
    expected = on_cycle | {v for u in on_cycle for v in nodes if (u, v) in reach}
    assert cyc_null(ExistentialDependencyGraph(frozenset(nodes), frozenset(edges))) == expected


def test_dot_output():
    dot = graph_to_dot(build_dependency_graph(corpus.sigma2()))
    assert '"n_s11_Z" [label="n_s11_Z", style=filled' in dot
    assert '"n_s11_Z" -> "n_s11_Z";' in dot
    assert dot == graph_to_dot(build_dependency_graph(corpus.sigma2()))
    empty = graph_to_dot(build_dependency_graph(parse_program("t(X) -> u(X).")))
    assert "->" not in empty and "label" not in empty


# -- VAR-hat and LINK ------------------------------------------------------------------


def test_var_hat_sigma2():
    body = parse_atoms("t(X,Y), u(Y,Z)")
    assert var_hat(corpus.sigma2(), body) >= V("X", "Z")
    assert link_vars(corpus.sigma2(), body, body[0], body[1]) == V("Y")


def test_var_hat_sigma3_p21():
    body = parse_atoms("t(X1,V), s(V), t(V,Z1)")
    assert var_hat(corpus.sigma3(), body) >= V("X1", "Z1", "V")
    assert link_vars(corpus.sigma3(), body, body[0], body[1]) == V("V")


def test_link_vars_disjoint_atoms():
    body = parse_atoms("t(X,Y), u(Z,W)")
    assert link_vars(corpus.sigma2(), body, body[0], body[1]) == frozenset()


def test_var_hat_empty_without_existentials():
    p = parse_program(corpus.CURATED["datalog_tc"])
    assert var_hat(p, parse_atoms("p(X,Y), e(Y,Z)")) == frozenset()


@given(programs())
def test_var_hat_within_body_vars(p):
    for r in p.rules:
        hat = var_hat(p, r.body)
        assert hat <= vars_of(r.body)
        if not p.has_existentials():
            assert not hat


def _relabel(p, suffix):
    text = "".join(f"{r.label}{suffix}: " + str(r).split(": ", 1)[1] + "\n" for r in p.rules)
    return parse_program(text)


@given(programs())
def test_relabelling_rules_is_isomorphic(p):
    q = _relabel(p, "_x")
    a, b = analyze(p), analyze(q)

    def rename(tok):
        return NullToken(tok.rule_label + "_x", tok.var_name)

    assert {rename(t) for t in a.cyclic} == set(b.cyclic)
    assert {(rename(x), rename(y)) for x, y in a.graph.edges} == set(b.graph.edges)
    for r, s in zip(p.rules, q.rules):
        assert a.var_hat(r.body) == b.var_hat(s.body)


def test_body_occurrences_read_the_position_union():
    for p in corpus.curated().values():
        table = compute_null_sets(p)
        for occ, toks in table.entries.items():
            if occ.part == "body":
                a = p.rule(occ.rule_label).body[occ.atom_index]
                assert toks == table.position(a.predicate, occ.arg_index)

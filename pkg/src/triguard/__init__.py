"""Triangular-guardedness checking for existential rules, with a bounded chase."""

__version__ = "0.1.0"

from .syntax import Atom, Constant, Database, Null, Program, Query, Rule, Variable, atom, mgu
from .parser import ParseError, parse_atoms, parse_facts, parse_program, parse_query
from .nulls import analyze, build_dependency_graph, compute_null_sets, cyc_null, graph_to_dot
from .extension import ExtensionPair, ExtensionSet, bell, bound_B, saturate, sigma0, type_equivalent
from .markup import m_var, markup_fixpoint
from .rtc import RtcWitness, TgVerdict, find_rtcs, is_triangularly_guarded, validate_witness
from .chase import bcq_holds, bounded_nulls_probe, chase_to_level, probe_bounds, replay
from .baselines import GenParams, is_guarded, is_shy, is_sticky, is_weakly_acyclic, random_ruleset

__all__ = [
    "Atom", "Constant", "Database", "Null", "Program", "Query", "Rule", "Variable", "atom", "mgu",
    "ParseError", "parse_atoms", "parse_facts", "parse_program", "parse_query",
    "analyze", "build_dependency_graph", "compute_null_sets", "cyc_null", "graph_to_dot",
    "ExtensionPair", "ExtensionSet", "bell", "bound_B", "saturate", "sigma0", "type_equivalent",
    "m_var", "markup_fixpoint",
    "RtcWitness", "TgVerdict", "find_rtcs", "is_triangularly_guarded", "validate_witness",
    "bcq_holds", "bounded_nulls_probe", "chase_to_level", "probe_bounds", "replay",
    "GenParams", "is_guarded", "is_shy", "is_sticky", "is_weakly_acyclic", "random_ruleset",
]

"""Decision toolkit for separation logic with recursive definitions.

The pieces, bottom up: `syntax` holds the formula and system ASTs,
`parser` the concrete syntax, `states` explicit heaps, `semantics` the
strict-semantics checkers and canonical models, `wellformed` the
decidable-fragment membership tests, `unfolding` trees and their
characteristic formulas, `twa` the routing automata, `mso` the logic
translation and evaluator, `treewidth` the width machinery and
`decision` the bounded satisfiability/entailment verdicts.
"""

from .decision import Refuted, Sat, UnsatUpTo, ValidUpTo, entail, sat_bounded
from .parser import SourceDocument, parse_document, parse_system, print_document, print_formula
from .semantics import CanonicalModel, Unsat, basic_sat, check_basic, check_top_level
from .states import Interpretation, State, parse_state, print_state, state_to_dot
from .syntax import (BasicFormula, ParseError, PointsTo, Predicate,
                     PredicateOccurrence, PureFormula, RecursiveSystem, Rule,
                     SlrdError, SpatialFormula, TopLevelFormula, Variable,
                     classify_vars, pure_closure, sigma_size)
from .treewidth import TreeDecomposition, exact_treewidth, paper_bound, validate_decomposition
from .twa import (TreeWalkingAutomaton, build_double_alloc_automaton,
                  build_param_automata, build_routing_automaton, reachable)
from .unfolding import (UnfoldingTree, build_model, characteristic_formula,
                        enumerate_trees, equality_closure)
from .wellformed import (allocated_parameters, check_connectivity,
                         check_establishment, check_progress, check_system,
                         local_selectors)

__all__ = [name for name in dir() if not name.startswith("_")]

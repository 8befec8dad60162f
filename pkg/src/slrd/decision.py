"""Bounded satisfiability and refutation-complete entailment.

Candidate models come from tuples of unfolding trees, one per predicate
occurrence, ordered by total node count; the first satisfiable tuple
yields a minimum-cell canonical witness. Exhausting the bound proves
nothing beyond it: UNSAT_UP_TO and VALID_UP_TO record the bound,
whereas SAT and REFUTED verdicts carry replayable witness states.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Iterator, Optional, Union

from . import semantics, unfolding, wellformed
from .states import State
from .syntax import (BasicFormula, PROGRAM, RecursiveSystem, SlrdError,
                     TopLevelFormula, Variable)


@dataclass(frozen=True)
class Sat:
    state: State
    valuation: dict[Variable, str]
    trees: tuple


@dataclass(frozen=True)
class UnsatUpTo:
    bound: int


@dataclass(frozen=True)
class Refuted:
    counterexample: State
    trees: tuple


@dataclass(frozen=True)
class ValidUpTo:
    bound: int
    models_checked: int


def _gate(system: RecursiveSystem) -> None:
    report = wellformed.check_system(system)
    if not report.ok:
        raise SlrdError("decision procedures require a well-formed system: "
                        + str(report.violations()[0]))


def _models(formula: TopLevelFormula, system: RecursiveSystem,
            bound: int) -> Iterator[tuple[semantics.CanonicalModel, tuple]]:
    """Canonical models of tree tuples with total nodes <= bound, in
    ascending total-node order."""
    occs = formula.occurrences
    if not occs:
        combined = BasicFormula(formula.bound, formula.basic.spatial,
                                formula.basic.pure)
        result = semantics.basic_sat(combined)
        if isinstance(result, semantics.CanonicalModel):
            yield result, ()
        return
    for total in range(len(occs), bound + 1):
        for parts in unfolding.compositions(total, len(occs)):
            choices = [list(unfolding.trees_of_size(system, occ.predicate, size))
                       for occ, size in zip(occs, parts)]
            if any(not c for c in choices):
                continue
            for combo in product(*choices):
                combined = semantics.assemble_formula(formula, combo, system)
                result = semantics.basic_sat(combined)
                if isinstance(result, semantics.CanonicalModel):
                    yield result, combo


def _witness_state(model: semantics.CanonicalModel,
                   formula: TopLevelFormula) -> State:
    # basic_sat already realizes program variables in the store; the
    # replay below only needs those actually used by the formula.
    return model.state


def sat_bounded(formula: TopLevelFormula, system: RecursiveSystem,
                bound: int) -> Union[Sat, UnsatUpTo]:
    """First (minimum-cell) canonical model over all tree tuples with at
    most `bound` total nodes. Free logical variables are read as
    implicitly existential; program variables become store entries of
    the witness."""
    _gate(system)
    for model, trees in _models(formula, system, bound):
        state = _witness_state(model, formula)
        if not semantics.check_top_level(state, formula, system):
            raise SlrdError("internal: witness failed to replay")
        return Sat(state, model.valuation, trees)
    return UnsatUpTo(bound)


def entail(lhs: TopLevelFormula, rhs: TopLevelFormula, system: RecursiveSystem,
           bound: int) -> Union[Refuted, ValidUpTo]:
    """Search the lhs models (total tree nodes <= bound) for one that
    refutes the rhs. REFUTED is definitive; VALID_UP_TO only reports
    that the bounded search found no counterexample."""
    _gate(system)
    lhs_pvars = {v.name for v in lhs.free_variables() if v.kind == PROGRAM}
    rhs_pvars = {v.name for v in rhs.free_variables() if v.kind == PROGRAM}
    missing = rhs_pvars - lhs_pvars - {"nil"}
    if missing:
        raise SlrdError("entailment needs every rhs program variable on the lhs; "
                        f"missing {sorted(missing)}")
    checked = 0
    for model, trees in _models(lhs, system, bound):
        state = _witness_state(model, lhs)
        checked += 1
        if not semantics.check_top_level(state, rhs, system):
            if not semantics.check_top_level(state, lhs, system):
                raise SlrdError("internal: counterexample failed to replay")
            return Refuted(state, trees)
    return ValidUpTo(bound, checked)

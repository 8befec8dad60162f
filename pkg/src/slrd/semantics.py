"""Strict-semantics model checking and canonical models for symbolic heaps.

check_basic decides S,i |= phi exactly: a points-to atom describes one
cell with exactly the listed outgoing selectors, * splits the heap, and
existentials are resolved by constraint propagation over equality
classes (classes tied to no cell may always take fresh locations, which
covers every disequality with the finitely many locations of S).
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Mapping, Optional

from .states import NULL, Interpretation, State
from .syntax import (LOGICAL, NIL, PROGRAM, BasicFormula, PredicateOccurrence,
                     RecursiveSystem, SlrdError, TopLevelFormula, UnionFind, Variable)

CONTRADICTION = "contradiction"
DOUBLE_ALLOCATION = "double-allocation"
NIL_ALLOCATED = "nil-allocated"


@dataclass(frozen=True)
class Unsat:
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class CanonicalModel:
    """A state together with the class valuation that satisfies the
    formula it was built from."""

    state: State
    valuation: dict[Variable, str]
    classes: tuple[tuple[Variable, ...], ...]

    def location_of(self, var: Variable) -> str:
        return self.valuation[var]


def _base_valuation(state: State, interp: Optional[Interpretation],
                    formula: BasicFormula) -> dict[Variable, str]:
    interp = interp or {}
    values: dict[Variable, str] = {NIL: NULL}
    for var in sorted(formula.free_variables(), key=lambda v: v.key):
        if var == NIL:
            continue
        if var.kind == PROGRAM:
            values[var] = state.lookup(var.name)
        elif var in interp:
            values[var] = interp[var]
        else:
            raise SlrdError(f"no valuation for free variable {var}")
    return values


class _Classes:
    """Equality classes with partial location assignment."""

    def __init__(self, formula: BasicFormula):
        variables = formula.variables() | {NIL}
        self.uf = UnionFind(variables)
        for a, b in formula.pure.equalities:
            self.uf.union(a, b)
        self.diseq = [(self.uf.find(a), self.uf.find(b))
                      for a, b in formula.pure.sorted_disequalities()]
        self.value: dict[Variable, str] = {}

    def rep(self, var: Variable):
        return self.uf.find(var)

    def consistent_pure(self) -> bool:
        return all(a != b for a, b in self.diseq)

    def assign(self, var: Variable, loc: str, trail: list) -> bool:
        rep = self.rep(var)
        old = self.value.get(rep)
        if old is not None:
            return old == loc
        self.value[rep] = loc
        trail.append(rep)
        return True

    def undo(self, trail: list, mark: int) -> None:
        while len(trail) > mark:
            del self.value[trail.pop()]

    def diseq_respected(self) -> bool:
        for a, b in self.diseq:
            va, vb = self.value.get(a), self.value.get(b)
            if va is not None and vb is not None and va == vb:
                return False
        return True


def check_basic(state: State, interp: Optional[Interpretation],
                formula: BasicFormula) -> bool:
    """Exact verdict of S,i |=sl phi under the strict semantics."""
    classes = _Classes(formula)
    if not classes.consistent_pure():
        return False
    trail: list = []
    for var, loc in _base_valuation(state, interp, formula).items():
        if not classes.assign(var, loc, trail):
            return False

    atoms = formula.spatial.atoms
    cells = sorted(state.heap)
    if len(atoms) != len(cells):
        return False
    if not atoms:
        return classes.diseq_respected()

    used: set[str] = set()

    def match(i: int) -> bool:
        if i == len(atoms):
            return classes.diseq_respected()
        atom = atoms[i]
        source_loc = classes.value.get(classes.rep(atom.source))
        candidates = [source_loc] if source_loc is not None else cells
        for loc in candidates:
            if loc in used or loc not in state.heap:
                continue
            cell = state.heap[loc]
            if sorted(cell) != list(range(1, len(atom.targets) + 1)):
                continue
            mark = len(trail)
            ok = classes.assign(atom.source, loc, trail)
            for sel, target in enumerate(atom.targets, start=1):
                ok = ok and classes.assign(target, cell[sel], trail)
            if ok and classes.diseq_respected():
                used.add(loc)
                if match(i + 1):
                    return True
                used.discard(loc)
            classes.undo(trail, mark)
        return False

    return match(0)


def basic_sat(formula: BasicFormula) -> CanonicalModel | Unsat:
    """Canonical-model satisfiability with every variable treated as a
    logical symbol.

    Unsat verdicts: a disequality inside one equality class, two
    points-to sources sharing a class, or nil's class being allocated.
    Otherwise one fresh location is minted per class in first-occurrence
    order (c0, c1, ...), nil's class taking null.
    """
    variables = formula.variables() | {NIL}
    uf = UnionFind(variables)
    for a, b in formula.pure.equalities:
        uf.union(a, b)

    for a, b in formula.pure.sorted_disequalities():
        if uf.same(a, b):
            return Unsat(CONTRADICTION, f"{a} and {b} are both equated and distinguished")

    atoms = formula.spatial.atoms
    seen_sources: dict[Variable, Variable] = {}
    for atom in atoms:
        rep = uf.find(atom.source)
        if rep in seen_sources:
            return Unsat(DOUBLE_ALLOCATION,
                         f"{seen_sources[rep]} and {atom.source} allocate one class")
        seen_sources[rep] = atom.source
    nil_rep = uf.find(NIL)
    if nil_rep in seen_sources:
        return Unsat(NIL_ALLOCATED, f"{seen_sources[nil_rep]} is equal to nil")

    # First-occurrence order: spatial scan, binder, then remaining names.
    order: list[Variable] = []
    seen: set[Variable] = set()

    def note(var: Variable) -> None:
        rep = uf.find(var)
        if rep not in seen:
            seen.add(rep)
            order.append(rep)

    note(NIL)
    for atom in atoms:
        note(atom.source)
        for target in atom.targets:
            note(target)
    for var in formula.bound:
        note(var)
    for var in sorted(variables, key=lambda v: v.key):
        note(var)

    location: dict[Variable, str] = {}
    counter = 0
    for rep in order:
        if rep == nil_rep:
            location[rep] = NULL
        else:
            location[rep] = f"c{counter}"
            counter += 1

    heap: dict[str, dict[int, str]] = {}
    for atom in atoms:
        cell = {sel: location[uf.find(t)] for sel, t in enumerate(atom.targets, start=1)}
        heap[location[uf.find(atom.source)]] = cell

    store = {"nil": NULL}
    for var in sorted(variables, key=lambda v: v.key):
        if var.kind == PROGRAM and var != NIL:
            store[var.name] = location[uf.find(var)]

    valuation = {var: location[uf.find(var)] for var in variables}
    members: dict[Variable, list[Variable]] = {}
    for var in sorted(variables, key=lambda v: v.key):
        members.setdefault(uf.find(var), []).append(var)
    classes = tuple(tuple(members[rep]) for rep in order if rep in members)
    return CanonicalModel(State(store, heap), valuation, classes)


def assemble_formula(formula: TopLevelFormula, trees, system: RecursiveSystem) -> BasicFormula:
    """Combine a top-level formula with one unfolding tree per
    occurrence into a single symbolic heap.

    Occurrence k's tree is instantiated at index prefix (k,); the
    actual arguments are equated with the root formal parameters.
    """
    from . import unfolding

    if len(trees) != len(formula.occurrences):
        raise SlrdError("one unfolding tree per predicate occurrence is required")
    spatial = formula.basic.spatial
    pure = formula.basic.pure
    bound = list(formula.bound)
    for k, (occ, tree) in enumerate(zip(formula.occurrences, trees)):
        phi = unfolding.characteristic_formula(tree, system, prefix=(k,))
        params = system.predicates[occ.predicate].params
        root_params = tuple(p.at((k,)) for p in params)
        binding = [(arg, rp) for arg, rp in zip(occ.args, root_params)]
        spatial = spatial.join(phi.spatial)
        pure = pure.join(phi.pure).join(type(pure).of(binding))
        bound.extend(root_params)
        bound.extend(phi.bound)
    return BasicFormula(tuple(bound), spatial, pure)


def check_top_level(state: State, formula: TopLevelFormula,
                    system: RecursiveSystem) -> bool:
    """Exact verdict of S |=sl phi for a top-level formula.

    Needs the progress property: every unfolding-tree node then
    allocates exactly one cell, so the trees of any model have exactly
    |dom(h)| - |basic atoms| nodes in total.
    """
    from . import unfolding, wellformed

    violations = wellformed.check_progress(system)
    if violations:
        raise SlrdError("system fails progress: " + violations[0].detail)

    budget = len(state.heap) - len(formula.basic.spatial.atoms)
    occs = formula.occurrences
    if budget < len(occs) or (not occs and budget != 0):
        return False
    if not occs:
        combined = BasicFormula(formula.bound, formula.basic.spatial, formula.basic.pure)
        return check_basic(state, {}, combined)
    for parts in unfolding.compositions(budget, len(occs)):
        choices = [list(unfolding.trees_of_size(system, occ.predicate, size))
                   for occ, size in zip(occs, parts)]
        if any(not c for c in choices):
            continue
        for combo in product(*choices):
            combined = assemble_formula(formula, combo, system)
            if check_basic(state, {}, combined):
                return True
    return False

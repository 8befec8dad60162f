"""The three membership checks for the decidable fragment.

Progress: every rule's head is exactly one points-to atom.
Connectivity: every tail occurrence is reached by a local selector edge
from its parent's head.
Establishment: every existentially quantified variable is eventually
allocated.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .syntax import (NIL, PureFormula, RecursiveSystem, Rule, SlrdError,
                     Variable, pure_closure)


@dataclass(frozen=True)
class Violation:
    check: str
    predicate: str
    rule: int  # 1-based, 0 when the violation is not tied to one rule
    detail: str

    def __str__(self):
        where = f"{self.predicate}.R{self.rule}" if self.rule else self.predicate
        return f"{self.check} violation at {where}: {self.detail}"


def _closure(rule: Rule) -> PureFormula:
    return pure_closure(rule.pure, rule.variables() | {NIL})


def _equal_mod_pure(closure: PureFormula, a: Variable, b: Variable) -> bool:
    if a == b:
        return True
    pair = (a, b) if a.key <= b.key else (b, a)
    return pair in closure.equalities


def _allocated_in_head(rule: Rule, closure: PureFormula, var: Variable) -> bool:
    """Equal (modulo the rule's pure closure) to some head source."""
    return any(_equal_mod_pure(closure, var, atom.source) for atom in rule.head.atoms)


def check_progress(system: RecursiveSystem) -> list[Violation]:
    violations = []
    for i, j, rule in system.rules():
        n = len(rule.head.atoms)
        if n != 1:
            what = "emp head" if n == 0 else f"{n} points-to atoms in head"
            violations.append(Violation(
                "progress", system.predicates[i].name, j + 1,
                f"{what}; each rule must allocate exactly one variable"))
    return violations


FTable = dict[tuple[int, int, int, int], frozenset]


def local_selectors(system: RecursiveSystem) -> FTable:
    """F(R, d, Q): selectors witnessing a local edge from rule R of some
    predicate to its d-th callee, for each rule Q of that callee.

    Defined only under progress. The selector set does not depend on Q;
    the table is still keyed per callee rule because the backbone
    formulas dispatch on both endpoints' labels.
    """
    if check_progress(system):
        raise SlrdError("local selectors are defined only under progress")
    table: FTable = {}
    allocated_heads = {}
    for c, pred in enumerate(system.predicates):
        positions = set()
        for s, param in enumerate(pred.params):
            if all(_allocated_in_head(rule, _closure(rule), param) for rule in pred.rules):
                positions.add(s)
        allocated_heads[c] = positions
    for i, j, rule in system.rules():
        closure = _closure(rule)
        head = rule.head.atoms[0]
        for d, occ in enumerate(rule.tail):
            selectors = set()
            for t, target in enumerate(head.targets, start=1):
                for s, arg in enumerate(occ.args):
                    if s in allocated_heads[occ.predicate] and \
                            _equal_mod_pure(closure, target, arg):
                        selectors.add(t)
                        break
            for q in range(len(system.predicates[occ.predicate].rules)):
                table[(i, j, d, q)] = frozenset(selectors)
    return table


def check_connectivity(system: RecursiveSystem) -> list[Violation]:
    violations = []
    table = local_selectors(system)
    for i, j, rule in system.rules():
        for d, occ in enumerate(rule.tail):
            if not table[(i, j, d, 0)]:
                violations.append(Violation(
                    "connectivity", system.predicates[i].name, j + 1,
                    f"no local selector edge to occurrence {d + 1} "
                    f"({system.predicates[occ.predicate].name})"))
    return violations


def allocated_parameters(system: RecursiveSystem) -> dict[int, frozenset]:
    """Parameter positions (1-based) provably allocated in every
    unfolding, per predicate.

    Computed as the largest self-consistent set: start from all
    positions and drop any that some rule neither allocates in its head
    nor passes (modulo the rule's pure closure) into a position still in
    the set. Membership is then justified by induction on unfolding
    trees.
    """
    current = {c: set(range(len(pred.params))) for c, pred in enumerate(system.predicates)}
    closures = {(i, j): _closure(rule) for i, j, rule in system.rules()}
    changed = True
    while changed:
        changed = False
        for c, pred in enumerate(system.predicates):
            for s in sorted(current[c]):
                param = pred.params[s]
                for j, rule in enumerate(pred.rules):
                    closure = closures[(c, j)]
                    if _allocated_in_head(rule, closure, param):
                        continue
                    if not _passed_to_allocated(rule, closure, param, current):
                        current[c].discard(s)
                        changed = True
                        break
    return {c: frozenset(s + 1 for s in positions) for c, positions in current.items()}


def _passed_to_allocated(rule: Rule, closure: PureFormula, var: Variable,
                         allocated: dict[int, set]) -> bool:
    for occ in rule.tail:
        for s, arg in enumerate(occ.args):
            if s in allocated[occ.predicate] and _equal_mod_pure(closure, var, arg):
                return True
    return False


def check_establishment(system: RecursiveSystem) -> list[Violation]:
    violations = []
    allocated = {c: {s - 1 for s in positions}
                 for c, positions in allocated_parameters(system).items()}
    for i, j, rule in system.rules():
        closure = _closure(rule)
        for var in rule.bound:
            if _allocated_in_head(rule, closure, var):
                continue
            if _passed_to_allocated(rule, closure, var, allocated):
                continue
            violations.append(Violation(
                "establishment", system.predicates[i].name, j + 1,
                f"existential {var.name} is never allocated"))
    return violations


@dataclass(frozen=True)
class WellformednessReport:
    progress: tuple[Violation, ...]
    connectivity: tuple[Violation, ...]
    establishment: tuple[Violation, ...]
    f_table: FTable | None
    allocated: dict[int, frozenset] | None

    @property
    def ok(self) -> bool:
        return not (self.progress or self.connectivity or self.establishment)

    def violations(self) -> list[Violation]:
        return list(self.progress) + list(self.connectivity) + list(self.establishment)


def check_system(system: RecursiveSystem) -> WellformednessReport:
    """Run all three checks; connectivity is skipped (reported empty,
    table absent) when progress already failed."""
    progress = check_progress(system)
    if progress:
        f_table = None
        connectivity = []
    else:
        f_table = local_selectors(system)
        connectivity = check_connectivity(system)
    establishment = check_establishment(system)
    return WellformednessReport(tuple(progress), tuple(connectivity),
                                tuple(establishment), f_table,
                                allocated_parameters(system))


def require_wellformed(system: RecursiveSystem) -> None:
    report = check_system(system)
    if not report.ok:
        raise SlrdError("; ".join(str(v) for v in report.violations()))

"""Syntax trees for symbolic heaps and systems of recursive definitions.

Values here are immutable; every operation is a pure function, so the
module is safe for unrestricted concurrent use.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional, Tuple


class SlrdError(Exception):
    """Base error for the toolkit."""


class ParseError(SlrdError):
    """Malformed input text; carries a position when one is known."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"{line}:{column}: {message}"
        super().__init__(message)


PROGRAM = "program"
LOGICAL = "logical"

# Tree positions are tuples of child indices; () is the root.
TreePosition = Tuple[int, ...]


@dataclass(frozen=True)
class Variable:
    """A program or logical variable, optionally carrying a tree index.

    Identity is the full (name, kind, index) triple: a plain variable
    and its position-indexed copies never collide.
    """

    name: str
    kind: str = LOGICAL
    index: Optional[TreePosition] = None

    def __post_init__(self):
        if self.kind not in (PROGRAM, LOGICAL):
            raise ValueError(f"bad variable kind {self.kind!r}")
        if self.name == "nil" and (self.kind != PROGRAM or self.index is not None):
            raise ValueError("nil is a reserved, never-indexed program variable")

    @property
    def key(self) -> tuple:
        """Total ordering key (index-free variables sort before indexed)."""
        return (self.name, self.kind, self.index is not None, self.index or ())

    def at(self, position: TreePosition) -> "Variable":
        """The position-indexed copy of this variable; nil stays global."""
        if self.name == "nil":
            return self
        return Variable(self.name, LOGICAL, position)

    def __str__(self):
        if self.index is None:
            return self.name
        if self.index == ():
            return f"{self.name}^e"
        return f"{self.name}^{'.'.join(map(str, self.index))}"


NIL = Variable("nil", PROGRAM)


def _pair(a: Variable, b: Variable) -> tuple[Variable, Variable]:
    return (a, b) if a.key <= b.key else (b, a)


@dataclass(frozen=True)
class PureFormula:
    """A conjunction of equalities and disequalities over variables.

    Pairs are stored unordered (canonical orientation), so `a=b` and
    `b=a` are the same atom. A contradictory formula is representable;
    consistency is judged by the model-level operations.
    """

    equalities: frozenset = frozenset()
    disequalities: frozenset = frozenset()

    @staticmethod
    def of(equalities: Iterable[tuple] = (), disequalities: Iterable[tuple] = ()) -> "PureFormula":
        return PureFormula(
            frozenset(_pair(a, b) for a, b in equalities),
            frozenset(_pair(a, b) for a, b in disequalities),
        )

    def variables(self) -> set[Variable]:
        out = set()
        for a, b in self.equalities | self.disequalities:
            out.add(a)
            out.add(b)
        return out

    def join(self, other: "PureFormula") -> "PureFormula":
        return PureFormula(self.equalities | other.equalities,
                           self.disequalities | other.disequalities)

    def is_empty(self) -> bool:
        return not self.equalities and not self.disequalities

    def sorted_equalities(self) -> list[tuple[Variable, Variable]]:
        return sorted(self.equalities, key=lambda p: (p[0].key, p[1].key))

    def sorted_disequalities(self) -> list[tuple[Variable, Variable]]:
        return sorted(self.disequalities, key=lambda p: (p[0].key, p[1].key))


EMPTY_PURE = PureFormula()


@dataclass(frozen=True)
class PointsTo:
    """One spatial atom: source cell with an ordered tuple of targets."""

    source: Variable
    targets: Tuple[Variable, ...]

    def __post_init__(self):
        if self.source.name == "nil":
            raise ValueError("nil cannot be allocated")
        if not self.targets:
            raise ValueError("points-to needs at least one target")

    def variables(self) -> set[Variable]:
        return {self.source, *self.targets}

    def __str__(self):
        return f"{self.source} -> ({', '.join(map(str, self.targets))})"


@dataclass(frozen=True)
class SpatialFormula:
    """A *-conjunction of points-to atoms; the empty conjunction is emp."""

    atoms: Tuple[PointsTo, ...] = ()

    @property
    def is_emp(self) -> bool:
        return not self.atoms

    def size(self) -> int:
        """Total variable occurrence count: 0 for emp, n+1 per atom."""
        return sum(1 + len(a.targets) for a in self.atoms)

    def sources(self) -> list[Variable]:
        return [a.source for a in self.atoms]

    def referenced(self) -> set[Variable]:
        return {t for a in self.atoms for t in a.targets}

    def variables(self) -> set[Variable]:
        out = set()
        for a in self.atoms:
            out |= a.variables()
        return out

    def join(self, other: "SpatialFormula") -> "SpatialFormula":
        return SpatialFormula(self.atoms + other.atoms)


EMP = SpatialFormula()


def sigma_size(spatial: SpatialFormula) -> int:
    return spatial.size()


@dataclass(frozen=True)
class BasicFormula:
    """An existentially quantified symbolic heap: exists bound. spatial & pure."""

    bound: Tuple[Variable, ...] = ()
    spatial: SpatialFormula = EMP
    pure: PureFormula = EMPTY_PURE

    def __post_init__(self):
        if len(set(self.bound)) != len(self.bound):
            raise ValueError("bound variables must be pairwise distinct")

    def variables(self) -> set[Variable]:
        return set(self.bound) | self.spatial.variables() | self.pure.variables()

    def free_variables(self) -> set[Variable]:
        return self.variables() - set(self.bound)


@dataclass(frozen=True)
class PredicateOccurrence:
    """A call P_i(args); `predicate` is the index into the system."""

    predicate: int
    args: Tuple[Variable, ...]

    def variables(self) -> set[Variable]:
        return set(self.args)


@dataclass(frozen=True)
class Rule:
    """One disjunct of a recursive definition.

    The head collects the rule's points-to atoms, the tail its ordered
    predicate occurrences, and `pure` the (dis)equality part.
    """

    params: Tuple[Variable, ...]
    bound: Tuple[Variable, ...]
    head: SpatialFormula
    tail: Tuple[PredicateOccurrence, ...]
    pure: PureFormula

    def __post_init__(self):
        if set(self.params) & set(self.bound):
            raise ValueError("rule parameters and bound variables must be disjoint")
        scope = set(self.params) | set(self.bound) | {NIL}
        for occ in self.tail:
            for arg in occ.args:
                if arg not in scope or arg == NIL:
                    raise ValueError(f"call argument {arg} is not a parameter or bound variable")

    @property
    def is_base(self) -> bool:
        return not self.tail

    @property
    def var_count(self) -> int:
        return len(self.params) + len(self.bound)

    def variables(self) -> set[Variable]:
        out = set(self.params) | set(self.bound)
        out |= self.head.variables() | self.pure.variables()
        for occ in self.tail:
            out |= occ.variables()
        return out


@dataclass(frozen=True)
class Predicate:
    name: str
    params: Tuple[Variable, ...]
    rules: Tuple[Rule, ...]

    def __post_init__(self):
        if not self.rules:
            raise ValueError(f"predicate {self.name} needs at least one rule")
        for rule in self.rules:
            if rule.params != self.params:
                raise ValueError(f"rules of {self.name} must share its parameter list")

    @property
    def arity(self) -> int:
        return len(self.params)


@dataclass(frozen=True)
class RecursiveSystem:
    """A system of recursive definitions with its selector count."""

    predicates: Tuple[Predicate, ...]
    selector_count: int

    def __post_init__(self):
        if self.selector_count < 1:
            raise ValueError("selector count must be positive")
        for pred in self.predicates:
            for rule in pred.rules:
                for atom in rule.head.atoms:
                    if len(atom.targets) > self.selector_count:
                        raise ValueError(
                            f"points-to arity {len(atom.targets)} exceeds selector count "
                            f"{self.selector_count}")
                for occ in rule.tail:
                    callee = self.predicates[occ.predicate]
                    if len(occ.args) != callee.arity:
                        raise ValueError(
                            f"call to {callee.name} with {len(occ.args)} arguments, "
                            f"expected {callee.arity}")

    def predicate_index(self, name: str) -> int:
        for i, pred in enumerate(self.predicates):
            if pred.name == name:
                return i
        raise SlrdError(f"undefined predicate {name}")

    @property
    def max_tail(self) -> int:
        widths = [len(r.tail) for p in self.predicates for r in p.rules]
        return max(widths, default=0)

    def directions(self) -> list[int]:
        """The direction alphabet: -1 (parent) plus child indices."""
        return list(range(-1, self.max_tail))

    def forward_directions(self) -> list[int]:
        return list(range(self.max_tail))

    @property
    def var_bound(self) -> int:
        """Largest per-rule variable count, parameters included."""
        return max((r.var_count for p in self.predicates for r in p.rules), default=0)

    def rules(self) -> Iterator[tuple[int, int, Rule]]:
        for i, pred in enumerate(self.predicates):
            for j, rule in enumerate(pred.rules):
                yield i, j, rule

    def variables(self) -> list[Variable]:
        """All variables occurring in rules, deterministically ordered."""
        out = set()
        for _, _, rule in self.rules():
            out |= rule.variables()
        return sorted(out, key=lambda v: v.key)


@dataclass(frozen=True)
class TopLevelFormula:
    """exists bound . basic * P_i1(..) * ... * P_in(..)

    The basic part carries no binder of its own; all existentials sit in
    `bound`.
    """

    bound: Tuple[Variable, ...]
    basic: BasicFormula
    occurrences: Tuple[PredicateOccurrence, ...]

    def __post_init__(self):
        if self.basic.bound:
            raise ValueError("top-level basic part must not carry its own binder")

    def variables(self) -> set[Variable]:
        out = set(self.bound) | self.basic.variables()
        for occ in self.occurrences:
            out |= occ.variables()
        return out

    def free_variables(self) -> set[Variable]:
        return self.variables() - set(self.bound)


class UnionFind:
    """Union-find over hashable items, with deterministic class listing."""

    def __init__(self, items: Iterable = ()):
        self.parent: dict = {}
        for item in items:
            self.add(item)

    def add(self, item) -> None:
        self.parent.setdefault(item, item)

    def find(self, item):
        self.add(item)
        root = item
        while self.parent[root] != root:
            root = self.parent[root]
        while self.parent[item] != root:
            self.parent[item], item = root, self.parent[item]
        return root

    def union(self, a, b) -> None:
        ra, rb = self.find(a), self.find(b)
        if ra != rb:
            self.parent[rb] = ra

    def same(self, a, b) -> bool:
        return self.find(a) == self.find(b)

    def classes(self) -> list[list]:
        """Classes and their members, both sorted by `.key` when present."""
        groups: dict = {}
        for item in self.parent:
            groups.setdefault(self.find(item), []).append(item)
        keyed = [sorted(members, key=_item_key) for members in groups.values()]
        return sorted(keyed, key=lambda members: _item_key(members[0]))


def _item_key(item):
    return item.key if hasattr(item, "key") else item


def pure_closure(pure: PureFormula, variables: Iterable[Variable]) -> PureFormula:
    """Close `pure` under reflexivity, symmetry and transitivity.

    Disequalities are propagated across equality classes, so a
    contradiction always shows up as a pair inside one class.
    """
    vars_all = set(variables) | pure.variables()
    uf = UnionFind(vars_all)
    for a, b in pure.equalities:
        uf.union(a, b)
    members: dict = {}
    for v in vars_all:
        members.setdefault(uf.find(v), []).append(v)
    equalities = set()
    for group in members.values():
        for a in group:
            for b in group:
                equalities.add(_pair(a, b))
    disequalities = set()
    for a, b in pure.disequalities:
        for a2 in members[uf.find(a)]:
            for b2 in members[uf.find(b)]:
                disequalities.add(_pair(a2, b2))
    return PureFormula(frozenset(equalities), frozenset(disequalities))


def classify_vars(formula: BasicFormula) -> dict[str, set[Variable]]:
    """Allocated (sources), referenced (targets) and free variables."""
    return {
        "allocated": set(formula.spatial.sources()),
        "referenced": formula.spatial.referenced(),
        "free": formula.free_variables(),
    }

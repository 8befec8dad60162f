"""Unfolding trees, characteristic formulas and canonical model building.

A tree maps positions (tuples of child indices, () at the root) to
(predicate index, rule index) labels: the root is labeled by a rule of
the root predicate, base-case nodes are leaves, and a node labeled with
an m-occurrence rule has children 0..m-1 labeled by rules of the
respective callees.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from itertools import product
from typing import Iterator, Mapping, Optional

from . import semantics
from .states import NULL, Interpretation, State
from .syntax import (EMPTY_PURE, NIL, BasicFormula, PointsTo, PureFormula,
                     RecursiveSystem, SlrdError, SpatialFormula, TreePosition,
                     UnionFind, Variable)


@dataclass(frozen=True)
class UnfoldingTree:
    labels: dict[TreePosition, tuple[int, int]]

    def positions(self) -> list[TreePosition]:
        """Positions in breadth-first order."""
        return sorted(self.labels, key=lambda p: (len(p), p))

    def label(self, position: TreePosition) -> tuple[int, int]:
        return self.labels[position]

    def children(self, position: TreePosition) -> list[TreePosition]:
        out = []
        k = 0
        while position + (k,) in self.labels:
            out.append(position + (k,))
            k += 1
        return out

    @property
    def size(self) -> int:
        return len(self.labels)

    @property
    def root_predicate(self) -> int:
        return self.labels[()][0]

    def direction(self, position: TreePosition) -> int:
        """-1 at the root, otherwise the child index of the position."""
        return -1 if not position else position[-1]

    def to_nested(self, system: RecursiveSystem):
        """Nested (predicate, rule, children) lists; rules are 1-based."""

        def walk(position: TreePosition):
            i, j = self.labels[position]
            return {
                "pred": system.predicates[i].name,
                "rule": j + 1,
                "children": [walk(c) for c in self.children(position)],
            }

        return walk(())

    @staticmethod
    def from_nested(nested, system: RecursiveSystem) -> "UnfoldingTree":
        """Build from ("name", rule_1based, [children...]) triples."""
        labels: dict[TreePosition, tuple[int, int]] = {}

        def walk(node, position: TreePosition):
            name, rule, children = node
            labels[position] = (system.predicate_index(name), rule - 1)
            for k, child in enumerate(children):
                walk(child, position + (k,))

        walk(nested, ())
        tree = UnfoldingTree(labels)
        tree.check_valid(system)
        return tree

    def check_valid(self, system: RecursiveSystem) -> None:
        for position in self.positions():
            i, j = self.labels[position]
            rule = system.predicates[i].rules[j]
            children = self.children(position)
            if len(children) != len(rule.tail):
                raise SlrdError(
                    f"node {position} needs {len(rule.tail)} children, has {len(children)}")
            for k, child in enumerate(children):
                ci, _ = self.labels[child]
                if ci != rule.tail[k].predicate:
                    raise SlrdError(f"child {child} is not labeled by the callee predicate")
        extra = set(self.labels) - set(self.positions())
        if extra:
            raise SlrdError(f"stray positions {extra}")


def compositions(total: int, parts: int) -> Iterator[tuple[int, ...]]:
    """Ordered compositions of `total` into `parts` positive summands,
    in lexicographic order."""
    if parts == 0:
        if total == 0:
            yield ()
        return
    if parts == 1:
        if total >= 1:
            yield (total,)
        return
    for head in range(1, total - parts + 2):
        for rest in compositions(total - head, parts - 1):
            yield (head,) + rest


def trees_of_size(system: RecursiveSystem, predicate: int, size: int) -> Iterator[UnfoldingTree]:
    """All unfolding trees rooted at `predicate` with exactly `size` nodes."""
    for labels in _trees(system, predicate, size, ()):
        yield UnfoldingTree(labels)


def _trees(system: RecursiveSystem, predicate: int, size: int,
           position: TreePosition) -> Iterator[dict]:
    if size < 1:
        return
    for j, rule in enumerate(system.predicates[predicate].rules):
        m = len(rule.tail)
        if m == 0:
            if size == 1:
                yield {position: (predicate, j)}
            continue
        if size < m + 1:
            continue
        for parts in compositions(size - 1, m):
            child_choices = [
                list(_trees(system, rule.tail[k].predicate, parts[k], position + (k,)))
                for k in range(m)
            ]
            if any(not c for c in child_choices):
                continue
            for combo in product(*child_choices):
                labels = {position: (predicate, j)}
                for child_labels in combo:
                    labels.update(child_labels)
                yield labels


def enumerate_trees(system: RecursiveSystem, predicate: int,
                    max_nodes: int) -> list[UnfoldingTree]:
    """All trees with at most `max_nodes` nodes, smallest first, in a
    deterministic order. Complete up to the bound; may be empty."""
    if max_nodes < 1:
        raise SlrdError("max_nodes must be at least 1")
    out = []
    for size in range(1, max_nodes + 1):
        out.extend(trees_of_size(system, predicate, size))
    return out


def characteristic_formula(tree: UnfoldingTree, system: RecursiveSystem,
                           prefix: TreePosition = ()) -> BasicFormula:
    """The symbolic heap of one unfolding: per-node heads and pure parts
    with variables indexed by position, plus the argument/parameter
    binding equalities along tree edges.

    The root's formal parameters (indexed at `prefix`) stay free; every
    other indexed variable is existentially bound. Indexed copies of nil
    all collapse to the one global nil.
    """
    spatial_atoms = []
    pure = EMPTY_PURE
    bound: list[Variable] = []
    for position in tree.positions():
        i, j = tree.label(position)
        rule = system.predicates[i].rules[j]
        here = prefix + position

        def ix(var: Variable, index=None):
            return var.at(index if index is not None else here)

        for atom in rule.head.atoms:
            spatial_atoms.append(PointsTo(ix(atom.source),
                                          tuple(ix(t) for t in atom.targets)))
        pure = pure.join(PureFormula.of(
            [(ix(a), ix(b)) for a, b in rule.pure.sorted_equalities()],
            [(ix(a), ix(b)) for a, b in rule.pure.sorted_disequalities()]))
        for k, occ in enumerate(rule.tail):
            child = here + (k,)
            callee = system.predicates[occ.predicate]
            binding = [(ix(arg), formal.at(child))
                       for arg, formal in zip(occ.args, callee.params)]
            pure = pure.join(PureFormula.of(binding))
        if position == ():
            bound.extend(v.at(here) for v in rule.bound)
        else:
            bound.extend(v.at(here) for v in rule.params)
            bound.extend(v.at(here) for v in rule.bound)
    return BasicFormula(tuple(bound), SpatialFormula(tuple(spatial_atoms)), pure)


def equality_closure(tree: UnfoldingTree, system: RecursiveSystem,
                     prefix: TreePosition = ()) -> dict[Variable, frozenset]:
    """The partition of indexed variables (and nil) induced by the pure
    parts and binding equalities of the characteristic formula.

    This is the brute-force oracle the routing automaton is tested
    against: two indexed variables are equal in every model of phi_t iff
    they share a class here.
    """
    phi = characteristic_formula(tree, system, prefix)
    uf = UnionFind(phi.variables() | {NIL})
    for a, b in phi.pure.equalities:
        uf.union(a, b)
    out: dict[Variable, frozenset] = {}
    groups: dict = {}
    for var in uf.parent:
        groups.setdefault(uf.find(var), set()).add(var)
    for members in groups.values():
        frozen = frozenset(members)
        for var in members:
            out[var] = frozen
    return out


class BuildFailure(Enum):
    DOUBLE_ALLOCATION = "double-allocation"
    INCONSISTENT = "inconsistent"


@dataclass(frozen=True)
class BuiltModel:
    state: State
    allocation: dict[TreePosition, str]
    valuation: dict[Variable, str]


def build_model(tree: UnfoldingTree, system: RecursiveSystem,
                root_valuation: Optional[Interpretation] = None
                ) -> BuiltModel | BuildFailure:
    """Canonical model of one unfolding tree.

    `root_valuation` may pin root parameters to null or to each other;
    it is folded into the formula as equalities. The allocation map
    sends each position to the cell its head allocates and is bijective
    whenever progress holds.
    """
    phi = characteristic_formula(tree, system)
    if root_valuation:
        i, _ = tree.label(())
        params = system.predicates[i].params
        by_location: dict[str, list[Variable]] = {}
        extra = []
        for param in params:
            root_param = param.at(())
            if param in root_valuation:
                loc = root_valuation[param]
                if loc == NULL:
                    extra.append((root_param, NIL))
                else:
                    by_location.setdefault(loc, []).append(root_param)
        for group in by_location.values():
            extra.extend((group[0], other) for other in group[1:])
        phi = BasicFormula(phi.bound, phi.spatial, phi.pure.join(PureFormula.of(extra)))

    result = semantics.basic_sat(phi)
    if isinstance(result, semantics.Unsat):
        if result.reason == semantics.DOUBLE_ALLOCATION:
            return BuildFailure.DOUBLE_ALLOCATION
        return BuildFailure.INCONSISTENT

    allocation = {}
    for position in tree.positions():
        i, j = tree.label(position)
        rule = system.predicates[i].rules[j]
        source = rule.head.atoms[0].source if rule.head.atoms else None
        if source is None:
            raise SlrdError("build_model needs progress (a points-to head per rule)")
        allocation[position] = result.location_of(source.at(position))
    return BuiltModel(result.state, allocation, result.valuation)

"""Tree decompositions of states: validation, exact width, bound checks.

The width computation works on the undirected version of the state
graph (selector edges without labels or direction) over all referenced
locations, null included. It is exact and self-certifying: the reported
width always comes with a decomposition that re-validates.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Union

from . import wellformed
from .states import State
from .syntax import (BasicFormula, ParseError, RecursiveSystem, SlrdError,
                     TopLevelFormula, TreePosition, sigma_size)

MAX_EXACT_VERTICES = 12


@dataclass(frozen=True)
class TreeDecomposition:
    bags: dict[TreePosition, frozenset]

    def positions(self) -> list[TreePosition]:
        return sorted(self.bags, key=lambda p: (len(p), p))

    def width(self) -> int:
        return max((len(bag) - 1 for bag in self.bags.values()), default=0)

    def to_json(self) -> str:
        doc = {".".join(map(str, pos)): sorted(self.bags[pos])
               for pos in self.positions()}
        return json.dumps(doc, indent=2, sort_keys=True) + "\n"

    @staticmethod
    def from_json(text: str) -> "TreeDecomposition":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ParseError(f"bad decomposition document: {exc}") from None
        if not isinstance(doc, dict):
            raise ParseError("decomposition must be a JSON object")
        bags = {}
        for key, members in doc.items():
            position = () if key == "" else tuple(int(part) for part in key.split("."))
            bags[position] = frozenset(members)
        decomp = TreeDecomposition(bags)
        for position in bags:
            if position and position[:-1] not in bags:
                raise ParseError(f"position {key_of(position)} has no parent bag")
        return decomp


def key_of(position: TreePosition) -> str:
    return ".".join(map(str, position))


@dataclass(frozen=True)
class DecompositionViolation:
    condition: int  # 1 coverage, 2 edges, 3 connectedness
    detail: str


def _vertices_edges(state: State) -> tuple[list[str], set[frozenset]]:
    vertices = sorted(state.locations())
    edges = set()
    for loc, cell in state.heap.items():
        for dst in cell.values():
            if dst != loc:
                edges.add(frozenset((loc, dst)))
    return vertices, edges


def validate_decomposition(state: State, decomp: TreeDecomposition
                           ) -> Union[int, DecompositionViolation]:
    """The decomposition's width, or the first failed condition."""
    vertices, edges = _vertices_edges(state)
    covered = set()
    for bag in decomp.bags.values():
        covered |= bag
    missing = set(vertices) - covered
    if missing:
        return DecompositionViolation(1, f"location {sorted(missing)[0]} is in no bag")
    stray = covered - set(vertices)
    if stray:
        return DecompositionViolation(1, f"bag member {sorted(stray)[0]} is not a location")
    for edge in sorted(edges, key=sorted):
        if not any(edge <= bag for bag in decomp.bags.values()):
            a, b = sorted(edge)
            return DecompositionViolation(2, f"edge {a} -> {b} has no bag")
    positions = decomp.positions()
    for vertex in vertices:
        holding = [p for p in positions if vertex in decomp.bags[p]]
        links = sum(1 for p in holding if p and p[:-1] in set(holding))
        if len(holding) - links != 1:
            return DecompositionViolation(
                3, f"bags holding {vertex} are not connected in the tree")
    return decomp.width()


@dataclass(frozen=True)
class ExceedsBound:
    bound: int


def exact_treewidth(state: State, max_k: int | None = None
                    ) -> tuple[Union[int, ExceedsBound], TreeDecomposition]:
    """Exact treewidth by dynamic programming over elimination orders,
    with a witness decomposition.

    Feasible only for small states; refuses beyond MAX_EXACT_VERTICES.
    """
    vertices, edges = _vertices_edges(state)
    n = len(vertices)
    if n > MAX_EXACT_VERTICES:
        raise SlrdError(f"state has {n} locations; exact treewidth caps at "
                        f"{MAX_EXACT_VERTICES}")
    index = {v: i for i, v in enumerate(vertices)}
    adjacency = [0] * n
    for edge in edges:
        a, b = (index[v] for v in edge)
        adjacency[a] |= 1 << b
        adjacency[b] |= 1 << a

    if n == 0:
        return 0, TreeDecomposition({(): frozenset()})

    def eliminated_degree(done_mask: int, v: int) -> int:
        """Neighbors of v outside done_mask, reachable through done_mask."""
        seen = (1 << v)
        frontier = adjacency[v]
        reach = 0
        while frontier:
            low = frontier & -frontier
            frontier &= frontier - 1
            w = low.bit_length() - 1
            if seen & low:
                continue
            seen |= low
            if done_mask & low:
                frontier |= adjacency[w] & ~seen
            else:
                reach |= low
        return bin(reach).count("1")

    full = (1 << n) - 1
    best: dict[int, int] = {0: -1}
    choice: dict[int, int] = {}
    masks_by_size = [[] for _ in range(n + 1)]
    for mask in range(full + 1):
        masks_by_size[bin(mask).count("1")].append(mask)
    for size in range(1, n + 1):
        for mask in masks_by_size[size]:
            value = None
            pick = -1
            sub = mask
            while sub:
                low = sub & -sub
                sub &= sub - 1
                v = low.bit_length() - 1
                candidate = max(best[mask ^ low], eliminated_degree(mask ^ low, v))
                if value is None or candidate < value:
                    value, pick = candidate, v
            best[mask] = value
            choice[mask] = pick

    width = max(best[full], 0)
    order = []
    mask = full
    while mask:
        v = choice[mask]
        order.append(v)
        mask ^= 1 << v
    order.reverse()

    decomp = _decomposition_from_order(vertices, adjacency, order)
    check = validate_decomposition(state, decomp)
    if check != width:
        raise SlrdError(f"internal: witness decomposition disagrees: {check}")
    if max_k is not None and width > max_k:
        return ExceedsBound(max_k), decomp
    return width, decomp


def _decomposition_from_order(vertices, adjacency, order) -> TreeDecomposition:
    """Standard construction: eliminate in order, bag = vertex plus its
    current (fill-in) neighbors, attach each bag under the bag of its
    earliest-eliminated such neighbor."""
    n = len(vertices)
    work = list(adjacency)
    rank = {v: r for r, v in enumerate(order)}
    bags: dict[int, set[int]] = {}
    attach: dict[int, int] = {}
    remaining = set(range(n))
    for v in order:
        remaining.discard(v)
        neighbors = [w for w in remaining if work[v] >> w & 1]
        bags[v] = {v, *neighbors}
        if neighbors:
            attach[v] = min(neighbors, key=lambda w: rank[w])
        for a in neighbors:
            for b in neighbors:
                if a != b:
                    work[a] |= 1 << b
    root = order[-1]
    for v in order[:-1]:
        # A component that empties early has no later neighbor; hang its
        # bag under the root.
        attach.setdefault(v, root)
    children: dict[int, list[int]] = {v: [] for v in order}
    for v, parent in attach.items():
        children[parent].append(v)
    positions: dict[TreePosition, frozenset] = {}

    def place(v: int, position: TreePosition):
        positions[position] = frozenset(vertices[w] for w in bags[v])
        for k, child in enumerate(sorted(children[v], key=lambda w: rank[w])):
            place(child, position + (k,))

    place(root, ())
    return TreeDecomposition(positions)


def paper_bound(subject, pvar_count: int, system: RecursiveSystem | None = None) -> int:
    """The width bound every model of the subject satisfies.

    Basic formulas: max(size, program-variable count). Established
    systems: the per-rule variable maximum. Top-level formulas: the
    maximum of binder length, basic size, program-variable count and the
    system's per-rule variable maximum.
    """
    if isinstance(subject, BasicFormula):
        return max(sigma_size(subject.spatial), pvar_count)
    if isinstance(subject, RecursiveSystem):
        _require_established(subject)
        return subject.var_bound
    if isinstance(subject, TopLevelFormula):
        if system is None:
            raise SlrdError("top-level bound needs the definition system")
        _require_established(system)
        return max(len(subject.bound), sigma_size(subject.basic.spatial),
                   pvar_count, system.var_bound)
    raise TypeError(f"no width bound for {type(subject).__name__}")


def _require_established(system: RecursiveSystem) -> None:
    violations = wellformed.check_establishment(system)
    if violations:
        raise SlrdError(f"system is not established: {violations[0].detail}")

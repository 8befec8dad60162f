"""Tree-walking automata over rule-labeled trees, and the three
constructions used by the translation: the routing automaton (equality
chains and inner edges), the double-allocation automaton, and the
parameter automata.

A tree node's symbol is its rule tagged with the direction under which
the node hangs: (predicate, rule, child-index), direction -1 at the
root. Transitions read the node symbol (or the marker `root` at the
root position) together with the parent symbol (`?` at the root) and
move along a direction or stay in place.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Iterable, Optional

from .syntax import RecursiveSystem, SlrdError, TreePosition, Variable
from .unfolding import UnfoldingTree

ROOT = "root"  # pseudo node symbol, readable only at the root
NO_PARENT = "?"  # parent symbol at the root
STAY = "eps"  # in-place move

# States.
INITIAL = ("init",)
FINAL = ("final",)
ZERO = ("zero",)  # the once-per-run allocation marker of the double-allocation automaton


def var_state(var: Variable) -> tuple:
    return ("var", var.name)


def sel_state(selector: int) -> tuple:
    return ("sel", selector)


def mark_state(predicate: int, position: int) -> tuple:
    """Root marker for tracking parameter `position` (1-based) of `predicate`."""
    return ("mark", predicate, position)


Config = tuple[TreePosition, tuple]


@dataclass(frozen=True)
class TreeWalkingAutomaton:
    states: frozenset
    initial: tuple
    final: tuple
    # (state, node symbol, parent symbol) -> set of (state, move)
    delta: dict[tuple, frozenset]

    def moves(self, state: tuple, symbol, parent) -> frozenset:
        return self.delta.get((state, symbol, parent), frozenset())

    def dump(self) -> str:
        """Stable text listing of states and transitions."""
        lines = ["states:"]
        lines += [f"  {_fmt_state(q)}" for q in sorted(self.states, key=repr)]
        lines.append("transitions:")
        for key in sorted(self.delta, key=repr):
            q, symbol, parent = key
            for q2, move in sorted(self.delta[key], key=repr):
                lines.append(f"  {_fmt_state(q)} --[{_fmt_symbol(symbol)} / "
                             f"{_fmt_symbol(parent)}]--> {_fmt_state(q2)}, {move}")
        return "\n".join(lines) + "\n"


def _fmt_state(q: tuple) -> str:
    return "q_" + "_".join(str(part) for part in q)


def _fmt_symbol(symbol) -> str:
    if isinstance(symbol, tuple):
        return f"R{symbol[0]}.{symbol[1]}^{symbol[2]}"
    return str(symbol)


class _Builder:
    def __init__(self):
        self.delta: dict[tuple, set] = {}
        self.states: set = {INITIAL, FINAL}

    def add(self, state, symbol, parent, target, move):
        self.states.add(state)
        self.states.add(target)
        self.delta.setdefault((state, symbol, parent), set()).add((target, move))

    def freeze(self, initial=INITIAL, final=FINAL) -> TreeWalkingAutomaton:
        frozen = {key: frozenset(moves) for key, moves in self.delta.items()}
        return TreeWalkingAutomaton(frozenset(self.states), initial, final, frozen)


def _symbols(system: RecursiveSystem) -> list[tuple]:
    return [(i, j, d)
            for i, j, _ in system.rules()
            for d in system.directions()]


def _node_symbols(system, with_root=True):
    out = list(_symbols(system))
    if with_root:
        out.append(ROOT)
    return out


def _parent_symbols(system):
    return list(_symbols(system)) + [NO_PARENT]


def _add_tracking_families(b: _Builder, system: RecursiveSystem) -> None:
    """Families shared by all constructions: parameter passing along
    tree edges and in-place equality switches."""
    parents = _parent_symbols(system)
    for i, j, rule in system.rules():
        for k, occ in enumerate(rule.tail):
            callee = system.predicates[occ.predicate]
            for a, arg in enumerate(occ.args):
                formal = callee.params[a]
                for d in system.directions():
                    for parent in parents:
                        b.add(var_state(arg), (i, j, d), parent, var_state(formal), k)
                for q in range(len(callee.rules)):
                    for d in system.directions():
                        b.add(var_state(formal), (occ.predicate, q, k), (i, j, d),
                              var_state(arg), -1)
        for a, eq_b in sorted(rule.pure.equalities, key=lambda p: (p[0].key, p[1].key)):
            for d in system.directions():
                for parent in parents:
                    b.add(var_state(a), (i, j, d), parent, var_state(eq_b), STAY)
                    b.add(var_state(eq_b), (i, j, d), parent, var_state(a), STAY)


def _add_allocation_finals(b: _Builder, system: RecursiveSystem) -> None:
    """Accept when the tracked variable is the head source of the
    current node's rule."""
    parents = _parent_symbols(system)
    for i, j, rule in system.rules():
        for atom in rule.head.atoms:
            for d in system.directions():
                for parent in parents:
                    b.add(var_state(atom.source), (i, j, d), parent, FINAL, STAY)


def build_routing_automaton(system: RecursiveSystem) -> TreeWalkingAutomaton:
    """The inner-edge automaton: wander to a node, pick a selector,
    track its target variable through equality chains, accept at the
    node that allocates it."""
    b = _Builder()
    parents = _parent_symbols(system)
    for symbol in _node_symbols(system):
        for parent in parents:
            for k in system.forward_directions():
                b.add(INITIAL, symbol, parent, INITIAL, k)
            for s in range(1, system.selector_count + 1):
                b.add(INITIAL, symbol, parent, sel_state(s), STAY)
    for i, j, rule in system.rules():
        for atom in rule.head.atoms:
            for s, target in enumerate(atom.targets, start=1):
                for d in system.directions():
                    for parent in parents:
                        b.add(sel_state(s), (i, j, d), parent, var_state(target), STAY)
    _add_allocation_finals(b, system)
    _add_tracking_families(b, system)
    return b.freeze()


def build_double_alloc_automaton(system: RecursiveSystem) -> TreeWalkingAutomaton:
    """The routing automaton with the selector states replaced by a
    single marker state entered once: runs relate pairs of positions
    whose head sources are forced equal."""
    b = _Builder()
    parents = _parent_symbols(system)
    for symbol in _node_symbols(system):
        for parent in parents:
            for k in system.forward_directions():
                b.add(INITIAL, symbol, parent, INITIAL, k)
            b.add(INITIAL, symbol, parent, ZERO, STAY)
    for i, j, rule in system.rules():
        for atom in rule.head.atoms:
            for d in system.directions():
                for parent in parents:
                    b.add(ZERO, (i, j, d), parent, var_state(atom.source), STAY)
    _add_allocation_finals(b, system)
    _add_tracking_families(b, system)
    return b.freeze()


def build_param_automata(system: RecursiveSystem, predicate: int,
                         position: int) -> tuple[TreeWalkingAutomaton, ...]:
    """The three constraint automata for parameter `position` (1-based)
    of `predicate`: runs start by marking the root and tracking the
    parameter there, then accept where the tracked chain is (1)
    allocated, (2) referenced through some selector, or (3) equal to
    another parameter back at the root.

    The routing automaton's wandering and selector-choice moves are not
    inherited: a run must stay on the tracked parameter's chain.
    """
    pred = system.predicates[predicate]
    if not 1 <= position <= pred.arity:
        raise SlrdError(f"{pred.name} has no parameter {position}")
    param = pred.params[position - 1]
    automata = []
    for case in (1, 2, 3):
        b = _Builder()
        b.add(INITIAL, ROOT, NO_PARENT, mark_state(predicate, position), STAY)
        for j in range(len(pred.rules)):
            b.add(mark_state(predicate, position), (predicate, j, -1), NO_PARENT,
                  var_state(param), STAY)
        _add_tracking_families(b, system)
        if case == 1:
            _add_allocation_finals(b, system)
        elif case == 2:
            parents = _parent_symbols(system)
            for i, j, rule in system.rules():
                for atom in rule.head.atoms:
                    for s, target in enumerate(atom.targets, start=1):
                        for d in system.directions():
                            for parent in parents:
                                b.add(var_state(target), (i, j, d), parent,
                                      sel_state(s), STAY)
            for s in range(1, system.selector_count + 1):
                for symbol in _node_symbols(system):
                    for parent in parents:
                        b.add(sel_state(s), symbol, parent, FINAL, STAY)
        else:
            for a in range(1, pred.arity + 1):
                if a == position:
                    continue
                b.add(var_state(pred.params[a - 1]), ROOT, NO_PARENT,
                      mark_state(predicate, a), STAY)
                b.add(mark_state(predicate, a), ROOT, NO_PARENT, FINAL, STAY)
        automata.append(b.freeze())
    return tuple(automata)


def _tree_symbol(tree: UnfoldingTree, position: TreePosition) -> tuple:
    i, j = tree.label(position)
    return (i, j, tree.direction(position))


def successors(twa: TreeWalkingAutomaton, tree: UnfoldingTree,
               config: Config) -> list[Config]:
    position, state = config
    if position not in tree.labels:
        return []
    if position == ():
        parent_symbol = NO_PARENT
        symbols = [_tree_symbol(tree, position), ROOT]
    else:
        parent_symbol = _tree_symbol(tree, position[:-1])
        symbols = [_tree_symbol(tree, position)]
    out = []
    for symbol in symbols:
        for target, move in twa.moves(state, symbol, parent_symbol):
            if move == STAY:
                out.append((position, target))
            elif move == -1:
                if position:
                    out.append((position[:-1], target))
            else:
                child = position + (move,)
                if child in tree.labels:
                    out.append((child, target))
    return out


def reachable_set(twa: TreeWalkingAutomaton, tree: UnfoldingTree,
                  start: Config) -> set[Config]:
    seen = {start}
    queue = deque([start])
    while queue:
        config = queue.popleft()
        for nxt in successors(twa, tree, config):
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def reachable(twa: TreeWalkingAutomaton, tree: UnfoldingTree,
              start: Config, goal: Config) -> bool:
    """True iff some run of the automaton over the tree leads from
    `start` to `goal`."""
    return goal in reachable_set(twa, tree, start)


def run_witness(twa: TreeWalkingAutomaton, tree: UnfoldingTree,
                start: Config, goal: Config) -> Optional[list[Config]]:
    """One witnessing run, for diagnostics; None when unreachable."""
    parent: dict[Config, Optional[Config]] = {start: None}
    queue = deque([start])
    while queue:
        config = queue.popleft()
        if config == goal:
            path = [config]
            while parent[path[-1]] is not None:
                path.append(parent[path[-1]])
            return path[::-1]
        for nxt in successors(twa, tree, config):
            if nxt not in parent:
                parent[nxt] = config
                queue.append(nxt)
    return None


def accepts_nontrivial_double_allocation(twa: TreeWalkingAutomaton,
                                         tree: UnfoldingTree) -> Optional[tuple]:
    """A pair of distinct positions allocating one location, if any.

    Every position carries the trivial run that allocates and accepts in
    place; a witness requires the marker and the final state at
    different positions.
    """
    for position in tree.positions():
        for goal_position, state in reachable_set(twa, tree, (position, ZERO)):
            if state == FINAL and goal_position != position:
                return (position, goal_position)
    return None

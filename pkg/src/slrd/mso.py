"""Monadic second-order logic over states: translation from symbolic
heaps and recursive predicates, an exact small-universe evaluator, and a
textual s-expression format.

The evaluator is exact for the finite contract it implements:
first-order quantifiers range over loc(S) plus null, second-order
quantifiers over all subsets of that universe, and it refuses (rather
than approximates) when the universe exceeds the configured cap.

Automaton runs are encoded by reachability as set closure: a
configuration (position, state) is reachable from a seed iff it belongs
to every family of per-state position sets that contains the seed and
is closed under the automaton's transitions. The closure blocks are
universally quantified, which keeps the encoding exact; the
double-allocation and parameter constraints read their verdicts off the
reachable pairs.
"""

from __future__ import annotations

import os
import re
from dataclasses import dataclass, field
from itertools import combinations
from typing import Iterable, Mapping, Optional, Union

from . import wellformed
from .states import NULL, State
from .syntax import (LOGICAL, NIL, PROGRAM, BasicFormula, ParseError,
                     RecursiveSystem, SlrdError, TopLevelFormula, Variable)

DEFAULT_CAP = 8


# ---------------------------------------------------------------------------
# Formulas.

@dataclass(frozen=True)
class Eq:
    left: str
    right: str


@dataclass(frozen=True)
class Edge:
    selector: int
    source: str
    target: str


@dataclass(frozen=True)
class VarAtom:
    program_var: str
    arg: str


@dataclass(frozen=True)
class NullAtom:
    arg: str


@dataclass(frozen=True)
class In:
    element: str
    set_var: str


@dataclass(frozen=True)
class And:
    parts: tuple


@dataclass(frozen=True)
class Or:
    parts: tuple


@dataclass(frozen=True)
class Not:
    body: "Formula"


@dataclass(frozen=True)
class Exists1:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall1:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Exists2:
    var: str
    body: "Formula"


@dataclass(frozen=True)
class Forall2:
    var: str
    body: "Formula"


Formula = Union[Eq, Edge, VarAtom, NullAtom, In, And, Or, Not,
                Exists1, Forall1, Exists2, Forall2]

TRUE = And(())
FALSE = Or(())


def conj(parts: Iterable[Formula]) -> Formula:
    kept = []
    for part in parts:
        if part == TRUE:
            continue
        if part == FALSE:
            return FALSE
        kept.append(part)
    if not kept:
        return TRUE
    if len(kept) == 1:
        return kept[0]
    return And(tuple(kept))


def disj(parts: Iterable[Formula]) -> Formula:
    kept = []
    for part in parts:
        if part == FALSE:
            continue
        if part == TRUE:
            return TRUE
        kept.append(part)
    if not kept:
        return FALSE
    if len(kept) == 1:
        return kept[0]
    return Or(tuple(kept))


def implies(antecedent: Formula, consequent: Formula) -> Formula:
    return disj([consequent, Not(antecedent)])


def iff(a: Formula, b: Formula) -> Formula:
    return conj([implies(a, b), implies(b, a)])


def exists1(names: Iterable[str], body: Formula) -> Formula:
    for name in reversed(list(names)):
        body = Exists1(name, body)
    return body


def exists2(names: Iterable[str], body: Formula) -> Formula:
    for name in reversed(list(names)):
        body = Exists2(name, body)
    return body


def forall2(names: Iterable[str], body: Formula) -> Formula:
    for name in reversed(list(names)):
        body = Forall2(name, body)
    return body


def _free_names(node, cache: dict) -> frozenset:
    got = cache.get(id(node))
    if got is not None:
        return got
    if isinstance(node, Eq):
        out = frozenset((node.left, node.right))
    elif isinstance(node, Edge):
        out = frozenset((node.source, node.target))
    elif isinstance(node, VarAtom):
        out = frozenset((node.arg,))
    elif isinstance(node, NullAtom):
        out = frozenset((node.arg,))
    elif isinstance(node, In):
        out = frozenset((node.element, node.set_var))
    elif isinstance(node, (And, Or)):
        out = frozenset().union(*(_free_names(p, cache) for p in node.parts)) \
            if node.parts else frozenset()
    elif isinstance(node, Not):
        out = _free_names(node.body, cache)
    else:
        out = _free_names(node.body, cache) - {node.var}
    cache[id(node)] = out
    return out


def free_names(formula: Formula) -> frozenset:
    """Free first- and second-order names, in one namespace."""
    return _free_names(formula, {})


# ---------------------------------------------------------------------------
# Evaluation.

@dataclass(frozen=True)
class SOInterpretation:
    first: dict[str, str] = field(default_factory=dict)
    second: dict[str, frozenset] = field(default_factory=dict)


def _cap_default() -> int:
    raw = os.environ.get("SLRD_MSO_CAP", "")
    return int(raw) if raw.isdigit() else DEFAULT_CAP


class _Evaluator:
    """Exact evaluation with memoization and three-valued pruning.

    Set quantifiers assign one subset at a time and peek at the body
    under the partial assignment; a branch whose body is already decided
    is not expanded. The peek never expands set quantifiers itself, so
    it stays cheap relative to full evaluation.
    """

    def __init__(self, state: State, cap: int):
        self.state = state
        universe = sorted(state.locations() | {NULL})
        if len(universe) > cap:
            raise SlrdError(f"universe has {len(universe)} locations, "
                            f"evaluator cap is {cap}")
        self.universe = universe
        self.subsets = [frozenset(c)
                        for size in range(len(universe) + 1)
                        for c in combinations(universe, size)]
        self.free: dict[int, frozenset] = {}
        self.memo: dict = {}

    def names_of(self, node) -> frozenset:
        return _free_names(node, self.free)

    def _key(self, node, env: dict, tag: str):
        names = self.names_of(node)
        return (tag, id(node), tuple(sorted((n, env[n]) for n in names if n in env)))

    def full(self, node, env: dict) -> bool:
        key = self._key(node, env, "f")
        got = self.memo.get(key)
        if got is not None:
            return got
        result = self._full(node, env)
        self.memo[key] = result
        return result

    def _full(self, node, env: dict) -> bool:
        if isinstance(node, And):
            return all(self.full(p, env) for p in node.parts)
        if isinstance(node, Or):
            return any(self.full(p, env) for p in node.parts)
        if isinstance(node, Not):
            return not self.full(node.body, env)
        if isinstance(node, Exists1):
            return any(self.full(node.body, {**env, node.var: u})
                       for u in self.universe)
        if isinstance(node, Forall1):
            return all(self.full(node.body, {**env, node.var: u})
                       for u in self.universe)
        if isinstance(node, (Exists2, Forall2)):
            want = isinstance(node, Exists2)
            for subset in self.subsets:
                env2 = {**env, node.var: subset}
                quick = self.peek(node.body, env2)
                if quick is None:
                    quick = self.full(node.body, env2)
                if quick == want:
                    return want
            return not want
        return self._atom(node, env)

    def peek(self, node, env: dict) -> Optional[bool]:
        key = self._key(node, env, "p")
        if key in self.memo:
            return self.memo[key]
        result = self._peek(node, env)
        self.memo[key] = result
        return result

    def _peek(self, node, env: dict) -> Optional[bool]:
        if isinstance(node, And):
            out: Optional[bool] = True
            for part in node.parts:
                got = self.peek(part, env)
                if got is False:
                    return False
                if got is None:
                    out = None
            return out
        if isinstance(node, Or):
            out = False
            for part in node.parts:
                got = self.peek(part, env)
                if got is True:
                    return True
                if got is None:
                    out = None
            return out
        if isinstance(node, Not):
            got = self.peek(node.body, env)
            return None if got is None else not got
        if isinstance(node, Exists1):
            out = False
            for u in self.universe:
                got = self.peek(node.body, {**env, node.var: u})
                if got is True:
                    return True
                if got is None:
                    out = None
            return out
        if isinstance(node, Forall1):
            out = True
            for u in self.universe:
                got = self.peek(node.body, {**env, node.var: u})
                if got is False:
                    return False
                if got is None:
                    out = None
            return out
        if isinstance(node, (Exists2, Forall2)):
            return None
        if self.names_of(node) <= env.keys():
            return self._atom(node, env)
        return None

    def _atom(self, node, env: dict) -> bool:
        try:
            if isinstance(node, Eq):
                return env[node.left] == env[node.right]
            if isinstance(node, Edge):
                return self.state.selector(env[node.source], node.selector) \
                    == env[node.target]
            if isinstance(node, VarAtom):
                return self.state.store.get(node.program_var) == env[node.arg]
            if isinstance(node, NullAtom):
                return env[node.arg] == NULL
            if isinstance(node, In):
                return env[node.element] in env[node.set_var]
        except KeyError as exc:
            raise SlrdError(f"unassigned MSO variable {exc.args[0]}") from None
        raise TypeError(f"not an MSO formula node: {type(node).__name__}")


def eval_mso(state: State, formula: Formula,
             interp: Optional[SOInterpretation] = None,
             cap: Optional[int] = None) -> bool:
    evaluator = _Evaluator(state, cap if cap is not None else _cap_default())
    env: dict = {}
    if interp is not None:
        env.update(interp.first)
        env.update({name: frozenset(value) for name, value in interp.second.items()})
    return evaluator.full(formula, env)


# ---------------------------------------------------------------------------
# Translation of basic formulas.

def mso_name(var: Variable) -> str:
    if var == NIL:
        return "xnil"
    prefix = "xp" if var.kind == PROGRAM else "xl"
    name = f"{prefix}_{var.name}"
    if var.index is not None:
        name += "_at_" + "_".join(map(str, var.index))
    return name


class _Fresh:
    def __init__(self):
        self.counter = 0

    def next(self) -> str:
        name = f"_g{self.counter}"
        self.counter += 1
        return name


def _singleton(element: str, set_var: str, fresh: _Fresh) -> Formula:
    other = fresh.next()
    return conj([In(element, set_var),
                 Forall1(other, implies(In(other, set_var), Eq(other, element)))])


def _partition(parts: list[str], whole: str, fresh: _Fresh) -> Formula:
    member = fresh.next()
    cover = iff(In(member, whole), disj([In(member, p) for p in parts]))
    disjoint = conj([Not(And((In(member, a), In(member, b))))
                     for a, b in combinations(parts, 2)])
    return Forall1(member, conj([cover, disjoint]))


def _tr_pure(pure, names=mso_name) -> Formula:
    parts = [Eq(names(a), names(b)) for a, b in pure.sorted_equalities()]
    parts += [Not(Eq(names(a), names(b))) for a, b in pure.sorted_disequalities()]
    return conj(parts)


def _tr_spatial(atoms, set_var: str, selector_count: int, fresh: _Fresh) -> Formula:
    if not atoms:
        var = fresh.next()
        return Forall1(var, Not(In(var, set_var)))
    if len(atoms) == 1:
        atom = atoms[0]
        source = mso_name(atom.source)
        parts = [_singleton(source, set_var, fresh)]
        parts += [Edge(sel, source, mso_name(t))
                  for sel, t in enumerate(atom.targets, start=1)]
        for sel in range(len(atom.targets) + 1, selector_count + 1):
            var = fresh.next()
            parts.append(Forall1(var, Not(Edge(sel, source, var))))
        return conj(parts)
    left, right = fresh.next() + "_Y", fresh.next() + "_Z"
    return exists2([left, right], conj([
        _tr_spatial(atoms[:1], left, selector_count, fresh),
        _tr_spatial(atoms[1:], right, selector_count, fresh),
        _partition([left, right], set_var, fresh),
    ]))


def translate_basic(formula: BasicFormula, selector_count: int,
                    set_var: str = "X", fresh: Optional[_Fresh] = None) -> Formula:
    """The symbolic heap as an MSO formula with one free set variable
    for the allocated locations; free variables keep their names."""
    fresh = fresh or _Fresh()
    body = conj([_tr_pure(formula.pure),
                 _tr_spatial(formula.spatial.atoms, set_var, selector_count, fresh)])
    return exists1([mso_name(v) for v in formula.bound], body)


def heap_constraint(set_var: str, selector_count: int, fresh: _Fresh) -> Formula:
    source = fresh.next()
    target = fresh.next()
    allocated = disj([Exists1(target, Edge(sel, source, target))
                      for sel in range(1, selector_count + 1)])
    return Forall1(source, iff(allocated, In(source, set_var)))


# ---------------------------------------------------------------------------
# Translation of recursive predicates.

class _PredicateTranslation:
    """Assembles the MSO image of one predicate occurrence.

    Label sets X_{ij}^d say which rule allocated a location and under
    which direction its tree node hangs; the backbone pins them to an
    unfolding-tree shape, and reachability blocks over the routing
    automata contribute the inner edges, the double-allocation ban and
    the parameter constraints.
    """

    def __init__(self, system: RecursiveSystem, pred: int, args: list[str],
                 tree_set: str, fresh: _Fresh):
        self.system = system
        self.pred = pred
        self.args = args
        self.T = tree_set
        self.fresh = fresh
        self.prefix = fresh.next()
        self.root = self.prefix + "_r"
        self.f_table = wellformed.local_selectors(system)
        self.rule_vars = sorted({v.name for _, _, rule in system.rules()
                                 for v in rule.variables()})

    # -- label sets ---------------------------------------------------------

    def label(self, i: int, j: int, d: int) -> str:
        tag = "m1" if d == -1 else str(d)
        return f"{self.prefix}_X_{i}_{j}_{tag}"

    def all_labels(self) -> list[str]:
        return [self.label(i, j, d)
                for i, j, _ in self.system.rules()
                for d in self.system.directions()]

    def rule_label(self, element: str, i: int, j: int) -> Formula:
        return disj([In(element, self.label(i, j, d))
                     for d in self.system.directions()])

    def pred_dir_label(self, element: str, pred: int, d: int) -> Formula:
        return disj([In(element, self.label(pred, j, d))
                     for j in range(len(self.system.predicates[pred].rules))])

    def succ(self, d: int, source: str, target: str) -> Formula:
        options = []
        for i, j, rule in self.system.rules():
            if d >= len(rule.tail):
                continue
            occ = rule.tail[d]
            for q in range(len(self.system.predicates[occ.predicate].rules)):
                selectors = self.f_table[(i, j, d, q)]
                if not selectors:
                    continue
                options.append(conj(
                    [self.rule_label(source, i, j),
                     In(target, self.label(occ.predicate, q, d))]
                    + [Edge(s, source, target) for s in sorted(selectors)]))
        return disj(options)

    # -- backbone -----------------------------------------------------------

    def backbone(self) -> Formula:
        return conj([self.tree_shape(),
                     self.pred_dir_label(self.root, self.pred, -1),
                     self.succ_labels()])

    def tree_shape(self) -> Formula:
        system = self.system
        labels = self.all_labels()
        w = self.fresh.next()
        cover = Forall1(w, conj([
            iff(In(w, self.T), disj([In(w, name) for name in labels])),
            conj([Not(And((In(w, a), In(w, b))))
                  for a, b in combinations(labels, 2)]),
        ]))
        root_tags = [self.label(i, j, -1) for i, j, _ in system.rules()]
        w2 = self.fresh.next()
        only_root = Forall1(w2, implies(disj([In(w2, name) for name in root_tags]),
                                        Eq(w2, self.root)))
        root_tagged = disj([In(self.root, name) for name in root_tags])

        parent_parts = []
        for d in system.forward_directions():
            w3, z, z2 = self.fresh.next(), self.fresh.next(), self.fresh.next()
            tagged = disj([In(w3, self.label(i, j, d)) for i, j, _ in system.rules()])
            unique = Exists1(z, conj([
                self.succ(d, z, w3),
                Forall1(z2, implies(self.succ(d, z2, w3), Eq(z2, z)))]))
            parent_parts.append(Forall1(w3, implies(tagged, unique)))

        functional = []
        for d in system.forward_directions():
            x, y, y2 = self.fresh.next(), self.fresh.next(), self.fresh.next()
            functional.append(Forall1(x, Forall1(y, Forall1(y2, implies(
                And((self.succ(d, x, y), self.succ(d, x, y2))), Eq(y, y2))))))

        zset = self.fresh.next() + "_Z"
        w4, z3, w5 = self.fresh.next(), self.fresh.next(), self.fresh.next()
        parent_edge = disj([
            conj([disj([In(w4, self.label(i, j, d)) for i, j, _ in system.rules()]),
                  self.succ(d, z3, w4)])
            for d in system.forward_directions()])
        closed = Forall1(w4, Forall1(z3, implies(
            And((In(w4, zset), parent_edge)), In(z3, zset))))
        w6 = self.fresh.next()
        rooted = Forall2(zset, implies(
            conj([Forall1(w5, implies(In(w5, zset), In(w5, self.T))),
                  Exists1(w6, In(w6, zset)),
                  closed]),
            In(self.root, zset)))

        return conj([In(self.root, self.T), cover, only_root, root_tagged]
                    + parent_parts + functional + [rooted])

    def succ_labels(self) -> Formula:
        system = self.system
        parts = []
        for i, j, rule in system.rules():
            x = self.fresh.next()
            head = rule.head.atoms[0]
            needs = []
            for d, occ in enumerate(rule.tail):
                y = self.fresh.next()
                needs.append(Exists1(y, conj([
                    self.pred_dir_label(y, occ.predicate, d),
                    self.succ(d, x, y)])))
            for sel in range(len(head.targets) + 1, system.selector_count + 1):
                y2 = self.fresh.next()
                needs.append(Forall1(y2, Not(Edge(sel, x, y2))))
            for sel, target in enumerate(head.targets, start=1):
                if target == NIL:
                    needs.append(Edge(sel, x, "xnil"))
            parts.append(Forall1(x, implies(self.rule_label(x, i, j), conj(needs))))
        return conj(parts)

    # -- reachability blocks ------------------------------------------------

    def var_set(self, name: str) -> str:
        return f"{self.prefix}_Yv_{name}"

    def _closure_tracking(self, sets: dict[str, str]) -> list[Formula]:
        """Closure conjuncts for the parameter-passing and equality
        moves shared by every automaton; `sets` maps rule variable names
        to their position-set names."""
        system = self.system
        parts = []
        for i, j, rule in system.rules():
            w = self.fresh.next()
            for k, occ in enumerate(rule.tail):
                callee = system.predicates[occ.predicate]
                for a, arg in enumerate(occ.args):
                    formal = callee.params[a]
                    child = self.fresh.next()
                    parts.append(Forall1(w, Forall1(child, implies(
                        conj([In(w, sets[arg.name]), self.rule_label(w, i, j),
                              self.succ(k, w, child)]),
                        In(child, sets[formal.name])))))
                    parent = self.fresh.next()
                    for q in range(len(callee.rules)):
                        parts.append(Forall1(w, Forall1(parent, implies(
                            conj([In(w, sets[formal.name]),
                                  In(w, self.label(occ.predicate, q, k)),
                                  self.succ(k, parent, w),
                                  self.rule_label(parent, i, j)]),
                            In(parent, sets[arg.name])))))
            for a, b in rule.pure.sorted_equalities():
                for lhs, rhs in ((a, b), (b, a)):
                    w2 = self.fresh.next()
                    parts.append(Forall1(w2, implies(
                        And((In(w2, sets[lhs.name]), self.rule_label(w2, i, j))),
                        In(w2, sets[rhs.name]))))
        return parts

    def _closure_allocation(self, sets: dict[str, str], final_set: str) -> list[Formula]:
        parts = []
        for i, j, rule in self.system.rules():
            w = self.fresh.next()
            source = rule.head.atoms[0].source
            parts.append(Forall1(w, implies(
                And((In(w, sets[source.name]), self.rule_label(w, i, j))),
                In(w, final_set))))
        return parts

    def _contained(self, set_names: list[str]) -> list[Formula]:
        parts = []
        for name in set_names:
            w = self.fresh.next()
            parts.append(Forall1(w, implies(In(w, name), In(w, self.T))))
        return parts

    def _var_sets(self) -> dict[str, str]:
        return {name: self.var_set(name) for name in self.rule_vars}

    def inner_edges(self) -> Formula:
        system = self.system
        x, y = self.fresh.next(), self.fresh.next()
        per_selector = []
        for selector in range(1, system.selector_count + 1):
            sets = self._var_sets()
            sel_set = f"{self.prefix}_Ysel_{selector}"
            final = f"{self.prefix}_Yf_{selector}"
            closure = self._contained([sel_set, final, *sets.values()])
            for i, j, rule in system.rules():
                head = rule.head.atoms[0]
                if selector <= len(head.targets):
                    w = self.fresh.next()
                    closure.append(Forall1(w, implies(
                        And((In(w, sel_set), self.rule_label(w, i, j))),
                        In(w, sets[head.targets[selector - 1].name]))))
            closure += self._closure_tracking(sets)
            closure += self._closure_allocation(sets, final)
            reach = forall2([sel_set, final, *[sets[n] for n in self.rule_vars]],
                            implies(conj(closure + [In(x, sel_set)]), In(y, final)))
            per_selector.append(disj([
                Edge(selector, x, y),
                Not(conj([In(x, self.T), In(y, self.T), reach]))]))
        return Forall1(x, Forall1(y, conj(per_selector)))

    def no_double_alloc(self) -> Formula:
        x, y = self.fresh.next(), self.fresh.next()
        sets = self._var_sets()
        zero = f"{self.prefix}_Y0"
        final = f"{self.prefix}_Yf0"
        closure = self._contained([zero, final, *sets.values()])
        for i, j, rule in self.system.rules():
            w = self.fresh.next()
            source = rule.head.atoms[0].source
            closure.append(Forall1(w, implies(
                And((In(w, zero), self.rule_label(w, i, j))),
                In(w, sets[source.name]))))
        closure += self._closure_tracking(sets)
        closure += self._closure_allocation(sets, final)
        reach = forall2([zero, final, *[sets[n] for n in self.rule_vars]],
                        implies(conj(closure + [In(x, zero)]), In(y, final)))
        return Forall1(x, Forall1(y, disj([
            Eq(x, y),
            Not(conj([In(x, self.T), In(y, self.T), reach]))])))

    def _param_seed(self, sets: dict[str, str], mark: str, position: int) -> list[Formula]:
        pred = self.system.predicates[self.pred]
        param = pred.params[position - 1]
        parts = [In(self.root, mark)]
        for j in range(len(pred.rules)):
            w = self.fresh.next()
            parts.append(Forall1(w, implies(
                And((In(w, mark), In(w, self.label(self.pred, j, -1)))),
                In(w, sets[param.name]))))
        return parts

    def param_constraints(self, position: int) -> Formula:
        """The three-case constraint for one parameter: allocated,
        referenced, or equal to a sibling parameter."""
        system = self.system
        pred = system.predicates[self.pred]
        arg = self.args[position - 1]
        mark = f"{self.prefix}_Ym_{position}"
        parts = []

        # Case 1: the tracked chain reaches an allocating node.
        sets = self._var_sets()
        final = f"{self.prefix}_Yfp_{position}"
        closure = self._contained([mark, final, *sets.values()])
        closure += self._param_seed(sets, mark, position)
        closure += self._closure_tracking(sets)
        closure += self._closure_allocation(sets, final)
        y = self.fresh.next()
        reach = forall2([mark, final, *[sets[n] for n in self.rule_vars]],
                        implies(conj(closure), In(y, final)))
        parts.append(Forall1(y, disj([Eq(arg, y), Not(And((In(y, self.T), reach)))])))

        # Case 2: the chain is referenced through a selector.
        sets = self._var_sets()
        sel_sets = {s: f"{self.prefix}_Ymsel_{position}_{s}"
                    for s in range(1, system.selector_count + 1)}
        closure = self._contained([mark, *sel_sets.values(), *sets.values()])
        closure += self._param_seed(sets, mark, position)
        closure += self._closure_tracking(sets)
        for i, j, rule in system.rules():
            head = rule.head.atoms[0]
            for s, target in enumerate(head.targets, start=1):
                w = self.fresh.next()
                closure.append(Forall1(w, implies(
                    And((In(w, sets[target.name]), self.rule_label(w, i, j))),
                    In(w, sel_sets[s]))))
        quantified = [mark, *sel_sets.values(), *[sets[n] for n in self.rule_vars]]
        for s in range(1, system.selector_count + 1):
            y2 = self.fresh.next()
            reach = forall2(quantified,
                            implies(conj(closure), In(y2, sel_sets[s])))
            parts.append(Forall1(y2, disj([
                Edge(s, y2, arg),
                Not(And((In(y2, self.T), reach)))])))

        # Case 3: the chain returns to a sibling parameter at the root.
        for a in range(1, pred.arity + 1):
            if a == position:
                continue
            sets = self._var_sets()
            other_mark = f"{self.prefix}_Ym_{position}_{a}"
            closure = self._contained([mark, other_mark, *sets.values()])
            closure += self._param_seed(sets, mark, position)
            closure += self._closure_tracking(sets)
            w = self.fresh.next()
            closure.append(Forall1(w, implies(
                conj([In(w, sets[pred.params[a - 1].name]), Eq(w, self.root)]),
                In(w, other_mark))))
            reach = forall2([mark, other_mark, *[sets[n] for n in self.rule_vars]],
                            implies(conj(closure), In(self.root, other_mark)))
            parts.append(disj([Eq(arg, self.args[a - 1]), Not(reach)]))

        return conj(parts)

    def formula(self) -> Formula:
        pred = self.system.predicates[self.pred]
        body = conj([self.backbone(),
                     self.inner_edges(),
                     self.no_double_alloc()]
                    + [self.param_constraints(k + 1) for k in range(pred.arity)])
        return Exists1(self.root, exists2(self.all_labels(), body))


def translate_predicate(system: RecursiveSystem, pred: int,
                        args: Optional[list[str]] = None, tree_set: str = "T",
                        fresh: Optional[_Fresh] = None) -> Formula:
    """The MSO image of P_i(args) relative to a set of allocated
    locations; defaults to the formal parameter names."""
    report = wellformed.check_system(system)
    if not report.ok:
        raise SlrdError("translation requires a well-formed system: "
                        + str(report.violations()[0]))
    if args is None:
        args = [mso_name(v) for v in system.predicates[pred].params]
    if len(args) != system.predicates[pred].arity:
        raise SlrdError("argument count mismatch")
    fresh = fresh or _Fresh()
    return _PredicateTranslation(system, pred, list(args), tree_set, fresh).formula()


def translate_top_level(formula: TopLevelFormula, system: RecursiveSystem) -> Formula:
    """The closed satisfiability sentence: program variables are
    anchored by their vertex labels, nil by null, the heap domain by the
    edge relation."""
    report = wellformed.check_system(system)
    if not report.ok:
        raise SlrdError("translation requires a well-formed system: "
                        + str(report.violations()[0]))
    fresh = _Fresh()
    selector_count = system.selector_count

    cells = [f"X{k}" for k in range(1 + len(formula.occurrences))]
    basic_part = translate_basic(
        BasicFormula((), formula.basic.spatial, formula.basic.pure),
        selector_count, cells[0], fresh)
    occurrence_parts = []
    for k, occ in enumerate(formula.occurrences):
        arg_names = [mso_name(a) for a in occ.args]
        occurrence_parts.append(translate_predicate(
            system, occ.predicate, arg_names, cells[k + 1], fresh))
    phi_bar = exists1([mso_name(v) for v in formula.bound],
                      exists2(cells, conj(
                          [_partition(cells, "X", fresh), basic_part]
                          + occurrence_parts)))

    sentence = Exists2("X", conj([heap_constraint("X", selector_count, fresh), phi_bar]))
    pvars = sorted({v.name for v in formula.free_variables()
                    if v.kind == PROGRAM and v != NIL})
    for name in reversed(pvars):
        sentence = Exists1(f"xp_{name}",
                           conj([VarAtom(name, f"xp_{name}"), sentence]))
    return Exists1("xnil", conj([NullAtom("xnil"), sentence]))


# ---------------------------------------------------------------------------
# Text format.

_INLINE_WIDTH = 100


def emit_mso(formula: Formula) -> str:
    """Deterministic s-expression text; see parse_mso for the grammar."""
    return _render(formula, 0) + "\n"


def _sexp(node) -> tuple:
    if isinstance(node, Eq):
        return ("=", node.left, node.right)
    if isinstance(node, Edge):
        return ("edge", str(node.selector), node.source, node.target)
    if isinstance(node, VarAtom):
        return ("var", node.program_var, node.arg)
    if isinstance(node, NullAtom):
        return ("null", node.arg)
    if isinstance(node, In):
        return ("in", node.element, node.set_var)
    if isinstance(node, And):
        return ("and", *node.parts)
    if isinstance(node, Or):
        return ("or", *node.parts)
    if isinstance(node, Not):
        return ("not", node.body)
    if isinstance(node, Exists1):
        return ("exists1", node.var, node.body)
    if isinstance(node, Forall1):
        return ("forall1", node.var, node.body)
    if isinstance(node, Exists2):
        return ("exists2", node.var, node.body)
    if isinstance(node, Forall2):
        return ("forall2", node.var, node.body)
    raise TypeError(f"not an MSO formula node: {type(node).__name__}")


def _render(node, indent: int) -> str:
    parts = _sexp(node)
    rendered = [part if isinstance(part, str) else _render(part, indent + 1)
                for part in parts]
    flat = "(" + " ".join(rendered) + ")"
    if len(flat) + 2 * indent <= _INLINE_WIDTH or all(isinstance(p, str) for p in parts):
        return flat
    pad = "  " * (indent + 1)
    head = parts[0]
    lines = [p if isinstance(p, str) else _render(p, indent + 1) for p in parts[1:]]
    joined = ("\n" + pad).join(lines)
    return f"({head}\n{pad}{joined})"


_ATOM = re.compile(r"[^\s()]+")


def parse_mso(text: str) -> Formula:
    tokens = re.findall(r"[()]|[^\s()]+", text)
    pos = 0

    def read():
        nonlocal pos
        if pos >= len(tokens):
            raise ParseError("unexpected end of MSO text")
        token = tokens[pos]
        pos += 1
        if token == "(":
            items = []
            while pos < len(tokens) and tokens[pos] != ")":
                items.append(read())
            if pos >= len(tokens):
                raise ParseError("unbalanced parenthesis")
            pos += 1
            return tuple(items)
        if token == ")":
            raise ParseError("unexpected ')'")
        return token

    expr = read()
    if pos != len(tokens):
        raise ParseError("trailing MSO text")
    return _from_sexp(expr)


def _from_sexp(expr) -> Formula:
    if isinstance(expr, str):
        raise ParseError(f"bare atom {expr!r} is not a formula")
    if not expr:
        raise ParseError("empty form")
    head = expr[0]
    rest = expr[1:]
    if head == "=":
        return Eq(rest[0], rest[1])
    if head == "edge":
        return Edge(int(rest[0]), rest[1], rest[2])
    if head == "var":
        return VarAtom(rest[0], rest[1])
    if head == "null":
        return NullAtom(rest[0])
    if head == "in":
        return In(rest[0], rest[1])
    if head == "and":
        return And(tuple(_from_sexp(p) for p in rest))
    if head == "or":
        return Or(tuple(_from_sexp(p) for p in rest))
    if head == "not":
        return Not(_from_sexp(rest[0]))
    if head in ("exists1", "forall1", "exists2", "forall2"):
        cls = {"exists1": Exists1, "forall1": Forall1,
               "exists2": Exists2, "forall2": Forall2}[head]
        return cls(rest[0], _from_sexp(rest[1]))
    raise ParseError(f"unknown form {head!r}")

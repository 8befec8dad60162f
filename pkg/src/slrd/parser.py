"""Concrete syntax for definition systems and formulas.

Document grammar (comments run `//` to end of line):

    document ::= (vars | pred | formula)*
    vars     ::= 'vars' NAME (',' NAME)* ';'
    pred     ::= 'pred' NAME '(' NAME (',' NAME)* ')' ':=' body ('|' body)* ';'
    formula  ::= 'formula' NAME ':=' body ';'
    body     ::= ['exists' NAME (',' NAME)* '.'] spatial ['&' pure]
    spatial  ::= part ('*' part)*
    part     ::= 'emp' | term '->' '(' term (',' term)* ')' | NAME '(' term* ')'
    pure     ::= atom ('&' atom)*         atom ::= term ('='|'!=') term

Rules use only their parameters and bound variables (plus nil as a
target or in pure atoms); named formulas may also use declared program
variables.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .syntax import (EMPTY_PURE, LOGICAL, NIL, PROGRAM, BasicFormula, ParseError,
                     PointsTo, Predicate, PredicateOccurrence, PureFormula,
                     RecursiveSystem, Rule, SpatialFormula, TopLevelFormula, Variable)

KEYWORDS = {"pred", "formula", "vars", "exists", "emp", "nil"}

_TOKEN = re.compile(r"""
      (?P<ws>\s+|//[^\n]*)
    | (?P<name>[A-Za-z_][A-Za-z0-9_']*)
    | (?P<op>:=|!=|->|[|*&=.,();])
""", re.VERBOSE)


@dataclass
class Token:
    kind: str  # 'name', 'op', 'eof'
    text: str
    line: int
    column: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, col = 0, 1, 1
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            raise ParseError(f"stray character {text[pos]!r}", line, col)
        chunk = m.group(0)
        if m.lastgroup != "ws":
            tokens.append(Token(m.lastgroup, chunk, line, col))
        newlines = chunk.count("\n")
        if newlines:
            line += newlines
            col = len(chunk) - chunk.rfind("\n")
        else:
            col += len(chunk)
        pos = m.end()
    tokens.append(Token("eof", "", line, col))
    return tokens


@dataclass(frozen=True)
class SourceDocument:
    """A parsed document: the definition system plus named formulas."""

    system: RecursiveSystem
    formulas: dict[str, TopLevelFormula]
    program_vars: tuple[str, ...]


# Raw (unresolved) intermediate forms, so predicates may be used before
# their definition appears.
@dataclass
class _RawCall:
    name: str
    args: list[str]
    line: int
    column: int


@dataclass
class _RawBody:
    bound: list[str]
    points: list[tuple[str, list[str], int, int]]  # source, targets, line, col
    calls: list[_RawCall]
    eqs: list[tuple[str, str]]
    neqs: list[tuple[str, str]]


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0

    def peek(self) -> Token:
        return self.tokens[self.pos]

    def next(self) -> Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def fail(self, message: str, tok: Token | None = None):
        tok = tok or self.peek()
        raise ParseError(message, tok.line, tok.column)

    def expect(self, text: str) -> Token:
        tok = self.next()
        if tok.text != text:
            self.fail(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def name(self, what: str = "name") -> Token:
        tok = self.next()
        if tok.kind != "name" or tok.text in KEYWORDS - {"nil"}:
            self.fail(f"expected {what}, found {tok.text or 'end of input'!r}", tok)
        return tok

    def name_list(self) -> list[Token]:
        out = [self.name()]
        while self.peek().text == ",":
            self.next()
            out.append(self.name())
        return out

    def document(self):
        pvars: list[str] = []
        preds: list[tuple[str, list[str], list[_RawBody], Token]] = []
        formulas: list[tuple[str, _RawBody, Token]] = []
        while self.peek().kind != "eof":
            tok = self.peek()
            if tok.text == "vars":
                self.next()
                for name in self.name_list():
                    if name.text == "nil":
                        self.fail("nil is implicitly declared", name)
                    if name.text in pvars:
                        self.fail(f"duplicate program variable {name.text}", name)
                    pvars.append(name.text)
                self.expect(";")
            elif tok.text == "pred":
                self.next()
                head = self.name("predicate name")
                self.expect("(")
                params = [t.text for t in self.name_list()]
                if "nil" in params:
                    self.fail("nil cannot be a parameter", head)
                if len(set(params)) != len(params):
                    self.fail("duplicate parameter", head)
                self.expect(")")
                self.expect(":=")
                bodies = [self.body()]
                while self.peek().text == "|":
                    self.next()
                    bodies.append(self.body())
                self.expect(";")
                if any(p[0] == head.text for p in preds):
                    self.fail(f"duplicate predicate {head.text}", head)
                preds.append((head.text, params, bodies, head))
            elif tok.text == "formula":
                self.next()
                head = self.name("formula name")
                self.expect(":=")
                body = self.body()
                self.expect(";")
                if any(f[0] == head.text for f in formulas):
                    self.fail(f"duplicate formula {head.text}", head)
                formulas.append((head.text, body, head))
            else:
                self.fail("expected 'vars', 'pred' or 'formula'", tok)
        return pvars, preds, formulas

    def body(self) -> _RawBody:
        bound: list[str] = []
        if self.peek().text == "exists":
            self.next()
            bound = [t.text for t in self.name_list()]
            if "nil" in bound:
                self.fail("nil cannot be bound")
            if len(set(bound)) != len(bound):
                self.fail("duplicate bound variable")
            self.expect(".")
        body = _RawBody(bound, [], [], [], [])
        self.spatial_part(body)
        while self.peek().text == "*":
            self.next()
            self.spatial_part(body)
        if self.peek().text == "&":
            self.next()
            self.pure_atom(body)
            while self.peek().text == "&":
                self.next()
                self.pure_atom(body)
        return body

    def spatial_part(self, body: _RawBody):
        tok = self.peek()
        if tok.text == "emp":
            self.next()
            return
        head = self.name("variable or predicate name")
        after = self.peek()
        if after.text == "->":
            self.next()
            if head.text == "nil":
                self.fail("nil cannot be allocated", head)
            self.expect("(")
            targets = [t.text for t in self.name_list()]
            self.expect(")")
            body.points.append((head.text, targets, head.line, head.column))
        elif after.text == "(":
            self.next()
            args = [] if self.peek().text == ")" else [t.text for t in self.name_list()]
            self.expect(")")
            body.calls.append(_RawCall(head.text, args, head.line, head.column))
        else:
            self.fail("expected '->' or '(' after name", after)

    def pure_atom(self, body: _RawBody):
        lhs = self.name("variable")
        op = self.next()
        if op.text not in ("=", "!="):
            self.fail("expected '=' or '!='", op)
        rhs = self.name("variable")
        if op.text == "=":
            body.eqs.append((lhs.text, rhs.text))
        else:
            body.neqs.append((lhs.text, rhs.text))


def _resolve_body(body: _RawBody, scope: dict[str, Variable],
                  pred_index: dict[str, int], arities: dict[str, int],
                  where: str) -> tuple[tuple, SpatialFormula, tuple, PureFormula, int]:
    def var(name: str) -> Variable:
        if name == "nil":
            return NIL
        if name not in scope:
            raise ParseError(f"unknown variable {name} in {where}")
        return scope[name]

    max_arity = 0
    atoms = []
    for source, targets, line, col in body.points:
        max_arity = max(max_arity, len(targets))
        try:
            atoms.append(PointsTo(var(source), tuple(var(t) for t in targets)))
        except ParseError:
            raise
        except ValueError as exc:
            raise ParseError(str(exc), line, col) from None
    occs = []
    for call in body.calls:
        if call.name not in pred_index:
            raise ParseError(f"undefined predicate {call.name}", call.line, call.column)
        if len(call.args) != arities[call.name]:
            raise ParseError(
                f"{call.name} expects {arities[call.name]} arguments, got {len(call.args)}",
                call.line, call.column)
        occs.append(PredicateOccurrence(pred_index[call.name],
                                        tuple(var(a) for a in call.args)))
    pure = PureFormula.of([(var(a), var(b)) for a, b in body.eqs],
                          [(var(a), var(b)) for a, b in body.neqs])
    bound = tuple(scope[b] for b in body.bound)
    return bound, SpatialFormula(tuple(atoms)), tuple(occs), pure, max_arity


def parse_document(text: str) -> SourceDocument:
    pvars, raw_preds, raw_formulas = _Parser(text).document()
    pred_index = {name: i for i, (name, _, _, _) in enumerate(raw_preds)}
    arities = {name: len(params) for name, params, _, _ in raw_preds}
    max_arity = 0

    predicates = []
    for name, params, bodies, _ in raw_preds:
        param_vars = tuple(Variable(p, LOGICAL) for p in params)
        rules = []
        for body in bodies:
            scope = {p: v for p, v in zip(params, param_vars)}
            for b in body.bound:
                if b in scope:
                    raise ParseError(f"{b} is both parameter and bound in {name}")
                scope[b] = Variable(b, LOGICAL)
            bound, spatial, occs, pure, arity = _resolve_body(
                body, scope, pred_index, arities, f"rule of {name}")
            max_arity = max(max_arity, arity)
            try:
                rules.append(Rule(param_vars, bound, spatial, occs, pure))
            except ValueError as exc:
                raise ParseError(f"in {name}: {exc}") from None
        predicates.append((name, param_vars, tuple(rules)))

    formulas = {}
    raw_resolved = []
    for name, body, _ in raw_formulas:
        scope = {p: Variable(p, PROGRAM) for p in pvars}
        for b in body.bound:
            if b in pvars:
                raise ParseError(f"{b} is both a program variable and bound in {name}")
            scope[b] = Variable(b, LOGICAL)
        bound, spatial, occs, pure, arity = _resolve_body(
            body, scope, pred_index, arities, f"formula {name}")
        max_arity = max(max_arity, arity)
        raw_resolved.append((name, bound, spatial, occs, pure))

    system = RecursiveSystem(
        tuple(Predicate(name, params, rules) for name, params, rules in predicates),
        max(max_arity, 1))
    for name, bound, spatial, occs, pure in raw_resolved:
        formulas[name] = TopLevelFormula(bound, BasicFormula((), spatial, pure), occs)
    return SourceDocument(system, formulas, tuple(pvars))


def parse_system(text: str) -> RecursiveSystem:
    return parse_document(text).system


# ---------------------------------------------------------------------------
# Printing. print/parse is a fixpoint on documents; parse(print(x)) == x.

def _print_var(v: Variable) -> str:
    return str(v)


def _print_spatial(spatial: SpatialFormula, system: RecursiveSystem | None = None,
                   occurrences=()) -> str:
    parts = [f"{_print_var(a.source)} -> ({', '.join(_print_var(t) for t in a.targets)})"
             for a in spatial.atoms]
    for occ in occurrences:
        name = system.predicates[occ.predicate].name if system else f"P{occ.predicate}"
        parts.append(f"{name}({', '.join(_print_var(a) for a in occ.args)})")
    return " * ".join(parts) if parts else "emp"


def _print_pure(pure: PureFormula) -> str:
    parts = [f"{_print_var(a)} = {_print_var(b)}" for a, b in pure.sorted_equalities()]
    parts += [f"{_print_var(a)} != {_print_var(b)}" for a, b in pure.sorted_disequalities()]
    return " & ".join(parts)


def _print_body(bound, spatial, occurrences, pure, system) -> str:
    text = ""
    if bound:
        text += "exists " + ", ".join(_print_var(v) for v in bound) + " . "
    text += _print_spatial(spatial, system, occurrences)
    if not pure.is_empty():
        text += " & " + _print_pure(pure)
    return text


def print_formula(formula, system: RecursiveSystem | None = None) -> str:
    """Canonical text of a basic formula, rule or top-level formula."""
    if isinstance(formula, BasicFormula):
        return _print_body(formula.bound, formula.spatial, (), formula.pure, system)
    if isinstance(formula, TopLevelFormula):
        return _print_body(formula.bound, formula.basic.spatial, formula.occurrences,
                           formula.basic.pure, system)
    if isinstance(formula, Rule):
        return _print_body(formula.bound, formula.head, formula.tail, formula.pure, system)
    raise TypeError(f"cannot print {type(formula).__name__}")


def print_document(doc: SourceDocument) -> str:
    lines = []
    if doc.program_vars:
        lines.append("vars " + ", ".join(doc.program_vars) + " ;")
        lines.append("")
    for pred in doc.system.predicates:
        header = f"pred {pred.name}({', '.join(_print_var(p) for p in pred.params)}) :="
        bodies = [print_formula(rule, doc.system) for rule in pred.rules]
        lines.append(header)
        for k, body in enumerate(bodies):
            prefix = "    " if k == 0 else "  | "
            lines.append(prefix + body)
        lines.append("  ;")
        lines.append("")
    for name, formula in doc.formulas.items():
        lines.append(f"formula {name} := {print_formula(formula, doc.system)} ;")
    return "\n".join(lines).rstrip() + "\n"

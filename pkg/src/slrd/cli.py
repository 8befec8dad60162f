"""Command-line entry point.

Exit codes: 0 for a positive answer (ok / SAT / valid-so-far / true),
1 for a negative one (violations / UNSAT-up-to / refuted / false),
2 for a bound-exhausted unknown where the subcommand distinguishes one,
3 for input errors.

All outputs are deterministic for fixed inputs and flags.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import decision, mso, semantics, treewidth, unfolding, wellformed
from .parser import parse_document, print_document
from .states import parse_state, print_state, state_to_dot
from .syntax import SlrdError
from .treewidth import ExceedsBound, TreeDecomposition

DEFAULT_BOUND = 6


def _load_document(path: str):
    return parse_document(Path(path).read_text())


def _load_state(path: str):
    return parse_state(Path(path).read_text())


def _pick_formula(doc, name: str):
    if name not in doc.formulas:
        raise SlrdError(f"document defines no formula {name}; "
                        f"available: {', '.join(doc.formulas) or 'none'}")
    return doc.formulas[name]


def _state_doc(state) -> dict:
    return json.loads(print_state(state))


def _emit(payload: dict, as_json: bool, text_lines: list[str]) -> None:
    if as_json:
        print(json.dumps(payload, indent=2, sort_keys=True))
    else:
        for line in text_lines:
            print(line)


def _write_witness(state, args) -> None:
    if getattr(args, "witness", None):
        Path(args.witness).write_text(print_state(state))
    if getattr(args, "dot", None):
        Path(args.dot).write_text(state_to_dot(state))


def _fmt_selectors(selectors) -> str:
    return "{" + ", ".join(map(str, sorted(selectors))) + "}"


def cmd_check(args) -> int:
    doc = _load_document(args.file)
    system = doc.system
    report = wellformed.check_system(system)

    lines = [f"system: {len(system.predicates)} predicates, "
             f"selectors 1..{system.selector_count}"]
    payload: dict = {"predicates": [p.name for p in system.predicates],
                     "selector_count": system.selector_count}

    def section(name, violations):
        payload[name] = {"ok": not violations,
                         "violations": [str(v) for v in violations]}
        lines.append(f"{name}: " + ("ok" if not violations else
                                    f"{len(violations)} violation(s)"))
        for violation in violations:
            lines.append(f"  {violation}")

    section("progress", report.progress)
    if report.f_table is None:
        lines.append("connectivity: skipped (progress failed)")
        payload["connectivity"] = {"ok": False, "skipped": True, "violations": []}
    else:
        section("connectivity", report.connectivity)
        table = sorted(report.f_table.items())
        payload["connectivity"]["local_selectors"] = [
            {"rule": f"{system.predicates[i].name}.R{j + 1}", "occurrence": d + 1,
             "callee_rule": f"{system.predicates[system.predicates[i].rules[j].tail[d].predicate].name}.R{q + 1}",
             "selectors": sorted(sels)}
            for (i, j, d, q), sels in table]
        for (i, j, d, q), sels in table:
            callee = system.predicates[system.predicates[i].rules[j].tail[d].predicate]
            lines.append(f"  F({system.predicates[i].name}.R{j + 1}, {d + 1}, "
                         f"{callee.name}.R{q + 1}) = {_fmt_selectors(sels)}")
    section("establishment", report.establishment)
    payload["allocated_parameters"] = {}
    for c, positions in sorted((report.allocated or {}).items()):
        name = system.predicates[c].name
        payload["allocated_parameters"][name] = sorted(positions)
        lines.append(f"  allocated({name}) = {_fmt_selectors(positions)}")
    ok = report.ok
    payload["ok"] = ok
    lines.append("overall: " + ("ok" if ok else "not in the decidable fragment"))
    _emit(payload, args.json, lines)
    return 0 if ok else 1


def cmd_sat(args) -> int:
    doc = _load_document(args.file)
    formula = _pick_formula(doc, args.formula)
    verdict = decision.sat_bounded(formula, doc.system, args.bound)
    if isinstance(verdict, decision.Sat):
        _write_witness(verdict.state, args)
        trees = [t.to_nested(doc.system) for t in verdict.trees]
        _emit({"verdict": "SAT", "state": _state_doc(verdict.state), "trees": trees},
              args.json,
              [f"SAT ({len(verdict.state.heap)} cells)",
               print_state(verdict.state).rstrip()])
        return 0
    _emit({"verdict": "UNSAT_UP_TO", "bound": verdict.bound}, args.json,
          [f"UNSAT up to bound {verdict.bound}"])
    return 1


def cmd_entail(args) -> int:
    doc = _load_document(args.file)
    lhs = _pick_formula(doc, args.lhs)
    rhs = _pick_formula(doc, args.rhs)
    verdict = decision.entail(lhs, rhs, doc.system, args.bound)
    if isinstance(verdict, decision.Refuted):
        _write_witness(verdict.counterexample, args)
        _emit({"verdict": "REFUTED",
               "counterexample": _state_doc(verdict.counterexample)},
              args.json,
              [f"REFUTED ({len(verdict.counterexample.heap)}-cell counterexample)",
               print_state(verdict.counterexample).rstrip()])
        return 1
    _emit({"verdict": "VALID_UP_TO", "bound": verdict.bound,
           "models_checked": verdict.models_checked},
          args.json,
          [f"valid up to bound {verdict.bound} "
           f"({verdict.models_checked} lhs models checked)"])
    return 0


def cmd_modelcheck(args) -> int:
    state = _load_state(args.state)
    doc = _load_document(args.file)
    formula = _pick_formula(doc, args.formula)
    if args.via_mso:
        sentence = mso.translate_top_level(formula, doc.system)
        holds = mso.eval_mso(state, sentence, cap=args.mso_cap)
    else:
        holds = semantics.check_top_level(state, formula, doc.system)
    _emit({"holds": holds}, args.json, ["true" if holds else "false"])
    return 0 if holds else 1


def cmd_emit_mso(args) -> int:
    doc = _load_document(args.file)
    formula = _pick_formula(doc, args.formula)
    text = mso.emit_mso(mso.translate_top_level(formula, doc.system))
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    return 0


def cmd_treewidth(args) -> int:
    state = _load_state(args.state)
    if args.validate:
        decomp = TreeDecomposition.from_json(Path(args.validate).read_text())
        result = treewidth.validate_decomposition(state, decomp)
        if isinstance(result, treewidth.DecompositionViolation):
            _emit({"ok": False, "condition": result.condition, "detail": result.detail},
                  args.json, [f"violation of condition {result.condition}: {result.detail}"])
            return 1
        _emit({"ok": True, "width": result}, args.json, [f"width: {result}"])
        return 0
    width, witness = treewidth.exact_treewidth(state, args.max_width)
    if isinstance(width, ExceedsBound):
        _emit({"exceeds": width.bound}, args.json,
              [f"treewidth exceeds {width.bound}"])
        return 2
    payload = {"treewidth": width, "decomposition": json.loads(witness.to_json())}
    _emit(payload, args.json, [f"treewidth: {width}"])
    return 0


def cmd_unfold(args) -> int:
    doc = _load_document(args.file)
    system = doc.system
    pred = system.predicate_index(args.pred)
    trees = unfolding.enumerate_trees(system, pred, args.max_nodes)
    listing = []
    lines = [f"{len(trees)} tree(s) with at most {args.max_nodes} node(s)"]
    out_dir = Path(args.emit_models) if args.emit_models else None
    if out_dir:
        out_dir.mkdir(parents=True, exist_ok=True)
    for n, tree in enumerate(trees):
        entry = {"tree": tree.to_nested(system), "nodes": tree.size}
        built = unfolding.build_model(tree, system)
        if isinstance(built, unfolding.BuildFailure):
            entry["model"] = built.value
            lines.append(f"tree {n}: {json.dumps(entry['tree'], sort_keys=True)}"
                         f" -> {built.value}")
        else:
            entry["model"] = _state_doc(built.state)
            lines.append(f"tree {n}: {json.dumps(entry['tree'], sort_keys=True)}"
                         f" -> {len(built.state.heap)} cells")
            if out_dir:
                (out_dir / f"model_{n}.state.json").write_text(print_state(built.state))
        listing.append(entry)
    _emit({"trees": listing}, args.json, lines)
    return 0 if trees else 1


def cmd_print(args) -> int:
    doc = _load_document(args.file)
    sys.stdout.write(print_document(doc))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slrd",
        description="Decision toolkit for separation logic with recursive definitions")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check", help="well-formedness report for a definition file")
    p.add_argument("file")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_check)

    p = sub.add_parser("sat", help="bounded satisfiability of a named formula")
    p.add_argument("file")
    p.add_argument("--formula", required=True)
    p.add_argument("--bound", type=int, default=DEFAULT_BOUND)
    p.add_argument("--witness", help="write the witness state to this path")
    p.add_argument("--dot", help="write a DOT rendering of the witness")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_sat)

    p = sub.add_parser("entail", help="bounded entailment check between two formulas")
    p.add_argument("file")
    p.add_argument("--lhs", required=True)
    p.add_argument("--rhs", required=True)
    p.add_argument("--bound", type=int, default=DEFAULT_BOUND)
    p.add_argument("--witness", help="write the counterexample state to this path")
    p.add_argument("--dot", help="write a DOT rendering of the counterexample")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_entail)

    p = sub.add_parser("modelcheck", help="evaluate a named formula on a state")
    p.add_argument("state")
    p.add_argument("file")
    p.add_argument("--formula", required=True)
    p.add_argument("--via-mso", action="store_true",
                   help="evaluate the MSO translation instead of the direct checker")
    p.add_argument("--mso-cap", type=int, default=None,
                   help="evaluator universe cap (default 8 or SLRD_MSO_CAP)")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_modelcheck)

    p = sub.add_parser("emit-mso", help="emit the MSO sentence of a named formula")
    p.add_argument("file")
    p.add_argument("--formula", required=True)
    p.add_argument("-o", "--output")
    p.set_defaults(run=cmd_emit_mso)

    p = sub.add_parser("treewidth", help="exact treewidth or decomposition validation")
    p.add_argument("state")
    p.add_argument("--validate", help="validate this decomposition file instead")
    p.add_argument("--max-width", type=int, default=None,
                   help="report 'exceeds' when the exact width passes this bound")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_treewidth)

    p = sub.add_parser("unfold", help="enumerate unfolding trees and their models")
    p.add_argument("file")
    p.add_argument("--pred", required=True)
    p.add_argument("--max-nodes", type=int, required=True)
    p.add_argument("--emit-models", help="directory for witness state files")
    p.add_argument("--json", action="store_true")
    p.set_defaults(run=cmd_unfold)

    p = sub.add_parser("print", help="reprint a document in canonical form")
    p.add_argument("file")
    p.set_defaults(run=cmd_print)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 3 if exc.code not in (0, None) else 0
    try:
        return args.run(args)
    except (SlrdError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())

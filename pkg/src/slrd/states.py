"""Explicit states: finite stores and heaps, their JSON format, DOT export.

A state file is JSON text of the shape

    {"store": {"x": "l1"}, "heap": {"l1": {"1": "l2", "2": "null"}}}

with string location names, decimal selector keys starting at "1" and
the distinguished location literal "null". The store implicitly maps
nil to null.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Mapping

from .syntax import ParseError, SlrdError, Variable

NULL = "null"

# Logical-variable valuations; store entries cover program variables.
Interpretation = Mapping[Variable, str]


@dataclass(frozen=True)
class State:
    """A store (program variable name -> location) and a heap.

    The heap maps allocated locations to their selector edges. null is
    never allocated and every allocated location has at least one
    outgoing selector.
    """

    store: dict[str, str] = field(default_factory=dict)
    heap: dict[str, dict[int, str]] = field(default_factory=dict)

    def __post_init__(self):
        if self.store.get("nil", NULL) != NULL:
            raise SlrdError("nil must denote null")
        self.store.setdefault("nil", NULL)
        if NULL in self.heap:
            raise SlrdError("null cannot be allocated")
        for loc, cell in self.heap.items():
            if not cell:
                raise SlrdError(f"allocated location {loc} has no outgoing selector")
            for sel in cell:
                if not isinstance(sel, int) or sel < 1:
                    raise SlrdError(f"bad selector {sel!r} at {loc}")

    def domain(self) -> set[str]:
        return set(self.heap)

    def image(self) -> set[str]:
        return {dst for cell in self.heap.values() for dst in cell.values()}

    def locations(self) -> set[str]:
        return set(self.store.values()) | self.domain() | self.image()

    def dangling(self) -> set[str]:
        return (set(self.store.values()) | self.image()) - self.domain() - {NULL}

    def selector(self, loc: str, sel: int) -> str | None:
        return self.heap.get(loc, {}).get(sel)

    def lookup(self, name: str) -> str:
        if name not in self.store:
            raise SlrdError(f"program variable {name} has no store entry")
        return self.store[name]

    def with_store(self, extra: Mapping[str, str]) -> "State":
        store = dict(self.store)
        store.update(extra)
        return State(store, self.heap)


def parse_state(text: str) -> State:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"bad state document: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("state document must be a JSON object")
    store_doc = doc.get("store", {})
    heap_doc = doc.get("heap", {})
    if not isinstance(store_doc, dict) or not isinstance(heap_doc, dict):
        raise ParseError("store and heap must be JSON objects")
    store = {}
    for name, loc in store_doc.items():
        if not isinstance(loc, str):
            raise ParseError(f"store entry {name} must name a location")
        store[name] = loc
    heap: dict[str, dict[int, str]] = {}
    for loc, cell_doc in heap_doc.items():
        if loc == NULL:
            raise ParseError("null cannot be allocated")
        if not isinstance(cell_doc, dict) or not cell_doc:
            raise ParseError(f"location {loc} needs at least one outgoing selector")
        cell = {}
        for key, dst in cell_doc.items():
            if not key.isdigit() or int(key) < 1:
                raise ParseError(f"bad selector key {key!r} at {loc}")
            if not isinstance(dst, str):
                raise ParseError(f"bad edge target at {loc}.{key}")
            cell[int(key)] = dst
        heap[loc] = cell
    try:
        return State(store, heap)
    except SlrdError as exc:
        raise ParseError(str(exc)) from None


def print_state(state: State) -> str:
    """Canonical text: sorted keys, selectors ascending, two-space indent."""
    doc = {
        "store": {name: state.store[name] for name in sorted(state.store)},
        "heap": {
            loc: {str(sel): state.heap[loc][sel] for sel in sorted(state.heap[loc])}
            for loc in sorted(state.heap)
        },
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def state_to_dot(state: State) -> str:
    """GraphViz rendering: selector numbers label edges, program
    variables annotate nodes, null is drawn as a point."""
    lines = ["digraph state {"]
    annotations: dict[str, list[str]] = {}
    for name in sorted(state.store):
        if name == "nil":
            continue
        annotations.setdefault(state.store[name], []).append(name)
    locs = sorted(state.locations())
    for loc in locs:
        if loc == NULL:
            lines.append('  "null" [shape=point];')
            continue
        label = loc
        if loc in annotations:
            label += "\\n(" + ", ".join(annotations[loc]) + ")"
        shape = "box" if loc in state.heap else "ellipse"
        lines.append(f'  "{loc}" [shape={shape}, label="{label}"];')
    for loc in sorted(state.heap):
        for sel in sorted(state.heap[loc]):
            lines.append(f'  "{loc}" -> "{state.heap[loc][sel]}" [label="{sel}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"

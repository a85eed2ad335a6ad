"""Standalone re-check of every graph JSON invariant.

Deliberately self-contained (single pass over the plain JSON document, own
Kahn sort and component scan) so it can vouch for converter output without
trusting either the converter or the consuming tool.
"""

from __future__ import annotations

import json
from pathlib import Path

GRAPH_KEYS = {"name", "layers", "edges"}
LAYER_KEYS = {"id", "op", "param_count", "in_elems", "out_elems"}


def verify_document(doc) -> list[str]:
    """All invariant violations in the document; empty means valid."""
    problems: list[str] = []
    if not isinstance(doc, dict):
        return ["top level must be an object"]
    extra = set(doc) - GRAPH_KEYS
    missing = GRAPH_KEYS - set(doc)
    if extra:
        problems.append(f"unknown top-level fields {sorted(extra)}")
    if missing:
        problems.append(f"missing top-level fields {sorted(missing)}")
        return problems
    if not isinstance(doc["name"], str):
        problems.append("name must be a string")
    if not isinstance(doc["layers"], list) or not isinstance(doc["edges"], list):
        problems.append("layers and edges must be arrays")
        return problems
    if not doc["layers"]:
        problems.append("graph must contain at least one layer")
        return problems

    by_id = {}
    for entry in doc["layers"]:
        if not isinstance(entry, dict) or set(entry) != LAYER_KEYS:
            problems.append(f"malformed layer entry {entry!r}")
            continue
        lid = entry["id"]
        if not isinstance(lid, str) or not isinstance(entry["op"], str):
            problems.append(f"layer {lid!r}: id and op must be strings")
            continue
        if lid in by_id:
            problems.append(f"duplicate layer id {lid!r}")
            continue
        for key in ("param_count", "in_elems", "out_elems"):
            v = entry[key]
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                problems.append(f"layer {lid!r}: {key} must be a non-negative integer")
        by_id[lid] = entry

    preds: dict[str, list[str]] = {lid: [] for lid in by_id}
    succs: dict[str, list[str]] = {lid: [] for lid in by_id}
    seen_edges = set()
    for e in doc["edges"]:
        if not isinstance(e, list) or len(e) != 2:
            problems.append(f"malformed edge entry {e!r}")
            continue
        u, v = e
        if u not in by_id or v not in by_id:
            problems.append(f"edge [{u!r}, {v!r}] references an unknown layer")
            continue
        if (u, v) in seen_edges:
            problems.append(f"duplicate edge [{u!r}, {v!r}]")
            continue
        seen_edges.add((u, v))
        preds[v].append(u)
        succs[u].append(v)

    if problems:
        return problems

    # acyclicity via Kahn's algorithm
    indeg = {lid: len(preds[lid]) for lid in by_id}
    ready = [lid for lid, d in indeg.items() if d == 0]
    visited = 0
    while ready:
        lid = ready.pop()
        visited += 1
        for nxt in succs[lid]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    if visited != len(by_id):
        stuck = sorted(lid for lid, d in indeg.items() if d > 0)
        problems.append(f"cycle detected involving {stuck}")

    # single weakly connected component
    if len(by_id) > 1:
        neighbors = {lid: set(preds[lid]) | set(succs[lid]) for lid in by_id}
        start = next(iter(by_id))
        seen = {start}
        stack = [start]
        while stack:
            for nxt in neighbors[stack.pop()]:
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        if len(seen) != len(by_id):
            missing_ids = sorted(set(by_id) - seen)
            problems.append(f"graph is not connected; unreachable layers {missing_ids}")

    for lid, entry in by_id.items():
        if preds[lid]:
            expect = sum(by_id[p]["out_elems"] for p in preds[lid])
            if entry["in_elems"] != expect:
                problems.append(
                    f"layer {lid!r}: in_elems {entry['in_elems']} != predecessor total {expect}"
                )
    return problems


def verify(json_path) -> bool:
    """True iff the file holds a valid graph document."""
    return not verify_path(json_path)


def verify_path(json_path) -> list[str]:
    try:
        doc = json.loads(Path(json_path).read_text(encoding="utf-8"))
    except OSError as e:
        return [f"cannot read {json_path}: {e}"]
    except json.JSONDecodeError as e:
        return [f"malformed JSON: {e}"]
    return verify_document(doc)

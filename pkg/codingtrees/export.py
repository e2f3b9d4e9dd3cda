"""DOT and JSON renderings of coding trees, diagonal trees and counted shapes.

DOT output puts one ``rank = same`` block per level; plot with ``dot -Tpng -O tree.gv``.
"""

import json
from typing import Any, Dict, List, Optional, Union

from codingtrees.brd import BrdReport, DiagTreeShape
from codingtrees.config import config
from codingtrees.diagonal import DiagonalTree, LabeledDiagonalTree
from codingtrees.structures import FinStructure, Language, TypeNode, format_formula
from codingtrees.typetree import CodingTree

AnyTree = Union[CodingTree, DiagonalTree, LabeledDiagonalTree]


def _newest(lang: Language, node: TypeNode) -> str:
    positives = [format_formula(lang, f) for f in node.blocks[-1] if f[2]]
    return ", ".join(positives) if positives else "-"


def _levels(tree: Union[CodingTree, DiagonalTree]) -> List[List[TypeNode]]:
    if isinstance(tree, CodingTree):
        return tree.levels
    return [list(lvl.nodes) for lvl in tree.levels]


def _ids(levels: List[List[TypeNode]]) -> Dict[TypeNode, str]:
    return {t: f"{n}:{i}" for n, level in enumerate(levels) for i, t in enumerate(level)}


def to_dot(tree: AnyTree) -> str:
    """Coding nodes are filled; splitting nodes of a diagonal tree are diamonds, labelled ``psi`` when labelled."""
    labels: Dict[int, int] = {}
    if isinstance(tree, LabeledDiagonalTree):
        labels = tree.labels
        tree = tree.tree
    levels = _levels(tree)
    ids = _ids(levels)
    lines = ["digraph tree {", f'\tgraph [label="{tree.spec_label}", rankdir=TB]']
    for n, level in enumerate(levels):
        lines.append("\t{")
        lines.append("\t\trank = same;")
        for t in level:
            attrs = [f'label="{_newest(tree.lang, t)}"']
            if tree.is_coding(t):
                attrs.append("style=filled")
            if isinstance(tree, DiagonalTree) and tree.is_splitting(t):
                attrs.append("shape=diamond")
                if n in labels:
                    attrs.append(f'xlabel="psi={labels[n]}"')
            lines.append(f'\t\t"{ids[t]}" [{", ".join(attrs)}];')
        lines.append("\t}")
    for n in range(1, len(levels)):
        for t in levels[n]:
            parent = t.restrict(n - 1)
            if parent in ids:
                lines.append(f'\t"{ids[parent]}" -> "{ids[t]}";')
    lines.append("}")
    return "\n".join(lines) + "\n"


def _node_record(tree: Union[CodingTree, DiagonalTree], node: TypeNode, ident: str) -> Dict[str, Any]:
    record: Dict[str, Any] = {"id": ident, "formulas": node.positives(tree.lang), "coding": tree.is_coding(node)}
    if isinstance(tree, DiagonalTree):
        record["splitting"] = tree.is_splitting(node)
    return record


def tree_payload(tree: AnyTree) -> Dict[str, Any]:
    labels: Optional[Dict[int, int]] = None
    if isinstance(tree, LabeledDiagonalTree):
        labels = tree.labels
        tree = tree.tree
    levels = _levels(tree)
    ids = _ids(levels)
    payload: Dict[str, Any] = {
        "schema_version": config.schema_version,
        "kind": "coding_tree" if isinstance(tree, CodingTree) else "diagonal_tree",
        "spec": tree.spec_label,
        "mode": tree.mode,
        "depth": tree.depth,
        "levels": [[_node_record(tree, t, ids[t]) for t in level] for level in levels],
        "colours": list(tree.colours),
    }
    if isinstance(tree, CodingTree):
        payload["coding"] = [ids[c] for c in tree.coding]
    else:
        payload["coding"] = [ids[c] for c in tree.coding_nodes()]
        payload["coding_levels"] = list(tree.coding_levels)
        payload["critical"] = [{"level": lvl.level, "kind": lvl.kind} for lvl in tree.critical()]
    if labels is not None:
        payload["labels"] = {str(k): v for k, v in sorted(labels.items())}
    return payload


def to_json(tree: AnyTree) -> str:
    return dumps(tree_payload(tree))


def dumps(payload: Any) -> str:
    """Stable JSON: sorted keys, two-space indent, trailing newline."""
    return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def structure_payload(s: FinStructure) -> Dict[str, Any]:
    return {"schema_version": config.schema_version, **json.loads(s.model_dump_json())}


def brd_payload(report: BrdReport) -> Dict[str, Any]:
    return {"schema_version": config.schema_version, **json.loads(report.model_dump_json())}


def shape_to_dot(shape: DiagTreeShape) -> str:
    """One level per event; terminal nodes are filled and named ``d_i``."""
    order = {b: i for i, b in enumerate(shape.leaf_order)}
    lines = ["digraph shape {", "\tgraph []"]
    live = {""}
    previous = {"": "root"}
    lines.append('\t"root" [label="", shape=point];')
    for n, (kind, b) in enumerate(shape.events):
        lines.append("\t{")
        lines.append("\t\trank = same;")
        current: Dict[str, str] = {}
        for branch in sorted(live):
            ident = f"{n}:{branch or 'r'}"
            current[branch] = ident
            if branch == b and kind == "term":
                lines.append(f'\t\t"{ident}" [label="d{order[b]}", style=filled];')
            elif branch == b:
                lines.append(f'\t\t"{ident}" [label="", shape=diamond];')
            else:
                lines.append(f'\t\t"{ident}" [label="", shape=point];')
        lines.append("\t}")
        for branch, ident in current.items():
            lines.append(f'\t"{previous[branch]}" -> "{ident}";')
        live.discard(b)
        if kind == "split":
            live |= {b + "0", b + "1"}
            previous = {**current, b + "0": current[b], b + "1": current[b]}
        else:
            previous = current
    lines.append("}")
    return "\n".join(lines) + "\n"

"""Graphviz DOT rendering of a search tree."""

from __future__ import annotations

from pathlib import Path

from retroplan.tree import AndOrTree

SOLVED_COLOR = "palegreen"
UNSOLVED_COLOR = "lightgrey"
INVENTORY_COLOR = "lightblue"


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def tree_to_dot(tree: AndOrTree, name: str = "search_tree") -> str:
    lines = [f"digraph {name} {{", "  rankdir=TB;", '  node [fontname="Helvetica"];']
    for v in tree.or_nodes:
        if v.in_inventory:
            color = INVENTORY_COLOR
        else:
            color = SOLVED_COLOR if v.solved else UNSOLVED_COLOR
        lines.append(f"  or{v.id} [shape=ellipse, style=filled, fillcolor={color}, "
                     f"solved={str(v.solved).lower()}, label={_quote(v.molecule)}];")
    for a in tree.and_nodes:
        color = SOLVED_COLOR if a.solved else "white"
        label = f"v̄={a.value:.3f}, n={a.visits}, d={a.depth}"
        lines.append(f"  and{a.id} [shape=box, style=filled, fillcolor={color}, "
                     f"solved={str(a.solved).lower()}, label={_quote(label)}];")
    for a in tree.and_nodes:
        lines.append(f"  or{a.parent} -> and{a.id};")
        for c in a.children:
            lines.append(f"  and{a.id} -> or{c};")
    lines.append("}")
    return "\n".join(lines) + "\n"


def export_dot(tree: AndOrTree, path: str | Path):
    Path(path).write_text(tree_to_dot(tree), encoding="utf-8")

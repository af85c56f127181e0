"""Mapping generated pathways onto the AND-OR tree."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

from retroplan.chem.canon import canonical_smiles
from retroplan.routes import Pathway, ReactionStep
from retroplan.tree import AndOrTree, CycleError

Canonicalizer = Callable[[str], str]


class EmptyPathwayError(ValueError):
    """No step of a pathway survived normalisation."""


def identity(key: str) -> str:
    return key


def normalize_pathway(raw: Pathway, canonicalizer: Canonicalizer = canonical_smiles) -> Pathway:
    """Replace every molecule by its canonical key and drop unusable steps.

    Steps with an unparseable molecule or whose product reappears among its
    own reactants are dropped and noted in ``diagnostics``.

    Raises:
        EmptyPathwayError: when no step survives.
    """
    steps: list[ReactionStep] = []
    notes: list[str] = list(raw.diagnostics)
    for i, step in enumerate(raw.steps, start=1):
        try:
            product = canonicalizer(step.product)
            reactants = sorted({canonicalizer(r) for r in step.reactants})
        except ValueError as exc:
            notes.append(f"step {i}: {exc}")
            continue
        if product in reactants:
            notes.append(f"step {i}: product among its own reactants")
            continue
        steps.append(ReactionStep(product, tuple(reactants), step.template))
    if not steps:
        raise EmptyPathwayError("no usable steps in pathway")
    return Pathway(tuple(steps), raw.provenance, tuple(notes))


@dataclass
class MapResult:
    added: list[int] = field(default_factory=list)
    refreshed: list[int] = field(default_factory=list)  # duplicate reactions already in the tree
    orphaned: list[int] = field(default_factory=list)  # 1-based step indices
    skipped_solved: list[int] = field(default_factory=list)
    rejected_cycles: list[int] = field(default_factory=list)


def map_pathway(tree: AndOrTree, pathway: Pathway, base_depth: int = 0) -> MapResult:
    """Attach each step of ``pathway`` under the OR node of its product.

    Step ``i`` (1-based) is attached at depth ``base_depth + i``. Steps whose
    product is not in the tree or is already solved are skipped; a step that
    repeats an existing reaction (same product, same reactant set) is not
    attached again but reported in ``refreshed``.
    """
    result = MapResult()
    for i, step in enumerate(pathway.steps, start=1):
        pid = tree.index.get(step.product)
        if pid is None:
            result.orphaned.append(i)
            continue
        if tree.or_nodes[pid].solved:
            result.skipped_solved.append(i)
            continue
        dup = tree.find_duplicate(pid, step.reactants)
        if dup is not None:
            result.refreshed.append(dup)
            continue
        try:
            result.added.append(tree.attach_and(step, pid, base_depth + i))
        except CycleError:
            result.rejected_cycles.append(i)
    return result

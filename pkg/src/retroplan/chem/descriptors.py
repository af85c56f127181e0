"""Simple whole-molecule descriptors."""

from __future__ import annotations

from retroplan.chem.elements import ATOMIC_WEIGHT
from retroplan.chem.smiles import MolGraph, parse_smiles

H_WEIGHT = ATOMIC_WEIGHT["H"]


def molecular_weight(g: MolGraph) -> float:
    """Average molecular weight from standard atomic weights, hydrogens included."""
    return sum(ATOMIC_WEIGHT[a.element] + a.hcount * H_WEIGHT for a in g.atoms)


def smiles_molecular_weight(smiles: str) -> float | None:
    try:
        return molecular_weight(parse_smiles(smiles))
    except ValueError:
        return None

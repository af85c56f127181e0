"""Synthetic-complexity scoring.

The default scorer is a size/ring/stereo heuristic on the 1-5 scale of the
learned SC score. It is a stand-in, not a reproduction of that trained model;
anything with the :class:`ComplexityScorer` signature can replace it.
"""

from __future__ import annotations

import math
from typing import Callable

from retroplan.chem.smiles import MolGraph, parse_smiles

SIZE_WEIGHT = 0.5
RING_WEIGHT = 0.3
STEREO_WEIGHT = 0.2
SC_MIN = 1.0
SC_MAX = 5.0

ComplexityScorer = Callable[[str], float]


def complexity_score(g: MolGraph) -> float:
    """``clamp(1 + 0.5*ln(heavy) + 0.3*rings + 0.2*stereo, 1, 5)``."""
    heavy = sum(1 for a in g.atoms if a.element != "H")
    stereo = sum(1 for a in g.atoms if a.chirality) + sum(1 for b in g.bonds if b.stereo)
    raw = (
        1.0
        + SIZE_WEIGHT * math.log(max(heavy, 1))
        + RING_WEIGHT * g.ring_count()
        + STEREO_WEIGHT * stereo
    )
    return min(SC_MAX, max(SC_MIN, raw))


def smiles_complexity(smiles: str) -> float:
    """Score a SMILES key; unparseable input gets the maximum score."""
    try:
        return complexity_score(parse_smiles(smiles))
    except ValueError:
        return SC_MAX

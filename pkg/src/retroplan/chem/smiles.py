"""Molecular graphs and a SMILES parser for a documented subset of the grammar.

Supported:

* organic-subset atoms ``B C N O P S F Cl Br I`` and aromatic ``b c n o p s``
* bracket atoms ``[NH4+]``, ``[O-]``, ``[nH]``, ``[Fe+2]``, ``[C@@H]``; atom-map
  classes (``[CH3:1]``) are accepted and discarded
* bonds ``- = # :`` plus the directional markers ``/`` and ``\\``
* branches, ring closures ``1``-``9`` and ``%nn``, and ``.`` separated components

Rejected: isotopes, the ``*`` wildcard, quadruple bonds (``$``) and reaction
arrows. Stereo markers (``@``/``@@`` on atoms, ``/``/``\\`` on bonds) are kept as
opaque labels: they are part of a molecule's identity but carry no geometry.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

from retroplan.chem.elements import (
    AROMATIC_BRACKET,
    ATOMIC_NUMBER,
    ORGANIC_VALENCES,
)


class SmilesError(ValueError):
    """Raised for malformed or unsupported SMILES; ``offset`` is the failing index."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


class BondOrder(enum.Enum):
    SINGLE = "-"
    DOUBLE = "="
    TRIPLE = "#"
    AROMATIC = ":"

    @property
    def valence(self) -> int:
        return _BOND_VALENCE[self]


_BOND_VALENCE = {
    BondOrder.SINGLE: 1,
    BondOrder.DOUBLE: 2,
    BondOrder.TRIPLE: 3,
    BondOrder.AROMATIC: 1,
}


class Atom(NamedTuple):
    element: str  # capitalised symbol, e.g. "C", "Cl"
    charge: int = 0
    aromatic: bool = False
    hcount: int = 0
    chirality: str = ""  # opaque label such as "@" or "@@"


class Bond(NamedTuple):
    a: int
    b: int
    order: BondOrder = BondOrder.SINGLE
    stereo: str = ""  # "/" or "\\" when written with a directional marker


@dataclass(frozen=True)
class MolGraph:
    """Undirected molecular graph with per-atom hydrogen counts."""

    atoms: tuple[Atom, ...]
    bonds: tuple[Bond, ...] = ()

    def __post_init__(self):
        if not self.atoms:
            raise ValueError("a molecule needs at least one atom")
        n = len(self.atoms)
        seen = set()
        for bond in self.bonds:
            if not (0 <= bond.a < n and 0 <= bond.b < n) or bond.a == bond.b:
                raise ValueError(f"invalid bond endpoints {bond.a}-{bond.b}")
            pair = (min(bond.a, bond.b), max(bond.a, bond.b))
            if pair in seen:
                raise ValueError(f"duplicate bond {pair[0]}-{pair[1]}")
            seen.add(pair)

    def __len__(self) -> int:
        return len(self.atoms)

    @cached_property
    def adjacency(self) -> tuple[tuple[tuple[int, int], ...], ...]:
        """Per atom, ``(neighbour, bond index)`` pairs."""
        adj: list[list[tuple[int, int]]] = [[] for _ in self.atoms]
        for k, bond in enumerate(self.bonds):
            adj[bond.a].append((bond.b, k))
            adj[bond.b].append((bond.a, k))
        return tuple(tuple(x) for x in adj)

    def degree(self, i: int) -> int:
        return len(self.adjacency[i])

    def bond_valence(self, i: int) -> int:
        return sum(self.bonds[k].order.valence for _, k in self.adjacency[i])

    def component_count(self) -> int:
        parent = list(range(len(self.atoms)))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for bond in self.bonds:
            parent[find(bond.a)] = find(bond.b)
        return len({find(i) for i in range(len(self.atoms))})

    def ring_count(self) -> int:
        """Cyclomatic number: independent cycles in the graph."""
        return len(self.bonds) - len(self.atoms) + self.component_count()


def implicit_hcount(element: str, aromatic: bool, bond_valence: int) -> int:
    """Hydrogens implied for an organic-subset atom written without brackets."""
    valences = ORGANIC_VALENCES[element]
    if aromatic:
        return max(0, valences[0] - bond_valence - 1)
    for v in valences:
        if v >= bond_valence:
            return v - bond_valence
    return 0


_ORGANIC_TWO = ("Cl", "Br")
_ORGANIC_ONE = frozenset("BCNOPSFI")
_AROMATIC_ONE = frozenset("bcnops")
_BOND_CHARS = {"-": BondOrder.SINGLE, "=": BondOrder.DOUBLE, "#": BondOrder.TRIPLE,
               ":": BondOrder.AROMATIC, "/": BondOrder.SINGLE, "\\": BondOrder.SINGLE}


_CHIRAL = re.compile(r"@(?:@|TH[12]|AL[12]|SP[123]|TB\d{1,2}|OH\d{1,2})?")


class _PendingBond(NamedTuple):
    order: BondOrder
    stereo: str
    offset: int


def _pending(ch: str, offset: int) -> _PendingBond:
    return _PendingBond(_BOND_CHARS[ch], ch if ch in "/\\" else "", offset)


def parse_smiles(text: str) -> MolGraph:
    """Parse ``text`` into a :class:`MolGraph`.

    Raises:
        SmilesError: on syntax errors or unsupported features, with the offset
            of the offending character.
    """
    if not text:
        raise SmilesError("empty SMILES", 0)

    atoms: list[Atom] = []
    organic: list[bool] = []  # atom written without brackets -> implicit H
    bonds: list[Bond] = []
    pairs: set[tuple[int, int]] = set()
    branch_stack: list[tuple[int | None, int]] = []
    rings: dict[int, tuple[int, _PendingBond | None, int]] = {}
    prev: int | None = None
    bond: _PendingBond | None = None
    i = 0
    n = len(text)

    def add_bond(a: int, b: int, pend: _PendingBond | None, offset: int):
        pair = (min(a, b), max(a, b))
        if a == b:
            raise SmilesError("ring closure bonds an atom to itself", offset)
        if pair in pairs:
            raise SmilesError("duplicate bond between the same atoms", offset)
        pairs.add(pair)
        if pend is None:
            both_aromatic = atoms[a].aromatic and atoms[b].aromatic
            order = BondOrder.AROMATIC if both_aromatic else BondOrder.SINGLE
            bonds.append(Bond(a, b, order))
        else:
            bonds.append(Bond(a, b, pend.order, pend.stereo))

    def add_atom(atom: Atom, is_organic: bool, offset: int):
        nonlocal prev, bond
        atoms.append(atom)
        organic.append(is_organic)
        idx = len(atoms) - 1
        if prev is not None:
            add_bond(prev, idx, bond, offset)
        elif bond is not None:
            raise SmilesError("bond without a preceding atom", bond.offset)
        bond = None
        prev = idx

    while i < n:
        ch = text[i]
        if ch == "[":
            end = text.find("]", i + 1)
            if end < 0:
                raise SmilesError("unclosed bracket atom", i)
            add_atom(_parse_bracket(text, i + 1, end), False, i)
            i = end + 1
        elif text.startswith(_ORGANIC_TWO, i):
            add_atom(Atom(text[i:i + 2]), True, i)
            i += 2
        elif ch in _ORGANIC_ONE:
            add_atom(Atom(ch), True, i)
            i += 1
        elif ch in _AROMATIC_ONE:
            add_atom(Atom(ch.upper(), aromatic=True), True, i)
            i += 1
        elif ch in _BOND_CHARS:
            if bond is not None:
                raise SmilesError("two consecutive bond symbols", i)
            if prev is None:
                raise SmilesError("bond without a preceding atom", i)
            bond = _pending(ch, i)
            i += 1
        elif ch == "(":
            if prev is None:
                raise SmilesError("branch without a preceding atom", i)
            if bond is not None:
                raise SmilesError("bond symbol before a branch", bond.offset)
            branch_stack.append((prev, i))
            i += 1
        elif ch == ")":
            if not branch_stack:
                raise SmilesError("unmatched closing parenthesis", i)
            if bond is not None:
                raise SmilesError("dangling bond at end of branch", bond.offset)
            if text[i - 1] == "(":
                raise SmilesError("empty branch", i)
            prev, _ = branch_stack.pop()
            i += 1
        elif ch.isdigit() or ch == "%":
            if prev is None:
                raise SmilesError("ring closure without a preceding atom", i)
            if ch == "%":
                digits = text[i + 1:i + 3]
                if len(digits) != 2 or not digits.isdigit():
                    raise SmilesError("'%' must be followed by two digits", i)
                num, width = int(digits), 3
            else:
                num, width = int(ch), 1
            if num in rings:
                other, pend, _ = rings.pop(num)
                if pend and bond and (pend.order, pend.stereo) != (bond.order, bond.stereo):
                    raise SmilesError("conflicting ring-closure bond orders", i)
                add_bond(other, prev, pend or bond, i)
            else:
                rings[num] = (prev, bond, i)
            bond = None
            i += width
        elif ch == ".":
            if bond is not None:
                raise SmilesError("dangling bond before '.'", bond.offset)
            if prev is None:
                raise SmilesError("'.' without a preceding atom", i)
            prev = None
            i += 1
        elif ch == "$":
            raise SmilesError("quadruple bonds are not supported", i)
        elif ch == "*":
            raise SmilesError("wildcard atoms are not supported", i)
        elif ch == ">":
            raise SmilesError("reaction SMILES are not molecules", i)
        else:
            raise SmilesError(f"unexpected character {ch!r}", i)

    if bond is not None:
        raise SmilesError("dangling bond at end of input", bond.offset)
    if branch_stack:
        raise SmilesError("unclosed branch", branch_stack[-1][1])
    if rings:
        raise SmilesError("unclosed ring closure", min(off for _, _, off in rings.values()))
    if prev is None:
        # trailing '.' or input made only of separators
        raise SmilesError("expected an atom", n)

    graph = MolGraph(tuple(atoms), tuple(bonds))
    if any(organic):
        fixed = list(atoms)
        for idx, atom in enumerate(atoms):
            if organic[idx]:
                h = implicit_hcount(atom.element, atom.aromatic, graph.bond_valence(idx))
                fixed[idx] = atom._replace(hcount=h)
        graph = MolGraph(tuple(fixed), graph.bonds)
    return graph


def _parse_bracket(text: str, start: int, end: int) -> Atom:
    body = text[start:end]
    pos = 0
    if not body:
        raise SmilesError("empty bracket atom", start - 1)
    if body[0].isdigit():
        raise SmilesError("isotopes are not supported", start)
    if body[0] == "*":
        raise SmilesError("wildcard atoms are not supported", start)

    aromatic = body[0].islower()
    symbol = None
    for width in (2, 1):
        cand = body[:width]
        if len(cand) < width:
            continue
        norm = cand[0].upper() + cand[1:]
        if aromatic:
            if norm in AROMATIC_BRACKET and cand[0].islower():
                symbol = norm
                break
        elif norm == cand and norm in ATOMIC_NUMBER:
            symbol = norm
            break
    if symbol is None:
        raise SmilesError(f"unknown element in [{body}]", start)
    pos = len(symbol)

    chirality = ""
    m = _CHIRAL.match(body, pos)
    if m:
        chirality = m.group()
        pos = m.end()

    hcount = 0
    if body.startswith("H", pos):
        pos += 1
        j = pos
        while j < len(body) and body[j].isdigit():
            j += 1
        hcount = int(body[pos:j]) if j > pos else 1
        pos = j

    charge = 0
    if pos < len(body) and body[pos] in "+-":
        sign = 1 if body[pos] == "+" else -1
        j = pos + 1
        while j < len(body) and body[j] == body[pos]:
            j += 1
        if j - pos > 1:
            charge = sign * (j - pos)
        else:
            k = j
            while k < len(body) and body[k].isdigit():
                k += 1
            charge = sign * (int(body[j:k]) if k > j else 1)
            j = k
        if abs(charge) > 15:
            raise SmilesError(f"invalid charge in [{body}]", start + pos)
        pos = j

    if body.startswith(":", pos):
        j = pos + 1
        while j < len(body) and body[j].isdigit():
            j += 1
        if j == pos + 1:
            raise SmilesError(f"invalid atom class in [{body}]", start + pos)
        pos = j

    if pos != len(body):
        if body[pos] in "+-" or body[pos].isdigit():
            raise SmilesError(f"invalid charge in [{body}]", start + pos)
        raise SmilesError(f"unexpected {body[pos]!r} in bracket atom", start + pos)
    return Atom(symbol, charge, aromatic, hcount, chirality)

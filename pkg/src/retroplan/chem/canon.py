"""Canonical SMILES.

Atoms are first ranked by their invariants, in this order: atomic number,
aromatic flag, degree, formal charge, hydrogen count, stereo label. Ranks are
then refined iteratively: each atom is re-ranked by (current rank, sorted
neighbour ranks with bond codes) until the number of distinct ranks stops
growing.

Atoms still tied after refinement are individualised one at a time (the first
tied class in rank order is split), refined again, and so on until every rank
is unique. Each fully ranked leaf is written out by a depth-first traversal
that always visits the lowest-ranked unvisited neighbour first; the canonical
string is the lexicographically smallest leaf. Leaves that produce identical
strings reveal automorphisms, which prune the remaining tie choices, so the
search stays small for the usual symmetric molecules.
"""

from __future__ import annotations

from retroplan.chem.elements import AROMATIC_ORGANIC, ATOMIC_NUMBER, ORGANIC_VALENCES
from retroplan.chem.smiles import Atom, BondOrder, MolGraph, implicit_hcount, parse_smiles

_BOND_CODE = {
    (BondOrder.SINGLE, ""): 1,
    (BondOrder.DOUBLE, ""): 2,
    (BondOrder.TRIPLE, ""): 3,
    (BondOrder.AROMATIC, ""): 4,
    (BondOrder.SINGLE, "/"): 5,
    (BondOrder.SINGLE, "\\"): 6,
}


def _bond_code(order: BondOrder, stereo: str) -> int:
    # directional labels on non-single bonds are not produced by the parser
    return _BOND_CODE.get((order, stereo)) or 7 + 3 * list(BondOrder).index(order) + (stereo == "\\")


def _dense_rank(keys: list) -> list[int]:
    order = sorted(set(keys))
    index = {k: r for r, k in enumerate(order)}
    return [index[k] for k in keys]


class _Canonicalizer:
    def __init__(self, g: MolGraph):
        self.g = g
        self.n = len(g.atoms)
        self.adj = [
            [(j, _bond_code(g.bonds[k].order, g.bonds[k].stereo)) for j, k in nbrs]
            for nbrs in g.adjacency
        ]
        self.best: tuple[str, list[int]] | None = None
        self.first: tuple[str, list[int]] | None = None
        self.automorphisms: list[list[int]] = []

    def initial_ranks(self) -> list[int]:
        keys = []
        for i, atom in enumerate(self.g.atoms):
            keys.append((
                ATOMIC_NUMBER[atom.element],
                atom.aromatic,
                len(self.adj[i]),
                atom.charge,
                atom.hcount,
                atom.chirality,
            ))
        return _dense_rank(keys)

    def refine(self, ranks: list[int]) -> list[int]:
        distinct = len(set(ranks))
        while distinct < self.n:
            keys = [
                (ranks[i], tuple(sorted((ranks[j], code) for j, code in self.adj[i])))
                for i in range(self.n)
            ]
            ranks = _dense_rank(keys)
            now = len(set(ranks))
            if now == distinct:
                break
            distinct = now
        return ranks

    def run(self) -> str:
        self._search(self.initial_ranks(), ())
        assert self.best is not None
        return self.best[0]

    def _search(self, ranks: list[int], fixed: tuple[int, ...]):
        ranks = self.refine(ranks)
        counts: dict[int, int] = {}
        for r in ranks:
            counts[r] = counts.get(r, 0) + 1
        tied = [r for r, c in counts.items() if c > 1]
        if not tied:
            self._leaf(ranks)
            return
        target = min(tied)
        cell = [i for i in range(self.n) if ranks[i] == target]
        explored: list[int] = []
        for v in cell:
            if explored and self._same_orbit(v, explored, fixed):
                continue
            split = [(r, 0 if i == v or r != target else 1) for i, r in enumerate(ranks)]
            self._search(_dense_rank(split), fixed + (v,))
            explored.append(v)

    def _same_orbit(self, v: int, explored: list[int], fixed: tuple[int, ...]) -> bool:
        parent = list(range(self.n))

        def find(x):
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for perm in self.automorphisms:
            if all(perm[f] == f for f in fixed):
                for i, j in enumerate(perm):
                    ri, rj = find(i), find(j)
                    if ri != rj:
                        parent[ri] = rj
        root = find(v)
        return any(find(u) == root for u in explored)

    def _leaf(self, ranks: list[int]):
        text, order = write_smiles(self.g, ranks)
        for ref in (self.first, self.best):
            if ref is not None and ref[0] == text:
                perm = [0] * self.n
                for a, b in zip(ref[1], order):
                    perm[a] = b
                self.automorphisms.append(perm)
                break
        if self.first is None:
            self.first = (text, order)
        if self.best is None or text < self.best[0]:
            self.best = (text, order)


def canonicalize(g: MolGraph) -> str:
    """Canonical SMILES for ``g``; identical for every atom ordering of the same graph."""
    return _Canonicalizer(g).run()


def canonical_smiles(text: str) -> str:
    """Parse and canonicalise a SMILES string."""
    return canonicalize(parse_smiles(text))


def _atom_text(g: MolGraph, i: int) -> str:
    atom: Atom = g.atoms[i]
    symbol = atom.element.lower() if atom.aromatic else atom.element
    if (
        atom.element in ORGANIC_VALENCES
        and atom.charge == 0
        and not atom.chirality
        and (not atom.aromatic or atom.element in AROMATIC_ORGANIC)
        and atom.hcount == implicit_hcount(atom.element, atom.aromatic, g.bond_valence(i))
    ):
        return symbol
    parts = ["[", symbol, atom.chirality]
    if atom.hcount:
        parts.append("H" if atom.hcount == 1 else f"H{atom.hcount}")
    if atom.charge:
        sign = "+" if atom.charge > 0 else "-"
        parts.append(sign if abs(atom.charge) == 1 else f"{sign}{abs(atom.charge)}")
    parts.append("]")
    return "".join(parts)


def _bond_text(g: MolGraph, a: int, b: int, k: int) -> str:
    bond = g.bonds[k]
    both_aromatic = g.atoms[a].aromatic and g.atoms[b].aromatic
    if bond.order is BondOrder.SINGLE:
        if bond.stereo:
            return bond.stereo
        return "-" if both_aromatic else ""
    if bond.order is BondOrder.AROMATIC:
        return "" if both_aromatic else ":"
    return bond.order.value


def write_smiles(g: MolGraph, ranks: list[int]) -> tuple[str, list[int]]:
    """Write ``g`` as SMILES, traversing atoms in ``ranks`` order.

    Returns the string and the atom indices in the order they were written.
    Ranks must be unique for the output to be independent of input order.
    """
    n = len(g.atoms)
    nbrs = [sorted(g.adjacency[i], key=lambda jk: ranks[jk[0]]) for i in range(n)]
    visit = [-1] * n
    order: list[int] = []
    children: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    tree_bonds: set[int] = set()
    roots: list[int] = []

    for start in sorted(range(n), key=ranks.__getitem__):
        if visit[start] >= 0:
            continue
        roots.append(start)
        visit[start] = len(order)
        order.append(start)
        stack = [(start, 0)]
        while stack:
            u, pos = stack[-1]
            if pos == len(nbrs[u]):
                stack.pop()
                continue
            stack[-1] = (u, pos + 1)
            w, k = nbrs[u][pos]
            if visit[w] < 0:
                visit[w] = len(order)
                order.append(w)
                children[u].append((w, k))
                tree_bonds.add(k)
                stack.append((w, 0))

    # ring-closure bonds incident to each atom, by partner visit order
    closures: list[list[tuple[int, int]]] = [[] for _ in range(n)]
    for k, bond in enumerate(g.bonds):
        if k not in tree_bonds:
            closures[bond.a].append((bond.b, k))
            closures[bond.b].append((bond.a, k))
    for lst in closures:
        lst.sort(key=lambda jk: visit[jk[0]])

    out: list[str] = []
    digit_of: dict[int, int] = {}
    free: list[int] = []
    next_digit = 1

    def ring_label(d: int) -> str:
        return str(d) if d < 10 else f"%{d:02d}"

    for ci, root in enumerate(roots):
        if ci:
            out.append(".")
        stack: list = [("atom", root, "")]
        while stack:
            item = stack.pop()
            if isinstance(item, str):
                out.append(item)
                continue
            _, u, bond_text = item
            out.append(bond_text)
            out.append(_atom_text(g, u))
            released = []
            for w, k in closures[u]:
                if visit[w] < visit[u]:
                    d = digit_of.pop(k)
                    out.append(ring_label(d))
                    released.append(d)
                else:
                    if free:
                        free.sort()
                        d = free.pop(0)
                    else:
                        d = next_digit
                        next_digit += 1
                    digit_of[k] = d
                    out.append(_bond_text(g, u, w, k) + ring_label(d))
            free.extend(released)
            kids = children[u]
            for idx in range(len(kids) - 1, -1, -1):
                w, k = kids[idx]
                if idx == len(kids) - 1:
                    stack.append(("atom", w, _bond_text(g, u, w, k)))
                else:
                    stack.append(")")
                    stack.append(("atom", w, _bond_text(g, u, w, k)))
                    stack.append("(")
    return "".join(out), order

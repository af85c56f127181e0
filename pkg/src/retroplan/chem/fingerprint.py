"""Circular (Morgan/ECFP-style) fingerprints as sparse sets of 64-bit features."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable

from retroplan.chem.elements import ATOMIC_NUMBER
from retroplan.chem.smiles import BondOrder, MolGraph

MASK64 = (1 << 64) - 1
HASH_SEED = 0x243F6A8885A308D3  # fixed so feature ids are stable across processes

_BOND_FEATURE = {BondOrder.SINGLE: 1, BondOrder.DOUBLE: 2, BondOrder.TRIPLE: 3, BondOrder.AROMATIC: 4}


def splitmix64(z: int) -> int:
    z = (z + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def hash_ints(values: Iterable[int], seed: int = HASH_SEED) -> int:
    """Order-sensitive 64-bit hash of a sequence of integers."""
    h = seed
    for v in values:
        h = splitmix64(h ^ (v & MASK64))
    return h


@dataclass(frozen=True)
class Fingerprint:
    features: frozenset[int]
    radius: int

    def __len__(self) -> int:
        return len(self.features)


def ring_atoms(g: MolGraph) -> set[int]:
    """Atoms that lie on at least one cycle (endpoints of non-bridge bonds)."""
    n = len(g.atoms)
    disc = [-1] * n
    low = [0] * n
    timer = 0
    in_ring: set[int] = set()
    for root in range(n):
        if disc[root] >= 0:
            continue
        disc[root] = low[root] = timer
        timer += 1
        stack = [(root, -1, iter(g.adjacency[root]))]
        while stack:
            u, via, it = stack[-1]
            advanced = False
            for w, k in it:
                if k == via:
                    continue
                if disc[w] < 0:
                    disc[w] = low[w] = timer
                    timer += 1
                    stack.append((w, k, iter(g.adjacency[w])))
                    advanced = True
                    break
                low[u] = min(low[u], disc[w])
            if advanced:
                continue
            stack.pop()
            if stack:
                p = stack[-1][0]
                low[p] = min(low[p], low[u])
                if low[u] <= disc[p]:
                    # bond p-u is not a bridge
                    in_ring.add(p)
                    in_ring.add(u)
    return in_ring


def _atom_invariants(g: MolGraph) -> list[int]:
    rings = ring_atoms(g)
    out = []
    for i, atom in enumerate(g.atoms):
        out.append(hash_ints((
            ATOMIC_NUMBER[atom.element],
            g.degree(i),
            atom.hcount,
            atom.charge,
            int(atom.aromatic),
            int(i in rings),
        )))
    return out


def morgan_fingerprint(g: MolGraph, radius: int = 2) -> Fingerprint:
    """Union of circular-environment identifiers for iterations ``0..radius``."""
    if radius < 0:
        raise ValueError("radius must be >= 0")
    ids = _atom_invariants(g)
    features = set(ids)
    for it in range(1, radius + 1):
        nxt = []
        for i, nbrs in enumerate(g.adjacency):
            env = sorted((_BOND_FEATURE[g.bonds[k].order], ids[j]) for j, k in nbrs)
            seq = [it, ids[i]]
            for code, nid in env:
                seq.append(code)
                seq.append(nid)
            nxt.append(hash_ints(seq))
        ids = nxt
        features.update(ids)
    return Fingerprint(frozenset(features), radius)


def tanimoto(a: Fingerprint, b: Fingerprint) -> float:
    """Intersection over union of two feature sets; 1.0 when both are empty."""
    if a.radius != b.radius:
        raise ValueError(f"fingerprint radius mismatch: {a.radius} vs {b.radius}")
    return tanimoto_sets(a.features, b.features)


def tanimoto_sets(a: frozenset[int], b: frozenset[int]) -> float:
    if not a and not b:
        return 1.0
    common = len(a & b)
    return common / (len(a) + len(b) - common)


def token_fingerprint(text: str, radius: int = 2) -> Fingerprint:
    """Character n-gram features (n = 1..radius+1) for non-SMILES molecule tokens."""
    feats = set()
    data = text.encode()
    for n in range(1, radius + 2):
        for i in range(len(data) - n + 1):
            feats.add(hash_ints(data[i:i + n], seed=HASH_SEED ^ n))
    return Fingerprint(frozenset(feats), radius)

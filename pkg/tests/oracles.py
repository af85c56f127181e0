"""Independent reference implementations used to check the package.

Nothing here calls the code under test except to read plain data out of
it; each oracle recomputes its answer from first principles.
"""

from __future__ import annotations

import math
import random
from itertools import permutations

from retroplan.chem.smiles import Atom, Bond, BondOrder, MolGraph, implicit_hcount

# ---------------------------------------------------------------- molecules

_VALENCE = {"C": 4, "N": 3, "O": 2, "S": 2, "P": 3, "F": 1, "Cl": 1, "Br": 1, "I": 1, "B": 3}
_ELEMENTS = ["C"] * 6 + ["N", "N", "O", "O", "S", "P", "F", "Cl", "Br", "B"]
_ORDERS = [BondOrder.SINGLE] * 6 + [BondOrder.DOUBLE, BondOrder.DOUBLE, BondOrder.TRIPLE]


def random_molgraph(rng: random.Random, max_atoms: int = 12, stereo: bool = True,
                    charges: bool = True, aromatic: bool = True) -> MolGraph:
    """A random valence-respecting graph, possibly disconnected, possibly with rings."""
    n = rng.randint(1, max_atoms)
    if aromatic and n >= 5 and rng.random() < 0.3:
        return _aromatic_graph(rng, n, stereo)
    elems = [rng.choice(_ELEMENTS) for _ in range(n)]
    free = [_VALENCE[e] for e in elems]
    bonds: dict[tuple[int, int], BondOrder] = {}
    # spanning forest, then a few extra ring bonds
    for i in range(1, n):
        if rng.random() < 0.9:
            cands = [j for j in range(i) if free[j] >= 1]
            if cands and free[i] >= 1:
                j = rng.choice(cands)
                _add_bond(bonds, free, i, j, rng)
    for _ in range(rng.randint(0, 3)):
        i, j = rng.sample(range(n), 2) if n > 1 else (0, 0)
        if i != j and (min(i, j), max(i, j)) not in bonds and free[i] >= 1 and free[j] >= 1:
            _add_bond(bonds, free, i, j, rng)
    atoms = []
    for i, e in enumerate(elems):
        charge = 0
        if charges and rng.random() < 0.08:
            charge = rng.choice([-1, 1])
        chir = rng.choice(["@", "@@"]) if stereo and rng.random() < 0.1 else ""
        h = max(0, free[i]) if rng.random() < 0.9 else rng.randint(0, 3)
        atoms.append(Atom(e, charge, False, h, chir))
    blist = []
    for (a, b), order in sorted(bonds.items()):
        st = ""
        if stereo and order is BondOrder.SINGLE and rng.random() < 0.08:
            st = rng.choice("/\\")
        blist.append(Bond(a, b, order, st))
    return MolGraph(tuple(atoms), tuple(blist))


def _add_bond(bonds, free, i, j, rng):
    cap = min(free[i], free[j])
    order = rng.choice([o for o in _ORDERS if o.valence <= cap])
    bonds[(min(i, j), max(i, j))] = order
    free[i] -= order.valence
    free[j] -= order.valence


def _aromatic_graph(rng: random.Random, n: int, stereo: bool) -> MolGraph:
    ring = rng.choice([5, 6]) if n >= 6 else 5
    atoms = []
    bonds = []
    for i in range(ring):
        e = "n" if rng.random() < 0.2 else "c"
        elem = e.upper()
        atoms.append(Atom(elem, 0, True, 0, ""))
        bonds.append(Bond(i, (i + 1) % ring, BondOrder.AROMATIC) if i + 1 < ring
                     else Bond(0, ring - 1, BondOrder.AROMATIC))
    for k in range(ring, n):
        j = rng.randrange(k)
        if atoms[j].aromatic and sum(1 for b in bonds if j in (b.a, b.b)) >= 3:
            j = k - 1
        atoms.append(Atom(rng.choice(["C", "C", "O", "N", "Cl"]), 0, False, 0, ""))
        bonds.append(Bond(j, k, BondOrder.SINGLE))
    # hydrogens from the implicit rule so the graph is a plausible parse result
    deg = [0] * n
    for b in bonds:
        deg[b.a] += b.order.valence
        deg[b.b] += b.order.valence
    final = []
    for i, a in enumerate(atoms):
        h = implicit_hcount(a.element, a.aromatic, deg[i])
        final.append(a._replace(hcount=h))
    bonds = [Bond(min(b.a, b.b), max(b.a, b.b), b.order, b.stereo) for b in bonds]
    return MolGraph(tuple(final), tuple(bonds))


def permute(g: MolGraph, perm: list[int]) -> MolGraph:
    """Relabel atom ``i`` as ``perm[i]`` and shuffle nothing else."""
    atoms = [None] * len(g.atoms)
    for i, a in enumerate(g.atoms):
        atoms[perm[i]] = a
    bonds = sorted(Bond(perm[b.a], perm[b.b], b.order, b.stereo) for b in g.bonds)
    return MolGraph(tuple(atoms), tuple(bonds))


def _atom_label(a: Atom):
    return (a.element, a.charge, a.aromatic, a.hcount, a.chirality)


def _bond_table(g: MolGraph) -> dict[frozenset, tuple]:
    return {frozenset((b.a, b.b)): (b.order, b.stereo) for b in g.bonds}


def isomorphic(g1: MolGraph, g2: MolGraph) -> bool:
    """Exhaustive backtracking search for a label- and bond-preserving bijection."""
    n = len(g1.atoms)
    if n != len(g2.atoms) or len(g1.bonds) != len(g2.bonds):
        return False
    if sorted(map(_atom_label, g1.atoms)) != sorted(map(_atom_label, g2.atoms)):
        return False
    t1, t2 = _bond_table(g1), _bond_table(g2)
    nb1 = [set() for _ in range(n)]
    for b in g1.bonds:
        nb1[b.a].add(b.b)
        nb1[b.b].add(b.a)
    deg2 = [0] * n
    for b in g2.bonds:
        deg2[b.a] += 1
        deg2[b.b] += 1
    mapping: dict[int, int] = {}
    used = [False] * n

    def extend(i: int) -> bool:
        if i == n:
            return True
        for j in range(n):
            if used[j] or _atom_label(g1.atoms[i]) != _atom_label(g2.atoms[j]) or len(nb1[i]) != deg2[j]:
                continue
            ok = True
            for k in nb1[i]:
                if k in mapping and t2.get(frozenset((j, mapping[k]))) != t1[frozenset((i, k))]:
                    ok = False
                    break
            if ok:
                # already-mapped non-neighbours must stay non-adjacent
                for k, mk in mapping.items():
                    if k not in nb1[i] and frozenset((j, mk)) in t2:
                        ok = False
                        break
            if not ok:
                continue
            mapping[i] = j
            used[j] = True
            if extend(i + 1):
                return True
            del mapping[i]
            used[j] = False
        return False

    return extend(0)


def all_permutation_outputs(g: MolGraph, fn) -> set[str]:
    return {fn(permute(g, list(p))) for p in permutations(range(len(g.atoms)))}


# ---------------------------------------------------------------- trees

def brute_force_solved(tree) -> tuple[set[int], set[int]]:
    """Least fixed point of the solved rules by naive repeated sweeps."""
    or_solved = {v.id for v in tree.or_nodes if v.in_inventory}
    and_solved: set[int] = set()
    changed = True
    while changed:
        changed = False
        for a in tree.and_nodes:
            if a.id not in and_solved and all(c in or_solved for c in a.children):
                and_solved.add(a.id)
                changed = True
        for v in tree.or_nodes:
            if v.id not in or_solved and any(a in and_solved for a in v.children):
                or_solved.add(v.id)
                changed = True
    return or_solved, and_solved


def unsolved_path_ands(tree) -> set[int]:
    """AND nodes reachable from the root through unsolved molecules only."""
    out = set()
    if tree.or_nodes[tree.root].solved:
        return out
    stack = [tree.root]
    seen = {tree.root}
    while stack:
        v = stack.pop()
        for a in tree.or_nodes[v].children:
            out.add(a)
            for c in tree.and_nodes[a].children:
                if c not in seen and not tree.or_nodes[c].solved:
                    seen.add(c)
                    stack.append(c)
    return out


def ucb_oracle(tree, c: float) -> int | None:
    """Full scan over the frontier recomputing every score from the raw arena."""
    rows = []
    for aid in tree.frontier:
        a = tree.and_nodes[aid]
        unsolved = [x for x in a.children if not tree.or_nodes[x].solved]
        if not a.expandable or a.depth >= tree.d_max or not unsolved:
            continue
        n_parent = 0
        for sib in tree.and_nodes:
            if sib.parent == a.parent:
                n_parent += sib.visits
        score = a.value + c * math.sqrt(math.log(n_parent) / a.visits)
        rows.append((-score, a.depth, a.reaction.product, aid))
    if not rows:
        return None
    rows.sort()
    return rows[0][3]


# ---------------------------------------------------------------- mapping

class ReferenceTree:
    """Plain-dict model of the tree used to re-derive mapping results."""

    def __init__(self, target: str, inventory):
        self.inventory = inventory
        self.solved = {target: target in inventory}
        self.order = [target]
        self.ands: list[tuple[str, frozenset, int]] = []

    @classmethod
    def snapshot(cls, tree) -> "ReferenceTree":
        ref = cls(tree.molecule(tree.root), tree.inventory)
        ref.solved = {v.molecule: v.solved for v in tree.or_nodes}
        ref.order = [v.molecule for v in tree.or_nodes]
        ref.ands = [(a.reaction.product, a.reaction.reactant_set, a.depth) for a in tree.and_nodes]
        return ref

    def ancestors(self, mol: str) -> set[str]:
        found = {mol}
        changed = True
        while changed:
            changed = False
            for product, reactants, _ in self.ands:
                if product not in found and reactants & found:
                    found.add(product)
                    changed = True
        return found

    def apply(self, steps, base_depth: int):
        for i, (product, reactants) in enumerate(steps, start=1):
            if product not in self.solved or self.solved[product]:
                continue
            rs = frozenset(reactants)
            if any(p == product and r == rs for p, r, _ in self.ands):
                continue
            if rs & self.ancestors(product):
                continue
            self.ands.append((product, rs, base_depth + i))
            for r in sorted(rs):
                if r not in self.solved:
                    self.solved[r] = r in self.inventory
                    self.order.append(r)

    def edge_set(self):
        return {(p, r, d) for p, r, d in self.ands}


def tree_edge_set(tree):
    return {(a.reaction.product, a.reaction.reactant_set, a.depth) for a in tree.and_nodes}


def random_pathway_steps(rng: random.Random, alphabet: list[str], start: str, max_steps: int = 6):
    """Random step list that mostly decomposes molecules introduced earlier."""
    known = [start]
    steps = []
    for _ in range(rng.randint(1, max_steps)):
        product = rng.choice(known) if rng.random() < 0.85 else rng.choice(alphabet)
        k = rng.randint(1, 3)
        reactants = rng.sample([x for x in alphabet if x != product], k)
        steps.append((product, tuple(sorted(reactants))))
        known.extend(reactants)
    return steps


def tree_sequence_violations(seed: int, n_ops: int = 12, alphabet_size: int = 9) -> list[str]:
    """Apply a random operation sequence to a fresh tree and list every broken invariant."""
    from retroplan.routes import ReactionStep
    from retroplan.tree import AndOrTree, CycleError

    rng = random.Random(seed)
    alphabet = [f"m{i}" for i in range(alphabet_size)]
    inventory = frozenset(x for x in alphabet[1:] if rng.random() < 0.4)
    tree = AndOrTree(alphabet[0], inventory, d_max=rng.randint(2, 5))
    problems: list[str] = []
    inserted = {alphabet[0]}
    ever_solved: set[str] = set()

    def check(stage: str):
        try:
            tree.check_invariants()
        except AssertionError as exc:
            problems.append(f"{stage}: {exc}")
        if len(tree.or_nodes) != len(inserted):
            problems.append(f"{stage}: {len(tree.or_nodes)} OR nodes for {len(inserted)} keys")
        now = {v.molecule for v in tree.or_nodes if v.solved}
        if not ever_solved <= now:
            problems.append(f"{stage}: solved status lost for {sorted(ever_solved - now)}")
        ever_solved.update(now)

    for _ in range(n_ops):
        op = rng.random()
        if op < 0.6:
            open_ors = [v.id for v in tree.or_nodes if not v.solved]
            if not open_ors:
                continue
            parent = rng.choice(open_ors)
            product = tree.molecule(parent)
            reactants = rng.sample([x for x in alphabet if x != product], rng.randint(1, 3))
            depth = rng.randint(1, tree.d_max)
            try:
                tree.attach_and(ReactionStep(product, tuple(sorted(reactants))), parent, depth)
                inserted.update(reactants)
            except CycleError:
                pass
            check("attach")
        elif op < 0.85:
            before = set(tree.frontier)
            newly = tree.update_solved()
            ors, ands = brute_force_solved(tree)
            if ors != {v.id for v in tree.or_nodes if v.solved}:
                problems.append("update_solved: OR status differs from brute-force fixed point")
            if ands != {a.id for a in tree.and_nodes if a.solved}:
                problems.append("update_solved: AND status differs from brute-force fixed point")
            if newly & {m for m in ever_solved}:
                problems.append("update_solved: reported an already solved molecule")
            check("update")
            protected = unsolved_path_ands(tree)
            mid = set(tree.frontier)
            tree.prune_solved(newly)
            removed = (mid - tree.frontier) - {a.id for a in tree.and_nodes if a.solved}
            if removed & protected:
                problems.append(f"prune: removed live frontier nodes {sorted(removed & protected)}")
            if not tree.frontier <= before:
                problems.append("prune: frontier grew")
            check("prune")
        else:
            if tree.frontier:
                tree.mark_non_expandable(rng.choice(sorted(tree.frontier)))
            check("mark")
    return problems


def mapping_mismatch(seed: int) -> str | None:
    """Map one random pathway onto a random pre-grown tree and compare with the reference."""
    from retroplan.mapping import map_pathway
    from retroplan.routes import Pathway, ReactionStep
    from retroplan.tree import AndOrTree

    rng = random.Random(seed)
    alphabet = [f"m{i}" for i in range(10)]
    inventory = frozenset(x for x in alphabet[1:] if rng.random() < 0.3)
    tree = AndOrTree(alphabet[0], inventory, d_max=64)
    # grow a little first so duplicates, solved products and cycles all occur
    for product, reactants in random_pathway_steps(rng, alphabet, alphabet[0], max_steps=3):
        base = rng.randint(0, 2)
        map_pathway(tree, Pathway((ReactionStep(product, reactants),)), base)
    tree.update_solved()
    ref = ReferenceTree.snapshot(tree)
    steps = random_pathway_steps(rng, alphabet, rng.choice(ref.order), max_steps=6)
    base = rng.randint(0, 5)
    map_pathway(tree, Pathway(tuple(ReactionStep(p, r) for p, r in steps)), base)
    ref.apply(steps, base)
    if [v.molecule for v in tree.or_nodes] != ref.order:
        return f"seed {seed}: node sets differ"
    if tree_edge_set(tree) != ref.edge_set():
        return f"seed {seed}: edges differ"
    if len(tree.and_nodes) != len(ref.ands):
        return f"seed {seed}: AND count differs"
    return None


# ---------------------------------------------------------------- search

def random_valued_tree(seed: int, n_steps: int = 14):
    """A random tree with arbitrary values, visit counts and expandability."""
    from retroplan.routes import ReactionStep
    from retroplan.tree import AndOrTree, CycleError

    rng = random.Random(seed)
    alphabet = [f"m{i}" for i in range(12)]
    inventory = frozenset(x for x in alphabet[1:] if rng.random() < 0.3)
    tree = AndOrTree(alphabet[0], inventory, d_max=rng.randint(2, 6))
    for _ in range(n_steps):
        open_ors = [v.id for v in tree.or_nodes if not v.solved]
        if not open_ors:
            break
        parent = rng.choice(open_ors)
        product = tree.molecule(parent)
        reactants = rng.sample([x for x in alphabet if x != product], rng.randint(1, 3))
        try:
            aid = tree.attach_and(ReactionStep(product, tuple(sorted(reactants))), parent,
                                  rng.randint(1, tree.d_max))
        except CycleError:
            continue
        a = tree.and_nodes[aid]
        # coarse values make exact ties likely, exercising the tie-break
        a.value = rng.choice([0.0, 0.25, 0.5, 0.75, 1.0, rng.random()])
        a.visits = rng.randint(1, 6)
        if rng.random() < 0.1:
            tree.mark_non_expandable(aid)
    tree.prune_solved(tree.update_solved())
    return tree


def path_ancestors(tree, and_id: int) -> set[int]:
    """AND nodes above ``and_id`` found by walking parent links breadth first."""
    out: set[int] = set()
    queue = [tree.and_nodes[and_id].parent]
    seen_or: set[int] = set()
    while queue:
        v = queue.pop()
        if v in seen_or:
            continue
        seen_or.add(v)
        for p in tree.or_nodes[v].parents:
            if p not in out:
                out.add(p)
                queue.append(tree.and_nodes[p].parent)
    return out


def reward_histories(trace) -> dict[int, list[float]]:
    """Per-AND list of every reward it absorbed, rebuilt from the iteration trace."""
    hist: dict[int, list[float]] = {}
    for rec in trace:
        for aid, r in rec.rewards.items():
            hist.setdefault(aid, []).append(r)
        for aid, r in rec.updates:
            hist.setdefault(aid, []).append(r)
    return hist


def mean_mismatches(tree, trace, tol: float = 1e-9) -> list[int]:
    hist = reward_histories(trace)
    bad = []
    for a in tree.and_nodes:
        h = hist.get(a.id, [])
        if len(h) != a.visits or abs(math.fsum(h) / len(h) - a.value) > tol:
            bad.append(a.id)
    return bad


def check_solution(route, inventory, tree) -> list[str]:
    """Independent checker: leaves purchasable, every edge an attached reaction."""
    edges = {(a.reaction.product, a.reaction.reactant_set) for a in tree.and_nodes}
    problems = []

    def walk(node):
        if not node.children:
            if node.molecule not in inventory:
                problems.append(f"leaf {node.molecule} not purchasable")
            return
        kids = frozenset(c.molecule for c in node.children)
        if (node.molecule, kids) not in edges:
            problems.append(f"edge {node.molecule} -> {sorted(kids)} not in tree")
        for c in node.children:
            walk(c)

    walk(route)
    return problems


# ---------------------------------------------------------------- retrieval

def jaccard(a: frozenset, b: frozenset) -> float:
    union = len(a | b)
    return 1.0 if union == 0 else len(a & b) / union


def brute_force_top_k(query_features: frozenset, records, k: int):
    scored = sorted(records, key=lambda r: (-jaccard(query_features, r.fingerprint.features), r.source_id))
    return scored[:k]


def random_feature_index(seed: int, n_records: int, universe: int = 64):
    """Index of ``n_records`` synthetic records with random feature sets over a small universe.

    A small universe makes equal similarities common, so the tie-break is exercised.
    Returns the index and a dict of query name to feature set.
    """
    from retroplan.chem.fingerprint import Fingerprint
    from retroplan.retrieval import RouteIndex, RouteRecord
    from retroplan.routes import ReactionStep

    rng = random.Random(seed)

    def feats():
        return frozenset(rng.sample(range(universe), rng.randint(1, 12)))

    ids = rng.sample(range(10 * n_records), n_records)
    records = [RouteRecord(f"t{i}", (ReactionStep(f"t{i}", (f"r{i}",)),), Fingerprint(feats(), 2), sid)
               for i, sid in enumerate(ids)]
    queries = {f"q{j}": feats() for j in range(20)}
    for j, rec in enumerate(records[:5]):
        queries[f"dup{j}"] = rec.fingerprint.features
    index = RouteIndex(records, featurizer=lambda name: Fingerprint(queries[name], 2))
    return index, queries


def retrieval_mismatches(seed: int, n_records: int, ks=(1, 3, 5, 10)) -> int:
    index, queries = random_feature_index(seed, n_records)
    bad = 0
    for name, feats in queries.items():
        for k in ks:
            got = [r.source_id for r in index.retrieve(name, k)]
            want = [r.source_id for r in brute_force_top_k(feats, index.records, k)]
            bad += got != want
    return bad

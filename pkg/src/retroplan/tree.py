"""AND-OR search tree arena.

OR nodes are molecules (one per canonical key), AND nodes are reactions.
Nodes are never removed during a search; only frontier membership changes.
Shared intermediates give an OR node several parent AND nodes, so the
structure is a DAG over a tree skeleton. Cycles are refused at attach time.
"""

from __future__ import annotations

from collections.abc import Container, Iterable
from dataclasses import dataclass, field

from retroplan.routes import ReactionStep

DEFAULT_MAX_DEPTH = 16


class CycleError(ValueError):
    """A reaction step would make a molecule its own precursor."""


@dataclass
class OrNode:
    id: int
    molecule: str
    solved: bool = False
    in_inventory: bool = False
    children: list[int] = field(default_factory=list)
    parents: list[int] = field(default_factory=list)
    generation_attempts: int = 0


@dataclass
class AndNode:
    id: int
    reaction: ReactionStep
    parent: int
    children: list[int] = field(default_factory=list)
    value: float = 0.0
    visits: int = 1
    depth: int = 1
    solved: bool = False
    expandable: bool = True
    failures: int = 0


class AndOrTree:
    def __init__(self, target: str, inventory: Container[str] = frozenset(),
                 d_max: int = DEFAULT_MAX_DEPTH):
        if d_max < 1:
            raise ValueError("d_max must be >= 1")
        self.inventory = inventory
        self.d_max = d_max
        self.or_nodes: list[OrNode] = []
        self.and_nodes: list[AndNode] = []
        self.index: dict[str, int] = {}
        self.frontier: set[int] = set()
        self.root = self.insert_or(target)

    def __repr__(self):
        return (f"AndOrTree(root={self.molecule(self.root)!r}, or={len(self.or_nodes)}, "
                f"and={len(self.and_nodes)}, frontier={len(self.frontier)})")

    @property
    def target(self) -> str:
        return self.or_nodes[self.root].molecule

    @property
    def solved(self) -> bool:
        return self.or_nodes[self.root].solved

    def molecule(self, or_id: int) -> str:
        return self.or_nodes[or_id].molecule

    def node_for(self, molecule: str) -> OrNode | None:
        idx = self.index.get(molecule)
        return None if idx is None else self.or_nodes[idx]

    def insert_or(self, molecule: str, in_inventory: bool | None = None) -> int:
        """Return the OR id for ``molecule``, creating it on first sight."""
        existing = self.index.get(molecule)
        if existing is not None:
            return existing
        if in_inventory is None:
            in_inventory = molecule in self.inventory
        node = OrNode(len(self.or_nodes), molecule, solved=in_inventory, in_inventory=in_inventory)
        self.or_nodes.append(node)
        self.index[molecule] = node.id
        return node.id

    def ancestor_or_ids(self, or_id: int) -> set[int]:
        """``or_id`` plus every OR node reachable by walking up parent links."""
        seen = {or_id}
        stack = [or_id]
        while stack:
            for a in self.or_nodes[stack.pop()].parents:
                p = self.and_nodes[a].parent
                if p not in seen:
                    seen.add(p)
                    stack.append(p)
        return seen

    def ancestors(self, and_id: int) -> list[int]:
        """AND nodes strictly above ``and_id``, in id order."""
        seen: set[int] = set()
        stack = [self.and_nodes[and_id].parent]
        visited_or = set(stack)
        while stack:
            for a in self.or_nodes[stack.pop()].parents:
                if a not in seen:
                    seen.add(a)
                    p = self.and_nodes[a].parent
                    if p not in visited_or:
                        visited_or.add(p)
                        stack.append(p)
        return sorted(seen)

    def find_duplicate(self, parent: int, reactants: Iterable[str]) -> int | None:
        """An existing AND under ``parent`` with exactly these reactants, if any."""
        wanted = frozenset(reactants)
        for a in self.or_nodes[parent].children:
            if self.and_nodes[a].reaction.reactant_set == wanted:
                return a
        return None

    def attach_and(self, step: ReactionStep, parent: int, depth: int) -> int:
        """Create an AND node for ``step`` under OR node ``parent``.

        Reactant OR nodes are created or linked. The new node enters the
        frontier when it has an unsolved reactant and ``depth < d_max``.

        Raises:
            ValueError: if ``step.product`` is not the parent's molecule.
            CycleError: if a reactant is the parent or one of its ancestors.
        """
        pnode = self.or_nodes[parent]
        if step.product != pnode.molecule:
            raise ValueError(f"step product {step.product!r} does not match OR node {pnode.molecule!r}")
        above = self.ancestor_or_ids(parent)
        for r in step.reactants:
            rid = self.index.get(r)
            if r == step.product or (rid is not None and rid in above):
                raise CycleError(f"reactant {r!r} is an ancestor of {step.product!r}")

        node = AndNode(len(self.and_nodes), step, parent, depth=depth)
        self.and_nodes.append(node)
        pnode.children.append(node.id)
        for r in step.reactants:
            rid = self.insert_or(r)
            if rid not in node.children:
                node.children.append(rid)
                self.or_nodes[rid].parents.append(node.id)
        if self.has_unsolved_reactant(node.id) and depth < self.d_max:
            self.frontier.add(node.id)
        return node.id

    def has_unsolved_reactant(self, and_id: int) -> bool:
        return any(not self.or_nodes[c].solved for c in self.and_nodes[and_id].children)

    def unsolved_reactants(self, and_id: int) -> list[int]:
        return [c for c in self.and_nodes[and_id].children
                if not self.or_nodes[c].solved and not self.or_nodes[c].in_inventory]

    def update_solved(self, inventory: Container[str] | None = None) -> set[str]:
        """Propagate solved status to a fixed point.

        An OR node is solved when its molecule is purchasable or any child
        reaction is solved; an AND node when all its reactants are solved.
        Newly solved AND nodes leave the frontier. Returns the molecules whose
        status flipped during this call.
        """
        newly: set[str] = set()
        or_queue: list[int] = []
        and_queue: list[int] = []
        for node in self.or_nodes:
            if node.solved:
                continue
            if inventory is not None and node.molecule in inventory:
                node.in_inventory = True
            if node.in_inventory or any(self.and_nodes[a].solved for a in node.children):
                or_queue.append(node.id)
        for node in self.and_nodes:
            if not node.solved and all(self.or_nodes[c].solved for c in node.children):
                and_queue.append(node.id)

        while or_queue or and_queue:
            while and_queue:
                a = self.and_nodes[and_queue.pop()]
                if a.solved:
                    continue
                a.solved = True
                self.frontier.discard(a.id)
                if not self.or_nodes[a.parent].solved:
                    or_queue.append(a.parent)
            while or_queue:
                v = self.or_nodes[or_queue.pop()]
                if v.solved:
                    continue
                v.solved = True
                newly.add(v.molecule)
                for p in v.parents:
                    pa = self.and_nodes[p]
                    if not pa.solved and all(self.or_nodes[c].solved for c in pa.children):
                        and_queue.append(p)
        return newly

    def prune_solved(self, newly_solved: Iterable[str]) -> set[int]:
        """Drop reactions under newly solved molecules from the frontier.

        Descends through reactants whose parent reactions are all solved;
        nodes stay in the arena. Returns the updated frontier.
        """
        done: set[int] = set()

        def prune_below(a: int):
            stack = [a]
            while stack:
                cur = stack.pop()
                if cur in done:
                    continue
                done.add(cur)
                for v in self.and_nodes[cur].children:
                    vnode = self.or_nodes[v]
                    if all(self.and_nodes[p].solved for p in vnode.parents):
                        for child in vnode.children:
                            self.frontier.discard(child)
                            stack.append(child)

        for m in sorted(newly_solved):
            v = self.index.get(m)
            if v is None:
                continue
            for a in self.or_nodes[v].children:
                self.frontier.discard(a)
                prune_below(a)
        self.frontier -= {a for a in self.frontier if self.and_nodes[a].solved}
        return self.frontier

    def expandable_leaves(self, d_max: int | None = None) -> set[int]:
        limit = self.d_max if d_max is None else d_max
        return {
            a for a in self.frontier
            if self.and_nodes[a].expandable
            and self.and_nodes[a].depth < limit
            and self.unsolved_reactants(a)
        }

    def mark_non_expandable(self, and_id: int):
        self.and_nodes[and_id].expandable = False
        self.frontier.discard(and_id)

    def sibling_visits(self, and_id: int) -> int:
        parent = self.or_nodes[self.and_nodes[and_id].parent]
        return sum(self.and_nodes[a].visits for a in parent.children)

    def check_invariants(self):
        """Full consistency scan; raises AssertionError on the first violation."""
        assert len(self.index) == len(self.or_nodes)
        for mol, idx in self.index.items():
            assert self.or_nodes[idx].molecule == mol
        for v in self.or_nodes:
            if v.in_inventory:
                assert v.solved, f"inventory molecule {v.molecule} not solved"
        for a in self.and_nodes:
            assert 0.0 <= a.value <= 1.0 and a.visits >= 1
            if a.solved:
                assert all(self.or_nodes[c].solved for c in a.children)
        for a in self.frontier:
            node = self.and_nodes[a]
            assert node.expandable and node.depth < self.d_max and not node.solved
            assert self.has_unsolved_reactant(a), f"frontier AND {a} has no unsolved reactant"

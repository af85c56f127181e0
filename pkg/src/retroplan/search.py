"""AND-OR tree search that grows the tree from whole generated routes.

Each iteration selects the frontier reaction with the best UCB score, asks
the generator for complete pathways from its least-attempted unsolved
reactant, maps them onto the tree, scores the new reactions and propagates
values and solved status upward.
"""

from __future__ import annotations

import enum
import logging
import math
import time
from collections.abc import Container
from dataclasses import dataclass, field
from typing import Callable, Sequence

from retroplan.chem.canon import canonical_smiles
from retroplan.chem.complexity import SC_MAX, SC_MIN, ComplexityScorer, smiles_complexity
from retroplan.chem.fingerprint import hash_ints
from retroplan.generator.base import GenerationError, GenerationResponse, TokenUsage
from retroplan.generator.prompt import PromptConfig
from retroplan.mapping import Canonicalizer, EmptyPathwayError, map_pathway, normalize_pathway
from retroplan.routes import ReactionStep
from retroplan.tree import DEFAULT_MAX_DEPTH, AndNode, AndOrTree
from retroplan.validate import PathwayOutcome

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class SearchConfig:
    c: float = 0.5
    alpha: float = 0.4
    d_max: int = DEFAULT_MAX_DEPTH
    max_iterations: int = 100
    rag_k: int = 3
    failure_threshold: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.c < 0:
            raise ValueError("c must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.d_max < 1:
            raise ValueError("d_max must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")
        if self.rag_k < 0:
            raise ValueError("rag_k must be >= 0")
        if self.failure_threshold < 1:
            raise ValueError("failure_threshold must be >= 1")


class Status(str, enum.Enum):
    SOLVED = "solved"
    BUDGET_EXHAUSTED = "budget_exhausted"
    SPACE_EXHAUSTED = "space_exhausted"


@dataclass
class IterationRecord:
    iteration: int  # 0 is the initial expansion of the target
    selected: int | None  # None when the target itself was expanded
    target: str
    routes: int
    mapped: int
    rewards: dict[int, float]
    updates: list[tuple[int, float]]  # every (AND id, reward) applied by backpropagation
    solved: bool
    input_tokens: int = 0
    output_tokens: int = 0
    wall_time: float = 0.0
    diagnostics: tuple[str, ...] = ()

    def to_dict(self, with_time: bool = True) -> dict:
        d = {
            "iteration": self.iteration,
            "selected": self.selected,
            "target": self.target,
            "routes": self.routes,
            "mapped": self.mapped,
            "rewards": {str(k): v for k, v in self.rewards.items()},
            "updates": [list(u) for u in self.updates],
            "solved": self.solved,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "diagnostics": list(self.diagnostics),
        }
        if with_time:
            d["wall_time"] = self.wall_time
        return d


@dataclass
class RouteNode:
    """A molecule in an extracted route, with the reaction chosen to make it."""

    molecule: str
    in_inventory: bool = False
    reaction: ReactionStep | None = None
    value: float | None = None
    children: list["RouteNode"] = field(default_factory=list)
    unsolved: bool = False

    def leaves(self) -> list["RouteNode"]:
        if not self.children:
            return [self]
        out = []
        for c in self.children:
            out.extend(c.leaves())
        return out

    def steps(self) -> list[ReactionStep]:
        out = [self.reaction] if self.reaction is not None else []
        for c in self.children:
            out.extend(c.steps())
        return out

    def to_dict(self) -> dict:
        d: dict = {"molecule": self.molecule, "in_inventory": self.in_inventory}
        if self.reaction is not None:
            d["reactants"] = list(self.reaction.reactants)
            d["value"] = self.value
        if self.unsolved:
            d["unsolved"] = True
        if self.children:
            d["children"] = [c.to_dict() for c in self.children]
        return d


@dataclass
class SearchResult:
    status: Status
    iterations_used: int
    solution: RouteNode | None
    partial: RouteNode | None
    trace: list[IterationRecord]
    tree: AndOrTree
    usage: TokenUsage = TokenUsage()
    wall_time: float = 0.0

    @property
    def solved(self) -> bool:
        return self.status is Status.SOLVED

    @property
    def route_length(self) -> int | None:
        return len(self.solution.steps()) if self.solution else None


def ucb(a: AndNode, n_parent: int, c: float) -> float:
    """``v + c * sqrt(ln(N_parent) / n)``."""
    return a.value + c * math.sqrt(math.log(n_parent) / a.visits)


def _selection_key(tree: AndOrTree, aid: int, c: float):
    a = tree.and_nodes[aid]
    return (-ucb(a, tree.sibling_visits(aid), c), a.depth, a.reaction.product, aid)


def select(tree: AndOrTree, config: SearchConfig) -> int | None:
    """Frontier AND with maximal UCB; ties go to lower depth, then smaller product key."""
    leaves = tree.expandable_leaves(config.d_max)
    if not leaves:
        return None
    return min(leaves, key=lambda aid: _selection_key(tree, aid, config.c))


def select_target_molecule(tree: AndOrTree, and_id: int) -> int:
    """The unsolved reactant expanded least often, ties to the smaller key."""
    options = tree.unsolved_reactants(and_id)
    if not options:
        raise RuntimeError(f"AND node {and_id} has no unsolved reactant; frontier is corrupt")
    return min(options, key=lambda v: (tree.or_nodes[v].generation_attempts, tree.or_nodes[v].molecule))


def chem_score(sc: float) -> float:
    return min(1.0, max(0.0, (SC_MAX - sc) / (SC_MAX - SC_MIN)))


def evaluate_reward(a: AndNode, inventory: Container[str], scorer: ComplexityScorer,
                    alpha: float) -> float:
    """``alpha * f_avail + (1 - alpha) * f_chem`` over the reaction's reactants."""
    reactants = list(dict.fromkeys(a.reaction.reactants))
    buyable = [r in inventory for r in reactants]
    f_avail = sum(buyable) / len(reactants)
    rest = [r for r, b in zip(reactants, buyable) if not b]
    f_chem = sum(chem_score(scorer(r)) for r in rest) / len(rest) if rest else 1.0
    return alpha * f_avail + (1 - alpha) * f_chem


def _mean_update(a: AndNode, reward: float):
    a.value = (a.visits * a.value + reward) / (a.visits + 1)
    a.visits += 1


def backpropagate(tree: AndOrTree, leaf: int, reward: float) -> list[int]:
    """Fold ``reward`` into ``leaf`` and every AND above it; returns the touched ids."""
    if not 0.0 <= reward <= 1.0:
        raise ValueError("reward must lie in [0, 1]")
    touched = [leaf, *tree.ancestors(leaf)]
    for aid in touched:
        _mean_update(tree.and_nodes[aid], reward)
    return touched


def derive_seed(master: int, *parts: int) -> int:
    return hash_ints([master, *parts]) >> 1


def _best_and(tree: AndOrTree, ids, need_solved: bool) -> int | None:
    cands = [a for a in ids if tree.and_nodes[a].solved or not need_solved]
    if not cands:
        return None
    return min(cands, key=lambda a: (-tree.and_nodes[a].value, a))


def _solved_route(tree: AndOrTree, or_id: int) -> RouteNode:
    v = tree.or_nodes[or_id]
    if v.in_inventory:
        return RouteNode(v.molecule, True)
    aid = _best_and(tree, v.children, need_solved=True)
    if aid is None:
        raise RuntimeError(f"solved molecule {v.molecule} has no solved reaction")
    a = tree.and_nodes[aid]
    return RouteNode(v.molecule, False, a.reaction, a.value,
                     [_solved_route(tree, c) for c in a.children])


def extract_solution(tree: AndOrTree) -> RouteNode:
    """The solved route, choosing the highest-value solved reaction at each molecule."""
    if not tree.solved:
        raise ValueError("tree is not solved")
    return _solved_route(tree, tree.root)


def extract_partial(tree: AndOrTree) -> RouteNode:
    """Greedy max-value descent from the root; unsolved leaves are flagged."""
    if tree.solved:
        raise ValueError("tree is solved; use extract_solution")

    def walk(or_id: int) -> RouteNode:
        v = tree.or_nodes[or_id]
        if v.solved:
            return _solved_route(tree, or_id)
        aid = _best_and(tree, v.children, need_solved=False)
        if aid is None:
            return RouteNode(v.molecule, False, unsolved=True)
        a = tree.and_nodes[aid]
        return RouteNode(v.molecule, False, a.reaction, a.value, [walk(c) for c in a.children])

    return walk(tree.root)


class _Search:
    def __init__(self, tree, generator, retriever, validator, inventory, config, scorer,
                 canonicalizer, prompt_config):
        self.tree = tree
        self.generator = generator
        self.retriever = retriever
        self.validator = validator
        self.inventory = inventory
        self.config = config
        self.scorer = scorer
        self.canonicalizer = canonicalizer
        self.prompt_config = prompt_config
        self.trace: list[IterationRecord] = []
        self.usage = TokenUsage()
        self.root_failures = 0

    def _call(self, molecule: str, iteration: int) -> tuple[GenerationResponse, list[str]]:
        examples: Sequence = ()
        k = self.prompt_config.rag_k
        if self.retriever is not None and k > 0:
            examples = self.retriever.retrieve(molecule, k)
        seed = derive_seed(self.config.seed, iteration)
        try:
            return self.generator.generate(molecule, examples, self.prompt_config, seed=seed), []
        except GenerationError as exc:
            log.info("generation failed for %s: %s", molecule, exc)
            return GenerationResponse(), [f"generator: {exc}"]

    def expand(self, selected: int | None, or_id: int, iteration: int):
        t0 = time.perf_counter()
        tree, cfg = self.tree, self.config
        target = tree.or_nodes[or_id]
        target.generation_attempts += 1
        resp, diags = self._call(target.molecule, iteration)
        diags += list(resp.diagnostics)
        self.usage = self.usage + resp.usage

        base_depth = tree.and_nodes[selected].depth if selected is not None else 0
        added: list[int] = []
        refreshed: list[int] = []
        for i, raw in enumerate(resp.pathways, start=1):
            try:
                p = normalize_pathway(raw, self.canonicalizer)
            except EmptyPathwayError as exc:
                diags.append(f"route {i}: {exc}")
                continue
            if self.validator is not None:
                checked = self.validator.validate(p)
                if checked.outcome is PathwayOutcome.NONE:
                    diags.append(f"route {i}: no valid step")
                    continue
                p = checked.prefix
            res = map_pathway(tree, p, base_depth)
            added += res.added
            refreshed += res.refreshed
            if res.rejected_cycles:
                diags.append(f"route {i}: cyclic steps {res.rejected_cycles}")

        rewards: dict[int, float] = {}
        for aid in added:
            a = tree.and_nodes[aid]
            a.value = evaluate_reward(a, self.inventory, self.scorer, cfg.alpha)
            a.visits = 1
            rewards[aid] = a.value
        updates: list[tuple[int, float]] = []
        for aid in added:
            for ap in tree.ancestors(aid):
                _mean_update(tree.and_nodes[ap], rewards[aid])
                updates.append((ap, rewards[aid]))
        new = set(added)
        for aid in dict.fromkeys(refreshed):
            if aid in new:
                continue
            r = evaluate_reward(tree.and_nodes[aid], self.inventory, self.scorer, cfg.alpha)
            updates += [(x, r) for x in backpropagate(tree, aid, r)]

        if selected is None:
            self.root_failures = 0 if added else self.root_failures + 1
        else:
            a = tree.and_nodes[selected]
            a.failures = 0 if added else a.failures + 1
            if a.failures >= cfg.failure_threshold:
                tree.mark_non_expandable(selected)

        tree.prune_solved(tree.update_solved())
        self.trace.append(IterationRecord(
            iteration, selected, target.molecule, len(resp.pathways), len(added), rewards, updates,
            tree.solved, resp.usage.input_tokens, resp.usage.output_tokens,
            time.perf_counter() - t0, tuple(diags),
        ))


def run(target: str, generator, *, retriever=None, validator=None,
        inventory: Container[str] = frozenset(), config: SearchConfig = SearchConfig(),
        scorer: ComplexityScorer | None = None, canonicalizer: Canonicalizer = canonical_smiles,
        prompt_config: PromptConfig | None = None,
        on_iteration: Callable[[IterationRecord], None] | None = None) -> SearchResult:
    """Search for a route from ``target`` down to ``inventory`` molecules.

    ``iterations_used`` counts generator calls including the initial one,
    so a target solved by its first expansion reports 1 and a purchasable
    target reports 0. After the initial call at most ``max_iterations``
    further calls are made.
    """
    t0 = time.perf_counter()
    key = canonicalizer(target)
    tree = AndOrTree(key, inventory, config.d_max)
    if tree.solved:
        return SearchResult(Status.SOLVED, 0, extract_solution(tree), None, [], tree)
    pcfg = prompt_config or PromptConfig(rag_k=config.rag_k)
    s = _Search(tree, generator, retriever, validator, inventory, config,
                scorer or smiles_complexity, canonicalizer, pcfg)

    s.expand(None, tree.root, 0)
    if on_iteration:
        on_iteration(s.trace[-1])
    it = 0
    exhausted = False
    while not tree.solved and it < config.max_iterations:
        a = select(tree, config)
        if a is not None:
            v = select_target_molecule(tree, a)
        elif s.root_failures < config.failure_threshold:
            v = tree.root
        else:
            exhausted = True
            break
        it += 1
        s.expand(a, v, it)
        if on_iteration:
            on_iteration(s.trace[-1])

    if tree.solved:
        status = Status.SOLVED
    elif exhausted:
        status = Status.SPACE_EXHAUSTED
    else:
        status = Status.BUDGET_EXHAUSTED
    solution = extract_solution(tree) if tree.solved else None
    partial = None if tree.solved else extract_partial(tree)
    return SearchResult(status, 1 + it, solution, partial, s.trace, tree, s.usage,
                        time.perf_counter() - t0)

"""A synthetic planning world over string tokens.

Every target ``T<i>`` has one ground-truth route of known depth ``d``: level
``j`` splits ``T<i>_<j>`` into the next intermediate plus ``branching - 1``
building blocks, and the last level yields building blocks only. A grammar
generator returns the true route with probability ``quality`` per proposed
route and otherwise a corrupt route through a dead token that nothing can
make. This gives a controllable stand-in for a language model.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from retroplan.chem.complexity import SC_MAX, SC_MIN
from retroplan.chem.fingerprint import hash_ints, token_fingerprint
from retroplan.generator.base import GenerationResponse, TokenUsage, estimate_tokens
from retroplan.generator.mock import response_from_text
from retroplan.generator.prompt import PromptConfig, build_prompt
from retroplan.retrieval import RouteIndex, RouteRecord, route_block
from retroplan.routes import Pathway, ReactionStep
from retroplan.validate import ReactionDB, ReactionRecord

DEAD_PREFIX = "X"


def _level(target: str, j: int) -> str:
    return target if j == 0 else f"{target}_{j}"


def text_hash(text: str) -> int:
    return hash_ints(text.encode())


def remaining_depth(rules: Mapping[str, ReactionStep]) -> dict[str, int]:
    """Levels of reaction still needed below each molecule that has a rule."""
    memo: dict[str, int] = {}

    def depth(m: str) -> int:
        if m not in rules:
            return 0
        if m not in memo:
            memo[m] = 1 + max(depth(r) for r in rules[m].reactants)
        return memo[m]

    for m in rules:
        depth(m)
    return memo


class WorldScorer:
    """Complexity grows linearly with the remaining route depth; dead tokens score worst."""

    def __init__(self, rules: Mapping[str, ReactionStep], inventory: frozenset[str]):
        self.remaining = remaining_depth(rules)
        self.max_depth = max(self.remaining.values(), default=1)
        self.inventory = inventory

    def __call__(self, molecule: str) -> float:
        if molecule in self.inventory:
            return SC_MIN
        rem = self.remaining.get(molecule)
        if rem is None:
            return SC_MAX
        return SC_MIN + (SC_MAX - SC_MIN) * rem / self.max_depth


class GrammarGenerator:
    """Proposes ``routes_per_call`` routes, each true with probability ``quality``.

    A true route follows the ground truth from the queried molecule for
    ``horizon`` levels (all remaining levels when ``None``). Molecules without
    a rule get no routes. Output is rendered as ROUTE text and parsed back, so
    token counts and parsing behave as with a real model. Deterministic for a
    given ``seed``; safe to share across threads.
    """

    def __init__(self, rules: Mapping[str, ReactionStep], quality: float = 1.0,
                 routes_per_call: int = 3, horizon: int | None = 1,
                 building_blocks: Sequence[str] = ()):
        if not 0.0 <= quality <= 1.0:
            raise ValueError("quality must lie in [0, 1]")
        if routes_per_call < 1:
            raise ValueError("routes_per_call must be >= 1")
        if horizon is not None and horizon < 1:
            raise ValueError("horizon must be >= 1")
        self.rules = dict(rules)
        self.quality = quality
        self.routes_per_call = routes_per_call
        self.horizon = horizon
        self.building_blocks = tuple(sorted(building_blocks))
        self._lock = threading.Lock()
        self.calls = 0

    def true_steps(self, molecule: str, levels: int | None = None) -> list[ReactionStep]:
        steps = []
        frontier = [molecule]
        depth = 0
        while frontier and (levels is None or depth < levels):
            nxt = []
            for m in frontier:
                rule = self.rules.get(m)
                if rule is not None:
                    steps.append(rule)
                    nxt.extend(r for r in rule.reactants if r in self.rules)
            frontier = nxt
            depth += 1
        return steps

    def _corrupt(self, molecule: str, rng: random.Random) -> list[ReactionStep]:
        dead = f"{DEAD_PREFIX}{rng.getrandbits(40):010x}"
        reactants = [dead]
        if self.building_blocks:
            reactants.append(rng.choice(self.building_blocks))
        return [ReactionStep(molecule, tuple(sorted(reactants)))]

    def generate(self, molecule: str, examples: Sequence = (), cfg: PromptConfig | None = None,
                 seed: int | None = None) -> GenerationResponse:
        with self._lock:
            self.calls += 1
        cfg = cfg or PromptConfig()
        rng = random.Random(hash_ints([seed or 0, text_hash(molecule)]))
        prompt_tokens = estimate_tokens(build_prompt(molecule, examples, cfg))
        if molecule not in self.rules:
            return GenerationResponse(usage=TokenUsage(prompt_tokens, 0))
        blocks = []
        for _ in range(self.routes_per_call):
            if rng.random() < self.quality:
                steps = self.true_steps(molecule, self.horizon)
            else:
                steps = self._corrupt(molecule, rng)
            blocks.append(route_block(molecule, steps))
        text = "\n\n".join(blocks)
        return response_from_text(text, TokenUsage(prompt_tokens, estimate_tokens(text)))


@dataclass
class SyntheticWorld:
    targets: list[str]
    depths: dict[str, int]
    inventory: frozenset[str]
    rules: dict[str, ReactionStep]
    route_index: RouteIndex
    reaction_db: ReactionDB
    generator: GrammarGenerator
    scorer: WorldScorer = field(repr=False)

    def true_route(self, target: str) -> Pathway:
        return Pathway(tuple(self.generator.true_steps(target)), provenance="ground truth")

    def save(self, out_dir: str | Path):
        """Write targets, inventory, route database and reaction rules as plain files."""
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "targets.txt").write_text("".join(f"{t}\n" for t in self.targets))
        (out / "inventory.txt").write_text("".join(f"{m}\n" for m in sorted(self.inventory)))
        with open(out / "routes.jsonl", "w") as fh:
            for rec in self.route_index.records:
                fh.write(json.dumps({"source_id": rec.source_id, "target": rec.target,
                                     "route": [s.to_dict() for s in rec.route]}) + "\n")
        with open(out / "reactions.jsonl", "w") as fh:
            for i, m in enumerate(sorted(self.rules)):
                fh.write(json.dumps({"source_id": i, **self.rules[m].to_dict()}) + "\n")


def _chain(target: str, depth: int, branching: int, bb_prefix: str) -> dict[str, ReactionStep]:
    rules = {}
    for j in range(depth):
        product = _level(target, j)
        bbs = [f"{bb_prefix}_{j}_{b}" for b in range(branching - 1 if j < depth - 1 else branching)]
        reactants = bbs + ([_level(target, j + 1)] if j < depth - 1 else [])
        rules[product] = ReactionStep(product, tuple(sorted(reactants)))
    return rules


def world_from_rules(targets: Sequence[str], rules: Mapping[str, ReactionStep], inventory: frozenset[str],
                     quality: float = 1.0, routes_per_call: int = 3, horizon: int | None = 1,
                     route_records: Sequence[RouteRecord] = ()) -> SyntheticWorld:
    rules = dict(rules)
    depth_of = remaining_depth(rules)
    db = ReactionDB(
        [ReactionRecord(m, rules[m].reactant_set, token_fingerprint(m), i)
         for i, m in enumerate(sorted(rules))],
        featurizer=token_fingerprint,
    )
    return SyntheticWorld(
        list(targets), {t: depth_of.get(t, 0) for t in targets}, frozenset(inventory), rules,
        RouteIndex(route_records, featurizer=token_fingerprint), db,
        GrammarGenerator(rules, quality, routes_per_call, horizon, sorted(inventory)),
        WorldScorer(rules, frozenset(inventory)),
    )


def make_synthetic_world(seed: int = 0, n_targets: int = 50, depth: int = 4, branching: int = 2,
                         quality: float = 1.0, routes_per_call: int = 3, horizon: int | None = 1,
                         min_depth: int | None = None, n_reference: int = 20) -> SyntheticWorld:
    """Build a world whose target depths are drawn from ``[min_depth, depth]``.

    ``min_depth`` defaults to ``depth``, giving every route exactly ``depth``
    levels. ``n_reference`` extra solved routes populate the route database
    used for retrieval; they are not benchmark targets.
    """
    if depth < 1 or branching < 1 or n_targets < 0:
        raise ValueError("depth and branching must be >= 1, n_targets >= 0")
    lo = depth if min_depth is None else min_depth
    if not 1 <= lo <= depth:
        raise ValueError("min_depth must lie in [1, depth]")
    rng = random.Random(seed)
    rules: dict[str, ReactionStep] = {}
    targets = []
    for i in range(n_targets):
        t = f"T{i}"
        targets.append(t)
        rules.update(_chain(t, rng.randint(lo, depth), branching, f"B{i}"))
    records = []
    ref_rules: dict[str, ReactionStep] = {}
    for i in range(n_reference):
        r = f"R{i}"
        chain = _chain(r, rng.randint(lo, depth), branching, f"C{i}")
        ref_rules.update(chain)
        records.append(RouteRecord(r, tuple(chain.values()), token_fingerprint(r), i))
    all_rules = {**rules, **ref_rules}
    inventory = frozenset(x for s in all_rules.values() for x in s.reactants if x not in all_rules)
    world = world_from_rules(targets, all_rules, inventory, quality, routes_per_call, horizon, records)
    return world


def load_world(directory: str | Path, quality: float = 1.0, routes_per_call: int = 3,
               horizon: int | None = 1) -> SyntheticWorld:
    """Rebuild a world written by :meth:`SyntheticWorld.save`."""
    d = Path(directory)
    targets = [ln.strip() for ln in (d / "targets.txt").read_text().splitlines() if ln.strip()]
    inventory = frozenset(ln.strip() for ln in (d / "inventory.txt").read_text().splitlines() if ln.strip())
    rules = {}
    with open(d / "reactions.jsonl") as fh:
        for line in fh:
            if line.strip():
                step = ReactionStep.from_dict(json.loads(line))
                rules[step.product] = step
    records = []
    routes = d / "routes.jsonl"
    if routes.exists():
        with open(routes) as fh:
            for line in fh:
                if line.strip():
                    row = json.loads(line)
                    records.append(RouteRecord(row["target"],
                                               tuple(ReactionStep.from_dict(s) for s in row["route"]),
                                               token_fingerprint(row["target"]), int(row["source_id"])))
    return world_from_rules(targets, rules, inventory, quality, routes_per_call, horizon, records)

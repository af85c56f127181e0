"""Prompt assembly with per-component ablation switches.

Components are emitted in a fixed order: role, task, target/examples, plan,
explanation, output format, field requirements. A disabled component leaves
no trace in the text.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from retroplan.retrieval import RouteRecord, format_examples

ROLE_TEXT = "Act as a senior process chemist who designs synthetic routes for a living."

TASK_TEXT = """\
Work backwards from the target (given as SMILES) until only molecules that can be bought remain.

Bookkeeping: keep a list of the molecules that still need a synthesis and call it the molecule set. It starts out as the target alone. Each step picks one member of the list that cannot be bought, names a known reaction that forms it, and swaps it for that reaction's starting materials. Starting materials that can be bought need no further work. The route is complete once nothing in the list needs making.

Use precedented chemistry, and keep every stereocentre and double-bond geometry exactly as written."""

SHORT_TASK_TEXT = "Plan how to make the target molecule from purchasable compounds."

EXAMPLES_HEADER = "Routes already worked out for related molecules follow; lay out your answer the same way."

PLAN_TEXT = ("Start with an outline: inside <PLAN></PLAN>, note the key disconnections you intend "
             "and the order in which you will make them.")

EXPLANATION_TEXT = "Then, inside <EXPLANATION></EXPLANATION>, argue why that outline is sound."

REQUIREMENTS_HEADER = "Rules:"


@dataclass(frozen=True)
class PromptConfig:
    include_role: bool = True
    include_task: bool = True
    include_plan: bool = True
    include_explanation: bool = True
    include_rational: bool = True
    include_reaction_field: bool = True
    simple_reaction_format: bool = False
    rag_k: int = 3
    temperature: float = 0.7
    max_tokens: int = 4096

    def __post_init__(self):
        if self.rag_k < 0:
            raise ValueError("rag_k must be >= 0")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens < 1:
            raise ValueError("max_tokens must be >= 1")

    @property
    def routes_requested(self) -> int:
        return max(1, self.rag_k)


def _target_block(molecule: str, examples: Sequence[RouteRecord], cfg: PromptConfig) -> str:
    parts = [f"Target molecule: {molecule}"]
    if cfg.rag_k > 0 and examples:
        parts.append(f"{EXAMPLES_HEADER}\n{format_examples(examples[:cfg.rag_k], cfg.include_reaction_field)}")
    n = cfg.routes_requested
    parts.append(f"Return {n} route{'s that differ from one another' if n > 1 else ''}.")
    return "\n\n".join(parts)


def _output_block(cfg: PromptConfig) -> str:
    reaction = ("'short name of the transformation'" if cfg.simple_reaction_format
                else "'product>>reactant1.reactant2'")
    fields = ["        'Molecule set': ['target SMILES'],"]
    if cfg.include_rational:
        fields.append("        'Rational': 'why this disconnection is chosen',")
    fields.append("        'Product': ['product SMILES'],")
    if cfg.include_reaction_field:
        fields.append(f"        'Reaction': [{reaction}],")
    fields.append("        'Reactants': ['reactant1 SMILES', 'reactant2 SMILES'],")
    fields.append("        'Updated molecule set': ['reactant1 SMILES', 'reactant2 SMILES']")
    body = "\n".join(["<ROUTE>", "[", "    {", *fields, "    }", "]", "</ROUTE>"])
    return ("Answer format: one <ROUTE></ROUTE> block per route. Inside it, a Python list with one "
            "dict per backward step, using exactly these keys:\n\n" + body)


def _requirements(cfg: PromptConfig) -> list[str]:
    reqs = ["'Molecule set': what is still unmade before this step; the target alone at step one, "
            "then a copy of the preceding 'Updated molecule set'."]
    if cfg.include_rational:
        reqs.append("'Rational': a quoted string with your chemical reasoning for the step.")
    reqs.append("'Product': a list with one quoted SMILES, chosen from 'Molecule set'.")
    if cfg.include_reaction_field:
        if cfg.simple_reaction_format:
            reqs.append("'Reaction': a list with one short quoted name for the transformation.")
        else:
            reqs.append("'Reaction': a list with one quoted string 'product>>reactants', all in SMILES.")
    reqs.append("'Reactants': a list of quoted SMILES, the starting materials of the step.")
    reqs.append("'Updated molecule set': 'Molecule set' minus the product plus the reactants. "
                "At the final step every entry must be purchasable.")
    if cfg.include_plan:
        reqs.append("<PLAN> covers the whole route, not just the first step.")
    if cfg.include_explanation:
        reqs.append("<EXPLANATION> defends the plan.")
    return reqs


def build_prompt(molecule: str, examples: Sequence[RouteRecord], cfg: PromptConfig) -> str:
    blocks: list[str] = []
    if cfg.include_role:
        blocks.append(ROLE_TEXT)
    blocks.append(TASK_TEXT if cfg.include_task else SHORT_TASK_TEXT)
    blocks.append(_target_block(molecule, examples, cfg))
    if cfg.include_plan:
        blocks.append(PLAN_TEXT)
    if cfg.include_explanation:
        blocks.append(EXPLANATION_TEXT)
    blocks.append(_output_block(cfg))
    numbered = "\n".join(f"{i}. {r}" for i, r in enumerate(_requirements(cfg), start=1))
    blocks.append(f"{REQUIREMENTS_HEADER}\n{numbered}")
    return "\n\n".join(blocks) + "\n"

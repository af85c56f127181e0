"""Reaction steps and multi-step pathways, the unit of generation and mapping."""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass(frozen=True)
class ReactionStep:
    """One backward reaction: ``product -> reactants``."""

    product: str
    reactants: tuple[str, ...]
    template: str | None = None

    def __post_init__(self):
        if not self.reactants:
            raise ValueError("a reaction step needs at least one reactant")

    @property
    def reactant_set(self) -> frozenset[str]:
        return frozenset(self.reactants)

    def to_dict(self) -> dict:
        d = {"product": self.product, "reactants": list(self.reactants)}
        if self.template is not None:
            d["template"] = self.template
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ReactionStep":
        reactants = d["reactants"]
        if isinstance(reactants, str):
            reactants = [r for r in reactants.split(".") if r]
        return cls(str(d["product"]), tuple(str(r) for r in reactants), d.get("template"))


@dataclass(frozen=True)
class Pathway:
    steps: tuple[ReactionStep, ...]
    provenance: str = ""
    diagnostics: tuple[str, ...] = field(default=(), compare=False)

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

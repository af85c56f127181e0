"""Generator boundary types shared by the prompt, HTTP and mock implementations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Protocol, Sequence

from retroplan.routes import Pathway


class GenerationError(RuntimeError):
    """A generator call produced nothing usable."""


class TransportError(GenerationError):
    """The remote endpoint could not be reached after all retries."""


class GeneratorExhausted(GenerationError):
    """A scripted generator ran out of responses (strict mode only)."""


@dataclass(frozen=True)
class TokenUsage:
    input_tokens: int = 0
    output_tokens: int = 0

    def __post_init__(self):
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token counts must be non-negative")

    def __add__(self, other: "TokenUsage") -> "TokenUsage":
        return TokenUsage(self.input_tokens + other.input_tokens,
                          self.output_tokens + other.output_tokens)


@dataclass(frozen=True)
class GenerationResponse:
    pathways: tuple[Pathway, ...] = ()
    usage: TokenUsage = TokenUsage()
    raw_text: str = ""
    diagnostics: tuple[str, ...] = ()


class Generator(Protocol):
    """Anything that proposes pathways for a molecule.

    Implementations must be safe to share between threads; mock
    implementations must be deterministic for a given ``seed``.
    """

    def generate(self, molecule: str, examples: Sequence, cfg, seed: int | None = None) -> GenerationResponse:
        ...


def estimate_tokens(text: str) -> int:
    """Rough token count used where no tokenizer is available."""
    return (len(text) + 3) // 4

from retroplan.generator.base import (
    GenerationError,
    GenerationResponse,
    Generator,
    GeneratorExhausted,
    TokenUsage,
    TransportError,
)
from retroplan.generator.mock import RuleGenerator, ScriptedGenerator
from retroplan.generator.parsing import NoRouteError, parse_route_blocks, parse_route_response
from retroplan.generator.prompt import PromptConfig, build_prompt

__all__ = [
    "GenerationError", "GenerationResponse", "Generator", "GeneratorExhausted", "TokenUsage",
    "TransportError", "RuleGenerator", "ScriptedGenerator", "NoRouteError",
    "parse_route_blocks", "parse_route_response", "PromptConfig", "build_prompt",
]

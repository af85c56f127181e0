"""JSON run configuration with CLI overrides.

Schema (every key optional)::

    {
      "search": {"c", "alpha", "d_max", "max_iterations", "rag_k", "failure_threshold", "seed"},
      "prompt": {"include_role", "include_task", "include_plan", "include_explanation",
                 "include_rational", "include_reaction_field", "simple_reaction_format",
                 "temperature", "max_tokens"},
      "http":   {"endpoint", "model", "api_key_env", "timeout", "max_attempts",
                 "backoff_base", "requests_per_second", "burst"},
      "data":   {"inventory", "route_db", "reaction_db"},
      "parallelism": int,
      "thresholds": [int, ...]
    }
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from retroplan.generator.http import HttpConfig
from retroplan.generator.prompt import PromptConfig
from retroplan.harness.metrics import DEFAULT_THRESHOLDS
from retroplan.search import SearchConfig


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    search: SearchConfig = SearchConfig()
    prompt: PromptConfig = PromptConfig()
    http: HttpConfig = HttpConfig()
    data: dict = field(default_factory=dict)
    parallelism: int = 1
    thresholds: tuple[int, ...] = DEFAULT_THRESHOLDS

    def to_dict(self) -> dict:
        return {
            "search": asdict(self.search),
            "prompt": asdict(self.prompt),
            "http": asdict(self.http),
            "data": dict(self.data),
            "parallelism": self.parallelism,
            "thresholds": list(self.thresholds),
        }


def _build(cls, values: dict, section: str):
    if not isinstance(values, dict):
        raise ConfigError(f"'{section}' must be an object")
    known = {f.name for f in fields(cls)}
    unknown = set(values) - known
    if unknown:
        raise ConfigError(f"unknown keys in '{section}': {sorted(unknown)}")
    try:
        return cls(**values)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid '{section}': {exc}") from None


def config_from_dict(d: dict) -> RunConfig:
    unknown = set(d) - {"search", "prompt", "http", "data", "parallelism", "thresholds"}
    if unknown:
        raise ConfigError(f"unknown top-level keys: {sorted(unknown)}")
    search = _build(SearchConfig, d.get("search", {}), "search")
    prompt_vals = dict(d.get("prompt", {}))
    prompt_vals.setdefault("rag_k", search.rag_k)
    prompt = _build(PromptConfig, prompt_vals, "prompt")
    http = _build(HttpConfig, d.get("http", {}), "http")
    data = d.get("data", {})
    if not isinstance(data, dict):
        raise ConfigError("'data' must be an object")
    par = d.get("parallelism", 1)
    if not isinstance(par, int) or par < 1:
        raise ConfigError("parallelism must be a positive integer")
    th = d.get("thresholds", list(DEFAULT_THRESHOLDS))
    if not isinstance(th, list) or not all(isinstance(x, int) and x > 0 for x in th):
        raise ConfigError("thresholds must be a list of positive integers")
    return RunConfig(search, prompt, http, data, par, tuple(sorted(th)))


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(d, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(d)

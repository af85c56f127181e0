"""Concurrent execution of independent per-target searches."""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, Container, Sequence

from retroplan.chem.canon import canonical_smiles
from retroplan.chem.complexity import ComplexityScorer, smiles_complexity
from retroplan.chem.descriptors import smiles_molecular_weight
from retroplan.generator.prompt import PromptConfig
from retroplan.harness.records import RunRecord
from retroplan.search import SearchConfig, derive_seed, run

log = logging.getLogger(__name__)


@dataclass
class BenchDeps:
    """Shared read-only services handed to every search."""

    generator: object
    inventory: Container[str]
    retriever: object | None = None
    validator: object | None = None
    scorer: ComplexityScorer = smiles_complexity
    canonicalizer: Callable[[str], str] = canonical_smiles
    prompt_config: PromptConfig | None = None
    molecular_weight: Callable[[str], float | None] | None = smiles_molecular_weight


def run_one(index: int, target: str, deps: BenchDeps, config: SearchConfig) -> RunRecord:
    cfg = replace(config, seed=derive_seed(config.seed, index))
    try:
        sc = deps.scorer(target)
    except Exception:  # noqa: BLE001 - a bad scorer input must not sink the batch
        sc = float("nan")
    mw = deps.molecular_weight(target) if deps.molecular_weight else None
    try:
        res = run(target, deps.generator, retriever=deps.retriever, validator=deps.validator,
                  inventory=deps.inventory, config=cfg, scorer=deps.scorer,
                  canonicalizer=deps.canonicalizer, prompt_config=deps.prompt_config)
    except Exception as exc:  # noqa: BLE001 - recorded, never fatal
        log.warning("target %d (%s) failed: %s", index, target, exc)
        return RunRecord(target, "error", 0, 0.0, 0, 0, sc, None, mw, f"{type(exc).__name__}: {exc}")
    return RunRecord(target, res.status.value, res.iterations_used, res.wall_time,
                     res.usage.input_tokens, res.usage.output_tokens, sc, res.route_length, mw)


def run_benchmark(targets: Sequence[str], deps: BenchDeps, config: SearchConfig = SearchConfig(),
                  parallelism: int = 1) -> list[RunRecord]:
    """One independent search per target; output order follows ``targets``."""
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    if parallelism == 1:
        return [run_one(i, t, deps, config) for i, t in enumerate(targets)]
    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        futures = [pool.submit(run_one, i, t, deps, config) for i, t in enumerate(targets)]
        return [f.result() for f in futures]

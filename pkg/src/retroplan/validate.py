"""Checking generated reaction steps against a database of known reactions."""

from __future__ import annotations

import enum
import heapq
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable

from retroplan.chem.canon import canonical_smiles
from retroplan.chem.fingerprint import Fingerprint, tanimoto_sets
from retroplan.io import open_text
from retroplan.retrieval import Featurizer, smiles_featurizer
from retroplan.routes import Pathway, ReactionStep

log = logging.getLogger(__name__)

CANDIDATE_POOL = 100


class Verdict(enum.Enum):
    VALID = "valid"
    REPLACED = "replaced"
    INVALID = "invalid"


class PathwayOutcome(enum.Enum):
    FULL = "full"
    PARTIAL = "partial"
    NONE = "none"


@dataclass(frozen=True)
class ReactionRecord:
    product: str
    reactants: frozenset[str]
    fingerprint: Fingerprint
    source_id: int = 0


@dataclass(frozen=True)
class ValidationOutcome:
    verdict: Verdict
    step: ReactionStep


@dataclass(frozen=True)
class PathwayValidation:
    prefix: Pathway
    outcome: PathwayOutcome
    steps: tuple[ValidationOutcome, ...]


class ReactionDB:
    """Immutable reaction store with exact lookup and product-similarity search."""

    def __init__(self, records: Iterable[ReactionRecord], featurizer: Featurizer = smiles_featurizer,
                 skipped: int = 0, pool: int = CANDIDATE_POOL):
        self.records = tuple(records)
        self.featurizer = featurizer
        self.skipped = skipped
        self.pool = pool
        self._exact = {(r.product, r.reactants) for r in self.records}
        self._products = {r.product for r in self.records}

    def __len__(self) -> int:
        return len(self.records)

    def candidates(self, product: str) -> list[ReactionRecord]:
        """Up to ``pool`` records ranked by product similarity, ties by source id."""
        try:
            q = self.featurizer(product).features
        except ValueError:
            return []
        sims = [tanimoto_sets(q, r.fingerprint.features) for r in self.records]
        best = heapq.nsmallest(self.pool, range(len(self.records)),
                               key=lambda i: (-sims[i], self.records[i].source_id))
        return [self.records[i] for i in best]

    def validate(self, pathway: Pathway) -> "PathwayValidation":
        return validate_pathway(pathway, self)


def validate_step(step: ReactionStep, db: ReactionDB) -> ValidationOutcome:
    """``valid`` on an exact match, ``replaced`` by the closest same-product record, else ``invalid``."""
    if (step.product, step.reactant_set) in db._exact:
        return ValidationOutcome(Verdict.VALID, step)
    if step.product not in db._products:
        # no candidate could share the product, so skip the scan
        return ValidationOutcome(Verdict.INVALID, step)
    for rec in db.candidates(step.product):
        if rec.product == step.product:
            return ValidationOutcome(
                Verdict.REPLACED, ReactionStep(step.product, tuple(sorted(rec.reactants)))
            )
    return ValidationOutcome(Verdict.INVALID, step)


def validate_pathway(p: Pathway, db: ReactionDB) -> PathwayValidation:
    """Validate steps in order, truncating at the first invalid one."""
    kept: list[ReactionStep] = []
    outcomes: list[ValidationOutcome] = []
    for step in p.steps:
        out = validate_step(step, db)
        outcomes.append(out)
        if out.verdict is Verdict.INVALID:
            break
        kept.append(out.step)
    if not kept:
        outcome = PathwayOutcome.NONE
    elif len(kept) == len(p.steps):
        outcome = PathwayOutcome.FULL
    else:
        outcome = PathwayOutcome.PARTIAL
    prefix = Pathway(tuple(kept), p.provenance, p.diagnostics)
    return PathwayValidation(prefix, outcome, tuple(outcomes))


def build_reaction_db(rows: Iterable[dict], featurizer: Featurizer = smiles_featurizer,
                      canonicalizer: Callable[[str], str] = canonical_smiles) -> ReactionDB:
    """Records from ``{"product", "reactants"}`` dicts; malformed rows are counted and skipped."""
    records = []
    skipped = 0
    for pos, row in enumerate(rows):
        try:
            step = ReactionStep.from_dict(row)
            product = canonicalizer(step.product)
            reactants = frozenset(canonicalizer(r) for r in step.reactants)
            if product in reactants:
                raise ValueError("product among reactants")
            sid = int(row.get("source_id", pos))
            records.append(ReactionRecord(product, reactants, featurizer(product), sid))
        except (ValueError, KeyError, TypeError, AttributeError):
            skipped += 1
    if skipped:
        log.warning("skipped %d malformed reaction records", skipped)
    return ReactionDB(records, featurizer, skipped)


def load_reaction_db(path: str | Path, featurizer: Featurizer = smiles_featurizer) -> ReactionDB:
    rows = []
    bad = 0
    with open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError:
                bad += 1
                continue
            if isinstance(row, dict):
                row.setdefault("source_id", lineno)
                rows.append(row)
            else:
                bad += 1
    db = build_reaction_db(rows, featurizer)
    db.skipped += bad
    return db

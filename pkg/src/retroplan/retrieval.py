"""Route database and nearest-neighbour retrieval of example routes.

Similarity is Tanimoto over circular fingerprints of the route targets. The
scan is exact; at the sizes used here (up to ~1e5 routes) that is fast enough
and keeps results identical to a brute-force ranking.
"""

from __future__ import annotations

import heapq
import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator, Sequence

from retroplan.chem.canon import canonical_smiles
from retroplan.chem.fingerprint import Fingerprint, morgan_fingerprint, tanimoto_sets
from retroplan.chem.smiles import parse_smiles
from retroplan.io import open_text
from retroplan.routes import ReactionStep

log = logging.getLogger(__name__)

Featurizer = Callable[[str], Fingerprint]


def smiles_featurizer(smiles: str, radius: int = 2) -> Fingerprint:
    return morgan_fingerprint(parse_smiles(smiles), radius)


@dataclass(frozen=True)
class RouteRecord:
    target: str
    route: tuple[ReactionStep, ...]
    fingerprint: Fingerprint
    source_id: int = 0

    def to_dict(self) -> dict:
        return {
            "source_id": self.source_id,
            "target": self.target,
            "route": [s.to_dict() for s in self.route],
            "radius": self.fingerprint.radius,
            "features": sorted(self.fingerprint.features),
        }


def record_from_dict(d: dict, source_id: int, featurizer: Featurizer = smiles_featurizer,
                     canonicalizer: Callable[[str], str] = canonical_smiles) -> RouteRecord:
    """Build a record from ``{"target": ..., "route": [{"product", "reactants"}, ...]}``.

    Raises:
        ValueError/KeyError/TypeError on malformed input.
    """
    target = canonicalizer(d["target"])
    steps = []
    for s in d["route"]:
        step = ReactionStep.from_dict(s)
        steps.append(ReactionStep(
            canonicalizer(step.product),
            tuple(sorted({canonicalizer(r) for r in step.reactants})),
            step.template,
        ))
    if not steps:
        raise ValueError("route has no steps")
    return RouteRecord(target, tuple(steps), featurizer(target), source_id)


class RouteIndex:
    """Immutable collection of route records supporting exact top-k search."""

    def __init__(self, records: Sequence[RouteRecord], featurizer: Featurizer = smiles_featurizer,
                 skipped: int = 0):
        self.records = tuple(records)
        self.featurizer = featurizer
        self.skipped = skipped

    def __len__(self) -> int:
        return len(self.records)

    def similarities(self, query: str) -> list[float]:
        q = self.featurizer(query).features
        return [tanimoto_sets(q, r.fingerprint.features) for r in self.records]

    def retrieve(self, query: str, k: int) -> list[RouteRecord]:
        """The ``k`` records most similar to ``query``, best first.

        Ties go to the lower ``source_id``. An unparseable query yields no
        examples.
        """
        if k < 0:
            raise ValueError("k must be >= 0")
        if k == 0 or not self.records:
            return []
        try:
            sims = self.similarities(query)
        except ValueError:
            return []
        best = heapq.nsmallest(
            k, range(len(self.records)),
            key=lambda i: (-sims[i], self.records[i].source_id),
        )
        return [self.records[i] for i in best]


def build_index(records: Iterable[RouteRecord | dict], featurizer: Featurizer = smiles_featurizer,
                canonicalizer: Callable[[str], str] = canonical_smiles) -> RouteIndex:
    """Index records; raw dicts are canonicalised, malformed ones are counted and skipped."""
    kept: list[RouteRecord] = []
    skipped = 0
    for pos, rec in enumerate(records):
        if isinstance(rec, RouteRecord):
            kept.append(rec)
            continue
        try:
            sid = int(rec.get("source_id", pos))
            kept.append(record_from_dict(rec, sid, featurizer, canonicalizer))
        except (ValueError, KeyError, TypeError, AttributeError) as exc:
            skipped += 1
            log.debug("skipping route record %d: %s", pos, exc)
    if skipped:
        log.warning("skipped %d malformed route records", skipped)
    return RouteIndex(kept, featurizer, skipped)


def retrieve_top_k(index: RouteIndex, query: str, k: int) -> list[RouteRecord]:
    return index.retrieve(query, k)


def read_jsonl(path: str | Path) -> Iterator[dict]:
    """Yield JSON objects from a line-delimited file; bad lines become ``{"_bad": line}``."""
    with open_text(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError:
                yield {"_bad": lineno}
                continue
            if isinstance(obj, dict):
                obj.setdefault("source_id", lineno)
                yield obj
            else:
                yield {"_bad": lineno}


def load_route_db(path: str | Path, featurizer: Featurizer = smiles_featurizer) -> RouteIndex:
    """Load a route database (``{"target", "route"}`` per line) or a saved index."""
    rows = list(read_jsonl(path))
    if rows and all("features" in r for r in rows if "_bad" not in r):
        return load_index_rows(rows, featurizer)
    return build_index(rows, featurizer)


def save_index(index: RouteIndex, path: str | Path):
    """Persist records with their precomputed fingerprints."""
    with open(path, "w") as fh:
        for rec in index.records:
            fh.write(json.dumps(rec.to_dict(), separators=(",", ":")) + "\n")


def load_index_rows(rows: Iterable[dict], featurizer: Featurizer = smiles_featurizer) -> RouteIndex:
    kept = []
    skipped = 0
    for row in rows:
        try:
            kept.append(RouteRecord(
                row["target"],
                tuple(ReactionStep.from_dict(s) for s in row["route"]),
                Fingerprint(frozenset(int(f) for f in row["features"]), int(row["radius"])),
                int(row["source_id"]),
            ))
        except (KeyError, ValueError, TypeError):
            skipped += 1
    return RouteIndex(kept, featurizer, skipped)


def route_block(target: str, steps: Sequence[ReactionStep], include_reaction: bool = True) -> str:
    """One ``<ROUTE>`` block in the step-dictionary answer format."""
    molecule_set = [target]
    lines = ["<ROUTE>", "["]
    for step in steps:
        updated = [m for m in molecule_set if m != step.product]
        updated += [r for r in step.reactants if r not in updated]
        reaction = step.template or f"{step.product}>>{'.'.join(step.reactants)}"
        lines += ["    {",
                  f"        'Molecule set': {molecule_set!r},",
                  f"        'Product': {[step.product]!r},"]
        if include_reaction:
            lines.append(f"        'Reaction': {[reaction]!r},")
        lines += [f"        'Reactants': {list(step.reactants)!r},",
                  f"        'Updated molecule set': {updated!r}",
                  "    },"]
        molecule_set = updated
    lines += ["]", "</ROUTE>"]
    return "\n".join(lines)


def format_examples(records: Sequence[RouteRecord], include_reaction: bool = True) -> str:
    """Render routes in the same step-dictionary format the model must answer in."""
    return "\n\n".join(
        f"Example {i}:\n{route_block(rec.target, rec.route, include_reaction)}"
        for i, rec in enumerate(records, start=1)
    )

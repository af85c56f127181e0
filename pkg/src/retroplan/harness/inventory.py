"""Purchasable building-block sets."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Iterator

from retroplan.chem.canon import canonical_smiles
from retroplan.io import open_text

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Inventory:
    keys: frozenset[str]
    source: str = ""
    bad_lines: int = 0

    def __contains__(self, key: object) -> bool:
        return key in self.keys

    def __len__(self) -> int:
        return len(self.keys)

    def __iter__(self) -> Iterator[str]:
        return iter(sorted(self.keys))


def inventory_from_lines(lines: Iterable[str], canonicalizer: Callable[[str], str] = canonical_smiles,
                         source: str = "") -> Inventory:
    keys = set()
    bad = 0
    for line in lines:
        fields = line.split()
        if not fields or fields[0].startswith("#"):
            continue
        try:
            keys.add(canonicalizer(fields[0]))
        except ValueError:
            bad += 1
    if bad:
        log.warning("%s: %d unparseable inventory lines", source or "inventory", bad)
    return Inventory(frozenset(keys), source, bad)


def load_inventory(path: str | Path, canonicalizer: Callable[[str], str] = canonical_smiles) -> Inventory:
    """Read one molecule per line (first whitespace field), gzip allowed.

    Raises:
        OSError: when the file cannot be read.
    """
    with open_text(path) as fh:
        return inventory_from_lines(fh, canonicalizer, str(path))

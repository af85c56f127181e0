"""Small file helpers shared by the loaders."""

from __future__ import annotations

import gzip
import io
from pathlib import Path
from typing import TextIO


def open_text(path: str | Path) -> TextIO:
    """Open a text file for reading, transparently decompressing ``.gz``."""
    path = Path(path)
    if path.suffix == ".gz":
        return io.TextIOWrapper(gzip.open(path, "rb"), encoding="utf-8")
    return open(path, encoding="utf-8")

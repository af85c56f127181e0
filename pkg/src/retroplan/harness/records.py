"""Per-target run records and the line-delimited run log."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Iterable

LOG_VERSION = 1


@dataclass
class RunRecord:
    target: str
    status: str
    iterations_used: int
    wall_time: float
    input_tokens: int
    output_tokens: int
    complexity: float
    route_length: int | None = None
    molecular_weight: float | None = None
    error: str | None = None

    def __post_init__(self):
        if self.iterations_used < 0:
            raise ValueError("iterations_used must be >= 0")
        if self.input_tokens < 0 or self.output_tokens < 0:
            raise ValueError("token totals must be >= 0")

    @property
    def solved(self) -> bool:
        return self.status == "solved"

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in d.items() if k in names})


def write_run_log(path: str | Path, records: Iterable[RunRecord], config: dict):
    """Header line echoing ``config`` followed by one record per line."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"log_version": LOG_VERSION, "config": config}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(rec.to_dict()) + "\n")


def read_run_log(path: str | Path) -> tuple[dict, list[RunRecord]]:
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh if ln.strip()]
    if not lines:
        raise ValueError(f"{path}: empty run log")
    header = json.loads(lines[0])
    if "config" not in header:
        raise ValueError(f"{path}: missing header line")
    return header, [RunRecord.from_dict(json.loads(ln)) for ln in lines[1:]]

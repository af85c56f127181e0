"""Benchmark metrics: solve rate at budget N and stratification by difficulty."""

from __future__ import annotations

from dataclasses import dataclass, field
from statistics import mean, median
from typing import Sequence

from retroplan.harness.records import RunRecord

DEFAULT_THRESHOLDS = (10, 20, 50, 100)


@dataclass
class StratumStats:
    index: int  # 1-based
    count: int
    key_range: tuple[float, float] | None
    solve_rate: dict[int, float]
    mean_iterations: float | None


@dataclass
class BenchmarkReport:
    n_targets: int
    thresholds: tuple[int, ...]
    solve_rate: dict[int, float]
    mean_iterations: float | None
    median_iterations: float | None
    quartiles: list[StratumStats]
    tokens: dict[str, float] = field(default_factory=dict)
    errors: int = 0

    def to_dict(self) -> dict:
        return {
            "n_targets": self.n_targets,
            "thresholds": list(self.thresholds),
            "solve_rate": {str(k): v for k, v in self.solve_rate.items()},
            "mean_iterations": self.mean_iterations,
            "median_iterations": self.median_iterations,
            "quartiles": [
                {"index": q.index, "count": q.count,
                 "key_range": list(q.key_range) if q.key_range else None,
                 "solve_rate": {str(k): v for k, v in q.solve_rate.items()},
                 "mean_iterations": q.mean_iterations}
                for q in self.quartiles
            ],
            "tokens": self.tokens,
            "errors": self.errors,
        }


def solve_rate(records: Sequence[RunRecord], n: int) -> float:
    if not records:
        return 0.0
    return sum(1 for r in records if r.solved and r.iterations_used <= n) / len(records)


def _mean_solved_iterations(records: Sequence[RunRecord]) -> float | None:
    its = [r.iterations_used for r in records if r.solved]
    return mean(its) if its else None


def split_strata(records: Sequence[RunRecord], count: int, key: str = "complexity") -> list[list[RunRecord]]:
    """Sort by ``key`` (stable) and cut into ``count`` near-equal parts, extras to the earlier ones."""
    if count < 1:
        raise ValueError("count must be >= 1")
    order = sorted(range(len(records)), key=lambda i: (_key(records[i], key), i))
    base, extra = divmod(len(records), count)
    parts, start = [], 0
    for q in range(count):
        size = base + (1 if q < extra else 0)
        parts.append([records[i] for i in order[start:start + size]])
        start += size
    return parts


def _key(r: RunRecord, key: str) -> float:
    v = getattr(r, key)
    return float("inf") if v is None else float(v)


def compute_metrics(records: Sequence[RunRecord], thresholds: Sequence[int] = DEFAULT_THRESHOLDS,
                    quartile_count: int = 4, key: str = "complexity") -> BenchmarkReport:
    thresholds = tuple(thresholds)
    if list(thresholds) != sorted(thresholds):
        raise ValueError("thresholds must be sorted ascending")
    strata = []
    for q, part in enumerate(split_strata(records, quartile_count, key), start=1):
        vals = [_key(r, key) for r in part]
        strata.append(StratumStats(
            q, len(part), (min(vals), max(vals)) if part else None,
            {n: solve_rate(part, n) for n in thresholds},
            _mean_solved_iterations(part),
        ))
    solved_its = [r.iterations_used for r in records if r.solved]
    tokens = {}
    if records:
        tokens = {
            "total_input": float(sum(r.input_tokens for r in records)),
            "total_output": float(sum(r.output_tokens for r in records)),
            "mean_input": mean(r.input_tokens for r in records),
            "mean_output": mean(r.output_tokens for r in records),
        }
    return BenchmarkReport(
        len(records), thresholds, {n: solve_rate(records, n) for n in thresholds},
        mean(solved_its) if solved_its else None,
        median(solved_its) if solved_its else None,
        strata, tokens, sum(1 for r in records if r.status == "error"),
    )


def format_report(report: BenchmarkReport) -> str:
    def pct(x):
        return f"{100 * x:5.1f}"

    def num(x):
        return "    -" if x is None else f"{x:5.2f}"

    head = "        " + " ".join(f"SR@{n:<4d}" for n in report.thresholds) + "  mean_it"
    lines = [f"targets: {report.n_targets}  errors: {report.errors}", head]
    lines.append("all     " + " ".join(f"{pct(report.solve_rate[n])}  " for n in report.thresholds)
                 + f" {num(report.mean_iterations)}")
    for q in report.quartiles:
        lines.append(f"Q{q.index} n={q.count:<3d}" + " ".join(f"{pct(q.solve_rate[n])}  " for n in report.thresholds)
                     + f" {num(q.mean_iterations)}")
    if report.tokens:
        lines.append("tokens: mean in {mean_input:.0f}, mean out {mean_output:.0f}".format(**report.tokens))
    return "\n".join(lines)

"""Pearson correlation between automatic and human scores.

Human ratings arrive as CSV with one row per (id, rater); ratings are
averaged per id, then correlated per dimension against the automatic
scores. Tables are emitted as CSV and plain text, with an optional bar
figure rendered alongside.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from pathlib import Path

from ..errors import DegenerateVarianceError, ScoreAlignmentError
from .prompts import DIMENSIONS


@dataclass(frozen=True)
class CorrelationInput:
    x: tuple
    y: tuple

    def __post_init__(self):
        x = tuple(float(v) for v in self.x)
        y = tuple(float(v) for v in self.y)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        if len(x) != len(y):
            raise ScoreAlignmentError(f"length mismatch: {len(x)} vs {len(y)}")
        if len(x) < 2:
            raise ScoreAlignmentError("correlation needs at least two points")
        if not all(math.isfinite(v) for v in x + y):
            raise ScoreAlignmentError("scores must be finite")


def pearson(x, y=None) -> float:
    """Pearson correlation coefficient in [-1, 1].

    Accepts a CorrelationInput or two equal-length sequences. Raises
    DegenerateVariance when either side is constant.
    """
    if y is None:
        if not isinstance(x, CorrelationInput):
            raise TypeError("pass a CorrelationInput or two sequences")
        data = x
    else:
        data = CorrelationInput(tuple(x), tuple(y))
    n = len(data.x)
    mean_x = sum(data.x) / n
    mean_y = sum(data.y) / n
    dx = [value - mean_x for value in data.x]
    dy = [value - mean_y for value in data.y]
    var_x = sum(value * value for value in dx)
    var_y = sum(value * value for value in dy)
    if var_x == 0.0 or var_y == 0.0:
        raise DegenerateVarianceError("constant input has no defined correlation")
    return sum(a * b for a, b in zip(dx, dy)) / (math.sqrt(var_x) * math.sqrt(var_y))


def _require_columns(fieldnames, required, path) -> None:
    missing = [name for name in required if name not in (fieldnames or [])]
    if missing:
        raise ScoreAlignmentError(f"{path}: missing columns {missing}")


def read_human_scores(path) -> dict:
    """CSV (id, rater, five dimensions) -> per-id dimension means over raters."""
    sums: dict[str, dict] = {}
    counts: dict[str, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ("id", "rater") + DIMENSIONS, path)
        for row in reader:
            sample_id = row["id"]
            bucket = sums.setdefault(sample_id, {d: 0.0 for d in DIMENSIONS})
            for dimension in DIMENSIONS:
                bucket[dimension] += float(row[dimension])
            counts[sample_id] = counts.get(sample_id, 0) + 1
    return {sample_id: {d: sums[sample_id][d] / counts[sample_id] for d in DIMENSIONS}
            for sample_id in sums}


def read_metric_scores(path) -> dict:
    """CSV (id, five dimensions), one row per id."""
    scores: dict[str, dict] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        _require_columns(reader.fieldnames, ("id",) + DIMENSIONS, path)
        for row in reader:
            sample_id = row["id"]
            if sample_id in scores:
                raise ScoreAlignmentError(f"{path}: duplicate id {sample_id!r}")
            scores[sample_id] = {d: float(row[d]) for d in DIMENSIONS}
    return scores


def align_by_id(metric: dict, human: dict) -> list:
    """Sorted ids present in the metric table; every one must have a human
    entry (extra human ids are ignored)."""
    missing = sorted(set(metric) - set(human))
    if missing:
        raise ScoreAlignmentError(f"no human scores for ids {missing}")
    ids = sorted(metric)
    if len(ids) < 2:
        raise ScoreAlignmentError("need at least two aligned ids")
    return ids


@dataclass(frozen=True)
class CorrelationTable:
    rows: dict  # dimension -> r
    n: int

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["dimension", "r", "n"])
        for dimension in DIMENSIONS:
            writer.writerow([dimension, f"{self.rows[dimension]:.6f}", self.n])
        return buffer.getvalue()

    def to_text(self) -> str:
        lines = [f"{'dimension':<16}{'r':>10}   (n={self.n})"]
        lines.extend(f"{dimension:<16}{self.rows[dimension]:>10.3f}"
                     for dimension in DIMENSIONS)
        return "\n".join(lines)


def correlation_table(metric: dict, human: dict) -> CorrelationTable:
    ids = align_by_id(metric, human)
    rows = {}
    for dimension in DIMENSIONS:
        x = [metric[sample_id][dimension] for sample_id in ids]
        y = [human[sample_id][dimension] for sample_id in ids]
        rows[dimension] = pearson(x, y)
    return CorrelationTable(rows=rows, n=len(ids))


def render_correlation_figure(table: CorrelationTable, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    figure, axes = plt.subplots(figsize=(7, 4))
    values = [table.rows[d] for d in DIMENSIONS]
    axes.bar(DIMENSIONS, values, color="#4878a8")
    axes.axhline(0.0, color="black", linewidth=0.8)
    axes.set_ylim(-1.0, 1.0)
    axes.set_ylabel("Pearson r")
    axes.set_title(f"Metric vs human correlation (n={table.n})")
    figure.tight_layout()
    figure.savefig(Path(path))
    plt.close(figure)

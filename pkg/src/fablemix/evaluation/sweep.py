"""Stimulus ablation harness.

Evaluates an audio set once with no stimulus (the baseline) and once per
stimulus kind, correlates each pass against human scores per dimension, and
reports the correlation deltas relative to the baseline plus their
cross-dimension mean. Output is a CSV table and a grouped bar figure.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path

from ..errors import ScoreAlignmentError
from .correlation import pearson
from .prompts import DIMENSIONS
from .scoring import DEFAULT_RUNS, evaluate
from .stimuli import DEFAULT_PRINCIPLE, NONE, Stimulus

SWEEP_KINDS = ("praise", "encouragement", "criticism", "sarcasm")

MEAN_COLUMN = "Mean"


@dataclass(frozen=True)
class AudioSample:
    sample_id: str
    audio: str
    context: str = ""


@dataclass(frozen=True)
class SweepResult:
    baseline: dict  # dimension -> r with no stimulus
    deltas: dict  # kind -> {dimension -> r delta, Mean -> cross-dimension mean}
    n: int
    principle: str

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(["stimulus"] + list(DIMENSIONS) + [MEAN_COLUMN])
        writer.writerow(["none(baseline r)"]
                        + [f"{self.baseline[d]:.6f}" for d in DIMENSIONS] + [""])
        for kind in SWEEP_KINDS:
            row = self.deltas[kind]
            writer.writerow([kind] + [f"{row[d]:+.6f}" for d in DIMENSIONS]
                            + [f"{row[MEAN_COLUMN]:+.6f}"])
        return buffer.getvalue()


def _correlate_pass(backend, samples, human, stimulus, runs, mode,
                    reference_example, template_dir) -> dict:
    metric = {}
    for sample in samples:
        report = evaluate(backend, sample.audio, sample.context, runs=runs,
                          stimulus=stimulus, mode=mode,
                          reference_example=reference_example,
                          session_base=f"{sample.sample_id}:{stimulus}",
                          template_dir=template_dir)
        metric[sample.sample_id] = report.means
    rows = {}
    ids = sorted(metric)
    for dimension in DIMENSIONS:
        rows[dimension] = pearson(
            [metric[i][dimension] for i in ids],
            [human[i][dimension] for i in ids])
    return rows


def stimuli_sweep(backend, audio_set, human_scores: dict, runs: int = DEFAULT_RUNS,
                  principle: str = DEFAULT_PRINCIPLE, mode: str = "zero_shot",
                  reference_example: str | None = None, kinds=SWEEP_KINDS,
                  template_dir=None) -> SweepResult:
    """Per-stimulus correlation deltas against the no-stimulus baseline.

    `audio_set` is a sequence of AudioSample; `human_scores` maps sample id
    to per-dimension human means. Every sample needs a human entry.
    """
    samples = list(audio_set)
    if not samples:
        raise ScoreAlignmentError("audio set is empty")
    missing = sorted({s.sample_id for s in samples} - set(human_scores))
    if missing:
        raise ScoreAlignmentError(f"no human scores for ids {missing}")
    baseline = _correlate_pass(backend, samples, human_scores, NONE, runs, mode,
                               reference_example, template_dir)
    deltas = {}
    for kind in kinds:
        stimulus = Stimulus(kind, principle)
        rows = _correlate_pass(backend, samples, human_scores, stimulus, runs, mode,
                               reference_example, template_dir)
        delta = {d: rows[d] - baseline[d] for d in DIMENSIONS}
        delta[MEAN_COLUMN] = sum(delta[d] for d in DIMENSIONS) / len(DIMENSIONS)
        deltas[kind] = delta
    return SweepResult(baseline=baseline, deltas=deltas, n=len(samples),
                       principle=principle)


def render_sweep_figure(result: SweepResult, path) -> None:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    import numpy as np

    kinds = [k for k in SWEEP_KINDS if k in result.deltas]
    columns = list(DIMENSIONS) + [MEAN_COLUMN]
    width = 0.8 / len(kinds)
    x = np.arange(len(columns), dtype=np.float64)
    figure, axes = plt.subplots(figsize=(9, 4))
    for offset, kind in enumerate(kinds):
        values = [result.deltas[kind][c] for c in columns]
        axes.bar(x + offset * width, values, width, label=kind)
    axes.axhline(0.0, color="black", linewidth=0.8)
    axes.set_xticks(x + 0.4 - width / 2)
    axes.set_xticklabels(columns)
    axes.set_ylabel("correlation delta vs no stimulus")
    axes.set_title(f"Stimulus sweep ({result.principle}, n={result.n})")
    axes.legend()
    figure.tight_layout()
    figure.savefig(Path(path))
    plt.close(figure)

"""Judge-based scoring, correlation against human ratings, and ablations."""
from .correlation import (
    CorrelationInput,
    CorrelationTable,
    correlation_table,
    pearson,
    read_human_scores,
    read_metric_scores,
    render_correlation_figure,
)
from .prompts import DIMENSIONS, MODES, RUBRICS, STAGES, assemble_prompt
from .scoring import (
    DEFAULT_RUNS,
    EvaluationReport,
    RunOutcome,
    ScoreVector,
    evaluate,
    parse_scores,
)
from .stimuli import KINDS, NONE, PRINCIPLES, Stimulus, load_stimulus_text, parse_stimulus
from .sweep import (
    SWEEP_KINDS,
    AudioSample,
    SweepResult,
    render_sweep_figure,
    stimuli_sweep,
)

__all__ = [
    "AudioSample",
    "CorrelationInput",
    "CorrelationTable",
    "DEFAULT_RUNS",
    "DIMENSIONS",
    "EvaluationReport",
    "KINDS",
    "MODES",
    "NONE",
    "PRINCIPLES",
    "RUBRICS",
    "RunOutcome",
    "STAGES",
    "SWEEP_KINDS",
    "ScoreVector",
    "Stimulus",
    "SweepResult",
    "assemble_prompt",
    "correlation_table",
    "evaluate",
    "load_stimulus_text",
    "parse_scores",
    "parse_stimulus",
    "pearson",
    "read_human_scores",
    "read_metric_scores",
    "render_correlation_figure",
    "render_sweep_figure",
    "stimuli_sweep",
]

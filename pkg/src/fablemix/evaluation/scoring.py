"""Repeated-run judge scoring and aggregation.

One evaluation runs the five-stage protocol `runs` times, each run in a
fresh judge session. Scores are read from the last well-formed JSON object
in the final stage's reply; a malformed reply earns one re-ask before the
run is marked failed. Per-dimension means and population standard
deviations are taken over the successful runs.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

from ..backends.base import JudgeExchange
from ..errors import EvaluationFailedError, MalformedResponseError
from ..jsonutil import iter_json_objects
from .prompts import DIMENSIONS, assemble_prompt
from .stimuli import NONE, Stimulus

log = logging.getLogger(__name__)

DEFAULT_RUNS = 3

# Report-side stage labels paired with the prompt template each one uses.
STAGE_SEQUENCE = (
    ("understanding", "self_understanding"),
    ("initial", "instructions"),
    ("critique", "self_critique"),
    ("meta_judgement", "meta_judgement"),
    ("final", "final_validation"),
)

_REASK_PROMPT = (
    "Your previous reply did not include the required fenced JSON score block. "
    "Reply again with only that block: keys quality, naturalness, expressiveness, "
    "immersion, overall, each a number from 1 to 5.")


@dataclass(frozen=True)
class ScoreVector:
    quality: float
    naturalness: float
    expressiveness: float
    immersion: float
    overall: float

    def __post_init__(self):
        for dimension in DIMENSIONS:
            value = getattr(self, dimension)
            if not 1.0 <= value <= 5.0:
                raise ValueError(f"{dimension} score {value} outside [1, 5]")

    def as_dict(self) -> dict:
        return {dimension: getattr(self, dimension) for dimension in DIMENSIONS}


def parse_scores(judge_response: str) -> ScoreVector:
    """Extract the score vector from a judge reply.

    The last JSON object carrying all five numeric dimensions wins, so
    reasoning prose and earlier drafts are ignored. Out-of-range values are
    clamped to [1, 5] with a warning.
    """
    found = None
    for candidate in iter_json_objects(judge_response):
        values = {}
        for dimension in DIMENSIONS:
            value = candidate.get(dimension)
            if isinstance(value, bool) or not isinstance(value, (int, float)):
                break
            values[dimension] = float(value)
        else:
            found = values
    if found is None:
        raise MalformedResponseError("no parseable score block in judge reply")
    for dimension, value in found.items():
        clamped = min(5.0, max(1.0, value))
        if clamped != value:
            log.warning("clamping %s score %s to %s", dimension, value, clamped)
            found[dimension] = clamped
    return ScoreVector(**found)


@dataclass(frozen=True)
class RunOutcome:
    index: int
    session_id: str
    scores: ScoreVector | None
    exchanges: tuple = ()  # (stage_label, JudgeExchange) pairs
    failure: str = ""

    @property
    def ok(self) -> bool:
        return self.scores is not None


@dataclass(frozen=True)
class EvaluationReport:
    audio: str
    stimulus: Stimulus
    mode: str
    runs: tuple = ()
    means: dict = field(default_factory=dict)
    stds: dict = field(default_factory=dict)
    dimension_mean: float = 0.0  # mean of the four non-overall dimension means

    @property
    def succeeded_runs(self) -> tuple:
        return tuple(run for run in self.runs if run.ok)

    def to_dict(self) -> dict:
        return {
            "audio": self.audio,
            "stimulus": str(self.stimulus),
            "mode": self.mode,
            "means": dict(self.means),
            "stds": dict(self.stds),
            "dimension_mean": self.dimension_mean,
            "runs": [
                {
                    "index": run.index,
                    "session_id": run.session_id,
                    "scores": run.scores.as_dict() if run.scores else None,
                    "failure": run.failure,
                    "transcript": [
                        {
                            "stage": stage,
                            "prompt": exchange.prompt,
                            "response": exchange.response,
                        }
                        for stage, exchange in run.exchanges
                    ],
                }
                for run in self.runs
            ],
        }


def _aggregate(vectors) -> tuple[dict, dict]:
    means = {}
    stds = {}
    for dimension in DIMENSIONS:
        values = [getattr(vector, dimension) for vector in vectors]
        mean = sum(values) / len(values)
        variance = sum((value - mean) ** 2 for value in values) / len(values)
        means[dimension] = mean
        stds[dimension] = math.sqrt(variance)
    return means, stds


def evaluate(backend, audio: str, context: str, runs: int = DEFAULT_RUNS,
             stimulus: Stimulus = NONE, mode: str = "zero_shot",
             reference_example: str | None = None, session_base: str = "eval",
             template_dir=None) -> EvaluationReport:
    """Score one piece of audio over repeated judge runs.

    `audio` is a locator passed to the judge as an attachment; `context`
    (transcript or plan digest) is prepended to the first exchange of each
    run. Runs use session ids ``{session_base}-run{i}`` so scripted judges
    can key on them. Raises EvaluationFailed when every run fails.
    """
    if runs < 1:
        raise ValueError(f"runs must be >= 1, got {runs}")
    outcomes = []
    for index in range(runs):
        session_id = f"{session_base}-run{index}"
        exchanges = []
        scores = None
        failure = ""
        try:
            final_response = None
            for position, (label, stage) in enumerate(STAGE_SEQUENCE):
                prompt = assemble_prompt(stage, stimulus, mode, reference_example,
                                         template_dir)
                if position == 0 and context:
                    prompt = f"Context for the piece under review:\n{context}\n\n{prompt}"
                response = backend.judge(prompt, (audio,), session_id)
                exchanges.append((label, JudgeExchange(
                    prompt=prompt, response=response, session_id=session_id,
                    attachments=(audio,))))
                final_response = response
            try:
                scores = parse_scores(final_response)
            except MalformedResponseError:
                log.warning("run %d: malformed score block, re-asking once", index)
                retry = backend.judge(_REASK_PROMPT, (audio,), session_id)
                exchanges.append(("final_retry", JudgeExchange(
                    prompt=_REASK_PROMPT, response=retry, session_id=session_id,
                    attachments=(audio,))))
                scores = parse_scores(retry)
        except MalformedResponseError as exc:
            failure = f"malformed judge response after re-ask: {exc}"
            log.warning("run %d failed: %s", index, failure)
        outcomes.append(RunOutcome(index=index, session_id=session_id, scores=scores,
                                   exchanges=tuple(exchanges), failure=failure))
    succeeded = [run.scores for run in outcomes if run.ok]
    if not succeeded:
        raise EvaluationFailedError(f"all {runs} evaluation runs failed")
    means, stds = _aggregate(succeeded)
    dimension_mean = sum(means[d] for d in DIMENSIONS if d != "overall") / 4.0
    return EvaluationReport(audio=audio, stimulus=stimulus, mode=mode,
                            runs=tuple(outcomes), means=means, stds=stds,
                            dimension_mean=dimension_mean)

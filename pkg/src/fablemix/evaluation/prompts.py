"""Deterministic prompt assembly for the five-stage judge protocol.

A scoring session walks the judge through: restating the task in its own
words, the scored evaluation against the rubrics, a self-critique of that
evaluation, a third-party re-assessment, and a final validation that emits
the machine-readable score block. Prompts are pure template expansions;
session continuity lives in the judge backend, keyed by session id.
"""
from __future__ import annotations

from .stimuli import NONE, Stimulus, load_stimulus_text

STAGES = ("self_understanding", "instructions", "self_critique", "meta_judgement",
          "final_validation")

MODES = ("zero_shot", "one_shot")

DIMENSIONS = ("quality", "naturalness", "expressiveness", "immersion", "overall")

RUBRICS = {
    "quality": (
        "Production quality: clarity of the recording, absence of artifacts, "
        "clicks, or distortion, and how cleanly speech, effects, and music sit "
        "together in the mix."),
    "naturalness": (
        "Naturalness: how close the voices are to fluent human delivery in pacing, "
        "intonation, and breathing, with no robotic or slurred passages."),
    "expressiveness": (
        "Expressiveness: whether each line's emotion, emphasis, and character "
        "identity match what the story calls for, across the full range the text "
        "demands."),
    "immersion": (
        "Immersion: how completely the combined soundscape, effects placement, and "
        "atmosphere pull the listener into the scene."),
    "overall": (
        "Overall: your single integrated judgment of the piece as an audiobook "
        "production, weighing all of the above."),
}

SCORE_BLOCK_CONTRACT = (
    "End your reply with a fenced JSON block containing exactly these keys: "
    "quality, naturalness, expressiveness, immersion, overall. Each value must be "
    "a number from 1 to 5 (decimals allowed). Example shape:\n"
    "```json\n"
    '{"quality": 0, "naturalness": 0, "expressiveness": 0, "immersion": 0, '
    '"overall": 0}\n'
    "```"
)

_STAGE_BODIES = {
    "self_understanding": (
        "Before evaluating anything, restate in your own words what you are about "
        "to do: what kind of work you will hear, what each scoring dimension "
        "measures, and what a careful, unbiased rating requires of you. Do not "
        "give any scores yet."),
    "self_critique": (
        "Review the evaluation you just gave. Identify any bias, inconsistency, "
        "or aspect of the audio you may have over- or under-weighted, and state "
        "how each issue would move the affected scores. Do not emit a score block "
        "yet."),
    "meta_judgement": (
        "Now step outside your earlier role. As an impartial referee who has read "
        "the initial evaluation and the critique, re-assess the audio dimension "
        "by dimension and state where you agree or disagree with the earlier "
        "reasoning. Do not emit a score block yet."),
    "final_validation": (
        "Confirm your final position. Reconcile the initial evaluation, the "
        "critique, and the referee assessment into one set of scores you stand "
        "behind. " + SCORE_BLOCK_CONTRACT),
}


def _instructions_body(mode: str, reference_example: str | None) -> str:
    parts = [
        "You will rate one audiobook production on five dimensions, each on a "
        "scale from 1 (poor) to 5 (excellent).",
        "\n".join(f"- {RUBRICS[dimension]}" for dimension in DIMENSIONS),
    ]
    if mode == "one_shot":
        parts.append(
            "Calibration example (a previous piece with its agreed reference "
            "scores):\n" + reference_example.strip())
    parts.append("Listen to the attached audio, reason through each dimension, "
                 "then give your scores. " + SCORE_BLOCK_CONTRACT)
    return "\n\n".join(parts)


def assemble_prompt(stage: str, stimulus: Stimulus = NONE, mode: str = "zero_shot",
                    reference_example: str | None = None, template_dir=None) -> str:
    """Expand one stage's prompt. Pure: same arguments, same bytes."""
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    if mode == "one_shot" and reference_example is None:
        raise ValueError("one_shot mode requires a reference example")
    if mode == "zero_shot" and reference_example is not None:
        raise ValueError("zero_shot mode must not carry a reference example")
    blocks = []
    if stimulus.kind != "none":
        blocks.append(load_stimulus_text(stimulus, template_dir))
    if stage == "instructions":
        blocks.append(_instructions_body(mode, reference_example))
    else:
        blocks.append(_STAGE_BODIES[stage])
    return "\n\n".join(blocks)

"""Emotional stimulus blocks prepended to judge prompts.

Four stimulus kinds (praise, encouragement, criticism, sarcasm) crossed
with three psychological framings (motivation drive, emotion regulation,
social engagement) give twelve templates, shipped as plain text files so a
deployment can swap in its own. Positive kinds frame competence and growth;
negative kinds frame error-seeking and skepticism. The "none" kind is the
baseline: no block at all.
"""
from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from ..errors import ConfigError, TemplateMissingError

KINDS = ("none", "praise", "encouragement", "criticism", "sarcasm")
PRINCIPLES = ("motivation_drive", "emotion_regulation", "social_engagement")

DEFAULT_PRINCIPLE = "motivation_drive"


@dataclass(frozen=True)
class Stimulus:
    kind: str = "none"
    principle: str | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"unknown stimulus kind {self.kind!r}")
        if self.kind == "none":
            if self.principle is not None:
                raise ConfigError("the none stimulus carries no principle")
        else:
            if self.principle is None:
                object.__setattr__(self, "principle", DEFAULT_PRINCIPLE)
            elif self.principle not in PRINCIPLES:
                raise ConfigError(f"unknown stimulus principle {self.principle!r}")

    def __str__(self) -> str:
        return self.kind if self.kind == "none" else f"{self.kind}/{self.principle}"


NONE = Stimulus("none")


def parse_stimulus(text: str) -> Stimulus:
    """Parse "none", "praise", or "praise/emotion_regulation" forms."""
    text = text.strip()
    if "/" in text:
        kind, principle = text.split("/", 1)
        return Stimulus(kind, principle)
    return Stimulus(text)


def load_stimulus_text(stimulus: Stimulus, template_dir=None) -> str:
    """Template text for a stimulus; empty string for the none baseline.

    `template_dir` overrides the packaged templates file-for-file.
    """
    if stimulus.kind == "none":
        return ""
    filename = f"{stimulus.kind}__{stimulus.principle}.txt"
    if template_dir is not None:
        path = Path(template_dir) / filename
        if not path.is_file():
            raise TemplateMissingError(f"no stimulus template at {path}")
        return path.read_text(encoding="utf-8").strip()
    packaged = resources.files("fablemix").joinpath("data", "stimuli", filename)
    if not packaged.is_file():
        raise TemplateMissingError(f"no packaged stimulus template {filename}")
    return packaged.read_text(encoding="utf-8").strip()

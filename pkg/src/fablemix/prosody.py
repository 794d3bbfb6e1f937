"""Utterance-level prosody steering in speaker-embedding space.

Given emotional/neutral recordings of the same speaker, the difference of
their speaker embeddings isolates an emotional direction. Directions from
several speakers are normalized and averaged, reduced to a unit vector, and
added onto a target speaker's embedding with a scalar intensity, shifting
prosody while preserving timbre. All arithmetic is done in float64 and is
only defined within a single backend's embedding space, so every vector is
tagged with its source model and mixing spaces is a hard error.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NotUnitError, SpaceMismatchError, ZeroDirectionError

log = logging.getLogger(__name__)

# Intensities are planner-supplied; values past ALPHA_WARN are suspicious and
# anything past ALPHA_MAX is clamped.
ALPHA_WARN = 1.5
ALPHA_MAX = 3.0

_UNIT_TOL = 1e-9


def _as_vector(values) -> np.ndarray:
    array = np.asarray(values, dtype=np.float64)
    if array.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-D vector, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError("embedding values must be finite")
    return array


@dataclass(frozen=True, eq=False)
class SpeakerEmbedding:
    values: np.ndarray
    source_model: str

    def __post_init__(self):
        object.__setattr__(self, "values", _as_vector(self.values))

    @property
    def dimension(self) -> int:
        return len(self.values)


@dataclass(frozen=True, eq=False)
class EmotionalDirection:
    values: np.ndarray
    emotion_label: str
    source_model: str
    unit: bool = False

    def __post_init__(self):
        object.__setattr__(self, "values", _as_vector(self.values))
        if self.unit and abs(float(np.linalg.norm(self.values)) - 1.0) > _UNIT_TOL:
            raise NotUnitError("direction flagged as unit has non-unit norm")

    @property
    def dimension(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class Intensity:
    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.alpha):
            raise ValueError("intensity must be finite")


def _check_space(a, b) -> None:
    if a.source_model != b.source_model:
        raise SpaceMismatchError(
            f"cannot mix embedding spaces {a.source_model!r} and {b.source_model!r}")
    if a.dimension != b.dimension:
        raise DimensionMismatchError(f"dimension {a.dimension} vs {b.dimension}")


def emotional_direction(f_emotional: SpeakerEmbedding, f_neutral: SpeakerEmbedding,
                        emotion_label: str = "") -> EmotionalDirection:
    """Element-wise difference of same-speaker emotional and neutral
    embeddings; the result is not normalized."""
    _check_space(f_emotional, f_neutral)
    return EmotionalDirection(
        values=f_emotional.values - f_neutral.values,
        emotion_label=emotion_label,
        source_model=f_emotional.source_model,
        unit=False,
    )


def average_direction(directions) -> EmotionalDirection:
    """Mean of the L2-normalized input directions (not itself normalized).

    All inputs must agree on dimension, emotion label, and embedding space.
    A zero-norm input makes normalization undefined and is rejected.
    """
    directions = list(directions)
    if not directions:
        raise ValueError("average_direction needs at least one direction")
    head = directions[0]
    for other in directions[1:]:
        _check_space(head, other)
        if other.emotion_label != head.emotion_label:
            raise SpaceMismatchError(
                f"cannot average emotions {head.emotion_label!r} and {other.emotion_label!r}")
    normalized = []
    for direction in directions:
        norm = float(np.linalg.norm(direction.values))
        if norm == 0.0:
            raise ZeroDirectionError("cannot normalize a zero emotional direction")
        normalized.append(direction.values / norm)
    mean = np.mean(normalized, axis=0)
    return EmotionalDirection(values=mean, emotion_label=head.emotion_label,
                              source_model=head.source_model, unit=False)


def unit(direction: EmotionalDirection) -> EmotionalDirection:
    norm = float(np.linalg.norm(direction.values))
    if norm == 0.0:
        raise ZeroDirectionError("cannot normalize a zero emotional direction")
    return EmotionalDirection(values=direction.values / norm,
                              emotion_label=direction.emotion_label,
                              source_model=direction.source_model, unit=True)


def apply_emotion(f_target: SpeakerEmbedding, direction: EmotionalDirection,
                  intensity: Intensity | float, alpha_max: float = ALPHA_MAX) -> SpeakerEmbedding:
    """Shift a speaker embedding along a unit emotional direction by alpha.

    alpha is clamped to ``[-alpha_max, alpha_max]``; values past ALPHA_WARN
    are logged since they tend to distort timbre.
    """
    if not direction.unit:
        raise NotUnitError("apply_emotion requires a unit direction")
    _check_space(f_target, direction)
    alpha = intensity.alpha if isinstance(intensity, Intensity) else float(intensity)
    if abs(alpha) > alpha_max:
        log.warning("clamping intensity %.3f to %.3f", alpha, alpha_max)
        alpha = alpha_max if alpha > 0 else -alpha_max
    elif abs(alpha) > ALPHA_WARN:
        log.warning("intensity %.3f is past the advisory limit %.1f", alpha, ALPHA_WARN)
    return SpeakerEmbedding(values=f_target.values + alpha * direction.values,
                            source_model=f_target.source_model)

"""Abstract interface all model backends implement.

One backend object may serve any subset of the seven operations (speech
synthesis, sfx/music generation, text embedding, forced alignment, MOS
prediction, judge chat, speaker-feature extraction); `capabilities()` says
which. Pipeline code talks only to this interface, so the in-process mock,
the HTTP client, and trace replay are interchangeable.
"""
from __future__ import annotations

import abc
from dataclasses import dataclass

import numpy as np

from ..audio import Clip
from ..errors import ModeUnsupportedError, NonMonotoneAlignmentError
from ..prosody import SpeakerEmbedding

PROTOCOL_VERSION = 1

AUDIO_KINDS = ("sfx", "ambiance", "bgm")

ENDPOINTS = ("synthesize", "generate_audio", "embed", "align", "mos", "judge",
             "speaker_embed")


@dataclass(frozen=True)
class SynthesisRequest:
    """One sub-sentence synthesis call.

    Exactly one conditioning mode must be set: a reference recording to
    clone, an adjusted speaker embedding to decode, or a free-text style
    description.
    """

    model_id: str
    text: str
    language: str = "en"
    reference_audio: str | None = None
    speaker_embedding: SpeakerEmbedding | None = None
    description: str | None = None
    paralinguistic_tokens: tuple = ()

    def __post_init__(self):
        modes = [name for name, value in (
            ("reference_audio", self.reference_audio),
            ("speaker_embedding", self.speaker_embedding),
            ("description", self.description),
        ) if value is not None]
        if len(modes) != 1:
            raise ModeUnsupportedError(
                f"exactly one conditioning mode required, got {modes or 'none'}")
        object.__setattr__(self, "paralinguistic_tokens", tuple(self.paralinguistic_tokens))

    @property
    def mode(self) -> str:
        if self.reference_audio is not None:
            return "reference_audio"
        if self.speaker_embedding is not None:
            return "speaker_embedding"
        return "description"


@dataclass(frozen=True)
class LocalSpan:
    """Word span in seconds, local to one clip."""

    word: str
    start: float
    end: float


@dataclass(frozen=True)
class AlignmentResult:
    spans: tuple = ()
    clip_duration: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "spans", tuple(self.spans))
        cursor = 0.0
        for span in self.spans:
            if span.start < cursor - 1e-9 or span.end <= span.start:
                raise NonMonotoneAlignmentError(
                    f"span {span.word!r} at [{span.start}, {span.end}) breaks monotonicity")
            cursor = span.end
        if self.spans and cursor > self.clip_duration + 1e-9:
            raise NonMonotoneAlignmentError("alignment spans run past the clip")


@dataclass(frozen=True)
class JudgeExchange:
    """Verbatim record of one judge turn."""

    prompt: str
    response: str
    session_id: str
    attachments: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "attachments", tuple(self.attachments))


class Backend(abc.ABC):
    """Interface for all external models, mock or remote."""

    backend_id: str = "backend"

    @abc.abstractmethod
    def capabilities(self) -> dict:
        """Protocol version, served endpoints, and model profiles."""

    @abc.abstractmethod
    def synthesize(self, request: SynthesisRequest) -> Clip:
        ...

    @abc.abstractmethod
    def generate_audio(self, prompt: str, duration: float, kind: str) -> Clip:
        ...

    @abc.abstractmethod
    def embed(self, text: str) -> np.ndarray:
        ...

    @abc.abstractmethod
    def align(self, transcript_words, clip: Clip) -> AlignmentResult:
        ...

    @abc.abstractmethod
    def predict_mos(self, clip: Clip) -> float:
        ...

    @abc.abstractmethod
    def judge(self, prompt: str, attachments, session_id: str) -> str:
        ...

    def speaker_embed(self, clip: Clip) -> SpeakerEmbedding:
        raise ModeUnsupportedError(f"{self.backend_id} does not extract speaker features")

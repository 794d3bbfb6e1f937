"""Fully deterministic in-process backend for offline runs and tests.

Speech is a sine tone whose frequency is a stable content hash of the text
(200 + hash mod 400 Hz) lasting 0.08 s per word; sound assets are seeded
noise or low tones of exactly the requested duration; embeddings are
unit-norm hash-derived vectors; alignment uniformly partitions the clip;
MOS is an RMS ramp. The judge replays scripted responses keyed by session,
which makes whole-pipeline runs reproducible down to the output bytes.
"""
from __future__ import annotations

import threading

import numpy as np

from ..audio import Clip
from ..errors import BackendUnavailableError, ModeUnsupportedError
from ..prosody import SpeakerEmbedding
from ..selection import DEFAULT_REGISTRY, Registry
from . import detmath
from .base import (
    AUDIO_KINDS,
    PROTOCOL_VERSION,
    AlignmentResult,
    Backend,
    JudgeExchange,
    LocalSpan,
    SynthesisRequest,
)

SAMPLE_RATE = 24000
EMBED_DIMENSION = 64

SPEECH_SECONDS_PER_WORD = 0.08
SPEECH_AMPLITUDE = 0.3
SFX_AMPLITUDE = 0.3
SCENE_AMPLITUDE = 0.2

_BASE_FREQ = 200
_FREQ_RANGE = 400


class MockBackend(Backend):
    backend_id = "mock"

    def __init__(self, seed: int = 0, registry: Registry = DEFAULT_REGISTRY,
                 judge_fixtures: dict | None = None,
                 sample_rate: int = SAMPLE_RATE,
                 embed_dimension: int = EMBED_DIMENSION):
        self.seed = int(seed)
        self.registry = registry
        self.sample_rate = int(sample_rate)
        self.embed_dimension = int(embed_dimension)
        self.judge_fixtures = dict(judge_fixtures or {})
        self.exchanges: list[JudgeExchange] = []
        self._turns: dict[str, int] = {}
        self._lock = threading.Lock()

    # -- capability discovery ------------------------------------------

    def capabilities(self) -> dict:
        endpoints = ["synthesize", "generate_audio", "embed", "align", "mos",
                     "speaker_embed"]
        if self.judge_fixtures:
            endpoints.insert(5, "judge")
        return {
            "protocol_version": PROTOCOL_VERSION,
            "backend_id": self.backend_id,
            "endpoints": endpoints,
            "profiles": [profile.to_dict() for profile in self.registry.profiles],
        }

    # -- speech ---------------------------------------------------------

    def _profile(self, model_id: str):
        for profile in self.registry.profiles:
            if profile.model_id == model_id:
                return profile
        raise BackendUnavailableError(f"model {model_id!r} is not registered")

    def synthesize(self, request: SynthesisRequest) -> Clip:
        profile = self._profile(request.model_id)
        if request.language not in profile.languages:
            raise ModeUnsupportedError(
                f"{request.model_id} does not speak {request.language!r}")
        if request.mode == "speaker_embedding" and not profile.supports_speaker_embedding:
            raise ModeUnsupportedError(
                f"{request.model_id} does not accept speaker embeddings")
        if request.paralinguistic_tokens and not profile.supports_paralinguistics:
            raise ModeUnsupportedError(
                f"{request.model_id} does not render paralinguistic tokens")
        words = request.text.split()
        n = round(SPEECH_SECONDS_PER_WORD * len(words) * self.sample_rate)
        freq = _BASE_FREQ + detmath.stable_hash(request.text) % _FREQ_RANGE
        return Clip(detmath.sine(freq, n, self.sample_rate, SPEECH_AMPLITUDE),
                    self.sample_rate)

    # -- sound assets ----------------------------------------------------

    def generate_audio(self, prompt: str, duration: float, kind: str) -> Clip:
        if kind not in AUDIO_KINDS:
            raise ValueError(f"kind must be one of {AUDIO_KINDS}, got {kind!r}")
        if duration <= 0:
            raise ValueError(f"duration must be positive, got {duration}")
        n = round(duration * self.sample_rate)
        seed = detmath.stable_hash(str(self.seed), kind, prompt)
        if kind == "sfx":
            samples = detmath.noise(seed, n, SFX_AMPLITUDE)
        else:
            freq = 40 + seed % 80
            samples = detmath.sine(freq, n, self.sample_rate, SCENE_AMPLITUDE)
        return Clip(samples, self.sample_rate)

    # -- analysis ---------------------------------------------------------

    def embed(self, text: str) -> np.ndarray:
        raw = detmath.uniform(detmath.stable_hash("embed", text),
                              self.embed_dimension) * 2.0 - 1.0
        norm = float(np.linalg.norm(raw))
        return raw / norm

    def align(self, transcript_words, clip: Clip) -> AlignmentResult:
        words = list(transcript_words)
        duration = clip.duration
        if not words:
            return AlignmentResult(spans=(), clip_duration=duration)
        if duration <= 0:
            raise ModeUnsupportedError("cannot align words against an empty clip")
        step = duration / len(words)
        spans = tuple(LocalSpan(word=word, start=i * step, end=(i + 1) * step)
                      for i, word in enumerate(words))
        return AlignmentResult(spans=spans, clip_duration=duration)

    def predict_mos(self, clip: Clip) -> float:
        return 1.0 + 4.0 * min(clip.rms, 1.0)

    def speaker_embed(self, clip: Clip) -> SpeakerEmbedding:
        seed = detmath.stable_hash("speaker", str(self.sample_rate),
                                   clip.samples.tobytes().hex())
        raw = detmath.uniform(seed, self.embed_dimension) * 2.0 - 1.0
        raw /= float(np.linalg.norm(raw))
        return SpeakerEmbedding(values=raw, source_model=self.backend_id)

    # -- judge -------------------------------------------------------------

    def judge(self, prompt: str, attachments, session_id: str) -> str:
        with self._lock:
            turn = self._turns.get(session_id, 0)
            self._turns[session_id] = turn + 1
            script = self.judge_fixtures.get(session_id, self.judge_fixtures.get("*"))
            if script is None:
                raise BackendUnavailableError(
                    f"no judge fixture for session {session_id!r}")
            if isinstance(script, str):
                response = script
            else:
                if turn >= len(script):
                    raise BackendUnavailableError(
                        f"judge fixture for {session_id!r} exhausted at turn {turn}")
                response = script[turn]
            self.exchanges.append(JudgeExchange(
                prompt=prompt, response=response, session_id=session_id,
                attachments=tuple(attachments)))
            return response

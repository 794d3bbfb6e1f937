"""Conversions between in-process types and protocol JSON payloads.

Audio travels as base64 PCM16 WAV; embeddings as JSON number arrays (repr
round-trip keeps them exact); alignments as span objects. Server, client,
and trace recorder all share these so a request digested on one side hashes
identically on the other.
"""
from __future__ import annotations

import base64

import numpy as np

from ..audio import Clip, decode_wav, encode_wav
from ..errors import MalformedResponseError
from ..prosody import SpeakerEmbedding
from .base import AlignmentResult, LocalSpan, SynthesisRequest


def clip_to_payload(clip: Clip) -> dict:
    return {
        "audio_b64": base64.b64encode(encode_wav(clip)).decode("ascii"),
        "sample_rate": clip.sample_rate,
    }


def clip_from_payload(payload: dict) -> Clip:
    try:
        raw = base64.b64decode(payload["audio_b64"], validate=True)
    except (KeyError, ValueError) as exc:
        raise MalformedResponseError(f"bad audio payload: {exc}") from exc
    clip = decode_wav(raw)
    declared = payload.get("sample_rate")
    if declared is not None and int(declared) != clip.sample_rate:
        raise MalformedResponseError(
            f"payload declares {declared} Hz but WAV header says {clip.sample_rate}")
    return clip


def vector_to_list(values) -> list:
    return [float(x) for x in values]


def vector_from_list(values) -> np.ndarray:
    return np.asarray(values, dtype=np.float64)


def speaker_embedding_to_dict(embedding: SpeakerEmbedding) -> dict:
    return {
        "values": vector_to_list(embedding.values),
        "source_model": embedding.source_model,
    }


def speaker_embedding_from_dict(raw: dict) -> SpeakerEmbedding:
    try:
        return SpeakerEmbedding(values=vector_from_list(raw["values"]),
                                source_model=raw["source_model"])
    except KeyError as exc:
        raise MalformedResponseError(f"speaker embedding missing {exc.args[0]!r}") from exc


def alignment_to_dict(result: AlignmentResult) -> dict:
    return {
        "spans": [{"word": s.word, "start": s.start, "end": s.end} for s in result.spans],
        "clip_duration": result.clip_duration,
    }


def alignment_from_dict(raw: dict) -> AlignmentResult:
    try:
        spans = tuple(LocalSpan(word=s["word"], start=float(s["start"]),
                                end=float(s["end"]))
                      for s in raw["spans"])
        return AlignmentResult(spans=spans, clip_duration=float(raw["clip_duration"]))
    except KeyError as exc:
        raise MalformedResponseError(f"alignment missing {exc.args[0]!r}") from exc


def synthesis_request_to_dict(request: SynthesisRequest) -> dict:
    payload = {
        "model_id": request.model_id,
        "text": request.text,
        "language": request.language,
        "paralinguistic_tokens": list(request.paralinguistic_tokens),
    }
    if request.reference_audio is not None:
        payload["reference_audio"] = request.reference_audio
    if request.speaker_embedding is not None:
        payload["speaker_embedding"] = speaker_embedding_to_dict(request.speaker_embedding)
    if request.description is not None:
        payload["description"] = request.description
    return payload


def synthesis_request_from_dict(raw: dict) -> SynthesisRequest:
    embedding = raw.get("speaker_embedding")
    return SynthesisRequest(
        model_id=raw["model_id"],
        text=raw["text"],
        language=raw.get("language", "en"),
        reference_audio=raw.get("reference_audio"),
        speaker_embedding=(speaker_embedding_from_dict(embedding)
                           if embedding is not None else None),
        description=raw.get("description"),
        paralinguistic_tokens=tuple(raw.get("paralinguistic_tokens", ())),
    )

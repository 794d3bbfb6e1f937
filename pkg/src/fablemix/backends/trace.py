"""Structured call tracing and byte-exact replay.

The recorder wraps any backend and logs one entry per call: operation,
canonical request digest, backend id, latency, and (by default) the full
wire-encoded request and response payloads. A saved trace can then stand in
for the original backend: replay matches each incoming call to the recorded
response by request digest, in first-in-first-out order for duplicates, so
a traced pipeline run reproduces its outputs exactly.
"""
from __future__ import annotations

import json
import threading
import time
from collections import deque
from pathlib import Path

from ..errors import BackendUnavailableError, ConfigError
from ..jsonutil import digest_value
from . import wire
from .base import Backend, SynthesisRequest

TRACE_SCHEMA_VERSION = 1


def _request_payload(op: str, *args) -> dict:
    if op == "synthesize":
        return wire.synthesis_request_to_dict(args[0])
    if op == "generate_audio":
        prompt, duration, kind = args
        return {"prompt": prompt, "duration": float(duration), "kind": kind}
    if op == "embed":
        return {"text": args[0]}
    if op == "align":
        words, clip = args
        return {"words": list(words), "audio_b64": wire.clip_to_payload(clip)["audio_b64"]}
    if op == "mos":
        return {"audio_b64": wire.clip_to_payload(args[0])["audio_b64"]}
    if op == "judge":
        prompt, attachments, session_id = args
        return {"prompt": prompt, "attachments": list(attachments),
                "session_id": session_id}
    if op == "speaker_embed":
        return {"audio_b64": wire.clip_to_payload(args[0])["audio_b64"]}
    if op == "capabilities":
        return {}
    raise KeyError(op)


def request_digest(op: str, payload: dict) -> str:
    return digest_value({"op": op, "request": payload})


def _encode_response(op: str, result) -> dict:
    if op in ("synthesize", "generate_audio"):
        return wire.clip_to_payload(result)
    if op == "embed":
        return {"embedding": wire.vector_to_list(result), "dimension": len(result)}
    if op == "align":
        return wire.alignment_to_dict(result)
    if op == "mos":
        return {"mos": float(result)}
    if op == "judge":
        return {"response": result}
    if op == "speaker_embed":
        return {"embedding": wire.vector_to_list(result.values),
                "source_model": result.source_model,
                "dimension": len(result.values)}
    if op == "capabilities":
        return result
    raise KeyError(op)


def _decode_response(op: str, payload: dict):
    if op in ("synthesize", "generate_audio"):
        return wire.clip_from_payload(payload)
    if op == "embed":
        return wire.vector_from_list(payload["embedding"])
    if op == "align":
        return wire.alignment_from_dict(payload)
    if op == "mos":
        return float(payload["mos"])
    if op == "judge":
        return payload["response"]
    if op == "speaker_embed":
        return wire.speaker_embedding_from_dict(
            {"values": payload["embedding"], "source_model": payload["source_model"]})
    if op == "capabilities":
        return payload
    raise KeyError(op)


class TraceRecorder(Backend):
    """Pass-through backend that logs every call it forwards."""

    def __init__(self, inner: Backend, record_payloads: bool = True):
        self.inner = inner
        self.backend_id = inner.backend_id
        self.record_payloads = record_payloads
        self.entries: list[dict] = []
        self._lock = threading.Lock()

    def _call(self, op: str, args, invoke):
        payload = _request_payload(op, *args)
        started = time.perf_counter()
        result = invoke()
        latency_ms = (time.perf_counter() - started) * 1000.0
        entry = {
            "op": op,
            "request_digest": request_digest(op, payload),
            "backend_id": self.backend_id,
            "latency_ms": round(latency_ms, 3),
        }
        if self.record_payloads:
            entry["request"] = payload
            entry["response"] = _encode_response(op, result)
        with self._lock:
            self.entries.append(entry)
        return result

    def capabilities(self) -> dict:
        return self._call("capabilities", (), self.inner.capabilities)

    def synthesize(self, request: SynthesisRequest):
        return self._call("synthesize", (request,), lambda: self.inner.synthesize(request))

    def generate_audio(self, prompt, duration, kind):
        return self._call("generate_audio", (prompt, duration, kind),
                          lambda: self.inner.generate_audio(prompt, duration, kind))

    def embed(self, text):
        return self._call("embed", (text,), lambda: self.inner.embed(text))

    def align(self, transcript_words, clip):
        words = list(transcript_words)
        return self._call("align", (words, clip), lambda: self.inner.align(words, clip))

    def predict_mos(self, clip):
        return self._call("mos", (clip,), lambda: self.inner.predict_mos(clip))

    def judge(self, prompt, attachments, session_id):
        attachments = tuple(attachments)
        return self._call("judge", (prompt, attachments, session_id),
                          lambda: self.inner.judge(prompt, attachments, session_id))

    def speaker_embed(self, clip):
        return self._call("speaker_embed", (clip,), lambda: self.inner.speaker_embed(clip))

    def save(self, path) -> None:
        lines = [json.dumps({"schema_version": TRACE_SCHEMA_VERSION,
                             "backend_id": self.backend_id,
                             "record_payloads": self.record_payloads}, sort_keys=True)]
        with self._lock:
            lines.extend(json.dumps(entry, sort_keys=True) for entry in self.entries)
        Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


class TraceReplayBackend(Backend):
    """Serves recorded responses; raises when a call was never traced."""

    def __init__(self, entries, backend_id: str = "replay"):
        self.backend_id = backend_id
        self._responses: dict[str, deque] = {}
        self._lock = threading.Lock()
        for entry in entries:
            if "response" not in entry:
                raise ConfigError("trace was recorded without payloads; cannot replay")
            self._responses.setdefault(entry["request_digest"], deque()).append(
                (entry["op"], entry["response"]))

    @classmethod
    def load(cls, path) -> "TraceReplayBackend":
        lines = [line for line in
                 Path(path).read_text(encoding="utf-8").splitlines() if line.strip()]
        if not lines:
            raise ConfigError(f"{path}: empty trace file")
        header = json.loads(lines[0])
        if header.get("schema_version") != TRACE_SCHEMA_VERSION:
            raise ConfigError(
                f"{path}: unsupported trace schema {header.get('schema_version')!r}")
        entries = [json.loads(line) for line in lines[1:]]
        return cls(entries, backend_id=f"replay:{header.get('backend_id', '?')}")

    def _replay(self, op: str, *args):
        payload = _request_payload(op, *args)
        digest = request_digest(op, payload)
        with self._lock:
            queue = self._responses.get(digest)
            if not queue:
                raise BackendUnavailableError(
                    f"no traced response for {op} request {digest[:24]}…")
            recorded_op, response = queue.popleft()
        if recorded_op != op:
            raise BackendUnavailableError(
                f"trace digest collision: {op} vs recorded {recorded_op}")
        return _decode_response(op, response)

    def capabilities(self) -> dict:
        return self._replay("capabilities")

    def synthesize(self, request: SynthesisRequest):
        return self._replay("synthesize", request)

    def generate_audio(self, prompt, duration, kind):
        return self._replay("generate_audio", prompt, duration, kind)

    def embed(self, text):
        return self._replay("embed", text)

    def align(self, transcript_words, clip):
        return self._replay("align", list(transcript_words), clip)

    def predict_mos(self, clip):
        return self._replay("mos", clip)

    def judge(self, prompt, attachments, session_id):
        return self._replay("judge", prompt, tuple(attachments), session_id)

    def speaker_embed(self, clip):
        return self._replay("speaker_embed", clip)

"""Backend implementation that talks to a remote protocol server.

Every POST carries a bearer token (when configured) and a fresh idempotency
key; transient failures (connection errors, timeouts, 5xx) are retried with
exponential backoff. Error payloads map back onto the same exception types
the in-process backends raise, so callers never branch on transport.
"""
from __future__ import annotations

import time
import uuid

import requests

from ..audio import Clip
from ..errors import (
    BackendUnavailableError,
    MalformedResponseError,
    ModeUnsupportedError,
)
from .base import Backend, SynthesisRequest
from . import wire

DEFAULT_TIMEOUT = 120.0
DEFAULT_RETRIES = 2
_BACKOFF_BASE = 0.5


class HTTPBackendClient(Backend):
    def __init__(self, base_url: str, token: str | None = None,
                 timeout: float = DEFAULT_TIMEOUT, retries: int = DEFAULT_RETRIES,
                 session: requests.Session | None = None):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self.retries = retries
        self.session = session or requests.Session()
        self.backend_id = base_url

    def _headers(self, idempotency_key: str | None = None) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.token:
            headers["Authorization"] = f"Bearer {self.token}"
        if idempotency_key:
            headers["Idempotency-Key"] = idempotency_key
        return headers

    def _raise_for_error(self, status: int, body: dict) -> None:
        error = body.get("error") if isinstance(body, dict) else None
        error_type = error.get("type") if isinstance(error, dict) else "unknown"
        message = error.get("message") if isinstance(error, dict) else str(body)
        detail = f"{self.base_url}: HTTP {status} {error_type}: {message}"
        if error_type == "mode_unsupported":
            raise ModeUnsupportedError(detail)
        if status in (401, 404, 503):
            raise BackendUnavailableError(detail)
        if status >= 500:
            raise BackendUnavailableError(detail)
        raise MalformedResponseError(detail)

    def _request(self, method: str, path: str, payload: dict | None = None) -> dict:
        url = f"{self.base_url}{path}"
        key = str(uuid.uuid4()) if method == "POST" else None
        last_error = None
        for attempt in range(self.retries + 1):
            try:
                response = self.session.request(
                    method, url, json=payload, timeout=self.timeout,
                    headers=self._headers(key))
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = BackendUnavailableError(f"{url}: {exc}")
            else:
                if response.status_code < 500:
                    try:
                        body = response.json()
                    except ValueError as exc:
                        raise MalformedResponseError(f"{url}: non-JSON body") from exc
                    if response.status_code == 200:
                        return body
                    self._raise_for_error(response.status_code, body)
                last_error = BackendUnavailableError(
                    f"{url}: HTTP {response.status_code}")
            if attempt < self.retries:
                time.sleep(_BACKOFF_BASE * (2 ** attempt))
        raise last_error

    # -- Backend interface -------------------------------------------------

    def capabilities(self) -> dict:
        return self._request("GET", "/v1/capabilities")

    def synthesize(self, request: SynthesisRequest) -> Clip:
        body = self._request("POST", "/v1/synthesize",
                             wire.synthesis_request_to_dict(request))
        return wire.clip_from_payload(body)

    def generate_audio(self, prompt: str, duration: float, kind: str):
        body = self._request("POST", "/v1/generate_audio",
                             {"prompt": prompt, "duration": duration, "kind": kind})
        return wire.clip_from_payload(body)

    def embed(self, text: str):
        body = self._request("POST", "/v1/embed", {"text": text})
        try:
            return wire.vector_from_list(body["embedding"])
        except KeyError as exc:
            raise MalformedResponseError("embed response missing 'embedding'") from exc

    def align(self, transcript_words, clip):
        payload = wire.clip_to_payload(clip)
        body = self._request("POST", "/v1/align",
                             {"words": list(transcript_words),
                              "audio_b64": payload["audio_b64"]})
        return wire.alignment_from_dict(body)

    def predict_mos(self, clip) -> float:
        payload = wire.clip_to_payload(clip)
        body = self._request("POST", "/v1/mos", {"audio_b64": payload["audio_b64"]})
        try:
            return float(body["mos"])
        except (KeyError, TypeError, ValueError) as exc:
            raise MalformedResponseError("mos response missing numeric 'mos'") from exc

    def judge(self, prompt: str, attachments, session_id: str) -> str:
        body = self._request("POST", "/v1/judge",
                             {"prompt": prompt, "attachments": list(attachments),
                              "session_id": session_id})
        try:
            return body["response"]
        except KeyError as exc:
            raise MalformedResponseError("judge response missing 'response'") from exc

    def speaker_embed(self, clip):
        payload = wire.clip_to_payload(clip)
        body = self._request("POST", "/v1/speaker_embed",
                             {"audio_b64": payload["audio_b64"]})
        try:
            return wire.speaker_embedding_from_dict(
                {"values": body["embedding"], "source_model": body["source_model"]})
        except KeyError as exc:
            raise MalformedResponseError(
                f"speaker_embed response missing {exc.args[0]!r}") from exc

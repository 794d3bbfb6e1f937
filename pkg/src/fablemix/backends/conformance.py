"""Wire-protocol conformance checks.

Runs a fixed corpus of requests against any protocol implementation and
validates every response against the versioned schemas, plus behavioral
ground rules the engine depends on: capability truthfulness, deterministic
repeat responses, exact generated durations, dimension-consistent
embeddings, and monotone alignments. The same suite runs in-process against
a Backend object or over HTTP against a live server, since both routes go
through identical dispatch logic.
"""
from __future__ import annotations

import base64
from dataclasses import dataclass, field

import jsonschema
import requests

from ..audio import Clip, decode_wav
from . import detmath
from .schemas import ERROR_SCHEMA, REQUEST_SCHEMAS, RESPONSE_SCHEMAS
from .server import handle_request

_SMOKE_RATE = 24000

# Valid-shaped request bodies used to probe endpoints that should be absent.
_PROBES = {
    "synthesize": {"model_id": "probe", "text": "hi", "language": "en",
                   "description": "plain"},
    "generate_audio": {"prompt": "probe", "duration": 0.1, "kind": "sfx"},
    "embed": {"text": "probe"},
    "align": None,  # filled in lazily with a real clip payload
    "mos": None,
    "judge": {"prompt": "probe", "session_id": "probe", "attachments": []},
    "speaker_embed": None,
}


@dataclass
class CheckResult:
    name: str
    ok: bool
    detail: str = ""


@dataclass
class ConformanceReport:
    backend_id: str = "?"
    checks: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(check.ok for check in self.checks)

    def failures(self) -> list:
        return [check for check in self.checks if not check.ok]

    def summary(self) -> str:
        lines = [f"conformance: {self.backend_id}"]
        for check in self.checks:
            status = "PASS" if check.ok else "FAIL"
            line = f"  {status} {check.name}"
            if check.detail:
                line += f": {check.detail}"
            lines.append(line)
        verdict = "OK" if self.ok else f"{len(self.failures())} failing"
        lines.append(f"  => {verdict} ({len(self.checks)} checks)")
        return "\n".join(lines)


class InProcessHarness:
    """Drives a Backend through the server's dispatch, no sockets."""

    def __init__(self, backend):
        self.backend = backend

    def get(self, path: str):
        return handle_request(self.backend, "GET", path, None)

    def post(self, path: str, payload: dict):
        return handle_request(self.backend, "POST", path, payload)


class HttpHarness:
    def __init__(self, base_url: str, token: str | None = None, timeout: float = 60.0):
        self.base_url = base_url.rstrip("/")
        self.token = token
        self.timeout = timeout
        self.session = requests.Session()

    def _headers(self) -> dict:
        return {"Authorization": f"Bearer {self.token}"} if self.token else {}

    def get(self, path: str):
        response = self.session.get(f"{self.base_url}{path}", timeout=self.timeout,
                                    headers=self._headers())
        return response.status_code, response.json()

    def post(self, path: str, payload: dict):
        response = self.session.post(f"{self.base_url}{path}", json=payload,
                                     timeout=self.timeout, headers=self._headers())
        return response.status_code, response.json()


def _smoke_clip(index: int) -> Clip:
    duration = 0.2 + 0.1 * (index % 6)
    freq = 220 + 7 * index
    n = round(duration * _SMOKE_RATE)
    return Clip(detmath.sine(freq, n, _SMOKE_RATE, 0.25), _SMOKE_RATE)


def _valid(instance, schema) -> str | None:
    try:
        jsonschema.validate(instance, schema)
        return None
    except jsonschema.ValidationError as exc:
        return exc.message


def run_conformance(harness, align_corpus_size: int = 10) -> ConformanceReport:
    from . import wire

    report = ConformanceReport()

    def check(name: str, fn) -> object:
        try:
            value = fn()
        except Exception as exc:
            report.checks.append(CheckResult(name, False, f"{type(exc).__name__}: {exc}"))
            return None
        report.checks.append(CheckResult(name, True))
        return value

    def expect_ok(endpoint: str, payload: dict) -> dict:
        status, body = harness.post(f"/v1/{endpoint}", payload)
        if status != 200:
            raise AssertionError(f"HTTP {status}: {body}")
        message = _valid(body, RESPONSE_SCHEMAS[endpoint])
        if message:
            raise AssertionError(f"response schema: {message}")
        return body

    # Capabilities first; everything else keys off the endpoint list.
    def get_capabilities():
        status, body = harness.get("/v1/capabilities")
        if status != 200:
            raise AssertionError(f"HTTP {status}: {body}")
        message = _valid(body, RESPONSE_SCHEMAS["capabilities"])
        if message:
            raise AssertionError(f"capabilities schema: {message}")
        if body["protocol_version"] != 1:
            raise AssertionError(f"protocol_version {body['protocol_version']} != 1")
        return body

    capabilities = check("capabilities", get_capabilities)
    if capabilities is None:
        return report
    report.backend_id = capabilities["backend_id"]
    endpoints = set(capabilities["endpoints"])
    profiles = capabilities["profiles"]

    if "synthesize" in endpoints:
        def check_synthesize():
            if not profiles:
                raise AssertionError("synthesize bound but no profiles declared")
            profile = profiles[0]
            payload = {"model_id": profile["model_id"], "text": "the quick brown fox",
                       "language": sorted(profile["languages"])[0],
                       "description": "plain narration"}
            body = expect_ok("synthesize", payload)
            clip = decode_wav(base64.b64decode(body["audio_b64"]))
            if clip.sample_rate != body["sample_rate"]:
                raise AssertionError("declared rate disagrees with WAV header")
            again = expect_ok("synthesize", payload)
            if again["audio_b64"] != body["audio_b64"]:
                raise AssertionError("same request produced different audio")
        check("synthesize", check_synthesize)

    if "generate_audio" in endpoints:
        def check_generate():
            for kind in ("sfx", "ambiance", "bgm"):
                body = expect_ok("generate_audio",
                                 {"prompt": f"{kind} probe", "duration": 0.5,
                                  "kind": kind})
                clip = decode_wav(base64.b64decode(body["audio_b64"]))
                expected = round(0.5 * clip.sample_rate)
                if len(clip) != expected:
                    raise AssertionError(
                        f"{kind}: {len(clip)} samples, expected exactly {expected}")
        check("generate_audio", check_generate)

    if "embed" in endpoints:
        def check_embed():
            corpus = ["a storm rolls in", "quiet library", "footsteps on gravel"]
            dimensions = set()
            first = None
            for text in corpus:
                body = expect_ok("embed", {"text": text})
                if body["dimension"] != len(body["embedding"]):
                    raise AssertionError("dimension field disagrees with vector length")
                dimensions.add(body["dimension"])
                if first is None:
                    first = body
            if len(dimensions) != 1:
                raise AssertionError(f"inconsistent dimensions {sorted(dimensions)}")
            again = expect_ok("embed", {"text": corpus[0]})
            if again != first:
                raise AssertionError("same text embedded differently")
        check("embed", check_embed)

    if "align" in endpoints:
        def check_align():
            vocabulary = ["night", "wind", "door", "steps", "voice"]
            for index in range(align_corpus_size):
                clip = _smoke_clip(index)
                words = vocabulary[:(index % len(vocabulary)) + 1]
                payload = {"words": words,
                           "audio_b64": wire.clip_to_payload(clip)["audio_b64"]}
                body = expect_ok("align", payload)
                spans = body["spans"]
                if len(spans) != len(words):
                    raise AssertionError(
                        f"clip {index}: {len(spans)} spans for {len(words)} words")
                cursor = 0.0
                for span in spans:
                    if span["start"] < cursor - 1e-9 or span["end"] <= span["start"]:
                        raise AssertionError(f"clip {index}: non-monotone span {span}")
                    cursor = span["end"]
                if spans and cursor > body["clip_duration"] + 1e-6:
                    raise AssertionError(f"clip {index}: spans run past the clip")
        check("align", check_align)

    if "mos" in endpoints:
        def check_mos():
            clip = _smoke_clip(0)
            body = expect_ok("mos", {"audio_b64": wire.clip_to_payload(clip)["audio_b64"]})
            if not 1.0 <= body["mos"] <= 5.0:
                raise AssertionError(f"mos {body['mos']} outside [1, 5]")
        check("mos", check_mos)

    if "judge" in endpoints:
        def check_judge():
            expect_ok("judge", {"prompt": "Respond with your assessment.",
                                "session_id": "conformance-judge", "attachments": []})
        check("judge", check_judge)

    if "speaker_embed" in endpoints:
        def check_speaker_embed():
            clip = _smoke_clip(1)
            body = expect_ok("speaker_embed",
                             {"audio_b64": wire.clip_to_payload(clip)["audio_b64"]})
            if body["dimension"] != len(body["embedding"]):
                raise AssertionError("dimension field disagrees with vector length")
        check("speaker_embed", check_speaker_embed)

    def check_truthfulness():
        probes = dict(_PROBES)
        audio_b64 = wire.clip_to_payload(_smoke_clip(2))["audio_b64"]
        probes["align"] = {"words": ["probe"], "audio_b64": audio_b64}
        probes["mos"] = {"audio_b64": audio_b64}
        probes["speaker_embed"] = {"audio_b64": audio_b64}
        for endpoint in REQUEST_SCHEMAS:
            if endpoint in endpoints:
                continue
            status, body = harness.post(f"/v1/{endpoint}", probes[endpoint])
            if status < 400:
                raise AssertionError(f"unlisted {endpoint} answered HTTP {status}")
            message = _valid(body, ERROR_SCHEMA)
            if message:
                raise AssertionError(f"unlisted {endpoint} error shape: {message}")
    check("capability_truthfulness", check_truthfulness)

    if "embed" in endpoints:
        def check_bad_request():
            status, body = harness.post("/v1/embed", {"wrong_field": 1})
            if not 400 <= status < 500:
                raise AssertionError(f"malformed request answered HTTP {status}")
            message = _valid(body, ERROR_SCHEMA)
            if message:
                raise AssertionError(f"error shape: {message}")
        check("malformed_request_rejected", check_bad_request)

    return report

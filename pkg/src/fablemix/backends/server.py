"""HTTP server exposing any Backend over the wire protocol.

`handle_request` is the transport-independent core: it validates the
request against the endpoint schema, runs the backend call, and maps
exceptions onto structured error payloads with distinct HTTP statuses. The
socket layer is a thin stdlib wrapper around it, so the conformance suite
can exercise identical code paths in-process.

Run a standalone mock server with:

    python -m fablemix.backends.server --port 8723 --seed 0
"""
from __future__ import annotations

import argparse
import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import jsonschema

from ..errors import (
    BackendUnavailableError,
    FablemixError,
    ModeUnsupportedError,
)
from . import wire
from .base import Backend
from .mock import MockBackend
from .schemas import REQUEST_SCHEMAS

log = logging.getLogger(__name__)


def _error(status: int, error_type: str, message: str) -> tuple[int, dict]:
    return status, {"error": {"type": error_type, "message": message}}


def _execute(backend: Backend, op: str, payload: dict) -> dict:
    if op == "synthesize":
        clip = backend.synthesize(wire.synthesis_request_from_dict(payload))
        return wire.clip_to_payload(clip)
    if op == "generate_audio":
        clip = backend.generate_audio(payload["prompt"], float(payload["duration"]),
                                      payload["kind"])
        return wire.clip_to_payload(clip)
    if op == "embed":
        vector = backend.embed(payload["text"])
        return {"embedding": wire.vector_to_list(vector), "dimension": len(vector)}
    if op == "align":
        clip = wire.clip_from_payload(payload)
        return wire.alignment_to_dict(backend.align(payload["words"], clip))
    if op == "mos":
        clip = wire.clip_from_payload(payload)
        return {"mos": float(backend.predict_mos(clip))}
    if op == "judge":
        response = backend.judge(payload["prompt"],
                                 tuple(payload.get("attachments", ())),
                                 payload["session_id"])
        return {"response": response}
    if op == "speaker_embed":
        clip = wire.clip_from_payload(payload)
        embedding = backend.speaker_embed(clip)
        return {
            "embedding": wire.vector_to_list(embedding.values),
            "source_model": embedding.source_model,
            "dimension": len(embedding.values),
        }
    raise KeyError(op)


def handle_request(backend: Backend, method: str, path: str,
                   payload: dict | None) -> tuple[int, dict]:
    """Route one protocol request; returns (status, response body)."""
    if method == "GET":
        if path == "/health":
            return 200, {"status": "ok"}
        if path == "/v1/capabilities":
            return 200, backend.capabilities()
        return _error(404, "not_found", f"no route for GET {path}")
    if method != "POST":
        return _error(405, "method_not_allowed", f"{method} not supported")
    if not path.startswith("/v1/"):
        return _error(404, "not_found", f"no route for POST {path}")
    op = path[len("/v1/"):]
    if op not in REQUEST_SCHEMAS:
        return _error(404, "not_found", f"unknown operation {op!r}")
    if op not in backend.capabilities()["endpoints"]:
        return _error(404, "not_bound", f"{op!r} is not served by this backend")
    try:
        jsonschema.validate(payload, REQUEST_SCHEMAS[op])
    except jsonschema.ValidationError as exc:
        return _error(400, "bad_request", exc.message)
    try:
        return 200, _execute(backend, op, payload)
    except BackendUnavailableError as exc:
        return _error(503, "backend_unavailable", str(exc))
    except ModeUnsupportedError as exc:
        return _error(422, "mode_unsupported", str(exc))
    except (FablemixError, ValueError) as exc:
        return _error(400, "bad_request", str(exc))
    except Exception as exc:  # pragma: no cover - defensive
        log.exception("unhandled error serving %s", op)
        return _error(500, "internal", str(exc))


class _Handler(BaseHTTPRequestHandler):
    backend: Backend = None
    token: str | None = None

    def _respond(self, status: int, body: dict) -> None:
        data = json.dumps(body).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def _authorized(self) -> bool:
        if self.token is None:
            return True
        return self.headers.get("Authorization") == f"Bearer {self.token}"

    def _serve(self, method: str) -> None:
        if not self._authorized():
            self._respond(*_error(401, "unauthorized", "missing or wrong bearer token"))
            return
        payload = None
        if method == "POST":
            length = int(self.headers.get("Content-Length", 0))
            raw = self.rfile.read(length) if length else b""
            try:
                payload = json.loads(raw.decode("utf-8")) if raw else {}
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                self._respond(*_error(400, "bad_request", f"body is not JSON: {exc}"))
                return
        self._respond(*handle_request(self.backend, method, self.path, payload))

    def do_GET(self):
        self._serve("GET")

    def do_POST(self):
        self._serve("POST")

    def log_message(self, format, *args):
        log.debug("%s - %s", self.address_string(), format % args)


def make_server(backend: Backend, host: str = "127.0.0.1", port: int = 0,
                token: str | None = None) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_Handler,), {"backend": backend, "token": token})
    return ThreadingHTTPServer((host, port), handler)


def run_in_thread(backend: Backend, token: str | None = None):
    """Start a server on an ephemeral port; returns (server, base_url).

    Call server.shutdown() when done.
    """
    server = make_server(backend, port=0, token=token)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    host, port = server.server_address[:2]
    return server, f"http://{host}:{port}"


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Serve the mock backend over HTTP.")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8723)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--token", default=None, help="require this bearer token")
    parser.add_argument("--fixtures", default=None,
                        help="JSON file of judge fixtures (session_id -> responses)")
    args = parser.parse_args(argv)
    fixtures = None
    if args.fixtures:
        with open(args.fixtures, encoding="utf-8") as fh:
            fixtures = json.load(fh)
    backend = MockBackend(seed=args.seed, judge_fixtures=fixtures)
    server = make_server(backend, host=args.host, port=args.port, token=args.token)
    host, port = server.server_address[:2]
    print(f"mock backend listening on http://{host}:{port}")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


if __name__ == "__main__":
    raise SystemExit(main())

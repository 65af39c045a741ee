"""Request dispatch and the two transports (stdio pipe, TCP).

Every inbound line produces exactly one response line; malformed input
gets an error envelope, never a dropped connection. Responses are
canonical JSON (sorted keys, compact separators, raw UTF-8) so stub
output is byte-stable across runs and implementations.
"""

from __future__ import annotations

import base64
import json
import socketserver
import sys
from typing import Callable

from backend_ref import stub

Handler = Callable[[dict], dict]


def canonical(obj: object) -> str:
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"),
                      sort_keys=True)


def make_stub_handler(transcripts: dict[tuple[str, int], str]) -> Handler:
    def handle(req: dict) -> dict:
        rid = req.get("id")
        try:
            op = req.get("op")
            if op == "embed":
                raw = base64.b64decode(str(req["audio_b64"]), validate=True)
                frames = stub.embed_vectors(raw, int(req["sample_rate"]))
                return {"id": rid, "vector": frames}
            if op == "transcribe":
                text, words = stub.transcribe(req.get("prompt"), transcripts)
                return {"id": rid, "text": text, "words": words}
            if op == "llm":
                return {"id": rid, "label": stub.llm_label(str(req.get("prompt", "")))}
            return {"id": rid, "error": f"unknown op {op!r}"}
        except Exception as exc:
            return {"id": rid, "error": str(exc)}

    return handle


def respond_bytes(line: bytes, handler: Handler) -> bytes:
    """One request line in, one response line out; never raises."""
    try:
        req = json.loads(line.decode("utf-8"))
    except (UnicodeDecodeError, ValueError) as exc:
        resp = {"id": None, "error": f"malformed request line: {exc}"}
    else:
        if isinstance(req, dict):
            try:
                resp = handler(req)
            except Exception as exc:
                resp = {"id": req.get("id"), "error": str(exc)}
        else:
            resp = {"id": None, "error": "request must be a JSON object"}
    return (canonical(resp) + "\n").encode("utf-8")


def serve_stdio(handler: Handler) -> None:
    stdin = sys.stdin.buffer
    stdout = sys.stdout.buffer
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        stdout.write(respond_bytes(line, handler))
        stdout.flush()


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        for line in self.rfile:
            line = line.strip()
            if not line:
                continue
            self.wfile.write(respond_bytes(line, self.server.handler_fn))
            self.wfile.flush()


class TCPBackendServer(socketserver.ThreadingTCPServer):
    """One lockstep conversation per connection, many connections."""

    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, bind: tuple[str, int], handler: Handler):
        super().__init__(bind, _LineHandler)
        self.handler_fn = handler

    @property
    def port(self) -> int:
        return self.server_address[1]


def parse_bind(spec: str) -> tuple[str, int]:
    """'HOST:PORT' or ':PORT' (all interfaces)."""
    host, sep, port = spec.rpartition(":")
    if not sep or not port.isdigit():
        raise ValueError(f"bad TCP bind spec {spec!r}; expected HOST:PORT or :PORT")
    return host, int(port)


def serve_tcp(bind_spec: str, handler: Handler) -> None:
    server = TCPBackendServer(parse_bind(bind_spec), handler)
    print(f"listening on {server.server_address[0]}:{server.port}",
          file=sys.stderr, flush=True)
    try:
        server.serve_forever()
    finally:
        server.server_close()

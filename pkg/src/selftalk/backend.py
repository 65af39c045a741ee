"""Client for encoder/ASR/LLM backends over newline-delimited JSON.

One request, one response, one line each; requests carry audio as
base64 little-endian float32. Transports: `tcp://host:port`,
`exec://<command line>` (child process stdio), or the literal `stub`
for the in-process deterministic backend. The stub's derivations
(FNV-1a seed, LCG sample stream) are fixed so an external
implementation can match it byte for byte; see PROTOCOL.md.
"""

from __future__ import annotations

import base64
import json
import select
import shlex
import socket
import subprocess
from dataclasses import dataclass

import numpy as np

from selftalk.errors import (
    BackendError,
    BackendProtocolError,
    BackendTimeoutError,
    DataError,
)
from selftalk.labels import OTHERS, DISPLAY_NAMES, normalize_display_label
from selftalk.util import canonical_json, fnv1a64, lcg_next

DEFAULT_TIMEOUT_S = 30.0
STUB_EMBED_DIM = 32


@dataclass(frozen=True)
class Word:
    w: str
    t_start: float
    t_end: float


def encode_audio(samples: np.ndarray) -> str:
    return base64.b64encode(np.asarray(samples, dtype="<f4").tobytes()).decode("ascii")


def decode_audio(b64: str) -> np.ndarray:
    try:
        raw = base64.b64decode(b64, validate=True)
    except Exception as exc:
        raise BackendProtocolError(f"bad audio_b64: {exc}") from exc
    if len(raw) % 4:
        raise BackendProtocolError("audio_b64 length not a multiple of 4 bytes")
    return np.frombuffer(raw, dtype="<f4").astype(np.float64)


# ---------------------------------------------------------------------------
# Deterministic stub reference implementation.

def stub_embed_frames(audio_f32: bytes, sample_rate: int, dim: int = STUB_EMBED_DIM) -> np.ndarray:
    """Pseudo-random frame vectors seeded by the audio bytes.

    seed = FNV-1a 64 of the raw little-endian f32 bytes; an LCG is
    advanced once per value and the top 24 bits map to [-1, 1). One
    frame per 100 ms (sample_rate // 10 samples), at least one frame.
    """
    if len(audio_f32) == 0:
        raise DataError("cannot embed empty audio")
    if sample_rate <= 0:
        raise DataError("sample_rate must be positive")
    n_samples = len(audio_f32) // 4
    hop = sample_rate // 10
    n_frames = max(1, n_samples // hop) if hop > 0 else 1
    state = fnv1a64(audio_f32)
    out = np.empty((n_frames, dim), dtype=np.float64)
    for i in range(n_frames):
        for j in range(dim):
            state = lcg_next(state)
            v = state >> 40
            out[i, j] = float(np.float32(v / 8388608.0 - 1.0))
    return out


def stub_transcribe(prompt: str | None, manifest_text: dict[tuple[str, int], str]) -> tuple[str, list[Word]]:
    """Manifest-backed transcription with uniform word timings.

    The layout rides in `prompt` as JSON: {"session_id", "segments":
    [{"seq_no", "t_start", "t_end"}, ...]} with times in assembled-clip
    coordinates. Each segment's text is split on whitespace and its
    words get equal slots inside the segment span.
    """
    if not prompt:
        raise BackendError("stub transcribe needs a layout prompt")
    try:
        layout = json.loads(prompt)
        session_id = str(layout["session_id"])
        segments = layout["segments"]
    except (KeyError, TypeError, ValueError) as exc:
        raise BackendError(f"bad transcribe layout: {exc}") from exc
    words: list[Word] = []
    for seg in segments:
        try:
            seq_no = int(seg["seq_no"])
            t0 = float(seg["t_start"])
            t1 = float(seg["t_end"])
        except (KeyError, TypeError, ValueError) as exc:
            raise BackendError(f"bad transcribe layout segment: {exc}") from exc
        key = (session_id, seq_no)
        if key not in manifest_text:
            raise BackendError(f"no manifest text for session {session_id} seq {seq_no}")
        toks = manifest_text[key].split()
        if not toks:
            continue
        slot = (t1 - t0) / len(toks)
        for i, tok in enumerate(toks):
            words.append(Word(tok, t0 + i * slot, t0 + (i + 1) * slot))
    return " ".join(w.w for w in words), words


def stub_llm(prompt: str) -> str:
    """Deterministic placeholder: hash of the prompt picks a display label."""
    idx = fnv1a64(prompt.encode("utf-8")) % 3
    return list(DISPLAY_NAMES.values())[idx]


def handle_stub_request(req: dict, manifest_text: dict[tuple[str, int], str],
                        embed_dim: int = STUB_EMBED_DIM) -> dict:
    """Serve one decoded request dict; errors become error responses."""
    rid = req.get("id")
    try:
        op = req.get("op")
        if op == "embed":
            raw = base64.b64decode(str(req["audio_b64"]), validate=True)
            frames = stub_embed_frames(raw, int(req["sample_rate"]), embed_dim)
            return {"id": rid, "vector": [[float(x) for x in row] for row in frames]}
        if op == "transcribe":
            text, words = stub_transcribe(req.get("prompt"), manifest_text)
            return {"id": rid, "text": text,
                    "words": [{"w": w.w, "t_start": w.t_start, "t_end": w.t_end}
                              for w in words]}
        if op == "llm":
            return {"id": rid, "label": stub_llm(str(req.get("prompt", "")))}
        return {"id": rid, "error": f"unknown op {op!r}"}
    except Exception as exc:
        return {"id": rid, "error": str(exc)}


# ---------------------------------------------------------------------------
# Transports.

class _SocketChannel:
    def __init__(self, host: str, port: int, timeout_s: float):
        self.timeout_s = timeout_s
        try:
            self.sock = socket.create_connection((host, port), timeout=timeout_s)
        except OSError as exc:
            raise BackendError(f"cannot connect to {host}:{port}: {exc}") from exc
        self.buf = b""

    def send_line(self, line: bytes) -> None:
        try:
            self.sock.sendall(line)
        except OSError as exc:
            raise BackendError(f"send failed: {exc}") from exc

    def recv_line(self) -> bytes:
        while b"\n" not in self.buf:
            try:
                chunk = self.sock.recv(65536)
            except socket.timeout as exc:
                raise BackendTimeoutError("backend response timed out") from exc
            except OSError as exc:
                raise BackendError(f"recv failed: {exc}") from exc
            if not chunk:
                raise BackendError("backend closed the connection")
            self.buf += chunk
        line, self.buf = self.buf.split(b"\n", 1)
        return line

    def close(self) -> None:
        try:
            self.sock.close()
        except OSError:
            pass


class _PipeChannel:
    def __init__(self, command: str, timeout_s: float):
        self.timeout_s = timeout_s
        argv = shlex.split(command)
        if not argv:
            raise BackendError("empty exec:// command")
        try:
            self.proc = subprocess.Popen(argv, stdin=subprocess.PIPE,
                                         stdout=subprocess.PIPE)
        except OSError as exc:
            raise BackendError(f"cannot spawn {argv[0]}: {exc}") from exc
        self.buf = b""

    def send_line(self, line: bytes) -> None:
        try:
            self.proc.stdin.write(line)
            self.proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise BackendError(f"send failed: {exc}") from exc

    def recv_line(self) -> bytes:
        fd = self.proc.stdout.fileno()
        while b"\n" not in self.buf:
            ready, _, _ = select.select([fd], [], [], self.timeout_s)
            if not ready:
                raise BackendTimeoutError("backend response timed out")
            chunk = self.proc.stdout.read1(65536)
            if not chunk:
                raise BackendError("backend process closed its stdout")
            self.buf += chunk
        line, self.buf = self.buf.split(b"\n", 1)
        return line

    def close(self) -> None:
        for stream in (self.proc.stdin, self.proc.stdout):
            try:
                stream.close()
            except OSError:
                pass
        try:
            self.proc.terminate()
            self.proc.wait(timeout=5)
        except Exception:
            self.proc.kill()


class BackendClient:
    """Lockstep one-in-flight client; `stub` runs in-process."""

    def __init__(self, uri: str, timeout_s: float = DEFAULT_TIMEOUT_S,
                 embed_dim: int = STUB_EMBED_DIM,
                 manifest_text: dict[tuple[str, int], str] | None = None):
        self.uri = uri
        self.timeout_s = timeout_s
        self.embed_dim = embed_dim
        self.manifest_text = manifest_text or {}
        self._next_id = 0
        self._channel = None
        if uri == "stub":
            pass
        elif uri.startswith("tcp://"):
            rest = uri[len("tcp://"):]
            host, _, port = rest.rpartition(":")
            if not host or not port.isdigit():
                raise BackendError(f"bad tcp uri {uri!r}")
            self._channel = _SocketChannel(host, int(port), timeout_s)
        elif uri.startswith("exec://"):
            self._channel = _PipeChannel(uri[len("exec://"):], timeout_s)
        else:
            raise BackendError(f"unknown backend uri {uri!r}")

    def close(self) -> None:
        if self._channel is not None:
            self._channel.close()

    def __enter__(self) -> "BackendClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _call(self, req: dict) -> dict:
        self._next_id += 1
        req["id"] = self._next_id
        if self._channel is None:
            resp = handle_stub_request(req, self.manifest_text, self.embed_dim)
        else:
            self._channel.send_line(canonical_json(req).encode("utf-8") + b"\n")
            line = self._channel.recv_line()
            try:
                resp = json.loads(line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise BackendProtocolError(f"malformed response line: {exc}") from exc
        if not isinstance(resp, dict):
            raise BackendProtocolError("response is not a JSON object")
        if resp.get("id") != req["id"]:
            raise BackendProtocolError(
                f"response id {resp.get('id')!r} does not echo request id {req['id']}")
        if "error" in resp:
            raise BackendError(f"backend error: {resp['error']}")
        return resp

    def embed(self, samples: np.ndarray, sample_rate: int) -> np.ndarray:
        if np.asarray(samples).size == 0:
            raise DataError("cannot embed empty audio")
        resp = self._call({"op": "embed", "sample_rate": int(sample_rate),
                           "audio_b64": encode_audio(samples)})
        vec = resp.get("vector")
        if not isinstance(vec, list) or not vec:
            raise BackendProtocolError("embed response missing vector")
        arr = np.asarray(vec, dtype=np.float64)
        if arr.ndim != 2:
            raise BackendProtocolError("embed vector must be a list of frame vectors")
        if arr.shape[1] != self.embed_dim:
            raise BackendProtocolError(
                f"embed dim {arr.shape[1]} does not match configured {self.embed_dim}")
        if not np.all(np.isfinite(arr)):
            raise BackendProtocolError("embed vector contains non-finite values")
        return arr

    def transcribe(self, samples: np.ndarray, sample_rate: int,
                   prompt: str | None = None) -> tuple[str, list[Word]]:
        if np.asarray(samples).size == 0:
            raise DataError("cannot transcribe empty audio")
        req = {"op": "transcribe", "sample_rate": int(sample_rate),
               "audio_b64": encode_audio(samples)}
        if prompt is not None:
            req["prompt"] = prompt
        resp = self._call(req)
        text = resp.get("text")
        words_raw = resp.get("words")
        if not isinstance(text, str) or not isinstance(words_raw, list):
            raise BackendProtocolError("transcribe response missing text/words")
        words: list[Word] = []
        for rec in words_raw:
            try:
                words.append(Word(str(rec["w"]), float(rec["t_start"]),
                                  float(rec["t_end"])))
            except (KeyError, TypeError, ValueError) as exc:
                raise BackendProtocolError(f"bad word record {rec!r}") from exc
        duration = np.asarray(samples).size / sample_rate
        prev_start = -np.inf
        for w in words:
            if w.t_start < prev_start:
                raise BackendProtocolError("word timestamps out of order")
            if w.t_end < w.t_start or w.t_start < -1e-9 or w.t_end > duration + 1e-6:
                raise BackendProtocolError(
                    f"word span ({w.t_start}, {w.t_end}) outside window [0, {duration:.3f}]")
            prev_start = w.t_start
        return text, words

    def llm_classify(self, prompt: str) -> tuple[str, bool]:
        """Returns (canonical label, parse_ok). Unparseable -> (others, False)."""
        resp = self._call({"op": "llm", "prompt": prompt})
        raw = resp.get("label")
        if not isinstance(raw, str):
            raise BackendProtocolError("llm response missing label")
        label = normalize_display_label(raw)
        if label is None:
            return OTHERS, False
        return label, True

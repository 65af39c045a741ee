"""Stub backend derivations, the wire protocol, and both transports.

The stub-embed oracle below reimplements the derivation from its
written definition (FNV-1a seed, LCG advanced before each draw, top 24
bits to [-1, 1)) with struct-based parsing, independent of the
implementation's numpy path.
"""

import json
import socketserver
import struct
import sys
import threading
import textwrap

import numpy as np
import pytest

from selftalk.backend import (
    STUB_EMBED_DIM,
    BackendClient,
    Word,
    decode_audio,
    encode_audio,
    handle_stub_request,
    stub_embed_frames,
    stub_llm,
    stub_transcribe,
)
from selftalk.errors import (
    BackendError,
    BackendProtocolError,
    BackendTimeoutError,
    DataError,
)
from selftalk.labels import DISPLAY_NAMES


def oracle_embed(audio_f32: bytes, sample_rate: int, dim: int = 32):
    h = 0xCBF29CE484222325
    for byte in audio_f32:
        h = ((h ^ byte) * 0x100000001B3) & 0xFFFFFFFFFFFFFFFF
    n_samples = len(audio_f32) // 4
    hop = sample_rate // 10
    n_frames = max(1, n_samples // hop) if hop else 1
    frames = []
    s = h
    for _ in range(n_frames):
        row = []
        for _ in range(dim):
            s = (s * 6364136223846793005 + 1442695040888963407) % 2**64
            v = s >> 40
            row.append(struct.unpack("<f", struct.pack("<f", v / 8388608.0 - 1.0))[0])
        frames.append(row)
    return frames


def audio_bytes(samples) -> bytes:
    return np.asarray(samples, dtype="<f4").tobytes()


# -- stub derivations -------------------------------------------------------

def test_stub_embed_matches_independent_oracle():
    rng = np.random.default_rng(30)
    for sr, dur in ((16000, 0.35), (8000, 1.0), (16000, 0.05)):
        raw = audio_bytes(rng.uniform(-1, 1, int(sr * dur)))
        got = stub_embed_frames(raw, sr)
        want = oracle_embed(raw, sr)
        assert got.shape == (len(want), STUB_EMBED_DIM)
        assert got.tolist() == want


def test_stub_embed_frame_count():
    sr = 16000
    # 100 ms hop: 1 frame per 1600 samples, floor division, minimum 1.
    assert stub_embed_frames(audio_bytes(np.zeros(1600)), sr).shape[0] == 1
    assert stub_embed_frames(audio_bytes(np.zeros(3199)), sr).shape[0] == 1
    assert stub_embed_frames(audio_bytes(np.zeros(3200)), sr).shape[0] == 2
    assert stub_embed_frames(audio_bytes(np.zeros(100)), sr).shape[0] == 1


def test_stub_embed_deterministic_and_content_sensitive():
    raw = audio_bytes(np.linspace(-1, 1, 3200))
    a = stub_embed_frames(raw, 16000)
    b = stub_embed_frames(raw, 16000)
    np.testing.assert_array_equal(a, b)
    flipped = bytearray(raw)
    flipped[0] ^= 1
    c = stub_embed_frames(bytes(flipped), 16000)
    assert not np.array_equal(a, c)


def test_stub_embed_values_in_unit_interval():
    raw = audio_bytes(np.ones(1600))
    frames = stub_embed_frames(raw, 16000)
    assert np.all(frames >= -1.0) and np.all(frames < 1.0)


def test_stub_embed_rejects_empty():
    with pytest.raises(DataError):
        stub_embed_frames(b"", 16000)


def test_stub_transcribe_uniform_slots():
    prompt = json.dumps({"session_id": "S",
                         "segments": [{"seq_no": 0, "t_start": 1.0, "t_end": 3.0}]})
    text, words = stub_transcribe(prompt, {("S", 0): "a b c d"})
    assert text == "a b c d"
    assert [w.w for w in words] == ["a", "b", "c", "d"]
    starts = [w.t_start for w in words]
    assert starts == pytest.approx([1.0, 1.5, 2.0, 2.5])
    assert words[-1].t_end == pytest.approx(3.0)


def test_stub_transcribe_multi_segment_order():
    prompt = json.dumps({"session_id": "S", "segments": [
        {"seq_no": 3, "t_start": 0.0, "t_end": 1.0},
        {"seq_no": 7, "t_start": 1.05, "t_end": 2.05},
    ]})
    text, words = stub_transcribe(prompt, {("S", 3): "x y", ("S", 7): "z"})
    assert text == "x y z"
    assert [w.w for w in words] == ["x", "y", "z"]
    assert words[2].t_start == pytest.approx(1.05)


def test_stub_transcribe_empty_text_segment_is_skipped():
    prompt = json.dumps({"session_id": "S", "segments": [
        {"seq_no": 0, "t_start": 0.0, "t_end": 1.0},
        {"seq_no": 1, "t_start": 1.0, "t_end": 2.0},
    ]})
    text, words = stub_transcribe(prompt, {("S", 0): "", ("S", 1): "ok"})
    assert text == "ok"
    assert len(words) == 1


def test_stub_transcribe_errors():
    with pytest.raises(BackendError):
        stub_transcribe(None, {})
    with pytest.raises(BackendError):
        stub_transcribe("not json", {})
    prompt = json.dumps({"session_id": "S",
                         "segments": [{"seq_no": 0, "t_start": 0, "t_end": 1}]})
    with pytest.raises(BackendError):
        stub_transcribe(prompt, {})  # no manifest entry


def test_stub_llm_deterministic_display_name():
    out = stub_llm("some prompt")
    assert out in DISPLAY_NAMES.values()
    assert stub_llm("some prompt") == out


def test_audio_round_trip():
    samples = np.array([0.0, 0.5, -0.25, 1.0])
    back = decode_audio(encode_audio(samples))
    np.testing.assert_array_equal(back, samples.astype(np.float32))
    with pytest.raises(BackendProtocolError):
        decode_audio("!!!not base64!!!")
    with pytest.raises(BackendProtocolError):
        decode_audio("AAA=")  # 2 bytes, not a multiple of 4


# -- request handler --------------------------------------------------------

def test_handle_stub_request_embed():
    raw = audio_bytes(np.ones(1600))
    req = {"id": 9, "op": "embed", "sample_rate": 16000,
           "audio_b64": encode_audio(np.ones(1600))}
    resp = handle_stub_request(req, {})
    assert resp["id"] == 9
    assert resp["vector"] == oracle_embed(raw, 16000)


def test_handle_stub_request_unknown_op_and_bad_payload():
    resp = handle_stub_request({"id": 1, "op": "dance"}, {})
    assert resp["id"] == 1 and "error" in resp
    resp = handle_stub_request({"id": 2, "op": "embed", "sample_rate": 16000,
                                "audio_b64": "%%%"}, {})
    assert resp["id"] == 2 and "error" in resp
    # Errors never raise out of the handler; the id is always echoed.
    resp = handle_stub_request({"op": "embed"}, {})
    assert "error" in resp and resp["id"] is None


# -- in-process client ------------------------------------------------------

def test_client_stub_embed_shape_and_values():
    with BackendClient("stub") as client:
        samples = np.linspace(-1, 1, 3200)
        got = client.embed(samples, 16000)
        assert got.shape == (2, STUB_EMBED_DIM)
        assert got.tolist() == oracle_embed(audio_bytes(samples), 16000)


def test_client_stub_transcribe_and_crop_contract():
    manifest = {("S", 0): "hello world"}
    with BackendClient("stub", manifest_text=manifest) as client:
        prompt = json.dumps({"session_id": "S",
                             "segments": [{"seq_no": 0, "t_start": 0.0,
                                           "t_end": 2.0}]})
        text, words = client.transcribe(np.zeros(32000), 16000, prompt=prompt)
        assert text == "hello world"
        assert len(words) == 2


def test_client_stub_llm_parse_paths():
    with BackendClient("stub") as client:
        label, ok = client.llm_classify("anything")
        assert ok and label in ("negative", "positive", "others")


def test_client_rejects_unknown_uri():
    with pytest.raises(BackendError):
        BackendClient("carrier-pigeon://coop")


def test_client_rejects_empty_audio():
    with BackendClient("stub") as client:
        with pytest.raises(DataError):
            client.embed(np.array([]), 16000)


# -- exec:// transport ------------------------------------------------------

CHILD_TEMPLATE = textwrap.dedent("""\
    import json, sys
    mode = sys.argv[1]
    for line in sys.stdin:
        req = json.loads(line)
        rid = req["id"]
        if mode == "llm-ok":
            resp = {"id": rid, "label": "Negative Self-Talk"}
        elif mode == "llm-junk":
            resp = {"id": rid, "label": "maybe negative?"}
        elif mode == "wrong-id":
            resp = {"id": rid + 1000, "label": "Others"}
        elif mode == "error":
            resp = {"id": rid, "error": "deliberate failure"}
        elif mode == "garbage":
            sys.stdout.write("this is not json\\n")
            sys.stdout.flush()
            continue
        elif mode == "unordered-words":
            resp = {"id": rid, "text": "b a", "words": [
                {"w": "b", "t_start": 0.5, "t_end": 0.6},
                {"w": "a", "t_start": 0.1, "t_end": 0.2}]}
        elif mode == "out-of-span-words":
            resp = {"id": rid, "text": "a", "words": [
                {"w": "a", "t_start": 0.0, "t_end": 99.0}]}
        elif mode == "bad-dim":
            resp = {"id": rid, "vector": [[0.0, 1.0]]}
        else:
            resp = {"id": rid, "error": "unknown child mode"}
        sys.stdout.write(json.dumps(resp) + "\\n")
        sys.stdout.flush()
""")


def child_uri(tmp_path, mode: str) -> str:
    script = tmp_path / "child.py"
    script.write_text(CHILD_TEMPLATE, encoding="utf-8")
    return f"exec://{sys.executable} {script} {mode}"


def test_exec_transport_llm_round_trip(tmp_path):
    with BackendClient(child_uri(tmp_path, "llm-ok"), timeout_s=10) as client:
        assert client.llm_classify("p") == ("negative", True)


def test_exec_transport_unparseable_label_is_others_flagged(tmp_path):
    with BackendClient(child_uri(tmp_path, "llm-junk"), timeout_s=10) as client:
        assert client.llm_classify("p") == ("others", False)


def test_exec_transport_id_echo_enforced(tmp_path):
    with BackendClient(child_uri(tmp_path, "wrong-id"), timeout_s=10) as client:
        with pytest.raises(BackendProtocolError):
            client.llm_classify("p")


def test_exec_transport_error_response(tmp_path):
    with BackendClient(child_uri(tmp_path, "error"), timeout_s=10) as client:
        with pytest.raises(BackendError):
            client.llm_classify("p")


def test_exec_transport_garbage_line(tmp_path):
    with BackendClient(child_uri(tmp_path, "garbage"), timeout_s=10) as client:
        with pytest.raises(BackendProtocolError):
            client.llm_classify("p")


def test_exec_transport_unordered_words_rejected(tmp_path):
    with BackendClient(child_uri(tmp_path, "unordered-words"), timeout_s=10) as client:
        with pytest.raises(BackendProtocolError):
            client.transcribe(np.zeros(16000), 16000)


def test_exec_transport_out_of_span_words_rejected(tmp_path):
    with BackendClient(child_uri(tmp_path, "out-of-span-words"), timeout_s=10) as client:
        with pytest.raises(BackendProtocolError):
            client.transcribe(np.zeros(16000), 16000)


def test_exec_transport_bad_embed_dim_rejected(tmp_path):
    with BackendClient(child_uri(tmp_path, "bad-dim"), timeout_s=10) as client:
        with pytest.raises(BackendProtocolError):
            client.embed(np.zeros(1600), 16000)


def test_exec_transport_timeout(tmp_path):
    script = tmp_path / "sleeper.py"
    script.write_text("import time\ntime.sleep(60)\n", encoding="utf-8")
    with BackendClient(f"exec://{sys.executable} {script}", timeout_s=0.3) as client:
        with pytest.raises(BackendTimeoutError):
            client.llm_classify("p")


# -- tcp:// transport -------------------------------------------------------

class _StubTCPHandler(socketserver.StreamRequestHandler):
    def handle(self):
        from selftalk.util import canonical_json

        for line in self.rfile:
            if not line.strip():
                continue
            req = json.loads(line.decode("utf-8"))
            resp = handle_stub_request(req, self.server.manifest_text)
            self.wfile.write(canonical_json(resp).encode("utf-8") + b"\n")
            self.wfile.flush()


@pytest.fixture()
def tcp_server():
    server = socketserver.ThreadingTCPServer(("127.0.0.1", 0), _StubTCPHandler)
    server.manifest_text = {("S", 0): "tcp works"}
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield f"tcp://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()


def test_tcp_transport_embed_and_transcribe(tcp_server):
    with BackendClient(tcp_server, timeout_s=10,
                       manifest_text={}) as client:
        samples = np.linspace(-1, 1, 1600)
        got = client.embed(samples, 16000)
        assert got.tolist() == oracle_embed(audio_bytes(samples), 16000)
        prompt = json.dumps({"session_id": "S",
                             "segments": [{"seq_no": 0, "t_start": 0.0,
                                           "t_end": 1.0}]})
        text, words = client.transcribe(np.zeros(16000), 16000, prompt=prompt)
        assert text == "tcp works"
        assert [w.w for w in words] == ["tcp", "works"]


def test_tcp_connect_refused():
    with pytest.raises(BackendError):
        BackendClient("tcp://127.0.0.1:1")  # reserved port, nothing listening


def test_word_is_plain_record():
    w = Word("x", 0.0, 0.5)
    assert (w.w, w.t_start, w.t_end) == ("x", 0.0, 0.5)

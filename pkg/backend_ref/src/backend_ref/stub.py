"""Deterministic stub answers, bit-compatible with the client's built-in stub.

The derivations are fixed by PROTOCOL.md; every constant here is part
of the wire contract. Floats are squeezed through IEEE binary32 before
use so any conforming implementation lands on identical doubles.
"""

from __future__ import annotations

import json
import struct

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
LCG_MULT = 6364136223846793005
LCG_INC = 1442695040888963407
MASK64 = (1 << 64) - 1

EMBED_DIM = 32
DISPLAY_LABELS = ("Negative Self-Talk", "Positive Self-Talk", "Others")


class StubError(Exception):
    """Request cannot be answered; becomes an error envelope."""


def fnv1a64(data: bytes) -> int:
    h = FNV_OFFSET
    for byte in data:
        h = ((h ^ byte) * FNV_PRIME) & MASK64
    return h


def _f32(x: float) -> float:
    return struct.unpack("<f", struct.pack("<f", x))[0]


def embed_vectors(audio_f32: bytes, sample_rate: int,
                  dim: int = EMBED_DIM) -> list[list[float]]:
    """One 100 ms frame per sample_rate // 10 samples, at least one."""
    if len(audio_f32) == 0:
        raise StubError("cannot embed empty audio")
    if sample_rate <= 0:
        raise StubError("sample_rate must be positive")
    n_samples = len(audio_f32) // 4
    hop = sample_rate // 10
    n_frames = max(1, n_samples // hop) if hop > 0 else 1
    state = fnv1a64(audio_f32)
    frames = []
    for _ in range(n_frames):
        row = []
        for _ in range(dim):
            state = (state * LCG_MULT + LCG_INC) & MASK64
            v = state >> 40
            row.append(_f32(v / 8388608.0 - 1.0))
        frames.append(row)
    return frames


def transcribe(prompt: str | None,
               transcripts: dict[tuple[str, int], str]) -> tuple[str, list[dict]]:
    """Words from the transcript table at uniform slots per segment."""
    if not prompt:
        raise StubError("stub transcribe needs a layout prompt")
    try:
        layout = json.loads(prompt)
        session_id = str(layout["session_id"])
        segments = layout["segments"]
    except (KeyError, TypeError, ValueError) as exc:
        raise StubError(f"bad transcribe layout: {exc}") from exc
    words: list[dict] = []
    for seg in segments:
        try:
            seq_no = int(seg["seq_no"])
            t0 = float(seg["t_start"])
            t1 = float(seg["t_end"])
        except (KeyError, TypeError, ValueError) as exc:
            raise StubError(f"bad transcribe layout segment: {exc}") from exc
        key = (session_id, seq_no)
        if key not in transcripts:
            raise StubError(f"no transcript for session {session_id} seq {seq_no}")
        toks = transcripts[key].split()
        if not toks:
            continue
        slot = (t1 - t0) / len(toks)
        for i, tok in enumerate(toks):
            words.append({"w": tok, "t_start": t0 + i * slot,
                          "t_end": t0 + (i + 1) * slot})
    return " ".join(w["w"] for w in words), words


def llm_label(prompt: str) -> str:
    return DISPLAY_LABELS[fnv1a64(prompt.encode("utf-8")) % 3]


def load_transcripts(path: str) -> dict[tuple[str, int], str]:
    """Transcript table from a JSONL manifest with session_id/seq_no/text."""
    table: dict[tuple[str, int], str] = {}
    with open(path, "r", encoding="utf-8") as fh:
        for ln, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            try:
                rec = json.loads(line)
                key = (str(rec["session_id"]), int(rec["seq_no"]))
                table[key] = str(rec["text"])
            except (KeyError, TypeError, ValueError) as exc:
                raise ValueError(f"{path}:{ln}: bad manifest line: {exc}") from exc
    return table

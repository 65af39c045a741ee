"""Real-model handler: local ASR and speech encoder when installed.

Optional by design; the packages behind the `real` extra are large and
often platform-bound, so imports happen at startup and a missing
dependency fails fast with the fix in the message. The llm op has no
local model and always answers with an error envelope telling the
operator to point the client at an actual LLM service.
"""

from __future__ import annotations

import base64
import struct


class RealModeUnavailable(Exception):
    pass


def _decode_f32(audio_b64: str) -> list[float]:
    raw = base64.b64decode(audio_b64, validate=True)
    if len(raw) % 4:
        raise ValueError("audio bytes not a multiple of 4")
    return list(struct.unpack(f"<{len(raw) // 4}f", raw))


class RealBackend:
    """Wraps faster-whisper for transcription and a torchaudio
    wav2vec2 bundle for frame embeddings."""

    def __init__(self, asr_model: str = "large-v3", device: str = "cpu"):
        try:
            from faster_whisper import WhisperModel
        except ImportError as exc:
            raise RealModeUnavailable(
                "real mode needs the 'real' extra: pip install "
                "'backend-ref[real]'") from exc
        try:
            import torch
            import torchaudio
        except ImportError as exc:
            raise RealModeUnavailable(
                "real mode needs torch/torchaudio: pip install "
                "'backend-ref[real]'") from exc
        self._torch = torch
        self._asr = WhisperModel(asr_model, device=device)
        bundle = torchaudio.pipelines.WAV2VEC2_BASE
        self._bundle_rate = bundle.sample_rate
        self._encoder = bundle.get_model().to(device).eval()
        self._resample = torchaudio.functional.resample
        self._device = device

    def handle(self, req: dict) -> dict:
        rid = req.get("id")
        try:
            op = req.get("op")
            if op == "embed":
                return {"id": rid, "vector": self._embed(req)}
            if op == "transcribe":
                text, words = self._transcribe(req)
                return {"id": rid, "text": text, "words": words}
            if op == "llm":
                return {"id": rid, "error":
                        "no local LLM; configure the client with an LLM "
                        "service endpoint for the llm op"}
            return {"id": rid, "error": f"unknown op {op!r}"}
        except Exception as exc:
            return {"id": rid, "error": str(exc)}

    def _embed(self, req: dict) -> list[list[float]]:
        torch = self._torch
        samples = _decode_f32(str(req["audio_b64"]))
        sr = int(req["sample_rate"])
        wave = torch.tensor(samples, dtype=torch.float32,
                            device=self._device).unsqueeze(0)
        if sr != self._bundle_rate:
            wave = self._resample(wave, sr, self._bundle_rate)
        with torch.inference_mode():
            feats, _ = self._encoder.extract_features(wave)
        return [[float(v) for v in row] for row in feats[-1][0].cpu()]

    def _transcribe(self, req: dict) -> tuple[str, list[dict]]:
        import tempfile
        import wave as wavmod

        samples = _decode_f32(str(req["audio_b64"]))
        sr = int(req["sample_rate"])
        with tempfile.NamedTemporaryFile(suffix=".wav") as tmp:
            with wavmod.open(tmp.name, "wb") as wf:
                wf.setnchannels(1)
                wf.setsampwidth(2)
                wf.setframerate(sr)
                clamped = (max(-1.0, min(1.0, s)) for s in samples)
                wf.writeframes(b"".join(
                    struct.pack("<h", int(s * 32767)) for s in clamped))
            segments, _ = self._asr.transcribe(tmp.name, word_timestamps=True,
                                               initial_prompt=req.get("prompt"))
            words = []
            for seg in segments:
                for w in seg.words or ():
                    words.append({"w": w.word.strip(),
                                  "t_start": float(w.start),
                                  "t_end": float(w.end)})
        return " ".join(w["w"] for w in words), words

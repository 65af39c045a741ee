"""Mono audio loading, fixed-hop framing, and RMS intensity in dBFS."""

from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from selftalk.errors import AudioReadError, DataError, UnsupportedEncodingError

# Stand-in for -inf on all-zero windows so downstream math stays finite.
SILENCE_DB = -160.0

DEFAULT_WINDOW_S = 0.025
DEFAULT_HOP_S = 0.010


@dataclass(frozen=True)
class AudioClip:
    """Mono audio with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self) -> None:
        if self.sample_rate <= 0:
            raise DataError(f"sample_rate must be positive, got {self.sample_rate}")
        if self.samples.ndim != 1:
            raise DataError("AudioClip samples must be one-dimensional")
        if self.samples.size and not np.all(np.isfinite(self.samples)):
            raise DataError("AudioClip samples must be finite")

    @property
    def duration_s(self) -> float:
        return self.samples.size / self.sample_rate

    def slice(self, t_start: float, t_end: float) -> "AudioClip":
        """Sub-clip covering [t_start, t_end), clamped to the clip bounds."""
        i0 = max(0, int(round(t_start * self.sample_rate)))
        i1 = min(self.samples.size, int(round(t_end * self.sample_rate)))
        return AudioClip(self.samples[i0:i1], self.sample_rate)


@dataclass(frozen=True)
class Frame:
    start_s: float
    rms_db: float


def load_wav(path: str | Path) -> AudioClip:
    """Load a PCM16 or float32 WAV file as normalized mono audio.

    Multichannel input is mixed down by averaging the channels.
    """
    p = Path(path)
    try:
        rate, data = wavfile.read(str(p))
    except FileNotFoundError as exc:
        raise AudioReadError(f"cannot read {p}: {exc}") from exc
    except ValueError as exc:
        # scipy raises ValueError both for non-WAV bytes and for WAV
        # encodings it does not support; treat all as unsupported encoding
        # once the file itself was openable.
        raise UnsupportedEncodingError(f"unsupported WAV encoding in {p}: {exc}") from exc
    except OSError as exc:
        raise AudioReadError(f"cannot read {p}: {exc}") from exc

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.float32:
        samples = data.astype(np.float64)
    else:
        raise UnsupportedEncodingError(
            f"{p}: expected int16 or float32 samples, got {data.dtype}"
        )
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    return AudioClip(samples, int(rate))


def save_wav(path: str | Path, clip: AudioClip) -> None:
    """Write a clip as float32 WAV (used by the synthetic generator CLI)."""
    wavfile.write(str(path), clip.sample_rate, clip.samples.astype(np.float32))


def rms_db_of(window: np.ndarray) -> float:
    """20*log10(rms) of a sample window, with the silence sentinel at zero energy."""
    rms = math.sqrt(float(np.mean(np.square(window))))
    if rms <= 0.0:
        return SILENCE_DB
    return 20.0 * math.log10(rms)


def frame_rms(
    clip: AudioClip,
    window_s: float = DEFAULT_WINDOW_S,
    hop_s: float = DEFAULT_HOP_S,
) -> list[Frame]:
    """Frame the clip at a fixed hop and compute per-frame RMS in dBFS.

    Frame k covers [k*hop_s, k*hop_s + window_s); a trailing partial
    window is dropped.
    """
    if clip.samples.size == 0:
        raise DataError("cannot frame an empty clip")
    if not (0 < hop_s <= window_s <= clip.duration_s):
        raise DataError(
            f"need 0 < hop_s <= window_s <= duration "
            f"(hop={hop_s}, window={window_s}, duration={clip.duration_s:.3f})"
        )
    win = int(round(window_s * clip.sample_rate))
    hop = int(round(hop_s * clip.sample_rate))
    win = max(win, 1)
    hop = max(hop, 1)
    n = clip.samples.size
    count = (n - win) // hop + 1

    # One vectorized pass over the strided frame matrix.
    idx = np.arange(win)[None, :] + hop * np.arange(count)[:, None]
    frames = clip.samples[idx]
    mean_sq = np.mean(np.square(frames), axis=1)
    out: list[Frame] = []
    for k in range(count):
        ms = float(mean_sq[k])
        db = SILENCE_DB if ms <= 0.0 else 10.0 * math.log10(ms)
        out.append(Frame(start_s=k * hop_s, rms_db=db))
    return out

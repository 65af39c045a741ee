"""Interpretable per-utterance acoustic features and their categorical form.

Pitch is tracked with a normalized autocorrelation estimator; statistics
over the voiced frames plus frame-level intensity and duration form the
raw feature vector. Corpus tertiles turn each statistic into one of
three descriptors, and a fixed-order rule list names the pitch contour.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from selftalk.audio_io import AudioClip
from selftalk.errors import DataError
from selftalk.util import read_flat_config, write_flat_config

F0_WINDOW_S = 0.050
F0_HOP_S = 0.010
F0_MIN_HZ = 50.0
F0_MAX_HZ = 500.0
VOICED_MIN_CORR = 0.3

# Contour thresholds. None of these are dictated by the feature
# definitions themselves; they are calibration knobs.
STEADY_CV = 0.02
SUDDEN_HOP_FRAC = 0.40
GRADUAL_R2 = 0.5
GRADUAL_DRIFT_FRAC = 0.15
FLUCTUATING_SIGN_CHANGES = 3

CONTOUR_STEADY = "the pitch remains steady with almost no variation."
CONTOUR_SUDDEN_RISE = "the pitch suddenly rises at a certain moment."
CONTOUR_SUDDEN_DROP = "the pitch suddenly drops at a certain moment."
CONTOUR_GRADUAL_RISE = "the pitch gradually tends to rise."
CONTOUR_GRADUAL_FALL = "the pitch gradually tends to fall."
CONTOUR_FLUCTUATING = "the pitch rises and falls repeatedly."
CONTOUR_COMPLEX = "the pitch changes in a complex manner."

CONTOUR_LABELS = (
    CONTOUR_STEADY,
    CONTOUR_SUDDEN_RISE,
    CONTOUR_SUDDEN_DROP,
    CONTOUR_GRADUAL_RISE,
    CONTOUR_GRADUAL_FALL,
    CONTOUR_FLUCTUATING,
    CONTOUR_COMPLEX,
)

# Deliberate spelling throughout: prompt text depends on it byte-for-byte.
LEVEL_CATS = ("Low", "Midium", "High")
RANGE_CATS = ("Narrow", "Midium", "Wide")

# Feature names that get tertile bounds, in serialization order.
TERTILE_FEATURES = (
    "pitch_variance",
    "pitch_mean",
    "intensity_mean",
    "pitch_range",
    "intensity_range",
)


@dataclass(frozen=True)
class AcousticFeatureVector:
    pitch_mean: float
    pitch_variance: float
    pitch_range: float
    intensity_mean: float
    intensity_range: float
    duration_s: float
    f0_track: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        vals = (
            self.pitch_mean,
            self.pitch_variance,
            self.pitch_range,
            self.intensity_mean,
            self.intensity_range,
            self.duration_s,
        )
        if not all(math.isfinite(v) for v in vals):
            raise DataError("feature values must be finite")
        if self.pitch_range < 0 or self.intensity_range < 0 or self.duration_s <= 0:
            raise DataError("invalid feature vector ranges")


@dataclass(frozen=True)
class FeatureDescriptors:
    pitch_variance_cat: str
    pitch_mean_cat: str
    intensity_mean_cat: str
    pitch_range_cat: str
    intensity_range_cat: str
    contour: str


@dataclass(frozen=True)
class TertileBounds:
    """(q33, q66) per feature name."""

    bounds: tuple[tuple[str, float, float], ...]

    def lookup(self, name: str) -> tuple[float, float]:
        for n, lo, hi in self.bounds:
            if n == name:
                return lo, hi
        raise KeyError(name)

    def save(self, path) -> None:
        flat: dict[str, object] = {}
        for n, lo, hi in self.bounds:
            flat[f"{n}.q33"] = repr(lo)
            flat[f"{n}.q66"] = repr(hi)
        write_flat_config(path, flat)

    @classmethod
    def load(cls, path) -> "TertileBounds":
        flat = read_flat_config(path)
        rows = []
        for name in TERTILE_FEATURES:
            try:
                lo = float(flat[f"{name}.q33"])
                hi = float(flat[f"{name}.q66"])
            except KeyError as exc:
                raise DataError(f"tertile file {path} missing {exc}") from exc
            rows.append((name, lo, hi))
        return cls(tuple(rows))


def _nccf(x: np.ndarray, lag: int) -> float:
    """Normalized cross-correlation at one lag; gain-invariant, in [-1, 1]."""
    n = x.size - lag
    a = x[:n]
    b = x[lag : lag + n]
    denom = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    if denom <= 0.0:
        return 0.0
    return float(np.dot(a, b)) / denom


def estimate_f0(clip: AudioClip) -> list[tuple[float, float]]:
    """Per-frame F0 track as (frame start time, Hz); unvoiced frames omitted.

    Each 50 ms frame is mean-subtracted and scanned for the best
    normalized-autocorrelation lag in the 50-500 Hz band. The winning lag
    is the smallest local maximum within 5% of the global best, which
    keeps a periodic signal from settling on a period multiple. Parabolic
    interpolation refines the lag to sub-sample resolution.
    """
    if clip.duration_s < 0.3:
        raise DataError(f"segment too short for pitch tracking: {clip.duration_s:.3f} s")
    sr = clip.sample_rate
    win = int(round(F0_WINDOW_S * sr))
    hop = int(round(F0_HOP_S * sr))
    lag_min = max(2, int(math.floor(sr / F0_MAX_HZ)))
    lag_max = int(math.ceil(sr / F0_MIN_HZ))
    if lag_max >= win:
        raise DataError("sample rate too low for the configured pitch band")

    track: list[tuple[float, float]] = []
    n = clip.samples.size
    count = (n - win) // hop + 1
    for k in range(max(count, 0)):
        frame = clip.samples[k * hop : k * hop + win]
        x = frame - float(np.mean(frame))
        if not np.any(x):
            continue
        corrs = np.array([_nccf(x, lag) for lag in range(lag_min, lag_max + 1)])
        best = float(np.max(corrs))
        if best < VOICED_MIN_CORR:
            continue
        # Smallest near-best local max wins.
        pick = int(np.argmax(corrs))
        for i in range(corrs.size):
            left = corrs[i - 1] if i > 0 else -np.inf
            right = corrs[i + 1] if i + 1 < corrs.size else -np.inf
            if corrs[i] >= left and corrs[i] >= right and corrs[i] >= 0.95 * best:
                pick = i
                break
        lag = float(lag_min + pick)
        if 0 < pick < corrs.size - 1:
            c_prev, c_mid, c_next = corrs[pick - 1], corrs[pick], corrs[pick + 1]
            denom = c_prev - 2.0 * c_mid + c_next
            if denom < 0:
                lag += 0.5 * (c_prev - c_next) / denom
        track.append((k * F0_HOP_S, sr / lag))
    return track


def frame_rms_linear(clip: AudioClip) -> np.ndarray:
    """Per-frame linear RMS on the pitch-tracker framing (50 ms / 10 ms)."""
    sr = clip.sample_rate
    win = int(round(F0_WINDOW_S * sr))
    hop = int(round(F0_HOP_S * sr))
    n = clip.samples.size
    count = (n - win) // hop + 1
    if count <= 0:
        raise DataError("clip shorter than one analysis frame")
    idx = np.arange(win)[None, :] + hop * np.arange(count)[:, None]
    return np.sqrt(np.mean(np.square(clip.samples[idx]), axis=1))


def extract_features(clip: AudioClip) -> AcousticFeatureVector:
    """Pitch statistics over voiced frames, intensity over all frames."""
    track = estimate_f0(clip)
    rms = frame_rms_linear(clip)
    if track:
        f0 = np.array([hz for _, hz in track])
        pitch_mean = float(np.mean(f0))
        pitch_variance = float(np.var(f0))
        pitch_range = float(np.max(f0) - np.min(f0))
    else:
        pitch_mean = pitch_variance = pitch_range = 0.0
    return AcousticFeatureVector(
        pitch_mean=pitch_mean,
        pitch_variance=pitch_variance,
        pitch_range=pitch_range,
        intensity_mean=float(np.mean(rms)),
        intensity_range=float(np.max(rms) - np.min(rms)),
        duration_s=clip.samples.size / clip.sample_rate,
        f0_track=tuple(track),
    )


def fit_tertiles(corpus: list[AcousticFeatureVector]) -> TertileBounds:
    if not corpus:
        raise DataError("cannot fit tertiles on an empty corpus")
    rows = []
    for name in TERTILE_FEATURES:
        vals = np.array([getattr(fv, name) for fv in corpus])
        q33 = float(np.quantile(vals, 1.0 / 3.0))
        q66 = float(np.quantile(vals, 2.0 / 3.0))
        rows.append((name, q33, q66))
    return TertileBounds(tuple(rows))


def _categorize(value: float, bounds: tuple[float, float], cats: tuple[str, str, str]) -> str:
    q33, q66 = bounds
    if value <= q33:
        return cats[0]
    if value <= q66:
        return cats[1]
    return cats[2]


def classify_contour(f0_track: tuple[tuple[float, float], ...] | list[tuple[float, float]]) -> str:
    """First matching rule wins, in the fixed order steady, sudden rise,
    sudden drop, gradual rise, gradual fall, fluctuating, complex."""
    f0 = np.array([hz for _, hz in f0_track])
    t = np.array([ts for ts, _ in f0_track])
    if f0.size < 2:
        return CONTOUR_STEADY
    mean = float(np.mean(f0))
    median = float(np.median(f0))
    if median <= 0:
        return CONTOUR_STEADY
    cv = float(np.std(f0)) / mean if mean > 0 else 0.0
    if cv < STEADY_CV:
        return CONTOUR_STEADY

    hops = np.diff(f0)
    if np.any(hops >= SUDDEN_HOP_FRAC * median):
        return CONTOUR_SUDDEN_RISE
    if np.any(-hops >= SUDDEN_HOP_FRAC * median):
        return CONTOUR_SUDDEN_DROP

    slope, intercept = np.polyfit(t, f0, 1)
    pred = slope * t + intercept
    ss_res = float(np.sum((f0 - pred) ** 2))
    ss_tot = float(np.sum((f0 - mean) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0
    drift = slope * (t[-1] - t[0])
    if r2 >= GRADUAL_R2 and drift >= GRADUAL_DRIFT_FRAC * median:
        return CONTOUR_GRADUAL_RISE
    if r2 >= GRADUAL_R2 and -drift >= GRADUAL_DRIFT_FRAC * median:
        return CONTOUR_GRADUAL_FALL

    if f0.size >= 3:
        kernel = np.ones(3) / 3.0
        smooth = np.convolve(f0, kernel, mode="valid")
    else:
        smooth = f0
    slopes = np.diff(smooth)
    signs = np.sign(slopes[slopes != 0])
    changes = int(np.count_nonzero(np.diff(signs))) if signs.size > 1 else 0
    if changes >= FLUCTUATING_SIGN_CHANGES:
        return CONTOUR_FLUCTUATING
    return CONTOUR_COMPLEX


def describe(features: AcousticFeatureVector, bounds: TertileBounds) -> FeatureDescriptors:
    return FeatureDescriptors(
        pitch_variance_cat=_categorize(
            features.pitch_variance, bounds.lookup("pitch_variance"), LEVEL_CATS
        ),
        pitch_mean_cat=_categorize(features.pitch_mean, bounds.lookup("pitch_mean"), LEVEL_CATS),
        intensity_mean_cat=_categorize(
            features.intensity_mean, bounds.lookup("intensity_mean"), LEVEL_CATS
        ),
        pitch_range_cat=_categorize(
            features.pitch_range, bounds.lookup("pitch_range"), RANGE_CATS
        ),
        intensity_range_cat=_categorize(
            features.intensity_range, bounds.lookup("intensity_range"), RANGE_CATS
        ),
        contour=classify_contour(features.f0_track),
    )

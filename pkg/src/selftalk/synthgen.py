"""Calibrated synthetic sessions: labels, timings, text, embeddings, audio.

The label chain targets two marginal statistics at once: class priors
(0.26, 0.16, 0.58) and a 0.79 probability that an utterance following a
gap of at most 4 s repeats the previous class. A lazy restart chain
delivers both exactly: within the continuity window the previous label
is kept with probability 1 - restart_rate, else a fresh draw from the
priors (which may repeat the class by chance). Setting

    restart_rate = (1 - p_same) / (1 - sum(priors^2))

makes the conditional same-class rate equal p_same while the priors
stay the stationary law. A keep-with-0.79-else-resample chain would
overshoot the same-class rate (resampling repeats classes too), and
excluding the previous class from the resample would bend the priors.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from selftalk.audio_io import AudioClip
from selftalk.errors import DataError
from selftalk.labels import CLASSES
from selftalk.manifest import Utterance
from selftalk.util import canonical_json, fnv1a64

PRIORS = (0.26, 0.16, 0.58)
DURATION_MEAN_SD = ((2.0, 1.8), (1.6, 1.7), (1.4, 1.5))
DURATION_CLIP = (0.3, 20.0)
P_SAME = 0.79
CONTINUITY_WINDOW_S = 4.0

GAP_SHORT_MEAN_S = 2.0
GAP_LONG_MEAN_S = 20.0
GAP_SHORT_PROB = 0.6

TONE_RMS_DB = -10.0
NOISE_FLOOR_DB = -60.0


@dataclass(frozen=True)
class GeneratorConfig:
    seed: int = 0
    n_participants: int = 25
    sessions_per_participant: int = 4
    utterances_per_session: int = 100
    priors: tuple[float, float, float] = PRIORS
    p_same: float = P_SAME
    embed_dim: int = 32
    separation: float = 3.0
    noise_scale: float = 1.0
    vocab_overlap: float = 0.2
    vocab_size: int = 50
    words_per_second: float = 2.5
    min_gap_s: float = 0.0

    def __post_init__(self) -> None:
        if abs(sum(self.priors) - 1.0) > 1e-9:
            raise DataError("priors must sum to 1")
        if not (0.0 <= self.p_same <= 1.0):
            raise DataError("p_same must lie in [0, 1]")
        if not (0.0 <= self.vocab_overlap <= 1.0):
            raise DataError("vocab_overlap must lie in [0, 1]")

    @property
    def restart_rate(self) -> float:
        collision = sum(p * p for p in self.priors)
        return (1.0 - self.p_same) / (1.0 - collision)


def lognormal_params(mean: float, sd: float) -> tuple[float, float]:
    """Moment-matched (mu, sigma) of a log-normal with given mean and SD."""
    sigma2 = math.log(1.0 + (sd / mean) ** 2)
    mu = math.log(mean) - sigma2 / 2.0
    return mu, math.sqrt(sigma2)


def _sample_gap(rng: np.random.Generator) -> float:
    if rng.random() < GAP_SHORT_PROB:
        return float(rng.exponential(GAP_SHORT_MEAN_S))
    return float(rng.exponential(GAP_LONG_MEAN_S))


def _build_vocab(cfg: GeneratorConfig) -> dict[str, list[str]]:
    n_common = int(round(cfg.vocab_overlap * cfg.vocab_size))
    n_own = cfg.vocab_size - n_common
    common = [f"w{i}" for i in range(n_common)]
    pools = {}
    for label in CLASSES:
        own = [f"{label[:3]}{i}" for i in range(n_own)]
        pools[label] = own + common
    return pools


def generate(cfg: GeneratorConfig) -> tuple[list[Utterance], dict]:
    """Returns (utterances, meta). Meta carries what the pipeline needs to
    recompute embeddings: seed, dim, noise scale, per-class means."""
    rng = np.random.default_rng(cfg.seed)
    dur_params = [lognormal_params(m, s) for m, s in DURATION_MEAN_SD]
    pools = _build_vocab(cfg)
    priors = np.array(cfg.priors)
    restart = cfg.restart_rate

    means_rng = np.random.default_rng(fnv1a64(f"classmeans|{cfg.seed}".encode()))
    class_means = {}
    for label in CLASSES:
        direction = means_rng.standard_normal(cfg.embed_dim)
        direction /= np.linalg.norm(direction)
        class_means[label] = cfg.separation * direction

    utterances: list[Utterance] = []
    for p in range(1, cfg.n_participants + 1):
        pid = f"P{p}"
        for s in range(1, cfg.sessions_per_participant + 1):
            sid = f"{pid}-s{s}"
            cursor = 0.0
            prev_label: str | None = None
            for seq in range(cfg.utterances_per_session):
                if seq == 0:
                    gap = float(rng.exponential(GAP_SHORT_MEAN_S))
                    label = CLASSES[int(rng.choice(3, p=priors))]
                else:
                    gap = _sample_gap(rng)
                    if gap <= CONTINUITY_WINDOW_S and rng.random() >= restart:
                        label = prev_label
                    else:
                        label = CLASSES[int(rng.choice(3, p=priors))]
                gap = max(gap, cfg.min_gap_s)
                ci = CLASSES.index(label)
                mu, sigma = dur_params[ci]
                dur = float(np.clip(rng.lognormal(mu, sigma), *DURATION_CLIP))
                t_start = cursor + gap
                t_end = t_start + dur
                cursor = t_end
                n_words = max(1, int(round(dur * cfg.words_per_second)))
                words = rng.choice(pools[label], size=n_words)
                utterances.append(Utterance(
                    session_id=sid, participant_id=pid, seq_no=seq,
                    t_start=round(t_start, 6), t_end=round(t_end, 6),
                    label=label, text=" ".join(words)))
                prev_label = label

    meta = {
        "seed": cfg.seed,
        "embed_dim": cfg.embed_dim,
        "noise_scale": cfg.noise_scale,
        "class_means": {k: [float(x) for x in v] for k, v in class_means.items()},
    }
    return utterances, meta


def write_meta(path: str | Path, meta: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(canonical_json(meta))
        fh.write("\n")


def read_meta(path: str | Path) -> dict:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            meta = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise DataError(f"cannot read meta file {path}: {exc}") from exc
    for key in ("seed", "embed_dim", "noise_scale", "class_means"):
        if key not in meta:
            raise DataError(f"meta file {path} missing {key!r}")
    return meta


def pseudo_embedding(meta: dict, session_id: str, seq_no: int, label: str) -> np.ndarray:
    """Class mean plus isotropic noise, deterministic per (session, seq)."""
    mean = np.asarray(meta["class_means"][label], dtype=np.float64)
    key = f"emb|{meta['seed']}|{session_id}|{seq_no}".encode()
    noise_rng = np.random.default_rng(fnv1a64(key))
    return mean + meta["noise_scale"] * noise_rng.standard_normal(mean.size)


def synthesize_waveform(session: list[Utterance], sample_rate: int = 16000,
                        tail_s: float = 1.0) -> AudioClip:
    """Tone bursts at manifest times over a quiet noise floor.

    Per-utterance tone frequency is a hash of the utterance identity in
    [150, 350] Hz so pitch features vary across utterances. Empty
    sessions come back as bare noise floor of tail_s seconds.
    """
    for a, b in zip(session, session[1:]):
        if b.t_start < a.t_end:
            raise DataError("overlapping utterances cannot be synthesized")
    total_s = (session[-1].t_end if session else 0.0) + tail_s
    n = int(round(total_s * sample_rate))
    noise_rng = np.random.default_rng(
        fnv1a64(f"wav|{session[0].session_id}".encode()) if session else 0)
    floor_rms = 10.0 ** (NOISE_FLOOR_DB / 20.0)
    samples = noise_rng.normal(0.0, floor_rms, size=n)
    tone_amp = math.sqrt(2.0) * 10.0 ** (TONE_RMS_DB / 20.0)
    for u in session:
        i0 = int(round(u.t_start * sample_rate))
        i1 = min(n, int(round(u.t_end * sample_rate)))
        freq = 150.0 + fnv1a64(f"tone|{u.session_id}|{u.seq_no}".encode()) % 200
        t = np.arange(i1 - i0) / sample_rate
        samples[i0:i1] += tone_amp * np.sin(2.0 * math.pi * freq * t)
    return AudioClip(np.clip(samples, -1.0, 1.0), sample_rate)

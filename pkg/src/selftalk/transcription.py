"""Context-window planning for transcription, text cropping, and WER/CER.

Five window strategies decide which cached utterances accompany the
target into the recognizer, under a 30 s budget. Assembly produces one
clip with short silence joints plus a layout mapping each included
utterance to assembled-clip coordinates; the target's text is then
cropped back out by word midpoints.

The module also carries the evaluation harness's context-sensitive
noise model: a transcript corruption whose per-word error probability
falls with the amount of temporally-close context in the plan, letting
strategy quality show up as WER differences without a real recognizer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from selftalk.audio_io import AudioClip
from selftalk.backend import Word
from selftalk.errors import DataError
from selftalk.manifest import Utterance
from selftalk.util import canonical_json, stable_u01

BUDGET_S = 30.0
RECENCY_WINDOW_S = 180.0
JOINT_SILENCE_S = 0.050

STRATEGIES = ("SingleUtterance", "PriorSound", "NoTemporal", "NoQuantity", "Contextual")


@dataclass(frozen=True)
class WindowPlan:
    strategy: str
    included: tuple[Utterance, ...]
    target: Utterance
    budget_s: float = BUDGET_S
    # PriorSound only: raw session-audio span (start, end); others None.
    raw_span: tuple[float, float] | None = None

    def __post_init__(self) -> None:
        if self.strategy not in STRATEGIES:
            raise DataError(f"unknown strategy {self.strategy!r}")
        if not self.included or self.included[-1] is not self.target:
            raise DataError("plan must end with the target")


def plan_window(history: list[Utterance], target: Utterance, strategy: str,
                budget_s: float = BUDGET_S,
                recency_window_s: float = RECENCY_WINDOW_S) -> WindowPlan:
    """history: prior utterances oldest-first, target included as last entry."""
    if not history or history[-1] is not target:
        raise DataError("target must be the newest entry of the history snapshot")
    prior = history[:-1]
    for a, b in zip(history, history[1:]):
        if b.t_start < a.t_end:
            raise DataError("history must be time-ordered and non-overlapping")

    if strategy == "SingleUtterance":
        return WindowPlan(strategy, (target,), target, budget_s)

    if strategy == "PriorSound":
        span = (max(0.0, target.t_end - budget_s), target.t_end)
        contained = [u for u in prior if u.t_start >= span[0] and u.t_end <= span[1]]
        return WindowPlan(strategy, (*contained, target), target, budget_s, raw_span=span)

    if strategy == "NoTemporal":
        remaining = budget_s - target.duration_s
        picked: list[Utterance] = []
        for u in prior:
            if u.duration_s <= remaining:
                picked.append(u)
                remaining -= u.duration_s
            else:
                break
        return WindowPlan(strategy, (*picked, target), target, budget_s)

    if strategy in ("NoQuantity", "Contextual"):
        cutoff = target.t_start - recency_window_s
        remaining = budget_s - target.duration_s
        picked_rev: list[Utterance] = []
        for u in reversed(prior):
            if strategy == "NoQuantity" and u.t_start < cutoff:
                break
            if u.duration_s <= remaining:
                picked_rev.append(u)
                remaining -= u.duration_s
            else:
                break
        return WindowPlan(strategy, (*reversed(picked_rev), target), target, budget_s)

    raise DataError(f"unknown strategy {strategy!r}")


@dataclass(frozen=True)
class AssembledWindow:
    clip: AudioClip
    # Per included utterance: (utterance, start, end) in assembled-clip time.
    layout: tuple[tuple[Utterance, float, float], ...]

    def target_span(self, target: Utterance) -> tuple[float, float]:
        for u, a0, a1 in self.layout:
            if u is target or (u.session_id == target.session_id
                               and u.seq_no == target.seq_no):
                return a0, a1
        raise DataError("target missing from assembled layout")

    def stub_prompt(self) -> str:
        return layout_prompt(self.layout)


def assemble_audio(plan: WindowPlan, session_clip: AudioClip,
                   joint_s: float = JOINT_SILENCE_S) -> AssembledWindow:
    """Concatenate included segments with silence joints.

    PriorSound instead slices one contiguous raw span; its layout maps
    the utterances fully contained in that span at their natural
    offsets, so a stub recognizer sees the same text a real one would.
    """
    sr = session_clip.sample_rate
    if plan.raw_span is not None:
        s0, s1 = plan.raw_span
        clip = session_clip.slice(s0, s1)
        layout = tuple((u, u.t_start - s0, u.t_end - s0) for u in plan.included)
        return AssembledWindow(clip, layout)

    joint = np.zeros(int(round(joint_s * sr)))
    pieces: list[np.ndarray] = []
    layout: list[tuple[Utterance, float, float]] = []
    cursor = 0.0
    for i, u in enumerate(plan.included):
        if i > 0:
            pieces.append(joint)
            cursor += joint.size / sr
        piece = session_clip.slice(u.t_start, u.t_end).samples
        pieces.append(piece)
        layout.append((u, cursor, cursor + piece.size / sr))
        cursor += piece.size / sr
    return AssembledWindow(AudioClip(np.concatenate(pieces), sr), tuple(layout))


def virtual_layout(plan: WindowPlan, joint_s: float = JOINT_SILENCE_S
                   ) -> tuple[tuple[tuple[Utterance, float, float], ...], float]:
    """Assembled-clip coordinates without touching audio.

    Mirrors assemble_audio's cursor walk in exact float arithmetic;
    returns (layout rows, total assembled duration). Lets manifest-only
    pipelines build the stub recognizer's layout prompt.
    """
    if plan.raw_span is not None:
        s0, s1 = plan.raw_span
        rows = tuple((u, u.t_start - s0, u.t_end - s0) for u in plan.included)
        return rows, s1 - s0
    rows = []
    cursor = 0.0
    for i, u in enumerate(plan.included):
        if i > 0:
            cursor += joint_s
        rows.append((u, cursor, cursor + u.duration_s))
        cursor += u.duration_s
    return tuple(rows), cursor


def layout_prompt(layout: tuple[tuple[Utterance, float, float], ...]) -> str:
    """Layout JSON handed to the stub recognizer via the prompt field."""
    session_id = layout[0][0].session_id if layout else ""
    return canonical_json({
        "session_id": session_id,
        "segments": [{"seq_no": u.seq_no, "t_start": a0, "t_end": a1}
                     for u, a0, a1 in layout],
    })


def crop_target_text(words: list[Word], span: tuple[float, float]) -> str:
    """Words whose midpoints land in [span start, span end), space-joined."""
    a0, a1 = span
    kept = [w.w for w in words if a0 <= (w.t_start + w.t_end) / 2.0 < a1]
    return " ".join(kept)


def levenshtein(a: list, b: list) -> int:
    """Classic O(len(a)*len(b)) edit distance over token sequences."""
    if not a:
        return len(b)
    if not b:
        return len(a)
    prev = list(range(len(b) + 1))
    for i, x in enumerate(a, 1):
        curr = [i] + [0] * len(b)
        for j, y in enumerate(b, 1):
            curr[j] = min(prev[j] + 1, curr[j - 1] + 1,
                          prev[j - 1] + (0 if x == y else 1))
        prev = curr
    return prev[-1]


def wer(ref: str, hyp: str) -> float:
    ref_toks = ref.split()
    if not ref_toks:
        raise DataError("WER needs a nonempty reference")
    return levenshtein(ref_toks, hyp.split()) / len(ref_toks)


def cer(ref: str, hyp: str) -> float:
    if not ref:
        raise DataError("CER needs a nonempty reference")
    return levenshtein(list(ref), list(hyp)) / len(ref)


# ---------------------------------------------------------------------------
# Context-sensitive corruption for the strategy evaluation harness.

NOISE_TAU_S = 60.0
NOISE_P_HI = 0.6
NOISE_P_LO = 0.1
NOISE_Q0 = 6.0
NOISE_SILENCE_WEIGHT = 0.05


def plan_relevance(plan: WindowPlan) -> float:
    """Context mass: duration of each non-target segment, decayed by its
    gap to the target (time constant NOISE_TAU_S)."""
    r = 0.0
    for u in plan.included[:-1]:
        gap = max(0.0, plan.target.t_start - u.t_end)
        r += u.duration_s * math.exp(-gap / NOISE_TAU_S)
    return r


def plan_silence_penalty(plan: WindowPlan) -> float:
    """PriorSound only: seconds of the raw span not covered by any
    included utterance or the target. Zero for assembled strategies."""
    if plan.raw_span is None:
        return 0.0
    s0, s1 = plan.raw_span
    speech = sum(max(0.0, min(u.t_end, s1) - max(u.t_start, s0))
                 for u in plan.included)
    return max(0.0, (s1 - s0) - speech)


def plan_word_error_rate(plan: WindowPlan) -> float:
    """Per-word corruption probability, decreasing in plan quality."""
    q = plan_relevance(plan) - NOISE_SILENCE_WEIGHT * plan_silence_penalty(plan)
    p = NOISE_P_LO + (NOISE_P_HI - NOISE_P_LO) * math.exp(-max(q, 0.0) / NOISE_Q0)
    return min(max(p, NOISE_P_LO), 0.9)


def corrupt_target_text(plan: WindowPlan, seed: int) -> str:
    """Corrupt the target's words at the plan's error rate.

    Each word draws one uniform variate from (seed, session, seq, word
    index) only, so across strategies the corrupted sets nest: a
    strategy with lower error probability corrupts a subset of the
    words a worse one does. A corrupted word gets a '~' suffix (one
    word substitution, one character edit).
    """
    p_err = plan_word_error_rate(plan)
    t = plan.target
    out = []
    for i, tok in enumerate(t.text.split()):
        u = stable_u01(seed, t.session_id, t.seq_no, i)
        out.append(tok + "~" if u < p_err else tok)
    return " ".join(out)

"""Energy-gated utterance segmentation over framed RMS values.

Frames above an absolute dBFS threshold are vocal; consecutive vocal
frames form events; events shorter than a minimum duration are dropped
before neighboring events closer than a merge gap are fused into
utterances. The drop happens first: a short blip never bridges two
events that would otherwise stay apart.
"""

from __future__ import annotations

from dataclasses import dataclass

from selftalk.audio_io import (
    DEFAULT_HOP_S,
    DEFAULT_WINDOW_S,
    AudioClip,
    Frame,
    frame_rms,
)
from selftalk.errors import DataError

DEFAULT_THRESHOLD_DB = -20.0
MIN_EVENT_S = 0.3
MERGE_GAP_S = 0.8


@dataclass(frozen=True)
class Segment:
    """Half-open time interval [t_start, t_end) in seconds."""

    t_start: float
    t_end: float

    def __post_init__(self) -> None:
        if not (self.t_end > self.t_start):
            raise DataError(f"segment end must exceed start ({self.t_start}, {self.t_end})")

    @property
    def duration_s(self) -> float:
        return self.t_end - self.t_start


def detect_events(
    frames: list[Frame],
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    window_s: float = DEFAULT_WINDOW_S,
) -> list[Segment]:
    """Maximal runs of frames with rms_db >= threshold_db.

    A run spanning frames i..j covers [start_i, start_j + window_s): the
    event ends where its last frame's window ends.
    """
    events: list[Segment] = []
    run_start: float | None = None
    last_frame_start = 0.0
    for fr in frames:
        if fr.rms_db >= threshold_db:
            if run_start is None:
                run_start = fr.start_s
            last_frame_start = fr.start_s
        elif run_start is not None:
            events.append(Segment(run_start, last_frame_start + window_s))
            run_start = None
    if run_start is not None:
        events.append(Segment(run_start, last_frame_start + window_s))
    return events


def segment_events(
    events: list[Segment],
    min_event_s: float = MIN_EVENT_S,
    merge_gap_s: float = MERGE_GAP_S,
) -> list[Segment]:
    """Drop events shorter than min_event_s, then merge gaps below merge_gap_s.

    Comparisons are strict (< drops, < merges); no epsilon is applied, so
    an event of exactly min_event_s survives and a gap of exactly
    merge_gap_s splits.
    """
    kept = [e for e in events if not (e.duration_s < min_event_s)]
    if not kept:
        return []
    merged: list[Segment] = [kept[0]]
    for ev in kept[1:]:
        prev = merged[-1]
        if ev.t_start <= prev.t_start:
            raise DataError("events must be sorted and non-overlapping")
        gap = ev.t_start - prev.t_end
        if gap < merge_gap_s:
            merged[-1] = Segment(prev.t_start, ev.t_end)
        else:
            merged.append(ev)
    return merged


def segment_clip(
    clip: AudioClip,
    threshold_db: float = DEFAULT_THRESHOLD_DB,
    window_s: float = DEFAULT_WINDOW_S,
    hop_s: float = DEFAULT_HOP_S,
    min_event_s: float = MIN_EVENT_S,
    merge_gap_s: float = MERGE_GAP_S,
) -> list[Segment]:
    """Full pipeline: frame, threshold, run-detect, drop-short, merge."""
    frames = frame_rms(clip, window_s=window_s, hop_s=hop_s)
    events = detect_events(frames, threshold_db=threshold_db, window_s=window_s)
    return segment_events(events, min_event_s=min_event_s, merge_gap_s=merge_gap_s)

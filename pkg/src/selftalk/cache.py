"""Duration-bounded FIFO cache of recent utterance segments.

Pushing a new segment evicts oldest-first until the stored durations,
including the incoming one, fit within the budget. A single segment
longer than the whole budget still gets stored, alone, and is flagged so
callers can tell the bound was not met for it.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from typing import Iterator

from selftalk.segmenter import Segment

DEFAULT_BUDGET_S = 30.0


@dataclass(frozen=True)
class CacheEntry:
    segment: Segment
    payload: object = None

    @property
    def duration_s(self) -> float:
        return self.segment.duration_s


@dataclass
class UtteranceCache:
    budget_s: float = DEFAULT_BUDGET_S
    _entries: deque[CacheEntry] = field(default_factory=deque)
    # True while the cache holds exactly one entry that alone exceeds the
    # budget; cleared by the next push that evicts it.
    oversize: bool = False

    def push(self, segment: Segment, payload: object = None) -> list[CacheEntry]:
        """Insert a segment, evicting oldest entries first. Returns evictions."""
        entry = CacheEntry(segment, payload)
        evicted: list[CacheEntry] = []
        while self._entries and self.total_s + entry.duration_s > self.budget_s:
            evicted.append(self._entries.popleft())
        self._entries.append(entry)
        self.oversize = len(self._entries) == 1 and entry.duration_s > self.budget_s
        return evicted

    @property
    def total_s(self) -> float:
        return sum(e.duration_s for e in self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self) -> Iterator[CacheEntry]:
        return iter(self._entries)

    def entries(self) -> list[CacheEntry]:
        """Oldest-first snapshot."""
        return list(self._entries)

    def segments(self) -> list[Segment]:
        return [e.segment for e in self._entries]

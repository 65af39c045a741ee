"""Shared fixtures and oracle helpers."""

from __future__ import annotations

import numpy as np
import pytest

from selftalk.labels import CLASSES
from selftalk.manifest import Utterance


def probs_for_margin(winner: int, margin: float) -> np.ndarray:
    """3-class distribution whose top-two gap is exactly `margin`.

    Winner gets (1 + 2m) / 3, the other two split the rest equally, so
    p_top - p_second = m by construction.
    """
    p = np.full(3, (1.0 - margin) / 3.0)
    p[winner] = (1.0 + 2.0 * margin) / 3.0
    return p


def make_utterance(seq_no: int, t_start: float, t_end: float,
                   label: str = "others", text: str = "w",
                   session_id: str = "S", participant_id: str = "P") -> Utterance:
    return Utterance(session_id=session_id, participant_id=participant_id,
                     seq_no=seq_no, t_start=t_start, t_end=t_end,
                     label=label, text=text)


def random_session(rng: np.random.Generator, n: int,
                   session_id: str = "S", participant_id: str = "P",
                   max_dur: float = 8.0, max_gap: float = 12.0) -> list[Utterance]:
    """Non-overlapping utterances with random durations and gaps."""
    utts = []
    t = float(rng.uniform(0.0, 2.0))
    for i in range(n):
        dur = float(rng.uniform(0.3, max_dur))
        label = CLASSES[int(rng.integers(0, 3))]
        text = " ".join(f"t{i}w{j}" for j in range(int(rng.integers(1, 5))))
        utts.append(make_utterance(i, round(t, 6), round(t + dur, 6),
                                   label=label, text=text,
                                   session_id=session_id,
                                   participant_id=participant_id))
        t += dur + float(rng.uniform(0.05, max_gap))
    return utts


@pytest.fixture(scope="session")
def rng_factory():
    def make(seed: int) -> np.random.Generator:
        return np.random.default_rng(seed)
    return make

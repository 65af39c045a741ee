"""Line-delimited JSON utterance manifests.

One utterance per line: {"session_id", "participant_id", "seq_no",
"t_start", "t_end", "label", "text"}. Writing uses canonical JSON
(sorted keys, no spaces) so regenerated files are byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

from selftalk.errors import DataError
from selftalk.labels import CLASSES
from selftalk.util import canonical_json

FIELDS = ("session_id", "participant_id", "seq_no", "t_start", "t_end", "label", "text")


@dataclass(frozen=True)
class Utterance:
    session_id: str
    participant_id: str
    seq_no: int
    t_start: float
    t_end: float
    label: str
    text: str

    def __post_init__(self) -> None:
        if self.label not in CLASSES:
            raise DataError(f"label {self.label!r} outside the class set")
        if not (self.t_end > self.t_start >= 0.0):
            raise DataError(f"bad utterance times ({self.t_start}, {self.t_end})")
        if self.seq_no < 0:
            raise DataError("seq_no must be nonnegative")

    @property
    def duration_s(self) -> float:
        return self.t_end - self.t_start


def write_manifest(path: str | Path, utterances: list[Utterance]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for u in utterances:
            fh.write(canonical_json(asdict(u)))
            fh.write("\n")


def read_manifest(path: str | Path) -> list[Utterance]:
    out: list[Utterance] = []
    try:
        with open(path, "r", encoding="utf-8") as fh:
            for ln, line in enumerate(fh, 1):
                line = line.strip()
                if not line:
                    continue
                try:
                    rec = json.loads(line)
                except json.JSONDecodeError as exc:
                    raise DataError(f"{path}:{ln}: invalid JSON: {exc}") from exc
                missing = [f for f in FIELDS if f not in rec]
                if missing:
                    raise DataError(f"{path}:{ln}: missing fields {missing}")
                out.append(Utterance(
                    session_id=str(rec["session_id"]),
                    participant_id=str(rec["participant_id"]),
                    seq_no=int(rec["seq_no"]),
                    t_start=float(rec["t_start"]),
                    t_end=float(rec["t_end"]),
                    label=str(rec["label"]),
                    text=str(rec["text"]),
                ))
    except OSError as exc:
        raise DataError(f"cannot read manifest {path}: {exc}") from exc
    return out


def group_by_session(utterances: list[Utterance]) -> dict[str, list[Utterance]]:
    """Session id -> utterances ordered by seq_no; validates ordering."""
    sessions: dict[str, list[Utterance]] = {}
    for u in utterances:
        sessions.setdefault(u.session_id, []).append(u)
    for sid, utts in sessions.items():
        utts.sort(key=lambda u: u.seq_no)
        for a, b in zip(utts, utts[1:]):
            if b.seq_no == a.seq_no:
                raise DataError(f"session {sid}: duplicate seq_no {a.seq_no}")
            if b.t_start < a.t_end:
                raise DataError(f"session {sid}: overlapping utterances at seq {b.seq_no}")
    return sessions

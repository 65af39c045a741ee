"""Per-utterance latency accounting for the staged pipeline.

Stage costs add along the executed prefix: an utterance that exits at
the linguistic stage pays preprocessing plus the acoustic and
linguistic stage costs, never the fusion cost. Expected latency under
early exit is the exit-ratio-weighted mean of those prefix sums.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from selftalk.errors import DataError
from selftalk.util import read_flat_config

STAGES = ("acoustic", "linguistic", "fusion")


@dataclass(frozen=True)
class LatencyProfile:
    preprocess_ms: float = 20.9
    acoustic_ms: float = 2015.0
    linguistic_ms: float = 4298.0
    fusion_ms: float = 0.8

    def __post_init__(self) -> None:
        if min(self.preprocess_ms, self.acoustic_ms,
               self.linguistic_ms, self.fusion_ms) < 0:
            raise DataError("latency terms must be nonnegative")

    @classmethod
    def from_file(cls, path: str | Path) -> "LatencyProfile":
        flat = read_flat_config(path)
        try:
            return cls(float(flat["preprocess_ms"]), float(flat["acoustic_ms"]),
                       float(flat["linguistic_ms"]), float(flat["fusion_ms"]))
        except KeyError as exc:
            raise DataError(f"profile file {path} missing {exc}") from exc


@dataclass(frozen=True)
class ExitRatios:
    p_acoustic: float = 0.61
    p_linguistic: float = 0.07
    p_fusion: float = 0.32

    def __post_init__(self) -> None:
        ps = (self.p_acoustic, self.p_linguistic, self.p_fusion)
        if min(ps) < 0:
            raise DataError("exit ratios must be nonnegative")
        if abs(sum(ps) - 1.0) > 1e-9:
            raise DataError(f"exit ratios must sum to 1, got {sum(ps)}")

    @classmethod
    def from_file(cls, path: str | Path) -> "ExitRatios":
        flat = read_flat_config(path)
        try:
            return cls(float(flat["p_acoustic"]), float(flat["p_linguistic"]),
                       float(flat["p_fusion"]))
        except KeyError as exc:
            raise DataError(f"ratios file {path} missing {exc}") from exc

    @classmethod
    def from_exit_stages(cls, stages: list[str]) -> "ExitRatios":
        if not stages:
            raise DataError("no exit stages to count")
        counts = {s: 0 for s in STAGES}
        for s in stages:
            if s not in counts:
                raise DataError(f"unknown exit stage {s!r}")
            counts[s] += 1
        n = len(stages)
        return cls(counts["acoustic"] / n, counts["linguistic"] / n,
                   counts["fusion"] / n)


def stage_prefix_ms(profile: LatencyProfile, exit_stage: str) -> float:
    """Cost of one utterance that exits at the given stage."""
    cost = profile.preprocess_ms + profile.acoustic_ms
    if exit_stage == "acoustic":
        return cost
    cost += profile.linguistic_ms
    if exit_stage == "linguistic":
        return cost
    if exit_stage == "fusion":
        return cost + profile.fusion_ms
    raise DataError(f"unknown exit stage {exit_stage!r}")


def expected_latency(profile: LatencyProfile, ratios: ExitRatios,
                     early_exit: bool = True) -> float:
    """Mean per-utterance latency in ms."""
    if not early_exit:
        return stage_prefix_ms(profile, "fusion")
    return (ratios.p_acoustic * stage_prefix_ms(profile, "acoustic")
            + ratios.p_linguistic * stage_prefix_ms(profile, "linguistic")
            + ratios.p_fusion * stage_prefix_ms(profile, "fusion"))


def reduction(profile: LatencyProfile, ratios: ExitRatios) -> float:
    """Fractional saving of early exit over always-run-everything."""
    full = expected_latency(profile, ratios, early_exit=False)
    if full <= 0:
        raise DataError("full-pipeline latency must be positive")
    return 1.0 - expected_latency(profile, ratios, early_exit=True) / full

"""Staged inference with confidence-gated early exit.

Every utterance runs the acoustic stage. Its prediction is final when
the predicted class is in the acoustic accept set (negative or others;
positive is never accepted this early) and the least margin clears
0.92. Otherwise the linguistic stage runs and is final only for a
negative prediction with margin at least 0.80. Whatever remains goes to
fusion, whose answer is always final. Both comparisons are inclusive:
a margin exactly at the threshold is accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from selftalk.adaptation import AdaptationState, AlphaGateNet, Embedding
from selftalk.cache import UtteranceCache
from selftalk.errors import BackendError, DataError
from selftalk.fusion import FusionGate
from selftalk.heads import ClassDistribution, FeedForwardHead
from selftalk.labels import CLASSES, NEGATIVE, OTHERS
from selftalk.manifest import Utterance
from selftalk.segmenter import Segment
from selftalk.transcription import BUDGET_S
from selftalk.util import read_flat_config

ACOUSTIC_MARGIN_MIN = 0.92
LINGUISTIC_MARGIN_MIN = 0.80


@dataclass(frozen=True)
class GatingPolicy:
    acoustic_accept_classes: frozenset[str] = frozenset({NEGATIVE, OTHERS})
    acoustic_margin_min: float = ACOUSTIC_MARGIN_MIN
    linguistic_accept_classes: frozenset[str] = frozenset({NEGATIVE})
    linguistic_margin_min: float = LINGUISTIC_MARGIN_MIN

    def __post_init__(self) -> None:
        for m in (self.acoustic_margin_min, self.linguistic_margin_min):
            if not (0.0 <= m <= 1.0):
                raise DataError("margin thresholds must lie in [0, 1]")
        for s in (self.acoustic_accept_classes, self.linguistic_accept_classes):
            if not s <= set(CLASSES):
                raise DataError("accept classes must be a subset of the class set")

    @classmethod
    def from_file(cls, path: str | Path) -> "GatingPolicy":
        flat = read_flat_config(path)
        kwargs = {}
        if "acoustic_margin_min" in flat:
            kwargs["acoustic_margin_min"] = float(flat["acoustic_margin_min"])
        if "linguistic_margin_min" in flat:
            kwargs["linguistic_margin_min"] = float(flat["linguistic_margin_min"])
        if "acoustic_accept_classes" in flat:
            kwargs["acoustic_accept_classes"] = frozenset(
                flat["acoustic_accept_classes"].split(","))
        if "linguistic_accept_classes" in flat:
            kwargs["linguistic_accept_classes"] = frozenset(
                flat["linguistic_accept_classes"].split(","))
        return cls(**kwargs)

    def accepts_acoustic(self, dist: ClassDistribution) -> bool:
        return (dist.predicted in self.acoustic_accept_classes
                and dist.least_margin >= self.acoustic_margin_min)

    def accepts_linguistic(self, dist: ClassDistribution) -> bool:
        return (dist.predicted in self.linguistic_accept_classes
                and dist.least_margin >= self.linguistic_margin_min)


@dataclass(frozen=True)
class StageTrace:
    utterance: Utterance
    acoustic: ClassDistribution
    linguistic: ClassDistribution | None
    fusion: ClassDistribution | None
    exit_stage: str
    final_label: str
    alpha: float
    degraded: bool = False

    def __post_init__(self) -> None:
        ran = {"acoustic": True, "linguistic": self.linguistic is not None,
               "fusion": self.fusion is not None}
        if self.exit_stage not in ran or not ran[self.exit_stage]:
            raise DataError(f"exit stage {self.exit_stage!r} did not run")


@dataclass
class Components:
    """Everything run_session needs, already wired.

    embed maps an utterance to its raw acoustic embedding; text_of maps
    (history snapshot, target) to (cropped transcript, backend_ok).
    Adaptation: a gate network, or a fixed alpha, or neither (no
    blending; alpha stays 1).
    """

    embed: Callable[[Utterance], np.ndarray]
    text_of: Callable[[list[Utterance], Utterance], tuple[str, bool]]
    text_encode: Callable[[str], np.ndarray]
    acoustic_head: FeedForwardHead
    linguistic_head: FeedForwardHead
    fusion: FusionGate
    alpha_gate: AlphaGateNet | None = None
    static_alpha: float | None = None
    cache_budget_s: float = BUDGET_S
    cache_raw_embeddings: bool = False


def run_session(session: list[Utterance], components: Components,
                policy: GatingPolicy | None = None,
                run_all: bool = False) -> list[StageTrace]:
    """Process one session's utterances in seq_no order.

    run_all computes every stage regardless of acceptance (the exit
    decision is unchanged); needed when traces feed threshold sweeps.
    """
    policy = policy or GatingPolicy()
    comp = components
    adaptation = AdaptationState(cache_raw=comp.cache_raw_embeddings)
    cache = UtteranceCache(budget_s=comp.cache_budget_s)
    # No-adaptation mode still runs through AdaptationState with alpha
    # pinned to 1 so the control flow stays identical.
    static_alpha = comp.static_alpha
    if comp.alpha_gate is None and static_alpha is None:
        static_alpha = 1.0

    traces: list[StageTrace] = []
    for target in sorted(session, key=lambda u: u.seq_no):
        raw = Embedding(np.asarray(comp.embed(target), dtype=np.float64),
                        "acoustic", target.t_start, target.t_end)
        adapted, alpha = adaptation.step(raw, comp.alpha_gate, static_alpha)
        acoustic_dist = comp.acoustic_head.forward(adapted.values)
        accept_a = policy.accepts_acoustic(acoustic_dist)

        cache.push(Segment(target.t_start, target.t_end), payload=target)

        linguistic_dist = None
        fusion_dist = None
        degraded = False
        if not accept_a or run_all:
            snapshot = [e.payload for e in cache.entries()]
            try:
                text, ok = comp.text_of(snapshot, target)
            except BackendError:
                text, ok = "", False
            if ok:
                ling_vec = comp.text_encode(text)
            else:
                ling_vec = np.zeros(comp.linguistic_head.in_dim)
                degraded = True
            linguistic_dist = comp.linguistic_head.forward(ling_vec)
            accept_l = (not degraded) and policy.accepts_linguistic(linguistic_dist)
            if not (accept_a or accept_l) or run_all:
                fusion_dist = comp.fusion.classify(adapted.values, ling_vec)

        if accept_a:
            exit_stage, final = "acoustic", acoustic_dist.predicted
        elif linguistic_dist is not None and (not degraded) \
                and policy.accepts_linguistic(linguistic_dist):
            exit_stage, final = "linguistic", linguistic_dist.predicted
        else:
            exit_stage, final = "fusion", fusion_dist.predicted
        traces.append(StageTrace(target, acoustic_dist, linguistic_dist,
                                 fusion_dist, exit_stage, final, alpha, degraded))
    return traces


def regate(trace: StageTrace, policy: GatingPolicy) -> tuple[str, str]:
    """Offline gating replay from stored distributions.

    Returns (exit stage, final label) under the given policy. Raises
    when the policy needs a stage the trace never computed, which only
    happens on traces not recorded with run_all.
    """
    if policy.accepts_acoustic(trace.acoustic):
        return "acoustic", trace.acoustic.predicted
    if trace.linguistic is None:
        raise DataError("trace lacks a linguistic distribution; record with run_all")
    if (not trace.degraded) and policy.accepts_linguistic(trace.linguistic):
        return "linguistic", trace.linguistic.predicted
    if trace.fusion is None:
        raise DataError("trace lacks a fusion distribution; record with run_all")
    return "fusion", trace.fusion.predicted


def sweep_thresholds(traces: list[StageTrace],
                     acoustic_grid: list[float],
                     linguistic_grid: list[float],
                     profile=None) -> list[dict]:
    """Re-gate stored traces over a threshold grid.

    Returns one record per grid point with exit counts, macro-F1 against
    manifest labels, and expected latency when a profile is given.
    """
    from selftalk.evalkit import macro_f1_from_labels
    from selftalk.latency import ExitRatios, expected_latency

    base = GatingPolicy()
    out = []
    for thr_a in acoustic_grid:
        for thr_l in linguistic_grid:
            policy = GatingPolicy(
                acoustic_accept_classes=base.acoustic_accept_classes,
                acoustic_margin_min=min(max(thr_a, 0.0), 1.0),
                linguistic_accept_classes=base.linguistic_accept_classes,
                linguistic_margin_min=min(max(thr_l, 0.0), 1.0))
            # Grid values above 1 mean "never accept"; model them as an
            # unreachable margin after the [0,1] validation clamp.
            never_a = thr_a > 1.0
            never_l = thr_l > 1.0
            exits = []
            preds = []
            truths = []
            for tr in traces:
                if never_a or never_l:
                    stage, label = _regate_with_never(tr, policy, never_a, never_l)
                else:
                    stage, label = regate(tr, policy)
                exits.append(stage)
                preds.append(label)
                truths.append(tr.utterance.label)
            counts = {s: exits.count(s) for s in ("acoustic", "linguistic", "fusion")}
            rec = {"acoustic_margin_min": thr_a, "linguistic_margin_min": thr_l,
                   "exits": counts,
                   "macro_f1": macro_f1_from_labels(truths, preds)}
            if profile is not None:
                ratios = ExitRatios(counts["acoustic"] / len(traces),
                                    counts["linguistic"] / len(traces),
                                    counts["fusion"] / len(traces))
                rec["expected_latency_ms"] = expected_latency(profile, ratios)
            out.append(rec)
    return out


def _regate_with_never(trace: StageTrace, policy: GatingPolicy,
                       never_a: bool, never_l: bool) -> tuple[str, str]:
    if not never_a and policy.accepts_acoustic(trace.acoustic):
        return "acoustic", trace.acoustic.predicted
    if trace.linguistic is None:
        raise DataError("trace lacks a linguistic distribution; record with run_all")
    if not never_l and (not trace.degraded) \
            and policy.accepts_linguistic(trace.linguistic):
        return "linguistic", trace.linguistic.predicted
    if trace.fusion is None:
        raise DataError("trace lacks a fusion distribution; record with run_all")
    return "fusion", trace.fusion.predicted

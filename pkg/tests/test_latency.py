"""Latency accounting: prefix sums, expected cost, saving ratio."""

import pytest

from selftalk.errors import DataError
from selftalk.latency import (
    ExitRatios,
    LatencyProfile,
    expected_latency,
    reduction,
    stage_prefix_ms,
)
from selftalk.util import write_flat_config

# Default stage costs, restated here so a silent edit of the defaults
# shows up as a failure rather than a self-consistent recalculation.
PRE, AC, LI, FU = 20.9, 2015.0, 4298.0, 0.8
P_AC, P_LI, P_FU = 0.61, 0.07, 0.32


def test_default_profile_values():
    p = LatencyProfile()
    assert (p.preprocess_ms, p.acoustic_ms, p.linguistic_ms, p.fusion_ms) \
        == (PRE, AC, LI, FU)
    r = ExitRatios()
    assert (r.p_acoustic, r.p_linguistic, r.p_fusion) == (P_AC, P_LI, P_FU)


def test_stage_prefix_sums():
    p = LatencyProfile()
    assert stage_prefix_ms(p, "acoustic") == pytest.approx(PRE + AC)
    assert stage_prefix_ms(p, "linguistic") == pytest.approx(PRE + AC + LI)
    assert stage_prefix_ms(p, "fusion") == pytest.approx(PRE + AC + LI + FU)
    with pytest.raises(DataError):
        stage_prefix_ms(p, "warp")


def test_full_pipeline_latency():
    full = expected_latency(LatencyProfile(), ExitRatios(), early_exit=False)
    assert full == pytest.approx(6334.7)


def test_early_exit_latency():
    early = expected_latency(LatencyProfile(), ExitRatios(), early_exit=True)
    want = (P_AC * (PRE + AC) + P_LI * (PRE + AC + LI)
            + P_FU * (PRE + AC + LI + FU))
    assert early == pytest.approx(want)
    assert early == pytest.approx(3712.376)


def test_reduction_fraction():
    r = reduction(LatencyProfile(), ExitRatios())
    assert r == pytest.approx(1.0 - 3712.376 / 6334.7)
    assert 0.41 <= r <= 0.42


def test_reduction_rejects_zero_cost():
    zero = LatencyProfile(0.0, 0.0, 0.0, 0.0)
    with pytest.raises(DataError):
        reduction(zero, ExitRatios())


def test_ratio_validation():
    with pytest.raises(DataError):
        ExitRatios(0.5, 0.5, 0.5)
    with pytest.raises(DataError):
        ExitRatios(-0.1, 0.6, 0.5)
    ExitRatios(1.0, 0.0, 0.0)  # degenerate but legal


def test_profile_validation():
    with pytest.raises(DataError):
        LatencyProfile(-1.0, 0.0, 0.0, 0.0)


def test_from_exit_stages_counts():
    stages = ["acoustic"] * 6 + ["linguistic"] * 1 + ["fusion"] * 3
    r = ExitRatios.from_exit_stages(stages)
    assert (r.p_acoustic, r.p_linguistic, r.p_fusion) == (0.6, 0.1, 0.3)
    with pytest.raises(DataError):
        ExitRatios.from_exit_stages([])
    with pytest.raises(DataError):
        ExitRatios.from_exit_stages(["acoustic", "sideways"])


def test_profile_and_ratios_from_file(tmp_path):
    prof_path = tmp_path / "profile.cfg"
    write_flat_config(prof_path, {"preprocess_ms": "10", "acoustic_ms": "100",
                                  "linguistic_ms": "200", "fusion_ms": "1"})
    p = LatencyProfile.from_file(prof_path)
    assert p.acoustic_ms == 100.0
    rat_path = tmp_path / "ratios.cfg"
    write_flat_config(rat_path, {"p_acoustic": "0.5", "p_linguistic": "0.25",
                                 "p_fusion": "0.25"})
    r = ExitRatios.from_file(rat_path)
    assert r.p_fusion == 0.25
    bad = tmp_path / "partial.cfg"
    write_flat_config(bad, {"preprocess_ms": "10"})
    with pytest.raises(DataError):
        LatencyProfile.from_file(bad)

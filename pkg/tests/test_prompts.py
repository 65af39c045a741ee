"""Prompt templates pinned byte-for-byte against golden files.

Golden fixture content is plain ASCII. Regenerate after a deliberate
template change with:  python3 -m tests.test_prompts
"""

from pathlib import Path

import pytest

from selftalk.errors import DataError
from selftalk.features import (
    CONTOUR_GRADUAL_RISE,
    CONTOUR_STEADY,
    CONTOUR_SUDDEN_RISE,
    FeatureDescriptors,
)
from selftalk.prompts import (
    HISTORY_LIMIT,
    TEMPLATE_IDS,
    PromptContext,
    Shot,
    feature_line,
    render,
)

GOLDEN_DIR = Path(__file__).parent / "goldens"


def fixture_context(template_id: str) -> PromptContext:
    # Eleven history entries on purpose: the renders must keep only the
    # last ten, so the truncation behavior is pinned inside the goldens.
    history = ("let's go", "out!", "fifteen-love", "good serve", "again",
               "focus now", "deep breath", "too long", "net ball",
               "come on", "why did i do that")
    descriptors = FeatureDescriptors(
        pitch_variance_cat="High", pitch_mean_cat="Midium",
        intensity_mean_cat="High", pitch_range_cat="Wide",
        intensity_range_cat="Midium", contour=CONTOUR_SUDDEN_RISE)
    shots = (
        Shot(history=("nice one", "good"), text="come on come on",
             descriptors=FeatureDescriptors("Midium", "Midium", "Midium",
                                            "Midium", "Midium",
                                            CONTOUR_GRADUAL_RISE),
             duration_s=0.9, result="Positive Self-Talk"),
        Shot(history=("fault!",), text="tsk",
             descriptors=FeatureDescriptors("Low", "Low", "Low", "Narrow",
                                            "Narrow", CONTOUR_STEADY),
             duration_s=0.45, result="Negative Self-Talk"),
    )
    return PromptContext(
        history=history, text="ah why can't i hit that",
        descriptors=descriptors, duration_s=1.234567,
        template_id=template_id,
        shots=shots if template_id.endswith("-few") else ())


@pytest.mark.parametrize("template_id", TEMPLATE_IDS)
def test_renders_match_goldens(template_id):
    golden = (GOLDEN_DIR / f"{template_id}.txt").read_bytes()
    assert render(fixture_context(template_id)).encode("utf-8") == golden


@pytest.mark.parametrize("template_id", TEMPLATE_IDS)
def test_render_structure(template_id):
    out = render(fixture_context(template_id))
    assert out.startswith("Classify the following tennis utterance")
    assert out.endswith("classification labels.\n")
    has_features = "**Audio Feature Descriptions:**" in out
    assert has_features == template_id.startswith("text-")
    has_shots = "Here are a few examples:" in out
    assert has_shots == template_id.endswith("-few")
    if has_shots:
        assert out.count("Classification: ") == 2


def test_history_truncated_to_ten():
    out = render(fixture_context("multi-zero"))
    # The first of the eleven history entries must be gone.
    assert '"let\'s go"' not in out
    assert '"out!"' in out
    history_line = [ln for ln in out.splitlines() if ln.startswith('"out!"')][0]
    assert history_line.count('", "') == HISTORY_LIMIT - 1
    assert HISTORY_LIMIT == 10


def test_short_history_not_padded():
    ctx = PromptContext(history=("one", "two"), text="x",
                        descriptors=fixture_context("multi-zero").descriptors,
                        duration_s=0.5, template_id="multi-zero")
    out = render(ctx)
    assert '"one", "two"\n' in out


def test_feature_line_format():
    d = FeatureDescriptors("Low", "High", "Midium", "Wide", "Narrow",
                           CONTOUR_SUDDEN_RISE)
    line = feature_line(d, 2.5)
    assert line == ("Features: Pitch Variance=Low, Pitch Mean=High, "
                    "Duration=2.500000 (sec), Intensity Mean=Midium, "
                    "Pitch Range=Wide, Intensity Range=Narrow, "
                    "Pitch Contour=The pitch suddenly rises at a certain "
                    "moment.")


def test_context_validation():
    good = fixture_context("text-zero")
    with pytest.raises(DataError):
        PromptContext(good.history, good.text, good.descriptors, 1.0, "jazz")
    with pytest.raises(DataError):
        PromptContext(good.history, good.text, good.descriptors, 0.0,
                      "text-zero")
    with pytest.raises(DataError):
        PromptContext(good.history, good.text, good.descriptors, 1.0,
                      "text-few", shots=())
    with pytest.raises(DataError):
        PromptContext(good.history, good.text, None, 1.0, "text-zero")


def regenerate() -> None:
    GOLDEN_DIR.mkdir(exist_ok=True)
    for template_id in TEMPLATE_IDS:
        out = render(fixture_context(template_id)).encode("utf-8")
        (GOLDEN_DIR / f"{template_id}.txt").write_bytes(out)
        print(f"wrote {template_id}.txt ({len(out)} bytes)")


if __name__ == "__main__":
    regenerate()

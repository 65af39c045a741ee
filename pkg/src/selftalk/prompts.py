"""Prompt rendering for LLM-based classification.

Four templates: text-zero, text-few, multi-zero, multi-few. The text
variants carry an audio-feature description block; the few-shot
variants carry worked examples. Render output is byte-stable: fixed
6-decimal durations, no locale formatting, and the exact header and
bullet wording the downstream models were tuned against. The golden
files in the test suite pin every byte; change nothing lightly.
"""

from __future__ import annotations

from dataclasses import dataclass

from selftalk.errors import DataError
from selftalk.features import FeatureDescriptors

TEMPLATE_IDS = ("text-zero", "text-few", "multi-zero", "multi-few")
HISTORY_LIMIT = 10

_INTRO = (
    "Classify the following tennis utterance, considering its **text**, "
    "**audio features**, and the **context provided by the previous 10 "
    "utterances**. The input utterance text and historical utterances may "
    "be in Korean. Choose one of these three categories:\n"
    "- **Negative Self-Talk**: Blaming oneself, expressing negative "
    "thoughts or negative exclamations.\n"
    "- **Positive Self-Talk**: Encouraging oneself or expressing positive "
    "thoughts.\n"
    "- **Others**: General conversation, non-meaningful sounds like "
    "breathing, racket noise, or background noise, counting scores "
    '(e.g., "Fifteen-love!", "Deuce!"), or in/out calls (e.g., "Out!", '
    '"Fault!").\n'
)

_FEATURE_DESCRIPTIONS = (
    "**Audio Feature Descriptions:**\n"
    "- **Pitch Variance**: How much the pitch (voice fundamental "
    "frequency) changes. A higher variance can indicate strong emotion "
    "or excitement.\n"
    "- **Pitch Mean**: The average pitch of the voice.\n"
    "- **Duration**: The length of the utterance in seconds.\n"
    "- **Intensity Mean**: The average loudness of the voice.\n"
    "- **Pitch Range**: The span between the highest and lowest pitch "
    "in the utterance\n"
    "- **Intensity Range**: The span between the loudest and quietest "
    "parts of the utterance\n"
)

_FINAL = (
    "Do **not** explain your reasoning. Do **not** return any additional "
    "text, description, or commentary. Respond with **only** one of the "
    "classification labels.\n"
)

_HISTORY_HEADER = (
    "**Previous Utterances History (from oldest to newest, up to 10 "
    "utterances, comma-separated):**"
)
_CURRENT_HEADER = "**Current Utterance to Classify:**"
_EXAMPLES_HEADER = "Here are a few examples:"


@dataclass(frozen=True)
class Shot:
    history: tuple[str, ...]
    text: str
    descriptors: FeatureDescriptors
    duration_s: float
    result: str


@dataclass(frozen=True)
class PromptContext:
    history: tuple[str, ...]
    text: str
    descriptors: FeatureDescriptors
    duration_s: float
    template_id: str
    shots: tuple[Shot, ...] = ()

    def __post_init__(self) -> None:
        if self.template_id not in TEMPLATE_IDS:
            raise DataError(f"unknown template id {self.template_id!r}")
        if self.descriptors is None:
            raise DataError("descriptors are required")
        if self.duration_s <= 0:
            raise DataError("duration must be positive")
        if self.template_id.endswith("-few") and not self.shots:
            raise DataError(f"template {self.template_id} needs at least one shot")


def feature_line(d: FeatureDescriptors, duration_s: float) -> str:
    """One line per the worked example: categorical values, 6-decimal
    duration, contour sentence capitalized."""
    contour = d.contour[0].upper() + d.contour[1:]
    return (f"Features: Pitch Variance={d.pitch_variance_cat}, "
            f"Pitch Mean={d.pitch_mean_cat}, "
            f"Duration={duration_s:.6f} (sec), "
            f"Intensity Mean={d.intensity_mean_cat}, "
            f"Pitch Range={d.pitch_range_cat}, "
            f"Intensity Range={d.intensity_range_cat}, "
            f"Pitch Contour={contour}")


def _history_line(history: tuple[str, ...]) -> str:
    recent = history[-HISTORY_LIMIT:]
    return ", ".join(f'"{h}"' for h in recent)


def _query_lines(history: tuple[str, ...], text: str,
                 d: FeatureDescriptors, duration_s: float) -> list[str]:
    return [
        _HISTORY_HEADER,
        _history_line(history),
        _CURRENT_HEADER,
        f"Utterance: {text}",
        feature_line(d, duration_s),
    ]


def render_shot(shot: Shot) -> str:
    lines = _query_lines(shot.history, shot.text, shot.descriptors,
                         shot.duration_s)
    lines.append(f"Classification: {shot.result}")
    return "\n".join(lines)


def render(ctx: PromptContext) -> str:
    parts = [_INTRO, "\n"]
    if ctx.template_id.startswith("text-"):
        parts.extend([_FEATURE_DESCRIPTIONS, "\n"])
    if ctx.template_id.endswith("-few"):
        shots = "\n\n".join(render_shot(s) for s in ctx.shots)
        parts.append(f"{_EXAMPLES_HEADER}\n{shots}\n\n")
    query = "\n".join(_query_lines(ctx.history, ctx.text, ctx.descriptors,
                                   ctx.duration_s))
    parts.extend([query, "\n\n", _FINAL])
    return "".join(parts)

"""The three-class label set and its canonical encodings."""

from __future__ import annotations

NEGATIVE = "negative"
POSITIVE = "positive"
OTHERS = "others"

CLASSES: tuple[str, str, str] = (NEGATIVE, POSITIVE, OTHERS)

# Display names used in prompts and expected from LLM backends.
DISPLAY_NAMES = {
    NEGATIVE: "Negative Self-Talk",
    POSITIVE: "Positive Self-Talk",
    OTHERS: "Others",
}

_INDEX = {c: i for i, c in enumerate(CLASSES)}


def class_index(label: str) -> int:
    """Index of a canonical label, raising KeyError for anything else."""
    return _INDEX[label]


def normalize_display_label(text: str) -> str | None:
    """Map a free-form label string onto the canonical class set.

    Matching is case-insensitive and tolerant of hyphen/space variation.
    Returns None when the text is not one of the three labels.
    """
    folded = " ".join(text.strip().lower().replace("-", " ").split())
    for label, display in DISPLAY_NAMES.items():
        want = " ".join(display.lower().replace("-", " ").split())
        if folded == want or folded == label:
            return label
    return None

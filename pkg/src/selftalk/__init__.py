"""Streaming detection of vocalized self-talk via a confidence-gated cascade.

The pipeline segments utterances from earable-style audio, classifies each
one acoustically, and escalates to linguistic and fusion stages only when
the stage confidence (least margin) falls below the gate threshold.
"""

__version__ = "0.1.0"

from selftalk.labels import CLASSES

__all__ = ["CLASSES", "__version__"]

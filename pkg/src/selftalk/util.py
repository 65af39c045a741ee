"""Small shared helpers: stable hashing, flat config files, canonical JSON."""

from __future__ import annotations

import json
from pathlib import Path

from selftalk.errors import DataError

_FNV_OFFSET = 0xCBF29CE484222325
_FNV_PRIME = 0x100000001B3
_MASK64 = 0xFFFFFFFFFFFFFFFF

# Knuth MMIX constants; the backend stub's vector stream is defined on them.
LCG_MULT = 6364136223846793005
LCG_INC = 1442695040888963407


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash; platform- and run-independent."""
    h = _FNV_OFFSET
    for b in data:
        h = ((h ^ b) * _FNV_PRIME) & _MASK64
    return h


def lcg_next(state: int) -> int:
    return (LCG_MULT * state + LCG_INC) & _MASK64


def stable_u01(*parts: object) -> float:
    """Deterministic uniform in [0, 1) derived from the parts' repr bytes.

    Independent of PYTHONHASHSEED; used wherever reproducible per-item
    randomness is needed without threading an RNG through.
    """
    key = "\x1f".join(str(p) for p in parts).encode("utf-8")
    return (fnv1a64(key) >> 40) / float(1 << 24)


def write_flat_config(path: str | Path, values: dict[str, object]) -> None:
    """Write a flat key=value text file, one entry per line."""
    lines = [f"{k}={v}" for k, v in values.items()]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def read_flat_config(path: str | Path) -> dict[str, str]:
    """Read a flat key=value file; blank lines and #-comments are skipped."""
    p = Path(path)
    if not p.is_file():
        raise DataError(f"config file not found: {p}")
    out: dict[str, str] = {}
    for lineno, raw in enumerate(p.read_text(encoding="utf-8").splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise DataError(f"{p}:{lineno}: expected key=value, got {line!r}")
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def canonical_json(obj: object) -> str:
    """Canonical one-line JSON: sorted keys, no spaces, UTF-8 text."""
    return json.dumps(obj, ensure_ascii=False, separators=(",", ":"), sort_keys=True)

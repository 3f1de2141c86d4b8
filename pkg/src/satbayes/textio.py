"""Line-oriented ``key = value`` text parsing shared by config-like files.

The format is deliberately minimal: one pair per line, ``#`` starts a
comment, blank lines are skipped, keys may repeat. Floats are written
with ``repr`` so values round-trip exactly.
"""

from __future__ import annotations

from .errors import ConfigError


def iter_kv_lines(text: str, source: str = "<str>") -> list[tuple[int, str, str]]:
    """All (line number, key, value) triples of a key = value document."""
    triples = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"{source}:{lineno}: empty key")
        triples.append((lineno, key, value.strip()))
    return triples


def parse_float(value: str, key: str, source: str = "<str>") -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{source}: key {key!r}: not a number: {value!r}") from None


def parse_int(value: str, key: str, source: str = "<str>") -> int:
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{source}: key {key!r}: not an integer: {value!r}") from None


def format_float(value: float) -> str:
    """Shortest decimal form that parses back to the same float."""
    return repr(float(value))


def split_list(value: str) -> list[str]:
    """Comma-separated items, stripped; empty string -> empty list."""
    if not value.strip():
        return []
    return [item.strip() for item in value.split(",")]

"""Shared helpers for the line-oriented `|`-separated file and wire formats."""

from __future__ import annotations

import urllib.parse

SEP = "|"


def quote(label: str) -> str:
    """Percent-encode an opaque label so it is safe inside a `|` record."""
    return urllib.parse.quote(label, safe="")


def unquote(encoded: str) -> str:
    return urllib.parse.unquote(encoded)


def fmt_num(x: float) -> str:
    """Render a timestamp/number compactly but bit-exactly round-trippable."""
    if isinstance(x, float):
        if x.is_integer():
            return str(int(x))
        return repr(x)
    return str(x)


def parse_num(s: str) -> float:
    return float(s)

"""Shared value helpers.

Cells are either case-sensitive text or exact rationals (`fractions.Fraction`),
so loading, evaluating, and re-exporting data is bit-exact. Similarity degrees
stay rational wherever the defining formula is rational; only logarithmic
measures fall back to floats.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Union

Value = Union[str, Fraction]
Degree = Union[Fraction, float]


def parse_rational(text: str) -> Fraction:
    """Parse an integer, decimal, or ``p/q`` literal into an exact rational."""
    s = text.strip()
    try:
        if "/" in s:
            num, den = s.split("/", 1)
            return Fraction(int(num), int(den))
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as exc:
        raise ValueError(f"not a rational literal: {text!r}") from exc


def format_rational(value: Fraction) -> str:
    """Render a rational exactly: plain integer, finite decimal, or ``p/q``.

    The output always parses back to the same value with `parse_rational`.
    """
    if value.denominator == 1:
        return str(value.numerator)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        return f"{value.numerator}/{value.denominator}"
    digits = max(twos, fives)
    scaled = int(abs(value) * 10**digits)
    text = str(scaled).rjust(digits + 1, "0")
    sign = "-" if value < 0 else ""
    return f"{sign}{text[:-digits]}.{text[-digits:]}"


def format_value(v: Value) -> str:
    return format_rational(v) if isinstance(v, Fraction) else v


def format_degree(d: Degree) -> str:
    """Degrees render with 4 decimal places in all outputs."""
    return f"{float(d):.4f}"


def row_sort_key(row: tuple) -> tuple:
    """Deterministic ordering for mixed text/rational rows (text sorts first)."""
    return tuple((0, v) if isinstance(v, str) else (1, v) for v in row)

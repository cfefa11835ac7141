"""Helpers for keeping every number exact."""

from __future__ import annotations

from fractions import Fraction
from numbers import Rational
from typing import Any


def as_rational(value: Any) -> Fraction:
    """Coerce ``value`` to a :class:`Fraction`.

    Accepts ints, Fractions and strings such as ``"3/4"`` or ``"2"``. Floats are
    refused: a float would smuggle rounding into an exact computation.
    """
    if isinstance(value, bool):
        raise TypeError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, Rational)):
        return Fraction(value)
    if isinstance(value, str):
        text = value.strip()
        if not text or any(ch in text for ch in ".eE"):
            raise ValueError(f"not an exact rational: {value!r}")
        return Fraction(text)
    raise TypeError(f"expected an exact rational, got {type(value).__name__}")


def fmt(value: Fraction) -> str:
    """Render a rational as ``p/q`` (integers render without the denominator)."""
    return str(value)

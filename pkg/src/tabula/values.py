"""Cell values: numbers, text, and the error markers recalc leaves behind.

All numbers are decimal.Decimal so grid arithmetic and CSV output stay exact
(SUM of integers prints as an integer, never 14.999999999999998).
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation

__all__ = [
    "TabulaError",
    "ValueType",
    "NumberVal",
    "TextVal",
    "Value",
    "ErrorVal",
    "infer_type",
    "format_decimal",
    "to_decimal",
]


class TabulaError(Exception):
    """Base class for all errors raised by this package."""


class ValueType(enum.Enum):
    NUMBER = "number"
    TEXT = "text"


def to_decimal(raw: int | float | str | Decimal) -> Decimal:
    """Convert to a finite Decimal or raise ValueError."""
    if isinstance(raw, Decimal):
        d = raw
    elif isinstance(raw, bool):
        raise ValueError("booleans are not numbers")
    elif isinstance(raw, int):
        d = Decimal(raw)
    elif isinstance(raw, float):
        # via str so 0.1 becomes Decimal("0.1"), not the binary artifact
        d = Decimal(str(raw))
    elif isinstance(raw, str):
        try:
            d = Decimal(raw.strip())
        except InvalidOperation:
            raise ValueError(f"not a number: {raw!r}") from None
    else:
        raise ValueError(f"not a number: {raw!r}")
    if not d.is_finite():
        raise ValueError(f"not a finite number: {raw!r}")
    return d


@dataclass(frozen=True)
class NumberVal:
    """A numeric cell value."""

    num: Decimal

    def __init__(self, num: int | float | str | Decimal) -> None:
        object.__setattr__(self, "num", to_decimal(num))

    def __str__(self) -> str:
        return format_decimal(self.num)


@dataclass(frozen=True)
class TextVal:
    """A text cell value. The empty string is the blank value."""

    text: str

    def __str__(self) -> str:
        return self.text


Value = NumberVal | TextVal


@dataclass(frozen=True)
class ErrorVal:
    """A computed-cell error marker, e.g. #DIV/0!.

    Stored in an instance's computed map when a formula cannot be evaluated;
    never a legal input value.
    """

    code: str
    message: str = ""

    def __str__(self) -> str:
        return self.code


def infer_type(v: Value) -> ValueType:
    """An attribute's type is the type of its default value."""
    if isinstance(v, NumberVal):
        return ValueType.NUMBER
    if isinstance(v, TextVal):
        return ValueType.TEXT
    raise TypeError(f"not a value: {v!r}")


def format_decimal(d: Decimal) -> str:
    """Canonical text for a number: no exponent, no trailing zeros.

    Decimal("15.00") -> "15", Decimal("2.50") -> "2.5", Decimal("-0") -> "0".
    Lossless: never rounds, unlike normalize() under a small context.
    """
    if d == 0:
        return "0"
    text = format(d, "f")
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return text

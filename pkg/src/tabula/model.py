"""Model structure: grid, classes, and the three cell kinds.

A model is a W x H grid of cells plus a set of named classes, each owning a
rectangular range and an expansion direction. Cells are labels, named inputs
(with a default value and optional constraint), or named formulas.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterator, NamedTuple

from .formula import Constraint, Expr, parse_formula, render_expr
from .values import TabulaError, TextVal, Value, ValueType, infer_type

__all__ = [
    "BoundsError",
    "ClassDef",
    "Expansion",
    "FormulaCell",
    "Input",
    "Label",
    "Metrics",
    "Point",
    "RangeRect",
    "TCell",
    "TabulaModel",
    "cell_at",
    "is_identifier",
    "metrics",
]


class BoundsError(TabulaError):
    """Geometry out of bounds or malformed."""


class Point(NamedTuple):
    """Zero-based grid coordinate, column first."""

    col: int
    row: int

    def __str__(self) -> str:
        return f"({self.col},{self.row})"


@dataclass(frozen=True)
class RangeRect:
    """Inclusive rectangle from top_left to bottom_right."""

    top_left: Point
    bottom_right: Point

    def __post_init__(self) -> None:
        tl, br = self.top_left, self.bottom_right
        if tl.col < 0 or tl.row < 0:
            raise BoundsError(f"negative corner {tl}")
        if br.col < tl.col or br.row < tl.row:
            raise BoundsError(f"inverted range {tl}..{br}")

    @property
    def left(self) -> int:
        return self.top_left.col

    @property
    def top(self) -> int:
        return self.top_left.row

    @property
    def right(self) -> int:
        return self.bottom_right.col

    @property
    def bottom(self) -> int:
        return self.bottom_right.row

    @property
    def width(self) -> int:
        return self.right - self.left + 1

    @property
    def height(self) -> int:
        return self.bottom - self.top + 1

    @property
    def area(self) -> int:
        return self.width * self.height

    def contains_point(self, p: Point) -> bool:
        return self.left <= p.col <= self.right and self.top <= p.row <= self.bottom

    def contains(self, other: "RangeRect") -> bool:
        return (
            self.left <= other.left
            and self.top <= other.top
            and other.right <= self.right
            and other.bottom <= self.bottom
        )

    def strictly_contains(self, other: "RangeRect") -> bool:
        return self.contains(other) and self != other

    def intersect(self, other: "RangeRect") -> "RangeRect | None":
        left = max(self.left, other.left)
        top = max(self.top, other.top)
        right = min(self.right, other.right)
        bottom = min(self.bottom, other.bottom)
        if left > right or top > bottom:
            return None
        return RangeRect(Point(left, top), Point(right, bottom))

    def points(self) -> Iterator[Point]:
        for row in range(self.top, self.bottom + 1):
            for col in range(self.left, self.right + 1):
                yield Point(col, row)

    def __str__(self) -> str:
        return f"{self.top_left}..{self.bottom_right}"


class Expansion(enum.Enum):
    NONE = "none"
    DOWN = "down"
    RIGHT = "right"
    BOTH = "both"


@dataclass(frozen=True)
class ClassDef:
    name: str
    range: RangeRect
    expansion: Expansion


# ---- Cells ----


@dataclass(frozen=True)
class Label:
    text: str


@dataclass(frozen=True)
class Input:
    name: str
    default: Value
    constraint: Constraint | None = None

    @property
    def value_type(self) -> ValueType:
        return infer_type(self.default)


@dataclass(frozen=True)
class FormulaCell:
    name: str
    expr: Expr

    @property
    def text(self) -> str:
        return render_expr(self.expr)

    @staticmethod
    def parse(name: str, src: str) -> "FormulaCell":
        return FormulaCell(name, parse_formula(src))


TCell = Label | Input | FormulaCell

_IDENT_START = set("abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ_")


def is_identifier(name: str) -> bool:
    if not name or name[0] not in _IDENT_START:
        return False
    return all(ch in _IDENT_START or ch.isdigit() for ch in name[1:])


def _check_text(what: str, text: str) -> None:
    # raw control characters have no printable form in the model language
    for ch in text:
        if ord(ch) < 0x20 or ord(ch) == 0x7F:
            raise BoundsError(f"{what} contains control character {ch!r}")


# ---- Model ----


@dataclass(frozen=True)
class TabulaModel:
    name: str
    width: int
    height: int
    classes: tuple[ClassDef, ...] = ()
    cells: dict[Point, TCell] = field(default_factory=dict)

    def __post_init__(self) -> None:
        _check_text("model name", self.name)
        if self.width < 1 or self.height < 1:
            raise BoundsError(f"grid must be at least 1x1, got {self.width}x{self.height}")
        grid = RangeRect(Point(0, 0), Point(self.width - 1, self.height - 1))
        seen: set[str] = set()
        for c in self.classes:
            if not is_identifier(c.name):
                raise BoundsError(f"bad class name {c.name!r}")
            if c.name in seen:
                raise BoundsError(f"duplicate class {c.name}")
            seen.add(c.name)
            if not grid.contains(c.range):
                raise BoundsError(f"class {c.name} range {c.range} outside {self.width}x{self.height} grid")
        normalized: dict[Point, TCell] = {}
        for p, cell in self.cells.items():
            p = Point(*p)
            if not grid.contains_point(p):
                raise BoundsError(f"cell {p} outside {self.width}x{self.height} grid")
            if isinstance(cell, Label):
                _check_text(f"label at {p}", cell.text)
                if cell.text == "":
                    continue  # blank labels are the implicit default
            elif isinstance(cell, Input):
                if not is_identifier(cell.name):
                    raise BoundsError(f"bad attribute name {cell.name!r} at {p}")
                if isinstance(cell.default, TextVal):
                    _check_text(f"default at {p}", cell.default.text)
            elif isinstance(cell, FormulaCell):
                if not is_identifier(cell.name):
                    raise BoundsError(f"bad attribute name {cell.name!r} at {p}")
            else:
                raise BoundsError(f"not a cell at {p}: {cell!r}")
            normalized[p] = cell
        object.__setattr__(self, "cells", normalized)

    @property
    def grid(self) -> RangeRect:
        return RangeRect(Point(0, 0), Point(self.width - 1, self.height - 1))

    def class_named(self, name: str) -> ClassDef | None:
        for c in self.classes:
            if c.name == name:
                return c
        return None

    def attr_cells(self) -> Iterator[tuple[Point, Input | FormulaCell]]:
        """All named cells in row-major order."""
        for p in sorted(self.cells, key=lambda q: (q.row, q.col)):
            cell = self.cells[p]
            if isinstance(cell, (Input, FormulaCell)):
                yield p, cell


def cell_at(model: TabulaModel, p: Point) -> TCell:
    p = Point(*p)
    if not model.grid.contains_point(p):
        raise BoundsError(f"cell {p} outside {model.width}x{model.height} grid")
    return model.cells.get(p, Label(""))


class Metrics(NamedTuple):
    width: int
    height: int
    classes: int
    attributes: int
    inputs: int
    formulas: int

    def row(self) -> str:
        return " ".join(str(n) for n in self)


def metrics(model: TabulaModel) -> Metrics:
    """Size measures: grid dims, class count, attribute/input/formula counts."""
    inputs = sum(1 for _, c in model.attr_cells() if isinstance(c, Input))
    formulas = sum(1 for _, c in model.attr_cells() if isinstance(c, FormulaCell))
    return Metrics(
        width=model.width,
        height=model.height,
        classes=len(model.classes),
        attributes=inputs + formulas,
        inputs=inputs,
        formulas=formulas,
    )

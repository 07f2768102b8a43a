"""Reading and writing the model language.

A model file looks like:

    tabula "Inventory" {
      grid 2 x 6
      class Inventory range (0,0) .. (1,5) expand none
      cells {
        (0,0): label "Inventory"
        (1,3): input stock = 0 : >=0
        (1,5): formula total = SUM(stock)
      }
    }

Comments run from # to end of line. Formula bodies extend to end of line.
Cells not declared are blank labels. print_model emits a canonical form that
parses back to the identical model.
"""

from __future__ import annotations

from dataclasses import dataclass

from .formula import (
    Constraint,
    FormulaError,
    parse_constraint,
    parse_formula,
    render_constraint,
    render_expr,
)
from .layout import validate_layout
from .model import (
    ClassDef,
    Expansion,
    FormulaCell,
    Input,
    Label,
    Point,
    RangeRect,
    TabulaModel,
    TCell,
)
from .refs import validate_semantics
from .values import NumberVal, TabulaError, TextVal

__all__ = ["ModelParseError", "ParseDiagnostic", "parse_model", "print_model"]


@dataclass(frozen=True)
class ParseDiagnostic:
    line: int  # 1-based
    col: int  # 1-based
    message: str

    def __str__(self) -> str:
        return f"{self.line}:{self.col}: {self.message}"


class ModelParseError(TabulaError):
    def __init__(self, diagnostics: list[ParseDiagnostic]) -> None:
        super().__init__("; ".join(str(d) for d in diagnostics))
        self.diagnostics = diagnostics


def _err(line: int, col: int, message: str) -> ModelParseError:
    return ModelParseError([ParseDiagnostic(line, col, message)])


@dataclass(frozen=True)
class _Tok:
    kind: str  # IDENT NUMBER STRING PUNCT EOF
    text: str
    line: int
    col: int


_PUNCT = ("..", "&&", ">=", "<=", "==", "!=", ">", "<", "{", "}", "(", ")", ",", ":", "=")


class _Scanner:
    def __init__(self, src: str) -> None:
        self.src = src
        self.pos = 0
        self.line = 1
        self.col = 1

    def _advance(self, n: int = 1) -> None:
        for _ in range(n):
            if self.pos < len(self.src) and self.src[self.pos] == "\n":
                self.line += 1
                self.col = 1
            else:
                self.col += 1
            self.pos += 1

    def _skip_ws(self) -> None:
        while self.pos < len(self.src):
            ch = self.src[self.pos]
            if ch in " \t\r\n":
                self._advance()
            elif ch == "#":
                while self.pos < len(self.src) and self.src[self.pos] != "\n":
                    self._advance()
            else:
                return

    def next(self) -> _Tok:
        self._skip_ws()
        line, col = self.line, self.col
        if self.pos >= len(self.src):
            return _Tok("EOF", "", line, col)
        ch = self.src[self.pos]
        if ch == '"':
            return self._string(line, col)
        if ch.isdigit() or (
            ch == "-" and self.pos + 1 < len(self.src) and self.src[self.pos + 1].isdigit()
        ):
            return self._number(line, col)
        if ch.isalpha() or ch == "_":
            start = self.pos
            while self.pos < len(self.src) and (
                self.src[self.pos].isalnum() or self.src[self.pos] == "_"
            ):
                self._advance()
            return _Tok("IDENT", self.src[start : self.pos], line, col)
        for p in _PUNCT:
            if self.src.startswith(p, self.pos):
                self._advance(len(p))
                return _Tok("PUNCT", p, line, col)
        raise _err(line, col, f"unexpected character {ch!r}")

    def _number(self, line: int, col: int) -> _Tok:
        start = self.pos
        if self.src[self.pos] == "-":
            self._advance()
        while self.pos < len(self.src) and self.src[self.pos].isdigit():
            self._advance()
        if (
            self.pos + 1 < len(self.src)
            and self.src[self.pos] == "."
            and self.src[self.pos + 1].isdigit()
        ):
            self._advance()
            while self.pos < len(self.src) and self.src[self.pos].isdigit():
                self._advance()
        return _Tok("NUMBER", self.src[start : self.pos], line, col)

    def _string(self, line: int, col: int) -> _Tok:
        self._advance()  # opening quote
        out: list[str] = []
        while True:
            if self.pos >= len(self.src) or self.src[self.pos] == "\n":
                raise _err(line, col, "unterminated string")
            ch = self.src[self.pos]
            if ch == '"':
                self._advance()
                return _Tok("STRING", "".join(out), line, col)
            if ch == "\\":
                if self.pos + 1 >= len(self.src) or self.src[self.pos + 1] not in '"\\':
                    raise _err(self.line, self.col, "bad escape; only \\\" and \\\\ exist")
                out.append(self.src[self.pos + 1])
                self._advance(2)
                continue
            if ord(ch) < 0x20 or ord(ch) == 0x7F:
                raise _err(self.line, self.col, "control character in string")
            out.append(ch)
            self._advance()

    def rest_of_line(self) -> tuple[str, int, int]:
        """Raw text to end of line, minus any trailing comment; for formulas."""
        while self.pos < len(self.src) and self.src[self.pos] in " \t":
            self._advance()
        line, col = self.line, self.col
        start = self.pos
        in_string = False
        while self.pos < len(self.src) and self.src[self.pos] != "\n":
            ch = self.src[self.pos]
            if in_string and ch == "\\" and self.pos + 1 < len(self.src):
                if self.src[self.pos + 1] != "\n":
                    self._advance(2)
                    continue
            if ch == '"':
                in_string = not in_string
            elif ch == "#" and not in_string:
                break
            self._advance()
        return self.src[start : self.pos].rstrip(), line, col


class _Parser:
    def __init__(self, src: str) -> None:
        self.sc = _Scanner(src)
        self.tok = self.sc.next()

    def _advance(self) -> None:
        self.tok = self.sc.next()

    def expect(self, kind: str, text: str | None = None) -> _Tok:
        t = self.tok
        if t.kind != kind or (text is not None and t.text != text):
            want = text if text is not None else kind.lower()
            got = t.text if t.text else "end of input"
            raise _err(t.line, t.col, f"expected {want}, got {got!r}")
        self._advance()
        return t

    def int_lit(self, what: str) -> int:
        t = self.tok
        if t.kind != "NUMBER" or not t.text.isdigit():
            raise _err(t.line, t.col, f"expected {what}, got {t.text or 'end of input'!r}")
        self._advance()
        return int(t.text)

    def point(self) -> tuple[Point, _Tok]:
        opening = self.expect("PUNCT", "(")
        col = self.int_lit("a column number")
        self.expect("PUNCT", ",")
        row = self.int_lit("a row number")
        self.expect("PUNCT", ")")
        return Point(col, row), opening

    def model(self) -> TabulaModel:
        self.expect("IDENT", "tabula")
        name_tok = self.expect("STRING")
        self.expect("PUNCT", "{")
        self.expect("IDENT", "grid")
        width = self.int_lit("the grid width")
        self.expect("IDENT", "x")
        height = self.int_lit("the grid height")
        if width < 1 or height < 1:
            raise _err(name_tok.line, name_tok.col, "grid must be at least 1 x 1")

        classes: list[ClassDef] = []
        while self.tok.kind == "IDENT" and self.tok.text == "class":
            classes.append(self.classdecl(width, height, classes))

        self.expect("IDENT", "cells")
        self.expect("PUNCT", "{")
        cells: dict[Point, TCell] = {}
        positions: dict[Point, tuple[int, int]] = {}
        while self.tok.kind == "PUNCT" and self.tok.text == "(":
            p, opening = self.point()
            if p.col >= width or p.row >= height:
                raise _err(opening.line, opening.col, f"cell {p} outside {width}x{height} grid")
            if p in positions:
                raise _err(opening.line, opening.col, f"cell {p} declared twice")
            self.expect("PUNCT", ":")
            cells[p] = self.cellbody()
            positions[p] = (opening.line, opening.col)
        self.expect("PUNCT", "}")
        self.expect("PUNCT", "}")
        self.expect("EOF")

        model = TabulaModel(name_tok.text, width, height, tuple(classes), cells)
        if not validate_layout(model):
            semantic = validate_semantics(model)
            if semantic:
                diags = []
                for p, message in semantic:
                    line, col = positions.get(p, (1, 1))
                    diags.append(ParseDiagnostic(line, col, message))
                raise ModelParseError(diags)
        return model

    def classdecl(self, width: int, height: int, seen: list[ClassDef]) -> ClassDef:
        self.expect("IDENT", "class")
        name_tok = self.expect("IDENT")
        if any(c.name == name_tok.text for c in seen):
            raise _err(name_tok.line, name_tok.col, f"duplicate class {name_tok.text}")
        self.expect("IDENT", "range")
        tl, opening = self.point()
        self.expect("PUNCT", "..")
        br, _ = self.point()
        if br.col < tl.col or br.row < tl.row:
            raise _err(opening.line, opening.col, f"inverted range {tl}..{br}")
        if br.col >= width or br.row >= height:
            raise _err(
                opening.line, opening.col, f"range {tl}..{br} outside {width}x{height} grid"
            )
        self.expect("IDENT", "expand")
        exp_tok = self.expect("IDENT")
        try:
            expansion = Expansion(exp_tok.text)
        except ValueError:
            raise _err(
                exp_tok.line, exp_tok.col, "expected none, down, right or both"
            ) from None
        return ClassDef(name_tok.text, RangeRect(tl, br), expansion)

    def cellbody(self) -> TCell:
        kind_tok = self.expect("IDENT")
        if kind_tok.text == "label":
            return Label(self.expect("STRING").text)
        if kind_tok.text == "input":
            name = self.expect("IDENT").text
            self.expect("PUNCT", "=")
            lit_tok = self.tok
            if lit_tok.kind == "NUMBER":
                self._advance()
                default = NumberVal(lit_tok.text)
            elif lit_tok.kind == "STRING":
                self._advance()
                default = TextVal(lit_tok.text)
            else:
                raise _err(
                    lit_tok.line, lit_tok.col, f"expected a number or string, got {lit_tok.text!r}"
                )
            constraint: Constraint | None = None
            if self.tok.kind == "PUNCT" and self.tok.text == ":":
                self._advance()
                constraint = self.constraint()
            return Input(name, default, constraint)
        if kind_tok.text == "formula":
            name = self.expect("IDENT").text
            t = self.tok
            if t.kind != "PUNCT" or t.text != "=":
                raise _err(t.line, t.col, f"expected =, got {t.text or 'end of input'!r}")
            # the scanner already sits just past the = lookahead token, so the
            # raw remainder of this line is exactly the formula body
            text, line, col = self.sc.rest_of_line()
            self._advance()
            if not text:
                raise _err(line, col, "empty formula")
            try:
                return FormulaCell(name, parse_formula(text))
            except FormulaError as exc:
                raise _err(line, col, f"bad formula: {exc}") from None
        raise _err(kind_tok.line, kind_tok.col, "expected label, input or formula")

    def constraint(self) -> Constraint:
        terms = []
        while True:
            op_tok = self.tok
            if op_tok.kind != "PUNCT" or op_tok.text not in (">=", "<=", "==", "!=", ">", "<"):
                raise _err(
                    op_tok.line, op_tok.col, f"expected a comparison, got {op_tok.text!r}"
                )
            self._advance()
            num_tok = self.tok
            if num_tok.kind != "NUMBER":
                raise _err(num_tok.line, num_tok.col, f"expected a number, got {num_tok.text!r}")
            self._advance()
            terms.append(f"{op_tok.text}{num_tok.text}")
            if self.tok.kind == "PUNCT" and self.tok.text == "&&":
                self._advance()
                continue
            return parse_constraint(" && ".join(terms))


def parse_model(src: str) -> TabulaModel:
    """Parse model text. Raises ModelParseError with positions on bad syntax
    or (for layout-valid models) semantic errors. Layout violations are not
    parse errors; run validate_layout on the result."""
    try:
        return _Parser(src).model()
    except TabulaError as exc:
        if isinstance(exc, ModelParseError):
            raise
        raise ModelParseError([ParseDiagnostic(1, 1, str(exc))]) from exc


def _quote(text: str) -> str:
    return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'


def print_model(model: TabulaModel) -> str:
    """Canonical text form; parse_model(print_model(m)) == m."""
    out = [f"tabula {_quote(model.name)} {{"]
    out.append(f"  grid {model.width} x {model.height}")
    for c in model.classes:
        out.append(
            f"  class {c.name} range {c.range.top_left} .. {c.range.bottom_right}"
            f" expand {c.expansion.value}"
        )
    out.append("  cells {")
    for p in sorted(model.cells, key=lambda q: (q.row, q.col)):
        cell = model.cells[p]
        if isinstance(cell, Label):
            body = f"label {_quote(cell.text)}"
        elif isinstance(cell, Input):
            if isinstance(cell.default, NumberVal):
                lit = str(cell.default)
            else:
                lit = _quote(cell.default.text)
            body = f"input {cell.name} = {lit}"
            if cell.constraint is not None:
                body += f" : {render_constraint(cell.constraint)}"
        else:
            body = f"formula {cell.name} = {render_expr(cell.expr)}"
        out.append(f"    {p}: {body}")
    out.append("  }")
    out.append("}")
    return "\n".join(out) + "\n"

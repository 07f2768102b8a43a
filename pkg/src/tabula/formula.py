"""Formula language and A1 machinery.

Two expression families share one AST shape:

* model formulas reference attributes by name (``SUM(stock)``,
  ``Income.total - total``) with Ref leaves;
* instance formulas are plain spreadsheet expressions (``SUM(B4:B6,B9:B10)``)
  with CellRef / CellRange leaves.

Both use the same Apply / BinOp / literal nodes, the same precedence, and the
same renderer, so translation is a leaf substitution plus regrouping.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, DivisionByZero, InvalidOperation
from typing import Callable, Iterator

from .values import (
    ErrorVal,
    NumberVal,
    TabulaError,
    TextVal,
    Value,
    format_decimal,
    to_decimal,
)

__all__ = [
    "AGGREGATES",
    "Apply",
    "BinOp",
    "CellAddr",
    "CellRange",
    "CellRef",
    "Constraint",
    "CycleError",
    "EvalError",
    "Expr",
    "FormulaError",
    "NumberLit",
    "Ref",
    "TextLit",
    "check_constraint",
    "col_letters",
    "eval_a1",
    "letters_col",
    "normalize_a1_text",
    "parse_a1_expr",
    "parse_addr",
    "parse_constraint",
    "parse_formula",
    "render_constraint",
    "render_expr",
    "walk",
]

AGGREGATES = ("SUM", "AVERAGE", "COUNT", "MIN", "MAX")

RELOPS = (">=", "<=", "==", "!=", ">", "<")


class FormulaError(TabulaError):
    """Syntax error in a formula, constraint, or A1 expression."""

    def __init__(self, message: str, pos: int = -1) -> None:
        super().__init__(message)
        self.pos = pos


class EvalError(TabulaError):
    """A formula cannot be evaluated (bad operand, empty AVERAGE, /0)."""

    def __init__(self, code: str, message: str = "") -> None:
        super().__init__(message or code)
        self.code = code


class CycleError(TabulaError):
    """Formula dependencies form a cycle."""


# ---- A1 addresses ----


def col_letters(col: int) -> str:
    """0 -> A, 25 -> Z, 26 -> AA (bijective base 26)."""
    if col < 0:
        raise ValueError(f"negative column: {col}")
    out = ""
    n = col + 1
    while n > 0:
        n, rem = divmod(n - 1, 26)
        out = chr(ord("A") + rem) + out
    return out


def letters_col(letters: str) -> int:
    """A -> 0, Z -> 25, AA -> 26."""
    n = 0
    for ch in letters.upper():
        if not "A" <= ch <= "Z":
            raise ValueError(f"bad column letters: {letters!r}")
        n = n * 26 + (ord(ch) - ord("A") + 1)
    if n == 0:
        raise ValueError("empty column letters")
    return n - 1


@dataclass(frozen=True, order=True)
class CellAddr:
    """Zero-based (col, row); renders one-based, e.g. (1, 3) -> B4."""

    col: int
    row: int

    def __str__(self) -> str:
        return f"{col_letters(self.col)}{self.row + 1}"


def parse_addr(text: str) -> CellAddr:
    s = text.strip().upper()
    i = 0
    while i < len(s) and s[i].isalpha():
        i += 1
    if i == 0 or i == len(s) or not s[i:].isdigit():
        raise ValueError(f"bad cell address: {text!r}")
    row = int(s[i:])
    if row < 1:
        raise ValueError(f"bad cell address: {text!r}")
    return CellAddr(letters_col(s[:i]), row - 1)


@dataclass(frozen=True, order=True)
class CellRange:
    """Inclusive rectangular range, e.g. B4:B6.

    Normalized so start is the top-left corner.
    """

    start: CellAddr
    end: CellAddr

    def __post_init__(self) -> None:
        if self.start.col > self.end.col or self.start.row > self.end.row:
            raise ValueError(f"inverted range: {self.start}:{self.end}")

    def addrs(self) -> Iterator[CellAddr]:
        for row in range(self.start.row, self.end.row + 1):
            for col in range(self.start.col, self.end.col + 1):
                yield CellAddr(col, row)

    def __str__(self) -> str:
        return f"{self.start}:{self.end}"


# ---- AST ----


@dataclass(frozen=True)
class NumberLit:
    num: Decimal

    def __init__(self, num: int | float | str | Decimal) -> None:
        object.__setattr__(self, "num", to_decimal(num))


@dataclass(frozen=True)
class TextLit:
    text: str


@dataclass(frozen=True)
class Ref:
    """Attribute reference, optionally qualified by a class name."""

    name: str
    qualifier: str | None = None

    def __str__(self) -> str:
        return self.name if self.qualifier is None else f"{self.qualifier}.{self.name}"


@dataclass(frozen=True)
class CellRef:
    addr: CellAddr


@dataclass(frozen=True)
class Apply:
    fn: str  # canonical upper-case aggregate name
    args: tuple["Expr", ...]


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * /
    left: "Expr"
    right: "Expr"


Expr = NumberLit | TextLit | Ref | CellRef | CellRange | Apply | BinOp


def walk(expr: Expr) -> Iterator[Expr]:
    """Yield expr and every descendant, pre-order."""
    yield expr
    if isinstance(expr, Apply):
        for a in expr.args:
            yield from walk(a)
    elif isinstance(expr, BinOp):
        yield from walk(expr.left)
        yield from walk(expr.right)


# ---- Lexer ----

_PUNCT = ("&&", ">=", "<=", "==", "!=", ">", "<", "+", "-", "*", "/", "(", ")", ",", ".", ":")


@dataclass(frozen=True)
class _Tok:
    kind: str  # NUMBER STRING IDENT PUNCT END
    text: str
    pos: int


def _lex(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch in " \t":
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and src[i + 1].isdigit()):
            j = i
            while j < n and src[j].isdigit():
                j += 1
            if j < n and src[j] == "." and j + 1 < n and src[j + 1].isdigit():
                j += 1
                while j < n and src[j].isdigit():
                    j += 1
            toks.append(_Tok("NUMBER", src[i:j], i))
            i = j
            continue
        if ch == '"':
            j = i + 1
            out = []
            while j < n and src[j] != '"':
                if src[j] == "\\":
                    if j + 1 >= n or src[j + 1] not in '"\\':
                        raise FormulaError(f"bad escape at {j}", j)
                    out.append(src[j + 1])
                    j += 2
                else:
                    out.append(src[j])
                    j += 1
            if j >= n:
                raise FormulaError("unterminated string", i)
            toks.append(_Tok("STRING", "".join(out), i))
            i = j + 1
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_"):
                j += 1
            toks.append(_Tok("IDENT", src[i:j], i))
            i = j
            continue
        for p in _PUNCT:
            if src.startswith(p, i):
                toks.append(_Tok("PUNCT", p, i))
                i += len(p)
                break
        else:
            raise FormulaError(f"unexpected character {ch!r} at {i}", i)
    toks.append(_Tok("END", "", n))
    return toks


class _Parser:
    def __init__(self, src: str) -> None:
        self.toks = _lex(src)
        self.i = 0

    @property
    def cur(self) -> _Tok:
        return self.toks[self.i]

    def eat(self, kind: str, text: str | None = None) -> _Tok:
        t = self.cur
        if t.kind != kind or (text is not None and t.text != text):
            want = text or kind
            raise FormulaError(f"expected {want}, got {t.text or 'end of input'!r}", t.pos)
        self.i += 1
        return t

    def at_punct(self, text: str) -> bool:
        return self.cur.kind == "PUNCT" and self.cur.text == text

    # expr := term (('+'|'-') term)*
    def expr(self, a1: bool) -> Expr:
        left = self.term(a1)
        while self.at_punct("+") or self.at_punct("-"):
            op = self.eat("PUNCT").text
            left = BinOp(op, left, self.term(a1))
        return left

    def term(self, a1: bool) -> Expr:
        left = self.factor(a1)
        while self.at_punct("*") or self.at_punct("/"):
            op = self.eat("PUNCT").text
            left = BinOp(op, left, self.factor(a1))
        return left

    def factor(self, a1: bool) -> Expr:
        if self.at_punct("-"):
            self.eat("PUNCT")
            inner = self.factor(a1)
            if isinstance(inner, NumberLit):
                return NumberLit(-inner.num)
            return BinOp("-", NumberLit(0), inner)
        return self.primary(a1)

    def primary(self, a1: bool) -> Expr:
        t = self.cur
        if t.kind == "NUMBER":
            self.eat("NUMBER")
            return NumberLit(t.text)
        if t.kind == "STRING":
            self.eat("STRING")
            return TextLit(t.text)
        if self.at_punct("("):
            self.eat("PUNCT")
            inner = self.expr(a1)
            self.eat("PUNCT", ")")
            return inner
        if t.kind == "IDENT":
            self.eat("IDENT")
            upper = t.text.upper()
            if upper in AGGREGATES and self.at_punct("("):
                return self.apply(upper, a1)
            if a1:
                return self.a1_leaf(t)
            if self.at_punct("."):
                self.eat("PUNCT")
                attr = self.eat("IDENT")
                return Ref(attr.text, qualifier=t.text)
            return Ref(t.text)
        raise FormulaError(f"expected expression, got {t.text or 'end of input'!r}", t.pos)

    def apply(self, fn: str, a1: bool) -> Apply:
        self.eat("PUNCT", "(")
        args: list[Expr] = []
        if not self.at_punct(")"):
            args.append(self.expr(a1))
            while self.at_punct(","):
                self.eat("PUNCT")
                args.append(self.expr(a1))
        self.eat("PUNCT", ")")
        if not a1 and not args:
            raise FormulaError(f"{fn} needs at least one argument")
        return Apply(fn, tuple(args))

    def a1_leaf(self, t: _Tok) -> Expr:
        try:
            start = parse_addr(t.text)
        except ValueError:
            raise FormulaError(f"expected cell address, got {t.text!r}", t.pos) from None
        if self.at_punct(":"):
            self.eat("PUNCT")
            t2 = self.eat("IDENT")
            try:
                end = parse_addr(t2.text)
            except ValueError:
                raise FormulaError(f"expected cell address, got {t2.text!r}", t2.pos) from None
            try:
                return CellRange(start, end)
            except ValueError as exc:
                raise FormulaError(str(exc), t.pos) from None
        return CellRef(start)


def parse_formula(src: str) -> Expr:
    """Parse an attribute-name formula into an AST."""
    p = _Parser(src)
    e = p.expr(a1=False)
    p.eat("END")
    return e


def parse_a1_expr(src: str) -> Expr:
    """Parse a spreadsheet expression with A1 cell references."""
    p = _Parser(src)
    e = p.expr(a1=True)
    p.eat("END")
    return e


# ---- Rendering ----

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2}


def render_expr(expr: Expr) -> str:
    """Canonical text; parse(render(e)) reproduces e node for node."""
    return _render(expr, 0)


def _render(e: Expr, min_prec: int) -> str:
    if isinstance(e, NumberLit):
        return format_decimal(e.num)
    if isinstance(e, TextLit):
        body = e.text.replace("\\", "\\\\").replace('"', '\\"')
        return f'"{body}"'
    if isinstance(e, Ref):
        return str(e)
    if isinstance(e, CellRef):
        return str(e.addr)
    if isinstance(e, CellRange):
        return str(e)
    if isinstance(e, Apply):
        return f"{e.fn}({','.join(_render(a, 0) for a in e.args)})"
    if isinstance(e, BinOp):
        prec = _PREC[e.op]
        # right operand at equal precedence keeps explicit parens so the
        # left-associative reparse rebuilds the identical tree
        text = f"{_render(e.left, prec)}{e.op}{_render(e.right, prec + 1)}"
        if prec < min_prec:
            return f"({text})"
        return text
    raise TypeError(f"not an expression: {e!r}")


def normalize_a1_text(src: str) -> str:
    """Parse and re-render an A1 expression (canonical spacing, case)."""
    return render_expr(parse_a1_expr(src))


# ---- Constraints ----


@dataclass(frozen=True)
class Constraint:
    """Conjunction of numeric bounds, e.g. >=0 && <=100."""

    terms: tuple[tuple[str, Decimal], ...]

    def __str__(self) -> str:
        return render_constraint(self)


def parse_constraint(src: str) -> Constraint:
    toks = _lex(src)
    terms: list[tuple[str, Decimal]] = []
    i = 0
    while True:
        t = toks[i]
        if t.kind != "PUNCT" or t.text not in RELOPS:
            raise FormulaError(f"expected comparison, got {t.text or 'end of input'!r}", t.pos)
        op = t.text
        i += 1
        sign = 1
        if toks[i].kind == "PUNCT" and toks[i].text == "-":
            sign = -1
            i += 1
        if toks[i].kind != "NUMBER":
            raise FormulaError(f"expected number, got {toks[i].text!r}", toks[i].pos)
        terms.append((op, sign * Decimal(toks[i].text)))
        i += 1
        if toks[i].kind == "PUNCT" and toks[i].text == "&&":
            i += 1
            continue
        break
    if toks[i].kind != "END":
        raise FormulaError(f"unexpected {toks[i].text!r}", toks[i].pos)
    return Constraint(tuple(terms))


def render_constraint(c: Constraint) -> str:
    return " && ".join(f"{op}{format_decimal(num)}" for op, num in c.terms)


_CMP: dict[str, Callable[[Decimal, Decimal], bool]] = {
    ">=": lambda a, b: a >= b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    "<": lambda a, b: a < b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def check_constraint(c: Constraint, v: Value) -> bool:
    """Numbers must pass every term; text never satisfies a constraint."""
    if not isinstance(v, NumberVal):
        return False
    return all(_CMP[op](v.num, bound) for op, bound in c.terms)


# ---- Evaluation of A1 expressions ----

GetCell = Callable[[CellAddr], "Value | ErrorVal | None"]


def eval_a1(expr: Expr, get_cell: GetCell) -> Value:
    """Evaluate an A1 expression against a cell lookup.

    get_cell returns the cell's current value, an ErrorVal if that cell's own
    formula failed, or None for a blank cell. Raises EvalError; the caller
    decides whether to store a marker or propagate.
    """
    v = _eval(expr, get_cell)
    if v is None:
        return TextVal("")
    return v


def _eval(expr: Expr, get_cell: GetCell) -> Value | None:
    if isinstance(expr, NumberLit):
        return NumberVal(expr.num)
    if isinstance(expr, TextLit):
        return TextVal(expr.text)
    if isinstance(expr, CellRef):
        got = get_cell(expr.addr)
        if isinstance(got, ErrorVal):
            raise EvalError(got.code, f"{expr.addr} has error {got.code}")
        return got
    if isinstance(expr, CellRange):
        raise EvalError("#VALUE!", "range outside an aggregate")
    if isinstance(expr, Apply):
        return _eval_apply(expr, get_cell)
    if isinstance(expr, BinOp):
        left = _as_number(_eval(expr.left, get_cell))
        right = _as_number(_eval(expr.right, get_cell))
        if expr.op == "+":
            return NumberVal(left + right)
        if expr.op == "-":
            return NumberVal(left - right)
        if expr.op == "*":
            return NumberVal(left * right)
        if expr.op == "/":
            try:
                return NumberVal(left / right)
            except (DivisionByZero, InvalidOperation):
                raise EvalError("#DIV/0!", "division by zero") from None
        raise EvalError("#VALUE!", f"unknown operator {expr.op}")
    if isinstance(expr, Ref):
        raise EvalError("#NAME?", f"unresolved name {expr}")
    raise TypeError(f"not an expression: {expr!r}")


def _as_number(v: Value | None) -> Decimal:
    # blank cells act as 0 in arithmetic, text does not
    if v is None:
        return Decimal(0)
    if isinstance(v, NumberVal):
        return v.num
    if isinstance(v, TextVal):
        if v.text == "":
            return Decimal(0)
        raise EvalError("#VALUE!", f"text in arithmetic: {v.text!r}")
    raise EvalError("#VALUE!", f"bad operand {v!r}")


def _eval_apply(expr: Apply, get_cell: GetCell) -> Value:
    nums: list[Decimal] = []
    for arg in expr.args:
        if isinstance(arg, CellRange):
            for addr in arg.addrs():
                got = get_cell(addr)
                if isinstance(got, ErrorVal):
                    raise EvalError(got.code, f"{addr} has error {got.code}")
                if isinstance(got, NumberVal):
                    nums.append(got.num)
        elif isinstance(arg, CellRef):
            got = get_cell(arg.addr)
            if isinstance(got, ErrorVal):
                raise EvalError(got.code, f"{arg.addr} has error {got.code}")
            if isinstance(got, NumberVal):
                nums.append(got.num)
        else:
            v = _eval(arg, get_cell)
            if isinstance(v, NumberVal):
                nums.append(v.num)
    fn = expr.fn
    if fn == "SUM":
        return NumberVal(sum(nums, Decimal(0)))
    if fn == "COUNT":
        return NumberVal(len(nums))
    if not nums:
        if fn == "AVERAGE":
            raise EvalError("#DIV/0!", "AVERAGE of no numeric cells")
        raise EvalError("#VALUE!", f"{fn} of no numeric cells")
    if fn == "AVERAGE":
        return NumberVal(sum(nums, Decimal(0)) / Decimal(len(nums)))
    if fn == "MIN":
        return NumberVal(min(nums))
    if fn == "MAX":
        return NumberVal(max(nums))
    raise EvalError("#NAME?", f"unknown function {fn}")

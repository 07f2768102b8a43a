"""Instances: concrete spreadsheets generated from a model.

An instance is a model plus an object tree: one object count per repeating
class per enclosing object. Expanding the tree along both axes yields the
grid; every grid cell traces back to a model cell and a context (one object
index per repetition axis). Values live at input addresses, labels and
translated formulas fill the rest, and recalc maintains computed results.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field, replace
from decimal import Decimal
from typing import Iterable

from .formula import (
    CellAddr,
    CellRange,
    CellRef,
    CycleError,
    EvalError,
    check_constraint,
    eval_a1,
    parse_a1_expr,
    parse_addr,
    render_expr,
    walk,
)
from .layout import down_classes, right_classes, validate_layout
from .model import Expansion, Input, Label, Point, TabulaModel, cell_at
from .refs import TranslateError, translate
from .text import parse_model, print_model
from .values import (
    ErrorVal,
    NumberVal,
    TabulaError,
    TextVal,
    Value,
    infer_type,
)

__all__ = [
    "Block",
    "Diagnostic",
    "ExpansionError",
    "InstanceDoc",
    "LayoutIndex",
    "ObjectTree",
    "StructureError",
    "add_object",
    "check",
    "create",
    "default_tree",
    "evaluate",
    "export_csv",
    "instance_to_json",
    "load_instance",
    "recalc",
    "remove_object",
    "save_instance",
    "set_value",
    "tree_from_json",
    "tree_to_json",
]


class ExpansionError(TabulaError):
    """add/remove object on a class that does not repeat that way."""


class StructureError(TabulaError):
    """An instance file or object tree does not fit its model."""


# ---- object trees ----


@dataclass(frozen=True)
class ObjectTree:
    """Object counts per repeating class.

    counts[cls][path] is the number of cls objects under the enclosing object
    identified by path: the indices of cls's enclosing repeating classes on
    the same axis, outermost first. Root classes use the empty path.
    """

    counts: dict[str, dict[tuple[int, ...], int]]

    def count(self, cls: str, path: tuple[int, ...]) -> int:
        return self.counts.get(cls, {}).get(path, 0)


def _intervals(model: TabulaModel, axis: str) -> dict[str, tuple[int, int]]:
    if axis == "down":
        return {c.name: (c.range.top, c.range.bottom) for c in down_classes(model)}
    return {c.name: (c.range.left, c.range.right) for c in right_classes(model)}


def _forest(
    intervals: dict[str, tuple[int, int]]
) -> tuple[dict[str, str | None], dict[str, list[str]], list[str]]:
    """Parent, children and roots of the interval nesting forest."""
    parent: dict[str, str | None] = {}
    for n, iv in intervals.items():
        sups = [
            m
            for m, jv in intervals.items()
            if m != n and jv != iv and jv[0] <= iv[0] and iv[1] <= jv[1]
        ]
        parent[n] = min(sups, key=lambda m: intervals[m][1] - intervals[m][0]) if sups else None
    children = {
        n: sorted((m for m in intervals if parent[m] == n), key=lambda m: intervals[m][0])
        for n in intervals
    }
    roots = sorted((n for n in intervals if parent[n] is None), key=lambda n: intervals[n][0])
    return parent, children, roots


def _axis_ancestors(model: TabulaModel, cls: str) -> list[str]:
    """Enclosing repeating classes of cls on its own axis, outermost first."""
    c = model.class_named(cls)
    assert c is not None
    axis = "down" if c.expansion is Expansion.DOWN else "right"
    intervals = _intervals(model, axis)
    parent, _, _ = _forest(intervals)
    chain = []
    cur = parent[cls]
    while cur is not None:
        chain.append(cur)
        cur = parent[cur]
    return list(reversed(chain))


def default_tree(model: TabulaModel) -> ObjectTree:
    """One object per repeating class per enclosing object."""
    counts: dict[str, dict[tuple[int, ...], int]] = {}
    for axis in ("down", "right"):
        intervals = _intervals(model, axis)
        _, children, roots = _forest(intervals)

        def seed(cls: str, path: tuple[int, ...]) -> None:
            counts.setdefault(cls, {})[path] = 1
            for kid in children[cls]:
                seed(kid, path + (0,))

        for root in roots:
            seed(root, ())
    return ObjectTree(counts)


def _expand_axis(
    length: int,
    intervals: dict[str, tuple[int, int]],
    tree: ObjectTree,
) -> list[tuple[int, dict[str, int]]]:
    """Unfold one axis into (model position, context) entries in grid order."""
    _, children, roots = _forest(intervals)
    out: list[tuple[int, dict[str, int]]] = []

    def seg(
        lo: int, hi: int, level: list[str], ctx: dict[str, int], path: tuple[int, ...]
    ) -> None:
        by_top = {intervals[n][0]: n for n in level}
        pos = lo
        while pos <= hi:
            n = by_top.get(pos)
            if n is None:
                out.append((pos, dict(ctx)))
                pos += 1
            else:
                n_lo, n_hi = intervals[n]
                for i in range(tree.count(n, path)):
                    seg(n_lo, n_hi, children[n], {**ctx, n: i}, path + (i,))
                pos = n_hi + 1

    seg(0, length - 1, roots, {}, ())
    return out


@dataclass(frozen=True)
class Block:
    """One object's span along an axis, for grouping and insertion handles."""

    cls: str
    axis: str  # "row" or "col"
    ctx: dict[str, int]  # the object's own index plus enclosing ones
    start: int
    end: int  # inclusive instance row/col index


class LayoutIndex:
    """Bidirectional mapping between instance addresses and model cells."""

    def __init__(self, model: TabulaModel, tree: ObjectTree) -> None:
        self.model = model
        self.tree = tree
        self._down = _intervals(model, "down")
        self._right = _intervals(model, "right")
        self.rows = _expand_axis(model.height, self._down, tree)
        self.cols = _expand_axis(model.width, self._right, tree)
        self._row_ix = {
            (mr, frozenset(ctx.items())): i for i, (mr, ctx) in enumerate(self.rows)
        }
        self._col_ix = {
            (mc, frozenset(ctx.items())): i for i, (mc, ctx) in enumerate(self.cols)
        }

    @property
    def height(self) -> int:
        return len(self.rows)

    @property
    def width(self) -> int:
        return len(self.cols)

    def addr_of(self, p: Point, ctx: dict[str, int]) -> CellAddr:
        p = Point(*p)
        down_axes = [n for n, (lo, hi) in self._down.items() if lo <= p.row <= hi]
        right_axes = [n for n, (lo, hi) in self._right.items() if lo <= p.col <= hi]
        try:
            rkey = (p.row, frozenset((k, ctx[k]) for k in down_axes))
            ckey = (p.col, frozenset((k, ctx[k]) for k in right_axes))
            return CellAddr(self._col_ix[ckey], self._row_ix[rkey])
        except KeyError:
            raise TranslateError(f"no cell for {p} in context {ctx}") from None

    def model_cell_at(self, addr: CellAddr) -> tuple[Point, dict[str, int]]:
        if not (0 <= addr.row < self.height and 0 <= addr.col < self.width):
            raise TranslateError(f"{addr} is outside the instance grid")
        mr, rctx = self.rows[addr.row]
        mc, cctx = self.cols[addr.col]
        return Point(mc, mr), {**rctx, **cctx}

    def contexts_for(
        self, axes: Iterable[str], fixed: dict[str, int]
    ) -> list[dict[str, int]]:
        """All consistent contexts over the given axes agreeing with fixed."""
        wanted = set(axes)
        dn = sorted(wanted & set(self._down))
        rt = sorted(wanted & set(self._right))

        def collect(
            entries: list[tuple[int, dict[str, int]]], keys: list[str]
        ) -> list[dict[str, int]]:
            if not keys:
                return [{}]
            res: list[dict[str, int]] = []
            seen: set[tuple] = set()
            for _, ctx in entries:
                if not all(k in ctx for k in keys):
                    continue
                if any(ctx[k] != v for k, v in fixed.items() if k in ctx):
                    continue
                key = tuple(ctx[k] for k in keys)
                if key not in seen:
                    seen.add(key)
                    res.append({k: ctx[k] for k in keys})
            return res

        return [
            {**d, **r}
            for d in collect(self.rows, dn)
            for r in collect(self.cols, rt)
        ]

    def blocks(self) -> list[Block]:
        """Contiguous spans of each repeating object, both axes."""
        out: list[Block] = []
        for axis, entries, intervals in (
            ("row", self.rows, self._down),
            ("col", self.cols, self._right),
        ):
            parent, _, _ = _forest(intervals)
            chain_keys: dict[str, list[str]] = {}
            for cls in intervals:
                chain = [cls]
                cur = parent[cls]
                while cur is not None:
                    chain.append(cur)
                    cur = parent[cur]
                chain_keys[cls] = chain
            open_runs: dict[tuple, int] = {}
            prev: dict[tuple, int] = {}
            for i, (_, ctx) in enumerate(entries):
                for cls in intervals:
                    if cls not in ctx:
                        continue
                    # an object's identity is its own index plus its
                    # enclosing classes' indices, nothing below it
                    key = (cls, frozenset((k, ctx[k]) for k in chain_keys[cls]))
                    if key in open_runs and prev[key] != i - 1:
                        out.append(Block(cls, axis, dict(key[1]), open_runs[key], prev[key]))
                        open_runs[key] = i
                    elif key not in open_runs:
                        open_runs[key] = i
                    prev[key] = i
            for key, start in open_runs.items():
                out.append(Block(key[0], axis, dict(key[1]), start, prev[key]))
        out.sort(key=lambda b: (b.axis, b.start, b.end, b.cls))
        return out


# ---- instance documents ----


@dataclass(frozen=True)
class Diagnostic:
    kind: str  # LabelMismatch TypeError ConstraintViolation FormulaMismatch StructureError
    addr: CellAddr | None
    message: str

    def __str__(self) -> str:
        where = str(self.addr) if self.addr is not None else "-"
        return f"{self.kind} {where} {self.message}"


def _diag_sorted(diags: list[Diagnostic]) -> list[Diagnostic]:
    return sorted(
        diags,
        key=lambda d: (
            (d.addr.row, d.addr.col) if d.addr is not None else (-1, -1),
            d.kind,
            d.message,
        ),
    )


@dataclass(frozen=True)
class InstanceDoc:
    model: TabulaModel
    tree: ObjectTree
    values: dict[CellAddr, Value]
    labels: dict[CellAddr, str]
    formulas: dict[CellAddr, str]
    computed: dict[CellAddr, Value | ErrorVal] = field(default_factory=dict, compare=False)
    model_ref: str | None = field(default=None, compare=False)
    index: LayoutIndex = field(init=False, compare=False, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "index", LayoutIndex(self.model, self.tree))

    @property
    def width(self) -> int:
        return self.index.width

    @property
    def height(self) -> int:
        return self.index.height


def _materialize(
    model: TabulaModel, tree: ObjectTree, model_ref: str | None = None
) -> InstanceDoc:
    """Instance skeleton: default values, model labels, translated formulas."""
    index = LayoutIndex(model, tree)
    values: dict[CellAddr, Value] = {}
    labels: dict[CellAddr, str] = {}
    formulas: dict[CellAddr, str] = {}
    for ri, (mr, rctx) in enumerate(index.rows):
        for ci, (mc, cctx) in enumerate(index.cols):
            addr = CellAddr(ci, ri)
            cell = cell_at(model, Point(mc, mr))
            if isinstance(cell, Label):
                labels[addr] = cell.text
            elif isinstance(cell, Input):
                values[addr] = cell.default
            else:
                ctx = {**rctx, **cctx}
                a1 = translate(model, index, Point(mc, mr), ctx, cell.expr)
                formulas[addr] = render_expr(a1)
    return InstanceDoc(
        model=model,
        tree=tree,
        values=values,
        labels=labels,
        formulas=formulas,
        model_ref=model_ref,
    )


def create(model: TabulaModel, model_ref: str | None = None) -> InstanceDoc:
    """A fresh conforming instance with one object per repeating class."""
    violations = validate_layout(model)
    if violations:
        raise StructureError(f"model fails layout validation: {violations[0]}")
    return recalc(_materialize(model, default_tree(model), model_ref))


# ---- recalculation ----


def _label_value(text: str) -> Value | None:
    if text == "":
        return None
    try:
        return NumberVal(text)
    except ValueError:
        return TextVal(text)


def _cell_getter(doc: InstanceDoc, computed: dict[CellAddr, Value | ErrorVal]):
    def get(addr: CellAddr) -> Value | ErrorVal | None:
        if addr in doc.formulas:
            return computed.get(addr)
        if addr in doc.values:
            return doc.values[addr]
        if addr in doc.labels:
            return _label_value(doc.labels[addr])
        return None

    return get


def recalc(doc: InstanceDoc) -> InstanceDoc:
    """Recompute every formula cell in dependency order.

    Evaluation failures become error markers (#DIV/0!, #VALUE!) on their
    cells; a dependency cycle is a hard CycleError.
    """
    exprs = {addr: parse_a1_expr(text) for addr, text in doc.formulas.items()}
    deps: dict[CellAddr, set[CellAddr]] = {}
    for addr, expr in exprs.items():
        wants: set[CellAddr] = set()
        for node in walk(expr):
            if isinstance(node, CellRef) and node.addr in exprs:
                wants.add(node.addr)
            elif isinstance(node, CellRange):
                wants.update(a for a in node.addrs() if a in exprs)
        deps[addr] = wants
    order: list[CellAddr] = []
    state: dict[CellAddr, int] = {}

    def visit(a: CellAddr) -> None:
        state[a] = 1
        for b in sorted(deps[a]):
            if state.get(b, 0) == 1:
                raise CycleError(f"formula cycle involving {b}")
            if b not in state:
                visit(b)
        state[a] = 2
        order.append(a)

    for a in sorted(exprs):
        if a not in state:
            visit(a)
    computed: dict[CellAddr, Value | ErrorVal] = {}
    get = _cell_getter(doc, computed)
    for addr in order:
        try:
            computed[addr] = eval_a1(exprs[addr], get)
        except EvalError as exc:
            computed[addr] = ErrorVal(exc.code, str(exc))
    return replace(doc, computed=computed)


def evaluate(doc: InstanceDoc, addr: CellAddr) -> Value:
    """Current value of any cell; raises EvalError on an error marker."""
    got = _cell_getter(doc, doc.computed)(addr)
    if isinstance(got, ErrorVal):
        raise EvalError(got.code, got.message or got.code)
    if got is None:
        return TextVal("")
    return got


# ---- edits ----


def set_value(doc: InstanceDoc, addr: CellAddr, value: Value) -> tuple[InstanceDoc, list[Diagnostic]]:
    """Write an input cell. Violations leave the document untouched."""
    if addr not in doc.values:
        return doc, [Diagnostic("StructureError", addr, "not an input cell")]
    point, _ = doc.index.model_cell_at(addr)
    cell = cell_at(doc.model, point)
    assert isinstance(cell, Input)
    if infer_type(value) is not cell.value_type:
        return doc, [
            Diagnostic(
                "TypeError",
                addr,
                f"{cell.name} expects a {cell.value_type.value}",
            )
        ]
    if cell.constraint is not None:
        if not check_constraint(cell.constraint, value):
            return doc, [
                Diagnostic(
                    "ConstraintViolation",
                    addr,
                    f"{value} violates {cell.constraint}",
                )
            ]
    values = dict(doc.values)
    values[addr] = value
    return recalc(replace(doc, values=values)), []


def _shifted_ctx(
    ctx: dict[str, int],
    cls: str,
    ancestors: list[str],
    path: tuple[int, ...],
    at: int,
    delta: int,
) -> dict[str, int] | None:
    """Adjust an object context for an insertion/removal; None means the
    context belongs to a removed object."""
    if cls not in ctx:
        return ctx
    if any(ctx.get(a) != path[i] for i, a in enumerate(ancestors)):
        return ctx
    idx = ctx[cls]
    if delta == -1 and idx == at:
        return None
    if idx >= at + (1 if delta == -1 else 0):
        return {**ctx, cls: idx + delta}
    return ctx


def _axis_descendants(model: TabulaModel, cls: str) -> list[str]:
    c = model.class_named(cls)
    assert c is not None
    axis = "down" if c.expansion is Expansion.DOWN else "right"
    _, children, _ = _forest(_intervals(model, axis))
    out: list[str] = []

    def rec(n: str) -> None:
        for kid in children[n]:
            out.append(kid)
            rec(kid)

    rec(cls)
    return out


def _repeating(model: TabulaModel, cls_name: str):
    c = model.class_named(cls_name)
    if c is None:
        raise ExpansionError(f"unknown class {cls_name}")
    if c.expansion is Expansion.NONE:
        raise ExpansionError(f"{cls_name} does not repeat")
    if c.expansion is Expansion.BOTH:
        raise ExpansionError(
            f"{cls_name} objects are derived from its parents; add or remove there"
        )
    return c


def _object_path(
    model: TabulaModel, cls_name: str, parent_ctx: dict[str, int] | None
) -> tuple[list[str], tuple[int, ...]]:
    ancestors = _axis_ancestors(model, cls_name)
    ctx = dict(parent_ctx or {})
    extra = set(ctx) - set(ancestors)
    if extra:
        raise ExpansionError(
            f"{', '.join(sorted(extra))} does not enclose {cls_name}"
        )
    missing = set(ancestors) - set(ctx)
    if missing:
        raise ExpansionError(
            f"{cls_name} needs an object index for {', '.join(sorted(missing))}"
        )
    return ancestors, tuple(ctx[a] for a in ancestors)


def _reshape(
    doc: InstanceDoc,
    cls_name: str,
    ancestors: list[str],
    path: tuple[int, ...],
    at: int,
    delta: int,
    new_counts: dict[str, dict[tuple[int, ...], int]],
) -> InstanceDoc:
    """Re-key values and labels across an object insertion or removal, refill
    defaults and labels for uncovered cells, retranslate all formulas."""
    model = doc.model
    tree = ObjectTree(new_counts)
    index = LayoutIndex(model, tree)
    values: dict[CellAddr, Value] = {}
    labels: dict[CellAddr, str] = {}
    for addr, v in doc.values.items():
        point, ctx = doc.index.model_cell_at(addr)
        ctx2 = _shifted_ctx(ctx, cls_name, ancestors, path, at, delta)
        if ctx2 is None:
            continue
        values[index.addr_of(point, ctx2)] = v
    for addr, text in doc.labels.items():
        point, ctx = doc.index.model_cell_at(addr)
        ctx2 = _shifted_ctx(ctx, cls_name, ancestors, path, at, delta)
        if ctx2 is None:
            continue
        labels[index.addr_of(point, ctx2)] = text
    formulas: dict[CellAddr, str] = {}
    for ri, (mr, rctx) in enumerate(index.rows):
        for ci, (mc, cctx) in enumerate(index.cols):
            addr = CellAddr(ci, ri)
            cell = cell_at(model, Point(mc, mr))
            if isinstance(cell, Label):
                labels.setdefault(addr, cell.text)
            elif isinstance(cell, Input):
                values.setdefault(addr, cell.default)
            else:
                a1 = translate(model, index, Point(mc, mr), {**rctx, **cctx}, cell.expr)
                formulas[addr] = render_expr(a1)
    return recalc(
        replace(doc, tree=tree, values=values, labels=labels, formulas=formulas)
    )


def add_object(
    doc: InstanceDoc,
    cls_name: str,
    parent_ctx: dict[str, int] | None = None,
    at: int | None = None,
) -> InstanceDoc:
    """Insert one object of a repeating class; nested classes start with one
    object each."""
    model = doc.model
    _repeating(model, cls_name)
    ancestors, path = _object_path(model, cls_name, parent_ctx)
    if path not in doc.tree.counts.get(cls_name, {}):
        raise ExpansionError(f"no {' / '.join(ancestors) or 'root'} object at {path}")
    n = doc.tree.count(cls_name, path)
    if at is None:
        at = n
    if not 0 <= at <= n:
        raise ExpansionError(f"insert position {at} outside 0..{n}")
    counts = {c: dict(p) for c, p in doc.tree.counts.items()}
    depth = len(ancestors)
    for d in _axis_descendants(model, cls_name):
        moved = {}
        for p, cnt in counts.get(d, {}).items():
            if p[:depth] == path and p[depth] >= at:
                moved[p[:depth] + (p[depth] + 1,) + p[depth + 1 :]] = cnt
            else:
                moved[p] = cnt
        counts[d] = moved
    counts[cls_name][path] = n + 1

    axis = "down" if model.class_named(cls_name).expansion is Expansion.DOWN else "right"
    _, children, _ = _forest(_intervals(model, axis))

    def seed(cls: str, p: tuple[int, ...]) -> None:
        counts.setdefault(cls, {})[p] = 1
        for kid in children[cls]:
            seed(kid, p + (0,))

    for kid in children[cls_name]:
        seed(kid, path + (at,))
    return _reshape(doc, cls_name, ancestors, path, at, +1, counts)


def remove_object(
    doc: InstanceDoc,
    cls_name: str,
    parent_ctx: dict[str, int] | None = None,
    index: int = 0,
) -> InstanceDoc:
    """Delete one object and everything nested in it."""
    model = doc.model
    _repeating(model, cls_name)
    ancestors, path = _object_path(model, cls_name, parent_ctx)
    n = doc.tree.count(cls_name, path)
    if not 0 <= index < n:
        raise ExpansionError(f"no object {index}; {cls_name} has {n} here")
    counts = {c: dict(p) for c, p in doc.tree.counts.items()}
    depth = len(ancestors)
    for d in _axis_descendants(model, cls_name):
        moved = {}
        for p, cnt in counts.get(d, {}).items():
            if p[:depth] == path and p[depth] == index:
                continue
            if p[:depth] == path and p[depth] > index:
                moved[p[:depth] + (p[depth] - 1,) + p[depth + 1 :]] = cnt
            else:
                moved[p] = cnt
        counts[d] = moved
    counts[cls_name][path] = n - 1
    return _reshape(doc, cls_name, ancestors, path, index, -1, counts)


# ---- conformance ----


def check(model: TabulaModel, doc: InstanceDoc) -> list[Diagnostic]:
    """All the ways the instance deviates from the model, row-major."""
    if model != doc.model:
        return [
            Diagnostic(
                "StructureError", None, "instance was generated from a different model"
            )
        ]
    index = doc.index
    diags: list[Diagnostic] = []
    seen_values: set[CellAddr] = set()
    seen_labels: set[CellAddr] = set()
    seen_formulas: set[CellAddr] = set()
    for ri, (mr, rctx) in enumerate(index.rows):
        for ci, (mc, cctx) in enumerate(index.cols):
            addr = CellAddr(ci, ri)
            cell = cell_at(model, Point(mc, mr))
            if isinstance(cell, Label):
                seen_labels.add(addr)
                text = doc.labels.get(addr, "")
                if text != cell.text:
                    diags.append(
                        Diagnostic(
                            "LabelMismatch",
                            addr,
                            f"expected {cell.text!r}, found {text!r}",
                        )
                    )
            elif isinstance(cell, Input):
                seen_values.add(addr)
                v = doc.values.get(addr)
                if v is None:
                    diags.append(Diagnostic("StructureError", addr, "missing input value"))
                elif infer_type(v) is not cell.value_type:
                    diags.append(
                        Diagnostic(
                            "TypeError",
                            addr,
                            f"{cell.name} expects a {cell.value_type.value}, found {v!r}",
                        )
                    )
                elif cell.constraint is not None:
                    if not check_constraint(cell.constraint, v):
                        diags.append(
                            Diagnostic(
                                "ConstraintViolation",
                                addr,
                                f"{v} violates {cell.constraint}",
                            )
                        )
            else:
                seen_formulas.add(addr)
                ctx = {**rctx, **cctx}
                expected = render_expr(
                    translate(model, index, Point(mc, mr), ctx, cell.expr)
                )
                got = doc.formulas.get(addr)
                if got is None:
                    diags.append(Diagnostic("StructureError", addr, "missing formula"))
                elif got != expected:
                    diags.append(
                        Diagnostic(
                            "FormulaMismatch",
                            addr,
                            f"expected {expected}, found {got}",
                        )
                    )
    for addr in set(doc.values) - seen_values:
        diags.append(Diagnostic("StructureError", addr, "value outside any input cell"))
    for addr in set(doc.labels) - seen_labels:
        diags.append(Diagnostic("StructureError", addr, "label outside any label cell"))
    for addr in set(doc.formulas) - seen_formulas:
        diags.append(
            Diagnostic("StructureError", addr, "formula outside any formula cell")
        )
    return _diag_sorted(diags)


# ---- CSV export ----


def export_csv(doc: InstanceDoc, mode: str = "values") -> str:
    """Render the grid as CSV; mode "formulas" shows =expressions."""
    if mode not in ("values", "formulas"):
        raise ValueError(f"unknown export mode {mode!r}")
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    for ri in range(doc.height):
        row: list[str] = []
        for ci in range(doc.width):
            addr = CellAddr(ci, ri)
            if addr in doc.formulas:
                if mode == "formulas":
                    row.append("=" + doc.formulas[addr])
                else:
                    got = doc.computed.get(addr)
                    row.append("" if got is None else str(got))
            elif addr in doc.values:
                row.append(str(doc.values[addr]))
            else:
                row.append(doc.labels.get(addr, ""))
        writer.writerow(row)
    return out.getvalue()


# ---- object tree JSON ----


def tree_to_json(model: TabulaModel, tree: ObjectTree) -> dict:
    """Nested counts, root classes keyed at the top, one entry per object."""

    def spec_of(cls: str, children: dict[str, list[str]], path: tuple[int, ...]):
        n = tree.count(cls, path)
        kids = children[cls]
        if not kids:
            return n
        return [
            {kid: spec_of(kid, children, path + (i,)) for kid in kids}
            for i in range(n)
        ]

    out: dict = {}
    for axis in ("down", "right"):
        intervals = _intervals(model, axis)
        _, children, roots = _forest(intervals)
        by_decl = [c.name for c in model.classes if c.name in roots]
        for root in by_decl:
            out[root] = spec_of(root, children, ())
    return out


def tree_from_json(model: TabulaModel, data: dict) -> ObjectTree:
    """Parse nested counts; integers are shorthand for that many objects with
    one object in each nested class. Missing classes default to one object."""
    if not isinstance(data, dict):
        raise StructureError("objects must be a JSON object")
    counts: dict[str, dict[tuple[int, ...], int]] = {}
    forests = {}
    all_roots: list[str] = []
    for axis in ("down", "right"):
        intervals = _intervals(model, axis)
        _, children, roots = _forest(intervals)
        forests.update(children)
        all_roots.extend(roots)
    known = set(forests)
    for key in data:
        if key not in known:
            raise StructureError(f"objects names unknown repeating class {key!r}")
        if key not in all_roots:
            raise StructureError(f"{key} is nested; give its counts inside its parent")

    def read(cls: str, path: tuple[int, ...], node) -> None:
        kids = forests[cls]
        if isinstance(node, bool) or not isinstance(node, (int, list)):
            raise StructureError(f"counts for {cls} must be an integer or a list")
        if isinstance(node, int):
            if node < 0:
                raise StructureError(f"negative object count for {cls}")
            counts.setdefault(cls, {})[path] = node
            for i in range(node):
                for kid in kids:
                    read(kid, path + (i,), 1)
            return
        counts.setdefault(cls, {})[path] = len(node)
        for i, obj in enumerate(node):
            if not isinstance(obj, dict):
                raise StructureError(f"each {cls} object must be a JSON object")
            for key in obj:
                if key not in kids:
                    raise StructureError(f"{key!r} is not nested in {cls}")
            for kid in kids:
                read(kid, path + (i,), obj.get(kid, 1))

    for root in all_roots:
        read(root, (), data.get(root, 1))
    return ObjectTree(counts)


# ---- persistence ----


def _value_to_json(v: Value):
    if isinstance(v, NumberVal):
        if v.num == v.num.to_integral_value():
            return int(v.num)
        return float(v.num)
    return v.text


def instance_to_json(doc: InstanceDoc) -> dict:
    model_field: object
    if doc.model_ref is not None:
        model_field = {"path": doc.model_ref}
    else:
        model_field = print_model(doc.model)
    return {
        "model": model_field,
        "objects": tree_to_json(doc.model, doc.tree),
        "inputs": {
            str(addr): _value_to_json(v)
            for addr, v in sorted(doc.values.items(), key=lambda kv: (kv[0].row, kv[0].col))
        },
    }


def save_instance(doc: InstanceDoc, path: str) -> None:
    """Write the instance file atomically."""
    data = json.dumps(instance_to_json(doc), indent=2)
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tabula-", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as f:
            f.write(data + "\n")
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def load_instance(path: str) -> InstanceDoc:
    """Read an instance file; inputs are taken as-is, everything else is
    derived from the model, so check() reports any stored violations."""
    with open(path) as f:
        data = json.load(f, parse_float=Decimal)
    if not isinstance(data, dict):
        raise StructureError("instance file must hold a JSON object")
    model_field = data.get("model")
    model_ref: str | None = None
    if isinstance(model_field, str):
        model = parse_model(model_field)
    elif isinstance(model_field, dict) and isinstance(model_field.get("path"), str):
        model_ref = model_field["path"]
        resolved = model_ref
        if not os.path.isabs(resolved):
            resolved = os.path.join(os.path.dirname(os.path.abspath(path)), resolved)
        with open(resolved) as f:
            model = parse_model(f.read())
    else:
        raise StructureError("model must be inline text or {\"path\": ...}")
    violations = validate_layout(model)
    if violations:
        raise StructureError(f"model fails layout validation: {violations[0]}")
    tree = tree_from_json(model, data.get("objects", {}))
    doc = _materialize(model, tree, model_ref)
    inputs = data.get("inputs", {})
    if not isinstance(inputs, dict):
        raise StructureError("inputs must be a JSON object")
    values = dict(doc.values)
    for key, raw in inputs.items():
        try:
            addr = parse_addr(key)
        except ValueError as exc:
            raise StructureError(str(exc)) from None
        if addr not in doc.values:
            raise StructureError(f"{key} is not an input cell of this instance")
        if isinstance(raw, bool):
            raise StructureError(f"{key}: booleans are not cell values")
        if isinstance(raw, (int, Decimal)):
            values[addr] = NumberVal(raw)
        elif isinstance(raw, str):
            values[addr] = TextVal(raw)
        else:
            raise StructureError(f"{key}: expected a number or string")
    return recalc(replace(doc, values=values))

"""Model/instance co-evolution.

Model operations are grid edits (labels, defaults, constraints, formulas, new
attributes, row/column surgery, renames). Every accepted model operation maps
to the instance operations that keep an existing instance conforming; safe
instance operations map back to the model operation they imply. sync_apply_*
run an edit on both sides atomically: either both documents advance and the
instance still checks clean, or neither changes.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import Decimal, InvalidOperation
from typing import Union

from .formula import (
    CellAddr,
    Constraint,
    Expr,
    FormulaError,
    Ref,
    check_constraint,
    normalize_a1_text,
    parse_a1_expr,
    parse_addr,
    parse_constraint,
    parse_formula,
    render_constraint,
    render_expr,
    walk,
)
from .instance import (
    ExpansionError,
    InstanceDoc,
    LayoutIndex,
    ObjectTree,
    StructureError,
    _materialize,
    add_object,
    recalc,
    remove_object,
    set_value,
)
from .layout import axes_at, down_classes, right_classes, validate_layout
from .model import (
    BoundsError,
    ClassDef,
    FormulaCell,
    Input,
    Label,
    Point,
    RangeRect,
    TabulaModel,
    cell_at,
    is_identifier,
)
from .refs import abstract_formula, resolve_ref, rewrite_refs, translate, validate_semantics
from .values import NumberVal, TabulaError, TextVal, Value, infer_type

__all__ = [
    "AddAttribute",
    "AddColumn",
    "AddObject",
    "AddRow",
    "DeleteColumn",
    "DeleteColumnAll",
    "DeleteRow",
    "DeleteRowAll",
    "InsertColumnAll",
    "InsertRowAll",
    "InstanceOp",
    "ModelOp",
    "OpRejected",
    "RemoveObject",
    "RenameAttribute",
    "RenameClass",
    "SetConstraint",
    "SetDefault",
    "SetFormula",
    "SetFormulaAt",
    "SetLabel",
    "SetLabelAt",
    "SetValue",
    "apply_instance_op",
    "apply_model_op",
    "op_from_json",
    "parse_op_line",
    "parse_op_script",
    "render_op",
    "sync_apply_instance",
    "sync_apply_model",
    "to_instance_ops",
    "to_model_op",
]


class OpRejected(TabulaError):
    """An operation was refused; neither document changed.

    kind and addr are set when the rejection is anchored at one cell and
    matches a conformance diagnostic kind, so callers can point at it.
    """

    def __init__(
        self,
        message: str,
        reasons: list[str] | None = None,
        kind: str | None = None,
        addr: str | None = None,
    ) -> None:
        super().__init__(message)
        self.reasons = reasons if reasons is not None else [message]
        self.kind = kind
        self.addr = addr


# ---- operations ----


@dataclass(frozen=True)
class SetLabel:
    point: Point
    text: str


@dataclass(frozen=True)
class SetDefault:
    point: Point
    value: Value


@dataclass(frozen=True)
class SetConstraint:
    point: Point
    constraint: Constraint | None


@dataclass(frozen=True)
class SetFormula:
    point: Point
    expr: Expr


@dataclass(frozen=True)
class AddAttribute:
    point: Point
    name: str
    default: Value


@dataclass(frozen=True)
class AddRow:
    cls: str
    offset: int  # 0..class height; the new row lands at class top + offset


@dataclass(frozen=True)
class AddColumn:
    cls: str
    offset: int


@dataclass(frozen=True)
class DeleteRow:
    cls: str
    offset: int  # 0..class height - 1


@dataclass(frozen=True)
class DeleteColumn:
    cls: str
    offset: int


@dataclass(frozen=True)
class RenameAttribute:
    old: str
    new: str


@dataclass(frozen=True)
class RenameClass:
    old: str
    new: str


ModelOp = Union[
    SetLabel,
    SetDefault,
    SetConstraint,
    SetFormula,
    AddAttribute,
    AddRow,
    AddColumn,
    DeleteRow,
    DeleteColumn,
    RenameAttribute,
    RenameClass,
]


@dataclass(frozen=True)
class SetValue:
    addr: CellAddr
    value: Value


@dataclass(frozen=True)
class SetFormulaAt:
    addr: CellAddr
    text: str


@dataclass(frozen=True)
class SetLabelAt:
    addr: CellAddr
    text: str


@dataclass(frozen=True)
class AddObject:
    cls: str
    parent_ctx: tuple[tuple[str, int], ...] = ()
    at: int | None = None


@dataclass(frozen=True)
class RemoveObject:
    cls: str
    parent_ctx: tuple[tuple[str, int], ...] = ()
    index: int = 0


@dataclass(frozen=True)
class InsertRowAll:
    cls: str
    offset: int


@dataclass(frozen=True)
class InsertColumnAll:
    cls: str
    offset: int


@dataclass(frozen=True)
class DeleteRowAll:
    cls: str
    offset: int


@dataclass(frozen=True)
class DeleteColumnAll:
    cls: str
    offset: int


InstanceOp = Union[
    SetValue,
    SetFormulaAt,
    SetLabelAt,
    AddObject,
    RemoveObject,
    InsertRowAll,
    InsertColumnAll,
    DeleteRowAll,
    DeleteColumnAll,
]

_STRUCTURAL = {
    InsertRowAll: AddRow,
    InsertColumnAll: AddColumn,
    DeleteRowAll: DeleteRow,
    DeleteColumnAll: DeleteColumn,
}


# ---- model surgery ----


def _want_cell(model: TabulaModel, p: Point, kinds: tuple, what: str):
    p = Point(*p)
    if not model.grid.contains_point(p):
        raise OpRejected(f"{p} is outside the grid")
    cell = cell_at(model, p)
    if not isinstance(cell, kinds):
        raise OpRejected(f"{p} is not {what}")
    return cell


def _with_cells(model: TabulaModel, cells: dict[Point, object]) -> TabulaModel:
    try:
        return replace(model, cells=cells)
    except BoundsError as exc:
        raise OpRejected(str(exc)) from None


def _axis_surgery(
    model: TabulaModel, cls_name: str, offset: int, axis: str, insert: bool
) -> TabulaModel:
    c = model.class_named(cls_name)
    if c is None:
        raise OpRejected(f"unknown class {cls_name}")
    if axis == "row":
        lo, hi = c.range.top, c.range.bottom
    else:
        lo, hi = c.range.left, c.range.right
    span = hi - lo + 1
    limit = span if insert else span - 1
    if not 0 <= offset <= limit:
        raise OpRejected(f"offset {offset} outside 0..{limit} for {cls_name}")
    pos = lo + offset
    classes: list[ClassDef] = []
    for d in model.classes:
        if axis == "row":
            dlo, dhi = d.range.top, d.range.bottom
        else:
            dlo, dhi = d.range.left, d.range.right
        if insert:
            if dlo <= lo and hi <= dhi:
                dhi += 1  # encloses the class being grown
            elif dlo < pos <= dhi:
                dhi += 1
            elif pos <= dlo:
                dlo += 1
                dhi += 1
        else:
            if dlo <= pos <= dhi:
                dhi -= 1
            elif pos < dlo:
                dlo -= 1
                dhi -= 1
            if dhi < dlo:
                continue  # the class lost its only row/column
        if axis == "row":
            rng = RangeRect(Point(d.range.left, dlo), Point(d.range.right, dhi))
        else:
            rng = RangeRect(Point(dlo, d.range.top), Point(dhi, d.range.bottom))
        classes.append(ClassDef(d.name, rng, d.expansion))
    delta = 1 if insert else -1
    width, height = model.width, model.height
    if axis == "row":
        height += delta
    else:
        width += delta
    if width < 1 or height < 1:
        raise OpRejected("cannot delete the last row or column")
    cells = {}
    for p, cell in model.cells.items():
        coord = p.row if axis == "row" else p.col
        if insert:
            if coord >= pos:
                coord += 1
        else:
            if coord == pos:
                continue
            if coord > pos:
                coord -= 1
        cells[Point(p.col, coord) if axis == "row" else Point(coord, p.row)] = cell
    try:
        return TabulaModel(model.name, width, height, tuple(classes), cells)
    except BoundsError as exc:
        raise OpRejected(str(exc)) from None


def _ref_bindings(model: TabulaModel) -> dict[tuple[Point, int], Point]:
    out: dict[tuple[Point, int], Point] = {}
    for p, cell in model.attr_cells():
        if isinstance(cell, FormulaCell):
            for i, node in enumerate(walk(cell.expr)):
                if isinstance(node, Ref):
                    out[(p, i)] = resolve_ref(model, p, node).point
    return out


def _surgery(model: TabulaModel, op: ModelOp) -> TabulaModel:
    if isinstance(op, SetLabel):
        _want_cell(model, op.point, (Label,), "a label cell")
        cells = dict(model.cells)
        cells[Point(*op.point)] = Label(op.text)
        return _with_cells(model, cells)
    if isinstance(op, SetDefault):
        cell = _want_cell(model, op.point, (Input,), "an input cell")
        if infer_type(op.value) is not cell.value_type:
            raise OpRejected(
                f"default must stay a {cell.value_type.value}; the attribute's type is fixed"
            )
        if cell.constraint is not None and not check_constraint(cell.constraint, op.value):
            raise OpRejected(f"default {op.value} violates {cell.constraint}")
        cells = dict(model.cells)
        cells[Point(*op.point)] = Input(cell.name, op.value, cell.constraint)
        return _with_cells(model, cells)
    if isinstance(op, SetConstraint):
        cell = _want_cell(model, op.point, (Input,), "an input cell")
        if op.constraint is not None:
            if isinstance(cell.default, TextVal):
                raise OpRejected("constraints apply to number inputs only")
            if not check_constraint(op.constraint, cell.default):
                raise OpRejected(
                    f"default {cell.default} violates {render_constraint(op.constraint)}"
                )
        cells = dict(model.cells)
        cells[Point(*op.point)] = Input(cell.name, cell.default, op.constraint)
        return _with_cells(model, cells)
    if isinstance(op, SetFormula):
        cell = _want_cell(model, op.point, (FormulaCell,), "a formula cell")
        cells = dict(model.cells)
        cells[Point(*op.point)] = FormulaCell(cell.name, op.expr)
        return _with_cells(model, cells)
    if isinstance(op, AddAttribute):
        _want_cell(model, op.point, (Label,), "a free label cell")
        if not is_identifier(op.name):
            raise OpRejected(f"bad attribute name {op.name!r}")
        cells = dict(model.cells)
        cells[Point(*op.point)] = Input(op.name, op.default)
        return _with_cells(model, cells)
    if isinstance(op, (AddRow, AddColumn, DeleteRow, DeleteColumn)):
        axis = "row" if isinstance(op, (AddRow, DeleteRow)) else "col"
        return _axis_surgery(model, op.cls, op.offset, axis, isinstance(op, (AddRow, AddColumn)))
    if isinstance(op, RenameAttribute):
        if not is_identifier(op.new):
            raise OpRejected(f"bad attribute name {op.new!r}")
        targets = [(p, c) for p, c in model.attr_cells() if c.name == op.old]
        if not targets:
            raise OpRejected(f"no attribute named {op.old}")
        if len(targets) > 1:
            raise OpRejected(f"attribute {op.old} exists in several classes; rename is ambiguous")
        point, cell = targets[0]
        cells = dict(model.cells)
        if isinstance(cell, Input):
            cells[point] = Input(op.new, cell.default, cell.constraint)
        else:
            cells[point] = FormulaCell(op.new, cell.expr)

        def fix(ref: Ref) -> Ref:
            if ref.name == op.old:
                return Ref(op.new, ref.qualifier)
            return ref

        for p, c in list(cells.items()):
            if isinstance(c, FormulaCell):
                cells[p] = FormulaCell(c.name, rewrite_refs(c.expr, fix))
        return _with_cells(model, cells)
    if isinstance(op, RenameClass):
        if not is_identifier(op.new):
            raise OpRejected(f"bad class name {op.new!r}")
        if model.class_named(op.old) is None:
            raise OpRejected(f"unknown class {op.old}")
        if model.class_named(op.new) is not None:
            raise OpRejected(f"class {op.new} already exists")
        classes = tuple(
            ClassDef(op.new, c.range, c.expansion) if c.name == op.old else c
            for c in model.classes
        )

        def fix_q(ref: Ref) -> Ref:
            if ref.qualifier == op.old:
                return Ref(ref.name, op.new)
            return ref

        cells = dict(model.cells)
        for p, c in list(cells.items()):
            if isinstance(c, FormulaCell):
                cells[p] = FormulaCell(c.name, rewrite_refs(c.expr, fix_q))
        try:
            return replace(model, classes=classes, cells=cells)
        except BoundsError as exc:
            raise OpRejected(str(exc)) from None
    raise OpRejected(f"unknown model operation {op!r}")


def apply_model_op(model: TabulaModel, op: ModelOp) -> TabulaModel:
    """Apply a model operation, or raise OpRejected. The result always passes
    full layout and semantic validation."""
    before = _ref_bindings(model) if isinstance(op, (RenameAttribute, RenameClass)) else None
    m2 = _surgery(model, op)
    violations = validate_layout(m2)
    if violations:
        raise OpRejected(
            f"operation breaks layout rule {violations[0].rule}",
            [str(v) for v in violations],
        )
    errors = validate_semantics(m2)
    if errors:
        raise OpRejected(
            f"operation breaks the model: {errors[0][1]}",
            [f"{p} {message}" for p, message in errors],
        )
    if before is not None:
        after = _ref_bindings(m2)
        if after != before:
            raise OpRejected("rename would change what a formula refers to")
    return m2


# ---- replicating model ops onto an instance ----


def _all_ctxs(index: LayoutIndex, model: TabulaModel, p: Point) -> list[dict[str, int]]:
    return index.contexts_for(axes_at(model, p), {})


def to_instance_ops(
    model: TabulaModel, instance: InstanceDoc, op: ModelOp
) -> list[InstanceOp]:
    """The instance edits a model operation implies, one per affected object.

    The operation must already be valid on the model; structural operations
    map to their grid-wide counterparts, per-cell operations fan out over all
    contexts of the cell, and operations without instance impact map to none.
    """
    if isinstance(op, (AddRow, AddColumn, DeleteRow, DeleteColumn)):
        wrapper = {AddRow: InsertRowAll, AddColumn: InsertColumnAll,
                   DeleteRow: DeleteRowAll, DeleteColumn: DeleteColumnAll}[type(op)]
        return [wrapper(op.cls, op.offset)]
    if isinstance(op, (SetDefault, SetConstraint, RenameAttribute, RenameClass)):
        return []
    index = instance.index
    if isinstance(op, SetLabel):
        return [
            SetLabelAt(index.addr_of(op.point, ctx), op.text)
            for ctx in _all_ctxs(index, model, op.point)
        ]
    if isinstance(op, AddAttribute):
        return [
            SetValue(index.addr_of(op.point, ctx), op.default)
            for ctx in _all_ctxs(index, model, op.point)
        ]
    if isinstance(op, SetFormula):
        m2 = apply_model_op(model, op)
        out: list[InstanceOp] = []
        for ctx in _all_ctxs(index, model, op.point):
            a1 = translate(m2, index, Point(*op.point), ctx, op.expr)
            out.append(SetFormulaAt(index.addr_of(op.point, ctx), render_expr(a1)))
        return out
    raise OpRejected(f"unknown model operation {op!r}")


# ---- lifting instance ops to model ops ----


def to_model_op(
    model: TabulaModel, instance: InstanceDoc, op: InstanceOp
) -> ModelOp | None:
    """The model operation an instance edit implies.

    None means the edit is instance-local (values and objects). Edits that
    cannot be expressed as a model operation are rejected.
    """
    index = instance.index
    if isinstance(op, SetValue):
        if op.addr not in instance.values:
            raise OpRejected(f"{op.addr} is not an input cell")
        point, _ = index.model_cell_at(op.addr)
        cell = cell_at(model, point)
        assert isinstance(cell, Input)
        if infer_type(op.value) is not cell.value_type:
            raise OpRejected(
                f"{cell.name} expects a {cell.value_type.value}",
                kind="TypeError",
                addr=str(op.addr),
            )
        if cell.constraint is not None and not check_constraint(cell.constraint, op.value):
            raise OpRejected(
                f"{op.value} violates {cell.constraint}",
                kind="ConstraintViolation",
                addr=str(op.addr),
            )
        return None
    if isinstance(op, (AddObject, RemoveObject)):
        return None
    if isinstance(op, SetLabelAt):
        point, _ = index.model_cell_at(op.addr)
        cell = cell_at(model, point)
        if not isinstance(cell, Label):
            raise OpRejected(f"{op.addr} is not a label cell")
        return SetLabel(point, op.text)
    if isinstance(op, SetFormulaAt):
        point, ctx = index.model_cell_at(op.addr)
        cell = cell_at(model, point)
        if not isinstance(cell, FormulaCell):
            raise OpRejected(f"{op.addr} is not a formula cell")
        try:
            a1 = parse_a1_expr(op.text)
        except FormulaError as exc:
            raise OpRejected(f"bad formula: {exc}") from None
        try:
            lifted = abstract_formula(model, index, point, ctx, a1)
        except (TabulaError, ValueError) as exc:
            raise OpRejected(f"formula does not generalize: {exc}") from None
        round_trip = render_expr(translate(model, index, point, ctx, lifted))
        if round_trip != normalize_a1_text(op.text):
            raise OpRejected(
                "formula does not generalize: it is not exactly what the model "
                "formula would generate here"
            )
        return SetFormula(point, lifted)
    if type(op) in _STRUCTURAL:
        return _STRUCTURAL[type(op)](op.cls, op.offset)
    raise OpRejected(f"unknown instance operation {op!r}")


# ---- applying instance ops without a model (unsafe path) ----


def apply_instance_op(instance: InstanceDoc, op: InstanceOp) -> InstanceDoc:
    """Apply one instance operation against the instance's own embedded
    model. Structural edits co-evolve the embedded model, so the result may
    stop conforming to a model the caller tracks separately."""
    if isinstance(op, SetValue):
        if op.addr not in instance.values:
            raise OpRejected(f"{op.addr} is not an input cell")
        values = dict(instance.values)
        values[op.addr] = op.value
        return recalc(replace(instance, values=values))
    if isinstance(op, SetLabelAt):
        point, _ = instance.index.model_cell_at(op.addr)
        if not isinstance(cell_at(instance.model, point), Label):
            raise OpRejected(f"{op.addr} is not a label cell")
        labels = dict(instance.labels)
        labels[op.addr] = op.text
        return replace(instance, labels=labels)
    if isinstance(op, SetFormulaAt):
        point, _ = instance.index.model_cell_at(op.addr)
        if not isinstance(cell_at(instance.model, point), FormulaCell):
            raise OpRejected(f"{op.addr} is not a formula cell")
        try:
            text = normalize_a1_text(op.text)
        except FormulaError as exc:
            raise OpRejected(f"bad formula: {exc}") from None
        formulas = dict(instance.formulas)
        formulas[op.addr] = text
        try:
            return recalc(replace(instance, formulas=formulas))
        except TabulaError as exc:
            raise OpRejected(str(exc)) from None
    if isinstance(op, AddObject):
        try:
            return add_object(instance, op.cls, dict(op.parent_ctx), op.at)
        except (ExpansionError, StructureError) as exc:
            raise OpRejected(str(exc)) from None
    if isinstance(op, RemoveObject):
        try:
            return remove_object(instance, op.cls, dict(op.parent_ctx), op.index)
        except (ExpansionError, StructureError) as exc:
            raise OpRejected(str(exc)) from None
    if type(op) in _STRUCTURAL:
        mop = _STRUCTURAL[type(op)](op.cls, op.offset)
        m2 = apply_model_op(instance.model, mop)
        return _reembed(instance, m2, mop)
    raise OpRejected(f"unknown instance operation {op!r}")


# ---- synchronized application ----


def _reembed(instance: InstanceDoc, m2: TabulaModel, op: ModelOp) -> InstanceDoc:
    """Carry an instance across an accepted model operation: labels and
    formulas rederive from the new model, stored values are re-keyed by
    (model cell, object context)."""
    model = instance.model
    insert_at: int | None = None
    delete_at: int | None = None
    axis = "row"
    if isinstance(op, (AddRow, AddColumn, DeleteRow, DeleteColumn)):
        c = model.class_named(op.cls)
        assert c is not None
        axis = "row" if isinstance(op, (AddRow, DeleteRow)) else "col"
        base = c.range.top if axis == "row" else c.range.left
        if isinstance(op, (AddRow, AddColumn)):
            insert_at = base + op.offset
        else:
            delete_at = base + op.offset
    repeating = {c.name for c in down_classes(m2)} | {c.name for c in right_classes(m2)}
    counts = {
        cls: dict(paths) for cls, paths in instance.tree.counts.items() if cls in repeating
    }
    doc = _materialize(m2, ObjectTree(counts), instance.model_ref)
    index2 = doc.index
    values = dict(doc.values)
    for addr, v in instance.values.items():
        point, ctx = instance.index.model_cell_at(addr)
        col, row = point.col, point.row
        if insert_at is not None:
            if axis == "row" and row >= insert_at:
                row += 1
            elif axis == "col" and col >= insert_at:
                col += 1
        if delete_at is not None:
            coord = row if axis == "row" else col
            if coord == delete_at:
                continue
            if coord > delete_at:
                if axis == "row":
                    row -= 1
                else:
                    col -= 1
        p2 = Point(col, row)
        if not isinstance(cell_at(m2, p2), Input):
            continue
        ctx2 = {k: i for k, i in ctx.items() if k in repeating}
        values[index2.addr_of(p2, ctx2)] = v
    return recalc(replace(doc, values=values))


def sync_apply_model(
    model: TabulaModel, instance: InstanceDoc, op: ModelOp, force: bool = False
) -> tuple[TabulaModel, InstanceDoc]:
    """Apply a model operation and replicate it onto the instance.

    Tightening a constraint below stored values is rejected unless force is
    set, in which case the values stay and check() reports them.
    """
    m2 = apply_model_op(model, op)
    if isinstance(op, SetConstraint) and op.constraint is not None and not force:
        bad = []
        for ctx in _all_ctxs(instance.index, model, op.point):
            addr = instance.index.addr_of(op.point, ctx)
            v = instance.values.get(addr)
            if v is not None and not check_constraint(op.constraint, v):
                bad.append(str(addr))
        if bad:
            raise OpRejected(
                f"stored values at {', '.join(bad)} violate the new constraint "
                "(use force to keep them and see them as check diagnostics)",
                bad,
            )
    i2 = _reembed(instance, m2, op)
    return m2, i2


def sync_apply_instance(
    model: TabulaModel, instance: InstanceDoc, op: InstanceOp, force: bool = False
) -> tuple[TabulaModel, InstanceDoc]:
    """Apply an instance operation, co-evolving the model when the edit
    implies a model change."""
    if model != instance.model:
        raise OpRejected("instance was generated from a different model")
    lifted = to_model_op(model, instance, op)
    if lifted is None:
        if isinstance(op, SetValue):
            i2, diags = set_value(instance, op.addr, op.value)
            if diags:
                raise OpRejected(diags[0].message, [str(d) for d in diags])
            return model, i2
        return model, apply_instance_op(instance, op)
    return sync_apply_model(model, instance, lifted, force)


# ---- operation scripts ----


def _strip_comment(line: str) -> str:
    out = []
    in_string = False
    i = 0
    while i < len(line):
        ch = line[i]
        if in_string and ch == "\\" and i + 1 < len(line):
            out.append(line[i : i + 2])
            i += 2
            continue
        if ch == '"':
            in_string = not in_string
        elif ch == "#" and not in_string:
            break
        out.append(ch)
        i += 1
    return "".join(out).strip()


class _LineScan:
    def __init__(self, text: str, where: str) -> None:
        self.text = text
        self.pos = 0
        self.where = where

    def error(self, message: str) -> OpRejected:
        return OpRejected(f"{self.where}: {message}")

    def skip(self) -> None:
        while self.pos < len(self.text) and self.text[self.pos] in " \t":
            self.pos += 1

    def done(self) -> bool:
        self.skip()
        return self.pos >= len(self.text)

    def rest(self) -> str:
        self.skip()
        out = self.text[self.pos :].strip()
        self.pos = len(self.text)
        return out

    def word(self, what: str) -> str:
        self.skip()
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in " \t()=,":
            self.pos += 1
        if self.pos == start:
            raise self.error(f"expected {what}")
        return self.text[start : self.pos]

    def punct(self, ch: str) -> None:
        self.skip()
        if self.pos >= len(self.text) or self.text[self.pos] != ch:
            raise self.error(f"expected {ch!r}")
        self.pos += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.pos] if self.pos < len(self.text) else ""

    def int_value(self, what: str) -> int:
        w = self.word(what)
        if not w.isdigit():
            raise self.error(f"expected {what}, got {w!r}")
        return int(w)

    def point(self) -> Point:
        self.punct("(")
        col = self.int_value("a column number")
        self.punct(",")
        row = self.int_value("a row number")
        self.punct(")")
        return Point(col, row)

    def addr(self) -> CellAddr:
        w = self.word("a cell address")
        try:
            return parse_addr(w)
        except ValueError:
            raise self.error(f"bad cell address {w!r}") from None

    def string(self) -> str:
        self.skip()
        if self.peek() != '"':
            raise self.error("expected a quoted string")
        self.pos += 1
        out = []
        while True:
            if self.pos >= len(self.text):
                raise self.error("unterminated string")
            ch = self.text[self.pos]
            if ch == '"':
                self.pos += 1
                return "".join(out)
            if ch == "\\":
                if self.pos + 1 >= len(self.text) or self.text[self.pos + 1] not in '"\\':
                    raise self.error("bad escape")
                out.append(self.text[self.pos + 1])
                self.pos += 2
                continue
            out.append(ch)
            self.pos += 1

    def literal(self) -> Value:
        if self.peek() == '"':
            return TextVal(self.string())
        w = self.word("a number or string")
        try:
            return NumberVal(Decimal(w))
        except (InvalidOperation, ValueError):
            raise self.error(f"expected a number or string, got {w!r}") from None


def _class_by_prefix(model: TabulaModel, token: str, where: str) -> str:
    lowered = token.lower()
    exact = [c.name for c in model.classes if c.name.lower() == lowered]
    if len(exact) == 1:
        return exact[0]
    matches = [c.name for c in model.classes if c.name.lower().startswith(lowered)]
    if len(matches) == 1:
        return matches[0]
    if not matches:
        raise OpRejected(f"{where}: no class matches {token!r}")
    raise OpRejected(f"{where}: {token!r} matches {', '.join(matches)}")


def _parse_ctx_tokens(
    sc: _LineScan, model: TabulaModel
) -> list[tuple[str, int | str]]:
    """name=value pairs; class names may be unambiguous prefixes, and the
    special name "at" carries an insert position or "end"."""
    out: list[tuple[str, int | str]] = []
    while not sc.done():
        name = sc.word("name=index")
        sc.punct("=")
        value = sc.word("an index")
        if name.lower() == "at":
            if value.lower() == "end":
                out.append(("at", "end"))
            elif value.isdigit():
                out.append(("at", int(value)))
            else:
                raise sc.error(f"bad insert position {value!r}")
            continue
        if not value.isdigit():
            raise sc.error(f"bad object index {value!r}")
        out.append((_class_by_prefix(model, name, sc.where), int(value)))
    return out


def parse_op_line(line: str, model: TabulaModel, where: str = "line") -> ModelOp | InstanceOp:
    sc = _LineScan(line, where)
    op = _op_line_body(sc, model)
    if not sc.done():
        raise sc.error(f"unexpected trailing input {sc.rest()!r}")
    return op


def _op_line_body(sc: _LineScan, model: TabulaModel) -> ModelOp | InstanceOp:
    where = sc.where
    op_name = sc.word("an operation").lower()
    if op_name == "set-label":
        return SetLabel(sc.point(), sc.string())
    if op_name == "set-default":
        return SetDefault(sc.point(), sc.literal())
    if op_name == "set-constraint":
        point = sc.point()
        rest = sc.rest()
        if rest.lower() == "none":
            return SetConstraint(point, None)
        try:
            return SetConstraint(point, parse_constraint(rest))
        except FormulaError as exc:
            raise sc.error(f"bad constraint: {exc}") from None
    if op_name == "set-formula":
        point = sc.point()
        src = sc.rest()
        try:
            return SetFormula(point, parse_formula(src))
        except FormulaError as exc:
            raise sc.error(f"bad formula: {exc}") from None
    if op_name == "add-attribute":
        point = sc.point()
        name = sc.word("an attribute name")
        return AddAttribute(point, name, sc.literal())
    if op_name in ("add-row", "add-column", "delete-row", "delete-column",
                   "insert-row-all", "insert-column-all", "delete-row-all", "delete-column-all"):
        cls = _class_by_prefix(model, sc.word("a class name"), where)
        offset = sc.int_value("an offset")
        kinds = {
            "add-row": AddRow, "add-column": AddColumn,
            "delete-row": DeleteRow, "delete-column": DeleteColumn,
            "insert-row-all": InsertRowAll, "insert-column-all": InsertColumnAll,
            "delete-row-all": DeleteRowAll, "delete-column-all": DeleteColumnAll,
        }
        return kinds[op_name](cls, offset)
    if op_name == "rename-attribute":
        return RenameAttribute(sc.word("the old name"), sc.word("the new name"))
    if op_name == "rename-class":
        return RenameClass(sc.word("the old name"), sc.word("the new name"))
    if op_name == "set-value":
        return SetValue(sc.addr(), sc.literal())
    if op_name == "set-formula-at":
        addr = sc.addr()
        return SetFormulaAt(addr, sc.rest())
    if op_name == "set-label-at":
        return SetLabelAt(sc.addr(), sc.string())
    if op_name == "add-object":
        cls = _class_by_prefix(model, sc.word("a class name"), where)
        pairs = _parse_ctx_tokens(sc, model)
        at: int | None = None
        ctx = []
        for name, value in pairs:
            if name == "at":
                at = None if value == "end" else int(value)
            else:
                ctx.append((name, int(value)))
        return AddObject(cls, tuple(ctx), at)
    if op_name == "remove-object":
        cls = _class_by_prefix(model, sc.word("a class name"), where)
        pairs = _parse_ctx_tokens(sc, model)
        index: int | None = None
        ctx = []
        for name, value in pairs:
            if name == "at":
                raise sc.error("remove-object takes object indices, not at=")
            if name == cls:
                index = int(value)
            else:
                ctx.append((name, int(value)))
        if index is None:
            raise sc.error(f"remove-object needs {cls}=<index>")
        return RemoveObject(cls, tuple(ctx), index)
    raise sc.error(f"unknown operation {op_name!r}")


def parse_op_script(text: str, model: TabulaModel) -> list[ModelOp | InstanceOp]:
    """One operation per line; # comments and blank lines are skipped."""
    ops: list[ModelOp | InstanceOp] = []
    for n, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        ops.append(parse_op_line(line, model, where=f"line {n}"))
    return ops


def render_op(op: ModelOp | InstanceOp) -> str:
    """Script form of an operation."""

    def q(text: str) -> str:
        return '"' + text.replace("\\", "\\\\").replace('"', '\\"') + '"'

    def lit(v: Value) -> str:
        return str(v) if isinstance(v, NumberVal) else q(v.text)

    if isinstance(op, SetLabel):
        return f"set-label {op.point} {q(op.text)}"
    if isinstance(op, SetDefault):
        return f"set-default {op.point} {lit(op.value)}"
    if isinstance(op, SetConstraint):
        body = "none" if op.constraint is None else render_constraint(op.constraint)
        return f"set-constraint {op.point} {body}"
    if isinstance(op, SetFormula):
        return f"set-formula {op.point} {render_expr(op.expr)}"
    if isinstance(op, AddAttribute):
        return f"add-attribute {op.point} {op.name} {lit(op.default)}"
    if isinstance(op, AddRow):
        return f"add-row {op.cls} {op.offset}"
    if isinstance(op, AddColumn):
        return f"add-column {op.cls} {op.offset}"
    if isinstance(op, DeleteRow):
        return f"delete-row {op.cls} {op.offset}"
    if isinstance(op, DeleteColumn):
        return f"delete-column {op.cls} {op.offset}"
    if isinstance(op, RenameAttribute):
        return f"rename-attribute {op.old} {op.new}"
    if isinstance(op, RenameClass):
        return f"rename-class {op.old} {op.new}"
    if isinstance(op, SetValue):
        return f"set-value {op.addr} {lit(op.value)}"
    if isinstance(op, SetFormulaAt):
        return f"set-formula-at {op.addr} {op.text}"
    if isinstance(op, SetLabelAt):
        return f"set-label-at {op.addr} {q(op.text)}"
    if isinstance(op, AddObject):
        parts = [f"add-object {op.cls}"] + [f"{k}={v}" for k, v in op.parent_ctx]
        parts.append("at=end" if op.at is None else f"at={op.at}")
        return " ".join(parts)
    if isinstance(op, RemoveObject):
        parts = [f"remove-object {op.cls}"] + [f"{k}={v}" for k, v in op.parent_ctx]
        parts.append(f"{op.cls}={op.index}")
        return " ".join(parts)
    if isinstance(op, InsertRowAll):
        return f"insert-row-all {op.cls} {op.offset}"
    if isinstance(op, InsertColumnAll):
        return f"insert-column-all {op.cls} {op.offset}"
    if isinstance(op, DeleteRowAll):
        return f"delete-row-all {op.cls} {op.offset}"
    if isinstance(op, DeleteColumnAll):
        return f"delete-column-all {op.cls} {op.offset}"
    raise ValueError(f"unknown operation {op!r}")


# ---- JSON operation encoding (HTTP API) ----


def _value_from_json(raw) -> Value:
    if isinstance(raw, bool) or raw is None:
        raise OpRejected("cell values are numbers or strings")
    if isinstance(raw, (int, float, Decimal)):
        return NumberVal(Decimal(str(raw)))
    if isinstance(raw, str):
        return TextVal(raw)
    raise OpRejected("cell values are numbers or strings")


def _point_from_json(raw) -> Point:
    if (
        not isinstance(raw, (list, tuple))
        or len(raw) != 2
        or not all(isinstance(n, int) and not isinstance(n, bool) and n >= 0 for n in raw)
    ):
        raise OpRejected("point must be [col, row]")
    return Point(raw[0], raw[1])


def op_from_json(model: TabulaModel, data: dict) -> ModelOp | InstanceOp:
    """Decode one operation from its JSON form, e.g.
    {"op": "set-value", "addr": "B4", "value": 7}."""
    if not isinstance(data, dict) or not isinstance(data.get("op"), str):
        raise OpRejected('each operation needs an "op" name')
    kind = data["op"]

    def addr() -> CellAddr:
        raw = data.get("addr")
        if not isinstance(raw, str):
            raise OpRejected(f"{kind} needs an addr")
        try:
            return parse_addr(raw)
        except ValueError:
            raise OpRejected(f"bad cell address {raw!r}") from None

    def cls() -> str:
        raw = data.get("cls", data.get("class"))
        if not isinstance(raw, str) or model.class_named(raw) is None:
            raise OpRejected(f"{kind} needs a valid class name")
        return raw

    def offset() -> int:
        raw = data.get("offset")
        if not isinstance(raw, int) or isinstance(raw, bool) or raw < 0:
            raise OpRejected(f"{kind} needs a non-negative offset")
        return raw

    def text(key: str = "text") -> str:
        raw = data.get(key)
        if not isinstance(raw, str):
            raise OpRejected(f"{kind} needs {key}")
        return raw

    if kind == "set-value":
        return SetValue(addr(), _value_from_json(data.get("value")))
    if kind == "set-formula-at":
        return SetFormulaAt(addr(), text())
    if kind == "set-label-at":
        return SetLabelAt(addr(), text())
    if kind in ("add-object", "remove-object"):
        raw_ctx = data.get("ctx", {})
        if not isinstance(raw_ctx, dict):
            raise OpRejected("ctx must map class names to object indices")
        ctx = []
        for name, idx in sorted(raw_ctx.items()):
            if model.class_named(name) is None:
                raise OpRejected(f"unknown class {name!r} in ctx")
            if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
                raise OpRejected(f"bad object index for {name}")
            ctx.append((name, idx))
        if kind == "add-object":
            at = data.get("at")
            if at in (None, "end"):
                at_val = None
            elif isinstance(at, int) and not isinstance(at, bool) and at >= 0:
                at_val = at
            else:
                raise OpRejected('at must be an index or "end"')
            return AddObject(cls(), tuple(ctx), at_val)
        idx = data.get("index")
        if not isinstance(idx, int) or isinstance(idx, bool) or idx < 0:
            raise OpRejected("remove-object needs an index")
        return RemoveObject(cls(), tuple(ctx), idx)
    if kind == "insert-row-all":
        return InsertRowAll(cls(), offset())
    if kind == "insert-column-all":
        return InsertColumnAll(cls(), offset())
    if kind == "delete-row-all":
        return DeleteRowAll(cls(), offset())
    if kind == "delete-column-all":
        return DeleteColumnAll(cls(), offset())
    if kind == "set-label":
        return SetLabel(_point_from_json(data.get("point")), text())
    if kind == "set-default":
        return SetDefault(_point_from_json(data.get("point")), _value_from_json(data.get("value")))
    if kind == "set-constraint":
        if data.get("constraint") is None:
            return SetConstraint(_point_from_json(data.get("point")), None)
        try:
            return SetConstraint(
                _point_from_json(data.get("point")), parse_constraint(text("constraint"))
            )
        except FormulaError as exc:
            raise OpRejected(f"bad constraint: {exc}") from None
    if kind == "set-formula":
        try:
            return SetFormula(_point_from_json(data.get("point")), parse_formula(text("formula")))
        except FormulaError as exc:
            raise OpRejected(f"bad formula: {exc}") from None
    if kind == "add-attribute":
        return AddAttribute(
            _point_from_json(data.get("point")), text("name"), _value_from_json(data.get("default"))
        )
    if kind == "add-row":
        return AddRow(cls(), offset())
    if kind == "add-column":
        return AddColumn(cls(), offset())
    if kind == "delete-row":
        return DeleteRow(cls(), offset())
    if kind == "delete-column":
        return DeleteColumn(cls(), offset())
    if kind == "rename-attribute":
        return RenameAttribute(text("old"), text("new"))
    if kind == "rename-class":
        return RenameClass(text("old"), text("new"))
    raise OpRejected(f"unknown operation {kind!r}")

"""Deterministic random models and edit sequences for property tests.

random_model(seed) builds a model that is valid by construction: a base
class, nested repeating row sections, optionally a repeating column band
with relation classes at every crossing, inputs with occasional
constraints, and formulas that only use safe shapes (aggregates over
descendant attributes, same-row scalar references to earlier attributes).
The generator double-checks itself by running both validators before
returning.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field
from decimal import Decimal

from tabula.evolution import (
    AddColumn,
    AddObject,
    AddRow,
    DeleteColumn,
    DeleteRow,
    RemoveObject,
    RenameAttribute,
    SetConstraint,
    SetDefault,
    SetFormula,
    SetLabel,
    SetLabelAt,
    SetValue,
)
from tabula.formula import Apply, BinOp, NumberLit, Ref, parse_constraint
from tabula.instance import InstanceDoc
from tabula.layout import down_classes, right_classes, validate_layout
from tabula.model import (
    ClassDef,
    Expansion,
    FormulaCell,
    Input,
    Label,
    Point,
    RangeRect,
    TabulaModel,
)
from tabula.refs import validate_semantics
from tabula.values import NumberVal, TextVal

_LABELS = [
    "Total",
    "Grand \"Total\"",
    "a\\b",
    "pad # note",
    "Items sold",
    "C:\\tmp",
    "x = y",
    "100%",
    "",
]


@dataclass
class _Node:
    name: str
    children: list["_Node"] = field(default_factory=list)
    top: int = 0
    bottom: int = 0
    body: list[int] = field(default_factory=list)  # rows owned directly


def _grow(rng: random.Random, names: iter, depth: int) -> _Node:
    node = _Node(next(names))
    if depth < 3 and rng.random() < 0.45:
        for _ in range(rng.choice([1, 1, 2])):
            node.children.append(_grow(rng, names, depth + 1))
    return node


def _layout(node: _Node, top: int, rng: random.Random) -> int:
    """Assign row intervals; returns the row after the node."""
    node.top = top
    cur = top
    if node.children:
        for _ in range(rng.choice([1, 2])):
            node.body.append(cur)
            cur += 1
        for i, child in enumerate(node.children):
            if i > 0 and rng.random() < 0.5:
                node.body.append(cur)  # optional gap row between siblings
                cur += 1
            cur = _layout(child, cur, rng)
        node.body.append(cur)  # a parent row below the last child
        cur += 1
        if rng.random() < 0.3:
            node.body.append(cur)
            cur += 1
    else:
        for _ in range(rng.choice([1, 1, 2])):
            node.body.append(cur)
            cur += 1
    node.bottom = cur - 1
    return cur


def _flatten(node: _Node) -> list[_Node]:
    out = [node]
    for c in node.children:
        out.extend(_flatten(c))
    return out


def random_model(seed: int) -> TabulaModel:
    rng = random.Random(seed)
    names = iter(f"C{i}" for i in range(1, 100))

    # row structure: base wraps one or two top-level down sections
    root = _Node("Base")
    for _ in range(rng.choice([1, 1, 2])):
        root.children.append(_grow(rng, names, 1))
    height = _layout(root, 0, rng)
    down_nodes = _flatten(root)[1:]

    # column structure: fixed left, optional repeating band, fixed right
    left = rng.choice([1, 2])
    band = rng.choice([0, 1, 1, 2])  # width of the repeating column band
    right = rng.choice([1, 2])
    nested_band = band >= 1 and rng.random() < 0.25
    if nested_band:
        band = max(band, 3)  # inner band needs a column either side
    width = left + band + right

    classes = [ClassDef("Base", RangeRect(Point(0, 0), Point(width - 1, height - 1)), Expansion.NONE)]
    for n in down_nodes:
        classes.append(
            ClassDef(n.name, RangeRect(Point(0, n.top), Point(width - 1, n.bottom)), Expansion.DOWN)
        )
    bands: list[tuple[str, int, int]] = []
    if band:
        b0, b1 = left, left + band - 1
        bands.append(("R1", b0, b1))
        classes.append(
            ClassDef("R1", RangeRect(Point(b0, 0), Point(b1, height - 1)), Expansion.RIGHT)
        )
        if nested_band:
            bands.append(("R2", b0 + 1, b1 - 1))
            classes.append(
                ClassDef("R2", RangeRect(Point(b0 + 1, 0), Point(b1 - 1, height - 1)), Expansion.RIGHT)
            )
        for n in down_nodes:
            for rname, c0, c1 in bands:
                classes.append(
                    ClassDef(
                        f"{n.name}{rname}",
                        RangeRect(Point(c0, n.top), Point(c1, n.bottom)),
                        Expansion.BOTH,
                    )
                )

    # attributes: inputs in body rows, aggregates in parent body rows below
    # the children they sum over, scalar refs only to earlier cells
    cells: dict[Point, object] = {}
    counter = iter(range(1, 1000))
    inputs_by_node: dict[str, list[str]] = {n.name: [] for n in down_nodes}
    inputs_by_node["Base"] = []

    def new_input(p: Point, node_name: str) -> None:
        name = f"a{next(counter)}"
        if rng.random() < 0.3:
            default = TextVal(rng.choice(["", "x", "hi"]))
            constraint = None
        else:
            lo = rng.choice([0, 0, 1, 5])
            default = NumberVal(Decimal(rng.randint(lo, 9)))
            constraint = parse_constraint(f">={lo}") if rng.random() < 0.4 else None
        cells[p] = Input(name, default, constraint)
        inputs_by_node[node_name].append(name)

    def body_cols() -> list[int]:
        return list(range(width))

    all_nodes = [root] + down_nodes
    for n in all_nodes:
        descendants = _flatten(n)[1:]
        for row in n.body:
            below_children = n.children and row > n.children[0].top
            for col in body_cols():
                r = rng.random()
                if r < 0.35:
                    pool = [d for d in descendants if inputs_by_node[d.name]]
                    if below_children and pool and rng.random() < 0.65:
                        src = rng.choice(pool)
                        attr = rng.choice(inputs_by_node[src.name])
                        fn = rng.choice(["SUM", "AVERAGE", "COUNT"])
                        expr = Apply(fn, (Ref(attr),))
                        if rng.random() < 0.3:
                            expr = BinOp("+", expr, NumberLit(Decimal(rng.randint(0, 3))))
                        cells[Point(col, row)] = FormulaCell(f"f{next(counter)}", expr)
                    else:
                        new_input(Point(col, row), n.name)
                elif r < 0.6:
                    cells[Point(col, row)] = Label(rng.choice(_LABELS))

    # aggregated formulas may target text inputs; COUNT is fine with them
    # but SUM/AVERAGE only see numbers anyway, so everything remains valid
    model = TabulaModel("random", width, height, tuple(classes), cells)
    violations = validate_layout(model)
    if violations:
        raise AssertionError(f"generator bug (layout): {violations[0]}")
    errors = validate_semantics(model)
    if errors:
        raise AssertionError(f"generator bug (semantics): {errors[0]}")
    return model


# ---- random edits ----


def random_valid_op(rng: random.Random, model: TabulaModel, doc: InstanceDoc):
    """An operation that should usually be accepted. Structural picks may
    still get rejected (layout rules); callers treat rejection as a legal
    outcome and only assert atomicity."""
    kinds = ["value", "value", "value", "label", "object", "structure", "default",
             "constraint", "formula", "rename"]
    kind = rng.choice(kinds)
    inputs = [(p, c) for p, c in model.attr_cells() if isinstance(c, Input)]
    if kind == "value" and doc.values:
        addr = rng.choice(sorted(doc.values))
        point, _ = doc.index.model_cell_at(addr)
        cell = model.cells[point]
        if isinstance(cell.default, TextVal):
            return SetValue(addr, TextVal(rng.choice(["", "zz", "Grand"])))
        lo = 0
        if cell.constraint is not None:
            lo = int(max(b for _, b in cell.constraint.terms))
        return SetValue(addr, NumberVal(Decimal(rng.randint(lo, lo + 9))))
    if kind == "label" and doc.labels:
        addr = rng.choice(sorted(doc.labels))
        return SetLabelAt(addr, rng.choice([t for t in _LABELS if t]))
    if kind == "object":
        repeating = [c.name for c in down_classes(model)] + [c.name for c in right_classes(model)]
        if repeating:
            cls = rng.choice(repeating)
            ctxs = doc.index.contexts_for(
                [c for c in model.classes if c.name == cls], {}
            )
            grow = rng.random() < 0.6
            if grow:
                return AddObject(cls, (), None)
            n = len(ctxs)
            if n > 1:
                return RemoveObject(cls, (), rng.randrange(n))
            return AddObject(cls, (), None)
    if kind == "structure":
        cls = rng.choice(model.classes).name
        c = model.class_named(cls)
        op = rng.choice(["ar", "ac", "dr", "dc"])
        if op == "ar":
            return AddRow(cls, rng.randint(0, c.range.height))
        if op == "ac":
            return AddColumn(cls, rng.randint(0, c.range.width))
        if op == "dr":
            return DeleteRow(cls, rng.randint(0, c.range.height - 1))
        return DeleteColumn(cls, rng.randint(0, c.range.width - 1))
    if kind == "default" and inputs:
        point, cell = rng.choice(inputs)
        if isinstance(cell.default, TextVal):
            return SetDefault(point, TextVal(rng.choice(["", "d"])))
        lo = 0
        if cell.constraint is not None:
            lo = int(max(b for _, b in cell.constraint.terms))
        return SetDefault(point, NumberVal(Decimal(rng.randint(lo, lo + 5))))
    if kind == "constraint" and inputs:
        numeric = [(p, c) for p, c in inputs if isinstance(c.default, NumberVal)]
        if numeric:
            point, cell = rng.choice(numeric)
            if rng.random() < 0.3:
                return SetConstraint(point, None)
            bound = rng.randint(0, int(cell.default.num))
            return SetConstraint(point, parse_constraint(f">={bound}"))
    if kind == "formula":
        formulas = [(p, c) for p, c in model.attr_cells() if isinstance(c, FormulaCell)]
        if formulas:
            point, cell = rng.choice(formulas)
            return SetFormula(point, BinOp("+", cell.expr, NumberLit(Decimal(rng.randint(0, 2)))))
    if kind == "rename" and inputs:
        _, cell = rng.choice(inputs)
        return RenameAttribute(cell.name, f"{cell.name}x{rng.randint(0, 99)}")
    if doc.values:
        addr = rng.choice(sorted(doc.values))
        point, _ = doc.index.model_cell_at(addr)
        cell = model.cells[point]
        if isinstance(cell.default, TextVal):
            return SetValue(addr, TextVal("v"))
        lo = 0
        if cell.constraint is not None:
            lo = int(max(b for _, b in cell.constraint.terms))
        return SetValue(addr, NumberVal(Decimal(lo)))
    return SetLabel(Point(0, 0), "Title")


def random_invalid_op(rng: random.Random, model: TabulaModel, doc: InstanceDoc):
    """An operation that must be rejected without changing anything."""
    numeric = [
        addr
        for addr in sorted(doc.values)
        if isinstance(doc.values[addr], NumberVal)
    ]
    choices = ["type"] if numeric else []
    constrained = [
        addr
        for addr in sorted(doc.values)
        if (
            isinstance(
                (cell := model.cells[doc.index.model_cell_at(addr)[0]]), Input
            )
            and cell.constraint is not None
            and isinstance(cell.default, NumberVal)
        )
    ]
    if constrained:
        choices.append("constraint")
    choices += ["badclass", "badindex"]
    kind = rng.choice(choices)
    if kind == "type":
        return SetValue(rng.choice(numeric), TextVal("oops"))
    if kind == "constraint":
        return SetValue(rng.choice(constrained), NumberVal(Decimal(-1000)))
    if kind == "badclass":
        return AddObject("NoSuchClass", (), None)
    repeating = [c.name for c in down_classes(model)] + [c.name for c in right_classes(model)]
    if repeating:
        return RemoveObject(rng.choice(repeating), (), 10_000)
    return AddObject("NoSuchClass", (), None)


# ---- one-edit rule mutants of the bundled models ----


def _swap_class(model: TabulaModel, name: str, rng: RangeRect | None, exp: Expansion | None):
    from dataclasses import replace as _replace

    classes = []
    for c in model.classes:
        if c.name == name:
            classes.append(
                ClassDef(c.name, rng if rng is not None else c.range,
                         exp if exp is not None else c.expansion)
            )
        else:
            classes.append(c)
    return _replace(model, classes=tuple(classes))


def _drop_class(model: TabulaModel, name: str):
    from dataclasses import replace as _replace

    return _replace(model, classes=tuple(c for c in model.classes if c.name != name))


def rule_mutants() -> dict[str, TabulaModel]:
    """One model per layout rule, each a single edit away from a valid one
    and failing exactly that rule."""
    from tabula.fixtures import INVENTORY_MODEL, INVENTORY_YEAR_MODEL

    return {
        "R1": _swap_class(
            INVENTORY_MODEL, "Inventory", RangeRect(Point(0, 0), Point(1, 4)), None
        ),
        "R2": _swap_class(
            INVENTORY_MODEL, "Item", RangeRect(Point(0, 3), Point(0, 3)), None
        ),
        "R3": _swap_class(
            INVENTORY_YEAR_MODEL, "Category", RangeRect(Point(0, 0), Point(3, 4)), None
        ),
        "R4": _swap_class(
            INVENTORY_YEAR_MODEL, "Item", RangeRect(Point(0, 1), Point(3, 3)), None
        ),
        "R5": _drop_class(INVENTORY_YEAR_MODEL, "ItemYear"),
        "R6": _swap_class(INVENTORY_YEAR_MODEL, "Category", None, Expansion.BOTH),
    }

"""Attribute reference resolution and formula translation.

A formula names attributes; an instance needs cell addresses. Resolution maps
a name (optionally class-qualified) to the attribute cell it means, relative
to the cell the formula sits in. Translation then rewrites a formula for one
concrete cell of an instance: references whose repetition axes are all shared
with the referring cell become single addresses, references with free axes are
expanded over all matching objects inside an aggregate, and runs of adjacent
addresses are folded into ranges.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable

from .formula import (
    Apply,
    BinOp,
    CellAddr,
    CellRange,
    CellRef,
    Expr,
    NumberLit,
    Ref,
    TextLit,
    check_constraint,
)
from .layout import axes_at, classify, owner_of
from .model import FormulaCell, Input, Point, TabulaModel, cell_at
from .values import TabulaError, TextVal

if TYPE_CHECKING:
    from .instance import LayoutIndex

__all__ = [
    "RefBinding",
    "ResolveError",
    "TranslateError",
    "abstract_formula",
    "group_addrs",
    "resolve_ref",
    "rewrite_refs",
    "translate",
    "validate_semantics",
]


class ResolveError(TabulaError):
    """A reference does not name exactly one attribute cell."""


class TranslateError(TabulaError):
    """A formula cannot be mapped between model and instance form."""


Ctx = dict[str, int]


@dataclass(frozen=True)
class RefBinding:
    point: Point
    cell: Input | FormulaCell
    owner: str
    fixed_axes: frozenset[str]
    free_axes: frozenset[str]


def resolve_ref(model: TabulaModel, from_point: Point, ref: Ref) -> RefBinding:
    """Bind a reference written at from_point to its attribute cell.

    Unqualified names prefer attributes owned by the referring cell's own
    class, then fall back to a unique match anywhere. Qualified names must
    match an attribute owned by exactly the named class.
    """
    candidates = [(p, c) for p, c in model.attr_cells() if c.name == ref.name]
    if ref.qualifier is not None:
        if model.class_named(ref.qualifier) is None:
            raise ResolveError(f"unknown class {ref.qualifier}")
        owned = [(p, c) for p, c in candidates if owner_of(model, p).name == ref.qualifier]
        if not owned:
            raise ResolveError(f"class {ref.qualifier} has no attribute {ref.name}")
        if len(owned) > 1:
            raise ResolveError(f"attribute {ref.name} is ambiguous in class {ref.qualifier}")
        point, cell = owned[0]
    else:
        if not candidates:
            raise ResolveError(f"unknown attribute {ref.name}")
        own_cls = owner_of(model, from_point).name
        owned = [(p, c) for p, c in candidates if owner_of(model, p).name == own_cls]
        if len(owned) == 1:
            point, cell = owned[0]
        elif len(owned) > 1:
            raise ResolveError(f"attribute {ref.name} is ambiguous in class {own_cls}")
        elif len(candidates) == 1:
            point, cell = candidates[0]
        else:
            raise ResolveError(f"attribute {ref.name} is ambiguous; qualify it with a class")
    here = axes_at(model, from_point)
    there = axes_at(model, point)
    return RefBinding(
        point=point,
        cell=cell,
        owner=owner_of(model, point).name,
        fixed_axes=frozenset(here & there),
        free_axes=frozenset(there - here),
    )


# ---- grouping addresses into ranges ----


def group_addrs(addrs: Iterable[CellAddr]) -> list[CellRef | CellRange]:
    """Fold addresses into column runs, then leftover single cells into row
    runs; emitted in row-major order of their top-left corner."""
    uniq = sorted(set(addrs), key=lambda a: (a.col, a.row))
    runs: list[tuple[CellAddr, CellAddr]] = []
    i = 0
    while i < len(uniq):
        j = i
        while (
            j + 1 < len(uniq)
            and uniq[j + 1].col == uniq[j].col
            and uniq[j + 1].row == uniq[j].row + 1
        ):
            j += 1
        runs.append((uniq[i], uniq[j]))
        i = j + 1
    tall = [r for r in runs if r[0] != r[1]]
    singles = sorted((r[0] for r in runs if r[0] == r[1]), key=lambda a: (a.row, a.col))
    wide: list[tuple[CellAddr, CellAddr]] = []
    i = 0
    while i < len(singles):
        j = i
        while (
            j + 1 < len(singles)
            and singles[j + 1].row == singles[j].row
            and singles[j + 1].col == singles[j].col + 1
        ):
            j += 1
        wide.append((singles[i], singles[j]))
        i = j + 1
    out = tall + wide
    out.sort(key=lambda r: (r[0].row, r[0].col))
    return [CellRef(s) if s == e else CellRange(s, e) for s, e in out]


# ---- translation model -> instance ----


def translate(
    model: TabulaModel,
    index: "LayoutIndex",
    from_point: Point,
    ctx: Ctx,
    expr: Expr,
) -> Expr:
    """Rewrite a model formula as an A1 expression for one instance cell."""
    return _tr(model, index, from_point, ctx, expr)


def _target_addr(
    model: TabulaModel, index: "LayoutIndex", ctx: Ctx, binding: RefBinding
) -> CellAddr:
    target_axes = axes_at(model, binding.point)
    return index.addr_of(binding.point, {k: ctx[k] for k in target_axes})


def _tr(
    model: TabulaModel, index: "LayoutIndex", from_point: Point, ctx: Ctx, expr: Expr
) -> Expr:
    if isinstance(expr, (NumberLit, TextLit)):
        return expr
    if isinstance(expr, Ref):
        binding = resolve_ref(model, from_point, expr)
        if binding.free_axes:
            raise TranslateError(
                f"{expr} ranges over {', '.join(sorted(binding.free_axes))}; "
                "it can only appear inside an aggregate"
            )
        return CellRef(_target_addr(model, index, ctx, binding))
    if isinstance(expr, Apply):
        args: list[Expr] = []
        for a in expr.args:
            if isinstance(a, Ref):
                binding = resolve_ref(model, from_point, a)
                if binding.free_axes:
                    target_axes = axes_at(model, binding.point)
                    fixed_ctx = {k: ctx[k] for k in binding.fixed_axes}
                    ctxs = index.contexts_for(target_axes, fixed_ctx)
                    addrs = [index.addr_of(binding.point, c) for c in ctxs]
                    args.extend(group_addrs(addrs))
                    continue
            args.append(_tr(model, index, from_point, ctx, a))
        return Apply(expr.fn, tuple(args))
    if isinstance(expr, BinOp):
        return BinOp(
            expr.op,
            _tr(model, index, from_point, ctx, expr.left),
            _tr(model, index, from_point, ctx, expr.right),
        )
    raise TranslateError(f"cannot translate {expr!r}")


# ---- abstraction instance -> model (inverse translation) ----


def _ref_for(
    model: TabulaModel, at_point: Point, target_point: Point, name: str
) -> Ref:
    """Write a reference for target as seen from at_point, qualifying only
    when the bare name does not bind there."""
    try:
        if resolve_ref(model, at_point, Ref(name)).point == target_point:
            return Ref(name)
    except ResolveError:
        pass
    owner = owner_of(model, target_point).name
    try:
        if resolve_ref(model, at_point, Ref(name, owner)).point == target_point:
            return Ref(name, owner)
    except ResolveError:
        pass
    raise TranslateError(f"no reference from {at_point} reaches {name} at {target_point}")


def _frozen(ctx: Ctx) -> frozenset:
    return frozenset(ctx.items())


def abstract_formula(
    model: TabulaModel,
    index: "LayoutIndex",
    at_point: Point,
    at_ctx: Ctx,
    expr: Expr,
) -> Expr:
    """Lift an A1 expression written at one instance cell back to a model
    formula. Fails unless every referenced address is an attribute cell whose
    context agrees with the writing cell, and every aggregate covers each
    referenced attribute's full object family."""
    if isinstance(expr, (NumberLit, TextLit)):
        return expr
    if isinstance(expr, CellRef):
        point, ctx = index.model_cell_at(expr.addr)
        cell = cell_at(model, point)
        if not isinstance(cell, (Input, FormulaCell)):
            raise TranslateError(f"{expr.addr} is not an attribute cell")
        here = axes_at(model, at_point)
        there = axes_at(model, point)
        if not there <= here:
            free = ", ".join(sorted(there - here))
            raise TranslateError(f"{expr.addr} ranges over {free}; aggregate it")
        if ctx != {k: at_ctx[k] for k in there}:
            raise TranslateError(f"{expr.addr} belongs to a different object")
        return _ref_for(model, at_point, point, cell.name)
    if isinstance(expr, CellRange):
        raise TranslateError("range outside an aggregate")
    if isinstance(expr, BinOp):
        return BinOp(
            expr.op,
            abstract_formula(model, index, at_point, at_ctx, expr.left),
            abstract_formula(model, index, at_point, at_ctx, expr.right),
        )
    if isinstance(expr, Apply):
        groups: dict[Point, set[frozenset]] = {}
        plan: list[tuple[str, object]] = []
        for a in expr.args:
            if isinstance(a, (CellRef, CellRange)):
                addrs = [a.addr] if isinstance(a, CellRef) else list(a.addrs())
                for addr in addrs:
                    point, ctx = index.model_cell_at(addr)
                    cell = cell_at(model, point)
                    if not isinstance(cell, (Input, FormulaCell)):
                        raise TranslateError(f"{addr} is not an attribute cell")
                    if point not in groups:
                        groups[point] = set()
                        plan.append(("group", point))
                    groups[point].add(_frozen(ctx))
            else:
                plan.append(("expr", abstract_formula(model, index, at_point, at_ctx, a)))
        here = axes_at(model, at_point)
        args: list[Expr] = []
        for kind, val in plan:
            if kind == "expr":
                args.append(val)  # type: ignore[arg-type]
                continue
            point = val  # type: ignore[assignment]
            cell = cell_at(model, point)
            assert isinstance(cell, (Input, FormulaCell))
            there = axes_at(model, point)
            fixed_ctx = {k: at_ctx[k] for k in there & here}
            if there <= here:
                expected = {_frozen(fixed_ctx)}
            else:
                expected = {_frozen(c) for c in index.contexts_for(there, fixed_ctx)}
            if groups[point] != expected:
                raise TranslateError(
                    f"cells for {cell.name} do not match its objects exactly"
                )
            args.append(_ref_for(model, at_point, point, cell.name))
        return Apply(expr.fn, tuple(args))
    raise TranslateError(f"cannot abstract {expr!r}")


def rewrite_refs(expr: Expr, fn) -> Expr:
    """Rebuild an expression, mapping each Ref through fn."""
    if isinstance(expr, Ref):
        return fn(expr)
    if isinstance(expr, Apply):
        return Apply(expr.fn, tuple(rewrite_refs(a, fn) for a in expr.args))
    if isinstance(expr, BinOp):
        return BinOp(expr.op, rewrite_refs(expr.left, fn), rewrite_refs(expr.right, fn))
    return expr


# ---- whole-model semantic checks ----


def validate_semantics(model: TabulaModel) -> list[tuple[Point, str]]:
    """Checks beyond layout: attribute names unique per class, every
    reference resolves, free references are aggregated, defaults satisfy
    their constraints, no formula cycles. Assumes a layout-valid model."""
    classify(model)  # raises InvariantError on layout-broken models
    errors: list[tuple[Point, str]] = []
    seen: dict[tuple[str, str], Point] = {}
    for p, cell in model.attr_cells():
        own = owner_of(model, p).name
        key = (own, cell.name)
        if key in seen:
            errors.append((p, f"duplicate attribute {cell.name} in class {own}"))
        else:
            seen[key] = p
        if isinstance(cell, Input) and cell.constraint is not None:
            if isinstance(cell.default, TextVal):
                errors.append((p, f"constraint on text input {cell.name}"))
            elif not check_constraint(cell.constraint, cell.default):
                errors.append(
                    (p, f"default {cell.default} violates constraint {cell.constraint}")
                )
    edges: dict[Point, set[Point]] = {}
    for p, cell in model.attr_cells():
        if isinstance(cell, FormulaCell):
            edges[p] = set()
            _check_formula(model, p, cell.expr, False, errors, edges[p])
    cycle_cell = _find_cycle(edges)
    if cycle_cell is not None:
        name = cell_at(model, cycle_cell)
        assert isinstance(name, FormulaCell)
        errors.append((cycle_cell, f"formula cycle involving {name.name}"))
    return sorted(errors, key=lambda e: (e[0].row, e[0].col, e[1]))


def _check_formula(
    model: TabulaModel,
    p: Point,
    expr: Expr,
    in_agg_arg: bool,
    errors: list[tuple[Point, str]],
    targets: set[Point],
) -> None:
    if isinstance(expr, Ref):
        try:
            binding = resolve_ref(model, p, expr)
        except ResolveError as exc:
            errors.append((p, str(exc)))
            return
        targets.add(binding.point)
        if binding.free_axes and not in_agg_arg:
            free = ", ".join(sorted(binding.free_axes))
            errors.append((p, f"{expr} ranges over {free}; aggregate it"))
    elif isinstance(expr, Apply):
        for a in expr.args:
            _check_formula(model, p, a, isinstance(a, Ref), errors, targets)
    elif isinstance(expr, BinOp):
        _check_formula(model, p, expr.left, False, errors, targets)
        _check_formula(model, p, expr.right, False, errors, targets)


def _find_cycle(edges: dict[Point, set[Point]]) -> Point | None:
    WHITE, GRAY, BLACK = 0, 1, 2
    color = {p: WHITE for p in edges}

    def visit(p: Point) -> Point | None:
        color[p] = GRAY
        for q in edges.get(p, ()):
            if q not in color:
                continue  # inputs terminate paths
            if color[q] == GRAY:
                return q
            if color[q] == WHITE:
                found = visit(q)
                if found is not None:
                    return found
        color[p] = BLACK
        return None

    for p in sorted(edges, key=lambda q: (q.row, q.col)):
        if color[p] == WHITE:
            found = visit(p)
            if found is not None:
                return found
    return None

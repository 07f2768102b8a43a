"""Layout rules and the class structure they induce.

A valid model has exactly one base class covering the grid; every other class
is either a simple child (spanning its parent's full width or height, with a
separating parent row/column on both sides) or a relation class sitting on the
intersection of two crossing classes. Validation is staged: rules are checked
in order R1..R6 and the first failing rule's violations are reported, since
later rules are only meaningful on top of the earlier ones.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

from .model import ClassDef, Expansion, Point, RangeRect, TabulaModel
from .values import TabulaError

__all__ = [
    "ClassInfo",
    "ClassRole",
    "InvariantError",
    "LayoutViolation",
    "axes_at",
    "class_order",
    "classify",
    "down_classes",
    "owner_of",
    "right_classes",
    "validate_layout",
]


class InvariantError(TabulaError):
    """An operation assumed a valid model and got something else."""


class ClassRole(enum.Enum):
    BASE = "base"
    VERTICAL = "vertical"
    HORIZONTAL = "horizontal"
    RELATION = "relation"


@dataclass(frozen=True)
class ClassInfo:
    cls: ClassDef
    role: ClassRole
    # () for the base, (parent,) for simple children, (vertical, horizontal)
    # for relations
    parents: tuple[str, ...]


@dataclass(frozen=True)
class LayoutViolation:
    rule: str  # R1..R6
    class_name: str
    message: str

    def __str__(self) -> str:
        if not self.class_name:
            return f"{self.rule} {self.message}"
        return f"{self.rule} {self.class_name} {self.message}"


def _sorted(violations: list[LayoutViolation]) -> list[LayoutViolation]:
    return sorted(violations, key=lambda v: (v.rule, v.class_name, v.message))


# ---- interval helpers ----


def _rows(c: ClassDef) -> tuple[int, int]:
    return (c.range.top, c.range.bottom)


def _cols(c: ClassDef) -> tuple[int, int]:
    return (c.range.left, c.range.right)


def _iv_contains(outer: tuple[int, int], inner: tuple[int, int]) -> bool:
    return outer[0] <= inner[0] and inner[1] <= outer[1]


def _iv_disjoint(a: tuple[int, int], b: tuple[int, int]) -> bool:
    return a[1] < b[0] or b[1] < a[0]


# ---- classification (rule R2) ----


def _relation_candidates(
    c: ClassDef, containers: list[ClassDef]
) -> list[tuple[ClassDef, ClassDef]]:
    out = []
    for i, a in enumerate(containers):
        for b in containers[i + 1 :]:
            if a.range.contains(b.range) or b.range.contains(a.range):
                continue
            if a.range.intersect(b.range) == c.range:
                out.append((a, b))
    return out


def _pair_dominates(
    q: tuple[ClassDef, ClassDef], p: tuple[ClassDef, ClassDef]
) -> bool:
    """q's parents are at least as tight as p's (and q differs from p)."""
    if {q[0].name, q[1].name} == {p[0].name, p[1].name}:
        return False
    a, b = p
    a2, b2 = q
    return (a.range.contains(a2.range) and b.range.contains(b2.range)) or (
        a.range.contains(b2.range) and b.range.contains(a2.range)
    )


def _orient(pair: tuple[ClassDef, ClassDef], c: ClassDef) -> tuple[ClassDef, ClassDef]:
    """Order a relation's parents (column provider, row provider)."""
    a, b = pair
    if _iv_contains(_cols(b), _cols(a)) and _iv_contains(_rows(a), _rows(b)):
        return a, b
    if _iv_contains(_cols(a), _cols(b)) and _iv_contains(_rows(b), _rows(a)):
        return b, a
    return (a, b) if a.range.height >= b.range.height else (b, a)


def _classify(
    model: TabulaModel, base: ClassDef
) -> tuple[dict[str, ClassInfo], list[LayoutViolation]]:
    infos: dict[str, ClassInfo] = {
        base.name: ClassInfo(base, ClassRole.BASE, ())
    }
    violations: list[LayoutViolation] = []
    for c in model.classes:
        if c.name == base.name:
            continue
        containers = [
            d for d in model.classes if d.name != c.name and d.range.strictly_contains(c.range)
        ]
        cands = _relation_candidates(c, containers)
        if cands:
            minimal = [p for p in cands if not any(_pair_dominates(q, p) for q in cands)]
            named = {frozenset((a.name, b.name)) for a, b in minimal}
            if len(named) != 1:
                violations.append(
                    LayoutViolation("R2", c.name, "has ambiguous relation parents")
                )
                continue
            v, h = _orient(minimal[0], c)
            infos[c.name] = ClassInfo(c, ClassRole.RELATION, (v.name, h.name))
            continue
        if not containers:
            violations.append(
                LayoutViolation("R2", c.name, "is not contained in any other class")
            )
            continue
        mins = [
            d
            for d in containers
            if not any(
                e.name != d.name and d.range.strictly_contains(e.range) for e in containers
            )
        ]
        best = min(mins, key=lambda d: d.range.area)
        if sum(1 for d in mins if d.range.area == best.range.area) > 1:
            violations.append(LayoutViolation("R2", c.name, "has ambiguous parent classes"))
            continue
        p = best
        if _rows(c) == _rows(p):
            role = ClassRole.VERTICAL
        elif _cols(c) == _cols(p):
            role = ClassRole.HORIZONTAL
        else:
            violations.append(
                LayoutViolation(
                    "R2", c.name, f"must span the full width or height of {p.name}"
                )
            )
            continue
        infos[c.name] = ClassInfo(c, role, (p.name,))
    # wrong single-direction expansions are misalignments, reported here;
    # misuse of both-ways expansion is rule R6
    for info in infos.values():
        exp = info.cls.expansion
        if info.role is ClassRole.BASE and exp in (Expansion.DOWN, Expansion.RIGHT):
            violations.append(
                LayoutViolation("R2", info.cls.name, "base class cannot repeat")
            )
        elif info.role is ClassRole.VERTICAL and exp is Expansion.DOWN:
            violations.append(
                LayoutViolation(
                    "R2", info.cls.name, "spans its parent's height, so it can only repeat right"
                )
            )
        elif info.role is ClassRole.HORIZONTAL and exp is Expansion.RIGHT:
            violations.append(
                LayoutViolation(
                    "R2", info.cls.name, "spans its parent's width, so it can only repeat down"
                )
            )
    return infos, violations


# ---- rule R4/R5 cross detection ----


def _valid_cross(a: ClassDef, b: ClassDef) -> tuple[ClassDef, ClassDef] | None:
    """Return (vertical side, horizontal side) if a and b cross cleanly."""
    if _iv_contains(_cols(b), _cols(a)) and _iv_contains(_rows(a), _rows(b)):
        return a, b
    if _iv_contains(_cols(a), _cols(b)) and _iv_contains(_rows(b), _rows(a)):
        return b, a
    return None


def validate_layout(model: TabulaModel) -> list[LayoutViolation]:
    """Check rules R1..R6; returns the first failing rule's violations."""
    grid = model.grid
    # R1: exactly one class covers the whole grid
    bases = [c for c in model.classes if c.range == grid]
    if not model.classes:
        return [LayoutViolation("R1", "", "model has no classes")]
    if not bases:
        maximal = [
            c
            for c in model.classes
            if not any(d.range.strictly_contains(c.range) for d in model.classes)
        ]
        return _sorted(
            [LayoutViolation("R1", c.name, "base class must cover grid") for c in maximal]
        )
    if len(bases) > 1:
        return _sorted(
            [
                LayoutViolation("R1", c.name, "multiple classes cover the whole grid")
                for c in bases
            ]
        )
    base = bases[0]

    # R2: every class classifies as child or relation, repeating the right way
    infos, violations = _classify(model, base)
    if violations:
        return _sorted(violations)

    # R3: simple children leave a parent row/column on both sides
    for info in infos.values():
        c = info.cls
        if info.role is ClassRole.HORIZONTAL:
            p = next(d for d in model.classes if d.name == info.parents[0])
            if not (p.range.top < c.range.top and c.range.bottom < p.range.bottom):
                violations.append(
                    LayoutViolation(
                        "R3", c.name, f"needs a parent row above and below within {p.name}"
                    )
                )
        elif info.role is ClassRole.VERTICAL:
            p = next(d for d in model.classes if d.name == info.parents[0])
            if not (p.range.left < c.range.left and c.range.right < p.range.right):
                violations.append(
                    LayoutViolation(
                        "R3", c.name, f"needs a parent column left and right within {p.name}"
                    )
                )
    if violations:
        return _sorted(violations)

    # R4: overlaps are containments or clean crossings; repetition rows/cols
    # of same-direction classes must not collide
    crosses: list[tuple[ClassDef, ClassDef]] = []
    for i, a in enumerate(model.classes):
        for b in model.classes[i + 1 :]:
            if a.range == b.range:
                violations.append(
                    LayoutViolation("R4", b.name, f"shares the exact range of {a.name}")
                )
                continue
            if not a.range.contains(b.range) and not b.range.contains(a.range):
                if a.range.intersect(b.range) is not None:
                    cross = _valid_cross(a, b)
                    if cross is None:
                        violations.append(
                            LayoutViolation(
                                "R4",
                                b.name,
                                f"overlaps {a.name} without containment or a proper crossing",
                            )
                        )
                        continue
                    crosses.append(cross)
            # ambiguous repetition: two down classes on the same rows (or two
            # right classes on the same columns) cannot expand independently
            if a.expansion is Expansion.DOWN and b.expansion is Expansion.DOWN:
                ra, rb = _rows(a), _rows(b)
                if ra == rb:
                    violations.append(
                        LayoutViolation("R4", b.name, f"repeats over the same rows as {a.name}")
                    )
                elif not (
                    _iv_disjoint(ra, rb) or _iv_contains(ra, rb) or _iv_contains(rb, ra)
                ):
                    violations.append(
                        LayoutViolation(
                            "R4", b.name, f"repetition rows interleave with {a.name}"
                        )
                    )
            if a.expansion is Expansion.RIGHT and b.expansion is Expansion.RIGHT:
                ca, cb = _cols(a), _cols(b)
                if ca == cb:
                    violations.append(
                        LayoutViolation(
                            "R4", b.name, f"repeats over the same columns as {a.name}"
                        )
                    )
                elif not (
                    _iv_disjoint(ca, cb) or _iv_contains(ca, cb) or _iv_contains(cb, ca)
                ):
                    violations.append(
                        LayoutViolation(
                            "R4", b.name, f"repetition columns interleave with {a.name}"
                        )
                    )
    if violations:
        return _sorted(violations)

    # R5: every clean crossing is materialized by a class on the intersection
    for v, h in crosses:
        inter = v.range.intersect(h.range)
        assert inter is not None
        if not any(c.range == inter for c in model.classes):
            violations.append(
                LayoutViolation(
                    "R5", v.name, f"crossing with {h.name} needs a class at {inter}"
                )
            )
    if violations:
        return _sorted(violations)

    # R6: both-ways expansion exactly on relation classes
    for info in infos.values():
        if info.role is ClassRole.RELATION and info.cls.expansion is not Expansion.BOTH:
            violations.append(
                LayoutViolation("R6", info.cls.name, "relation class must expand both ways")
            )
        elif info.role is not ClassRole.RELATION and info.cls.expansion is Expansion.BOTH:
            violations.append(
                LayoutViolation(
                    "R6", info.cls.name, "only relation classes may expand both ways"
                )
            )
    return _sorted(violations)


def classify(model: TabulaModel) -> dict[str, ClassInfo]:
    """Role and parents per class. The model must pass validate_layout."""
    grid = model.grid
    bases = [c for c in model.classes if c.range == grid]
    if len(bases) != 1:
        raise InvariantError("model has no unique base class")
    infos, violations = _classify(model, bases[0])
    if violations:
        raise InvariantError(f"model fails layout validation: {violations[0]}")
    return infos


def class_order(model: TabulaModel) -> list[tuple[str, str]]:
    """Parent -> child edges of the class DAG, in declaration order."""
    infos = classify(model)
    edges = []
    for c in model.classes:
        for p in infos[c.name].parents:
            edges.append((p, c.name))
    return edges


def owner_of(model: TabulaModel, p: Point) -> ClassDef:
    """The smallest class whose range contains the point."""
    p = Point(*p)
    holders = [c for c in model.classes if c.range.contains_point(p)]
    if not holders:
        raise InvariantError(f"no class contains {p}")
    best = min(holders, key=lambda c: c.range.area)
    ties = [c for c in holders if c.range.area == best.range.area]
    if len(ties) > 1:
        raise InvariantError(f"ambiguous owner for {p}")
    return best


def down_classes(model: TabulaModel) -> list[ClassDef]:
    return [c for c in model.classes if c.expansion is Expansion.DOWN]


def right_classes(model: TabulaModel) -> list[ClassDef]:
    return [c for c in model.classes if c.expansion is Expansion.RIGHT]


def axes_at(model: TabulaModel, p: Point) -> frozenset[str]:
    """Repetition axes of a point: the down classes whose rows span it plus
    the right classes whose columns span it.

    Relation classes are not independent axes; their objects are the cross
    product of their parents'.
    """
    p = Point(*p)
    axes = {c.name for c in down_classes(model) if c.range.top <= p.row <= c.range.bottom}
    axes |= {c.name for c in right_classes(model) if c.range.left <= p.col <= c.range.right}
    return frozenset(axes)

import pytest

from tabula.fixtures import (
    BUDGET_MODEL,
    BUDGET_STATIC_MODEL,
    INVENTORY_MODEL,
    INVENTORY_YEAR_MODEL,
)
from tabula.model import (
    BoundsError,
    ClassDef,
    Expansion,
    FormulaCell,
    Input,
    Label,
    Point,
    RangeRect,
    TabulaModel,
    cell_at,
    is_identifier,
    metrics,
)
from tabula.values import NumberVal, TextVal


def test_point_and_rect_geometry():
    r = RangeRect(Point(0, 2), Point(1, 4))
    assert str(r) == "(0,2)..(1,4)"
    assert (r.width, r.height, r.area) == (2, 3, 6)
    assert r.contains_point(Point(1, 3))
    assert not r.contains_point(Point(2, 3))
    inner = RangeRect(Point(0, 3), Point(1, 3))
    assert r.contains(inner) and r.strictly_contains(inner)
    assert not r.strictly_contains(r)
    other = RangeRect(Point(1, 0), Point(1, 5))
    assert r.intersect(other) == RangeRect(Point(1, 2), Point(1, 4))
    assert r.intersect(RangeRect(Point(5, 5), Point(6, 6))) is None


def test_rect_rejects_inverted_corners():
    with pytest.raises(BoundsError):
        RangeRect(Point(1, 4), Point(0, 2))


def test_identifier_rules():
    assert is_identifier("stock")
    assert is_identifier("a_1")
    assert not is_identifier("1a")
    assert not is_identifier("")
    assert not is_identifier("a-b")


def test_model_rejects_bad_shapes():
    grid = RangeRect(Point(0, 0), Point(1, 1))
    base = ClassDef("B", grid, Expansion.NONE)
    with pytest.raises(BoundsError):  # duplicate class name
        TabulaModel("m", 2, 2, (base, ClassDef("B", grid, Expansion.NONE)), {})
    with pytest.raises(BoundsError):  # class outside grid
        TabulaModel("m", 2, 2, (ClassDef("C", RangeRect(Point(0, 0), Point(5, 5)), Expansion.NONE),), {})
    with pytest.raises(BoundsError):  # cell outside grid
        TabulaModel("m", 2, 2, (base,), {Point(4, 4): Label("x")})
    with pytest.raises(BoundsError):  # attribute name must be an identifier
        TabulaModel("m", 2, 2, (base,), {Point(0, 0): Input("9x", NumberVal(0))})
    with pytest.raises(BoundsError):  # control characters in label text
        TabulaModel("m", 2, 2, (base,), {Point(0, 0): Label("a\x01b")})
    with pytest.raises(BoundsError):  # zero-size grid
        TabulaModel("m", 0, 2, (base,), {})


def test_empty_labels_are_dropped():
    grid = RangeRect(Point(0, 0), Point(1, 1))
    m = TabulaModel("m", 2, 2, (ClassDef("B", grid, Expansion.NONE),),
                    {Point(0, 0): Label(""), Point(1, 1): Label("x")})
    assert Point(0, 0) not in m.cells
    # reading an empty position still answers with a blank label
    assert cell_at(m, Point(0, 0)) == Label("")
    with pytest.raises(BoundsError):
        cell_at(m, Point(9, 9))


def test_attr_cells_row_major():
    points = [p for p, _ in INVENTORY_MODEL.attr_cells()]
    assert points == sorted(points, key=lambda p: (p.row, p.col))


def test_cell_value_types():
    c = Input("x", TextVal(""))
    assert c.value_type.value == "text"
    f = FormulaCell.parse("t", "SUM(x)")
    assert f.text == "SUM(x)"


def test_metrics_rows():
    assert metrics(INVENTORY_MODEL).row() == "2 6 3 3 2 1"
    assert metrics(BUDGET_MODEL).row() == "3 12 10 16 6 10"
    assert metrics(BUDGET_STATIC_MODEL).row() == "14 12 5 81 27 54"
    m = metrics(INVENTORY_YEAR_MODEL)
    assert (m.width, m.height, m.classes) == (4, 6, 6)
    assert m.attributes == m.inputs + m.formulas

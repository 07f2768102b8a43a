import dataclasses
import json
from decimal import Decimal

import pytest

from tabula.fixtures import (
    FIXTURES,
    INVENTORY_MODEL,
    apple_years_fig_instance,
    inventory_fig_instance,
    inventory_year_fig_instance,
    items_fig_instance,
)
from tabula.formula import CellAddr, CycleError, parse_addr
from tabula.instance import (
    Block,
    ExpansionError,
    StructureError,
    add_object,
    check,
    create,
    evaluate,
    export_csv,
    instance_to_json,
    load_instance,
    recalc,
    remove_object,
    save_instance,
    set_value,
    tree_from_json,
    tree_to_json,
)
from tabula.model import Point
from tabula.refs import TranslateError
from tabula.values import NumberVal, TextVal


def test_figure_instance_dimensions():
    doc = inventory_fig_instance()
    assert (doc.width, doc.height) == (2, 12)
    docy = inventory_year_fig_instance()
    assert (docy.width, docy.height) == (6, 12)


def test_addressing_round_trip():
    doc = inventory_fig_instance()
    idx = doc.index
    assert str(idx.addr_of(Point(1, 5), {})) == "B12"
    assert str(idx.addr_of(Point(1, 3), {"Category": 1, "Item": 0})) == "B9"
    assert idx.model_cell_at(parse_addr("B9")) == (Point(1, 3), {"Category": 1, "Item": 0})
    assert idx.model_cell_at(parse_addr("A1")) == (Point(0, 0), {})
    with pytest.raises(TranslateError, match=r"no cell for \(1,3\) in context \{\}"):
        idx.addr_of(Point(1, 3), {})
    with pytest.raises(TranslateError, match="F6 is outside the instance grid"):
        idx.model_cell_at(CellAddr(5, 5))


def test_contexts_for_enumerates_objects():
    idx = inventory_fig_instance().index
    axes = frozenset({"Category", "Item"})
    assert idx.contexts_for(axes, {}) == [
        {"Category": 0, "Item": 0},
        {"Category": 0, "Item": 1},
        {"Category": 0, "Item": 2},
        {"Category": 1, "Item": 0},
        {"Category": 1, "Item": 1},
    ]
    assert idx.contexts_for(axes, {"Category": 1}) == [
        {"Category": 1, "Item": 0},
        {"Category": 1, "Item": 1},
    ]


def test_blocks_cover_every_object():
    got = inventory_fig_instance().index.blocks()
    assert got == [
        Block("Category", "row", {"Category": 0}, 2, 6),
        Block("Item", "row", {"Category": 0, "Item": 0}, 3, 3),
        Block("Item", "row", {"Category": 0, "Item": 1}, 4, 4),
        Block("Item", "row", {"Category": 0, "Item": 2}, 5, 5),
        Block("Category", "row", {"Category": 1}, 7, 10),
        Block("Item", "row", {"Category": 1, "Item": 0}, 8, 8),
        Block("Item", "row", {"Category": 1, "Item": 1}, 9, 9),
    ]


def test_create_uses_one_object_per_class():
    doc = create(INVENTORY_MODEL)
    assert (doc.width, doc.height) == (2, 6)
    assert doc.values[parse_addr("B4")] == NumberVal(0)
    assert check(INVENTORY_MODEL, doc) == []


def test_set_value_recalculates():
    doc = inventory_fig_instance()
    assert doc.computed[parse_addr("B12")] == NumberVal(32)
    d2, diags = set_value(doc, parse_addr("B4"), NumberVal(7))
    assert diags == []
    assert d2.computed[parse_addr("B12")] == NumberVal(34)
    # the original document is untouched
    assert doc.values[parse_addr("B4")] == NumberVal(5)


def test_set_value_diagnostics():
    doc = inventory_fig_instance()

    def diag_strs(addr, value):
        _, diags = set_value(doc, parse_addr(addr), value)
        return [str(d) for d in diags]

    assert diag_strs("B4", TextVal("x")) == ["TypeError B4 stock expects a number"]
    assert diag_strs("B4", NumberVal(-1)) == ["ConstraintViolation B4 -1 violates >=0"]
    assert diag_strs("B12", NumberVal(0)) == ["StructureError B12 not an input cell"]
    assert diag_strs("A1", NumberVal(0)) == ["StructureError A1 not an input cell"]
    assert diag_strs("J10", NumberVal(0)) == ["StructureError J10 not an input cell"]


def test_add_object_shifts_and_reseeds():
    doc = inventory_fig_instance()
    d2 = add_object(doc, "Item", {"Category": 0}, at=None)
    assert d2.height == 13
    # appended row carries defaults, later rows shifted down one
    assert d2.values[parse_addr("B7")] == NumberVal(0)
    assert d2.values[parse_addr("A7")] == TextVal("")
    assert d2.values[parse_addr("B10")] == NumberVal(7)
    assert d2.formulas[parse_addr("B13")] == "SUM(B4:B7,B10:B11)"
    assert check(d2.model, d2) == []
    # removing it restores the original document exactly
    d3 = remove_object(d2, "Item", {"Category": 0}, 3)
    assert (d3.values, d3.labels, d3.formulas) == (doc.values, doc.labels, doc.formulas)


def test_add_object_at_position():
    doc = inventory_fig_instance()
    d2 = add_object(doc, "Item", {"Category": 0}, at=0)
    assert d2.values[parse_addr("B4")] == NumberVal(0)
    assert d2.values[parse_addr("B5")] == NumberVal(5)


def test_add_object_on_column_axis_seeds_nested_cells():
    doc = inventory_year_fig_instance()
    d2 = add_object(doc, "Year", {}, at=None)
    assert d2.width == 8
    assert d2.formulas[parse_addr("F12")] == "SUM(F4:F6,F9:F10)"
    # the new year spans columns F:G and carries the default year input
    assert d2.values[parse_addr("F1")] == NumberVal(2000)
    assert d2.values[parse_addr("F4")] == NumberVal(0)
    assert check(d2.model, d2) == []


def test_object_errors():
    doc = inventory_fig_instance()
    with pytest.raises(ExpansionError, match="Inventory does not repeat"):
        add_object(doc, "Inventory", {}, at=None)
    with pytest.raises(ExpansionError, match="Item needs an object index for Category"):
        add_object(doc, "Item", {}, at=None)
    with pytest.raises(ExpansionError, match=r"no Category object at \(5,\)"):
        add_object(doc, "Item", {"Category": 5}, at=None)
    with pytest.raises(ExpansionError, match="no object 9; Item has 3 here"):
        remove_object(doc, "Item", {"Category": 0}, 9)
    with pytest.raises(ExpansionError, match="insert position 7 outside 0..3"):
        add_object(doc, "Item", {"Category": 0}, at=7)


def test_check_diagnostic_kinds():
    doc = items_fig_instance()

    def tampered(**field):
        return dataclasses.replace(doc, **field)

    bad_type = tampered(values={**doc.values, parse_addr("B2"): TextVal("x")})
    assert [str(d) for d in check(doc.model, bad_type)] == [
        "TypeError B2 stock expects a number, found TextVal(text='x')"
    ]
    stray = tampered(values={**doc.values, CellAddr(0, 0): NumberVal(3)})
    assert [str(d) for d in check(doc.model, stray)] == [
        "StructureError A1 value outside any input cell"
    ]
    wrong_formula = tampered(formulas={**doc.formulas, parse_addr("B5"): "SUM(B2:B3)"})
    assert [str(d) for d in check(doc.model, wrong_formula)] == [
        "FormulaMismatch B5 expected SUM(B2:B4), found SUM(B2:B3)"
    ]
    wrong_label = tampered(labels={**doc.labels, parse_addr("A1"): "Wrong"})
    assert [str(d) for d in check(doc.model, wrong_label)] == [
        "LabelMismatch A1 expected 'Items', found 'Wrong'"
    ]


def test_check_accepts_fraction_values():
    doc = inventory_fig_instance()
    d2, diags = set_value(doc, parse_addr("B4"), NumberVal(Decimal("2.5")))
    assert diags == []
    assert check(d2.model, d2) == []


def test_evaluate_and_error_values():
    doc = items_fig_instance()
    assert evaluate(doc, parse_addr("B5")) == NumberVal(15)
    div0 = dataclasses.replace(doc, formulas={**doc.formulas, parse_addr("B5"): "B2/0"})
    assert str(recalc(div0).computed[parse_addr("B5")]) == "#DIV/0!"
    cyc = dataclasses.replace(doc, formulas={**doc.formulas, parse_addr("B5"): "B5+1"})
    with pytest.raises(CycleError, match="formula cycle involving B5"):
        recalc(cyc)


def test_export_csv_goldens():
    doc = items_fig_instance()
    assert export_csv(doc, "values") == "Items,\napple,5\nbanana,2\ncherry,8\nTotal,15\n"
    assert export_csv(doc, "formulas") == (
        'Items,\napple,5\nbanana,2\ncherry,8\nTotal,=SUM(B2:B4)\n'
    )


def test_export_csv_quotes_fields():
    doc = items_fig_instance()
    d2, diags = set_value(doc, parse_addr("A2"), TextVal('say "hi", ok'))
    assert diags == []
    assert '"say ""hi"", ok"' in export_csv(d2, "values")


def test_tree_json_round_trip():
    doc = inventory_fig_instance()
    t = tree_to_json(doc.model, doc.tree)
    assert t == {"Category": [{"Item": 3}, {"Item": 2}]}
    assert tree_from_json(doc.model, t) == doc.tree


def test_tree_from_json_int_shorthand():
    tree = tree_from_json(INVENTORY_MODEL, {"Category": 2})
    assert tree.count("Category", ()) == 2
    assert tree.count("Item", (0,)) == 1
    assert tree.count("Item", (1,)) == 1
    # missing classes default to one object
    assert tree_from_json(INVENTORY_MODEL, {}).count("Category", ()) == 1


def test_tree_from_json_rejections():
    with pytest.raises(StructureError, match="unknown repeating class 'Wat'"):
        tree_from_json(INVENTORY_MODEL, {"Wat": 1})
    with pytest.raises(StructureError, match="Item is nested; give its counts inside its parent"):
        tree_from_json(INVENTORY_MODEL, {"Item": 2})
    with pytest.raises(StructureError, match="negative object count"):
        tree_from_json(INVENTORY_MODEL, {"Category": -1})
    with pytest.raises(StructureError, match="counts for Category must be an integer or a list"):
        tree_from_json(INVENTORY_MODEL, {"Category": True})


def test_instance_json_shape():
    doc = items_fig_instance()
    j = instance_to_json(doc)
    assert set(j) == {"model", "objects", "inputs"}
    assert j["objects"] == {"Item": 3}
    assert j["inputs"]["B2"] == 5
    assert isinstance(j["model"], str)


def test_save_load_round_trip(tmp_path):
    doc = inventory_fig_instance()
    d2, _ = set_value(doc, parse_addr("B4"), NumberVal(Decimal("2.5")))
    path = tmp_path / "inv.json"
    save_instance(d2, str(path))
    loaded = load_instance(str(path))
    assert loaded.model == d2.model
    assert loaded.tree == d2.tree
    assert loaded.values == d2.values
    assert loaded.formulas == d2.formulas
    assert loaded.labels == d2.labels
    assert loaded.computed == d2.computed
    # fractions survive as exact decimals
    assert loaded.values[parse_addr("B4")] == NumberVal(Decimal("2.5"))


def test_save_load_with_model_path(tmp_path):
    from tabula.text import print_model

    (tmp_path / "inv.tbl").write_text(print_model(INVENTORY_MODEL))
    doc = create(INVENTORY_MODEL, model_ref="inv.tbl")
    save_instance(doc, str(tmp_path / "inst.json"))
    raw = json.loads((tmp_path / "inst.json").read_text())
    assert raw["model"] == {"path": "inv.tbl"}
    loaded = load_instance(str(tmp_path / "inst.json"))
    assert loaded.model == INVENTORY_MODEL
    assert loaded.model_ref == "inv.tbl"


def test_load_rejections(tmp_path):
    doc = items_fig_instance()
    base = instance_to_json(doc)

    def load_raw(data):
        p = tmp_path / "bad.json"
        p.write_text(json.dumps(data))
        return load_instance(str(p))

    with pytest.raises(StructureError, match="C9 is not an input cell of this instance"):
        load_raw({**base, "inputs": {"C9": 1}})
    with pytest.raises(StructureError, match="booleans are not cell values"):
        load_raw({**base, "inputs": {"B2": True}})
    with pytest.raises(StructureError, match="expected a number or string"):
        load_raw({**base, "inputs": {"B2": [1]}})
    with pytest.raises(StructureError, match="model must be inline text"):
        load_raw({**base, "model": 7})


def test_every_fixture_instance_checks_clean():
    for build in (
        inventory_fig_instance,
        inventory_year_fig_instance,
        items_fig_instance,
        apple_years_fig_instance,
    ):
        doc = build()
        assert check(doc.model, doc) == []
    for model in FIXTURES.values():
        doc = create(model)
        assert check(model, doc) == []

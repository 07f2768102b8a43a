import dataclasses
from decimal import Decimal

import pytest

from tabula.evolution import (
    AddAttribute,
    AddColumn,
    AddObject,
    AddRow,
    DeleteColumn,
    DeleteRow,
    DeleteRowAll,
    InsertRowAll,
    OpRejected,
    RemoveObject,
    RenameAttribute,
    RenameClass,
    SetConstraint,
    SetDefault,
    SetFormula,
    SetFormulaAt,
    SetLabel,
    SetLabelAt,
    SetValue,
    apply_instance_op,
    apply_model_op,
    op_from_json,
    parse_op_line,
    parse_op_script,
    render_op,
    sync_apply_instance,
    sync_apply_model,
    to_instance_ops,
    to_model_op,
)
from tabula.fixtures import (
    BUDGET_MODEL,
    INVENTORY_MODEL,
    INVENTORY_YEAR_MODEL,
    ITEMS_MODEL,
    inventory_fig_instance,
    inventory_year_fig_instance,
)
from tabula.formula import CellAddr, parse_addr, parse_constraint, parse_formula, render_expr
from tabula.instance import add_object, check, create, set_value
from tabula.model import Point
from tabula.text import parse_model
from tabula.values import NumberVal, TextVal

M = INVENTORY_MODEL
MY = INVENTORY_YEAR_MODEL


def rects(model):
    return {c.name: str(c.range) for c in model.classes}


class TestStructuralSurgery:
    def test_add_row_stretches_and_shifts(self):
        m2 = apply_model_op(M, AddRow("Category", 1))
        assert m2.height == 7
        assert rects(m2) == {
            "Inventory": "(0,0)..(1,6)",
            "Category": "(0,2)..(1,5)",
            "Item": "(0,4)..(1,4)",
        }
        # cells below the inserted line move down with their classes
        assert m2.cells[Point(1, 4)].name == "stock"
        assert m2.cells[Point(1, 6)].name == "total"
        assert Point(1, 3) not in m2.cells

    def test_add_column_through_crossings(self):
        m2 = apply_model_op(MY, AddColumn("Item", 2))
        assert m2.width == 5
        assert rects(m2) == {
            "Inventory": "(0,0)..(4,5)",
            "Year": "(1,0)..(3,5)",
            "Category": "(0,2)..(4,4)",
            "CategoryYear": "(1,2)..(3,4)",
            "Item": "(0,3)..(4,3)",
            "ItemYear": "(1,3)..(3,3)",
        }
        assert m2.cells[Point(3, 3)].name == "sold"
        assert m2.cells[Point(4, 3)].name == "avg"

    def test_add_then_delete_is_identity(self):
        assert apply_model_op(apply_model_op(M, AddRow("Category", 1)), DeleteRow("Category", 1)) == M
        assert apply_model_op(apply_model_op(MY, AddColumn("Year", 1)), DeleteColumn("Year", 1)) == MY

    def test_delete_breaking_layout_is_rejected(self):
        with pytest.raises(OpRejected) as exc:
            apply_model_op(M, DeleteRow("Inventory", 5))
        assert str(exc.value) == "operation breaks layout rule R3"
        assert exc.value.reasons == [
            "R3 Category needs a parent row above and below within Inventory"
        ]

    def test_offset_bounds(self):
        with pytest.raises(OpRejected, match=r"offset 9 outside 0\.\.5 for Inventory"):
            apply_model_op(M, DeleteRow("Inventory", 9))
        with pytest.raises(OpRejected, match=r"offset 9 outside 0\.\.3 for Category"):
            apply_model_op(M, AddRow("Category", 9))
        with pytest.raises(OpRejected, match="unknown class Wat"):
            apply_model_op(M, AddRow("Wat", 0))

    def test_cannot_delete_last_line(self):
        narrow = apply_model_op(ITEMS_MODEL, DeleteColumn("Items", 0))
        assert narrow.width == 1
        with pytest.raises(OpRejected, match="cannot delete the last row or column"):
            apply_model_op(narrow, DeleteColumn("Items", 0))

    def test_deleting_every_row_of_a_class_drops_it(self):
        src = (
            'tabula "t" {\n'
            "  grid 1 x 4\n"
            "  class T range (0,0) .. (0,3) expand none\n"
            "  class R range (0,1) .. (0,2) expand down\n"
            "  cells {\n"
            "    (0,1): input a = 1\n"
            "    (0,2): input b = 2\n"
            "  }\n"
            "}\n"
        )
        m = parse_model(src)
        m2 = apply_model_op(m, DeleteRow("R", 0))
        assert rects(m2) == {"T": "(0,0)..(0,2)", "R": "(0,1)..(0,1)"}
        m3 = apply_model_op(m2, DeleteRow("R", 0))
        assert rects(m3) == {"T": "(0,0)..(0,1)"}
        assert m3.height == 2

    def test_deleting_a_referenced_attribute_is_rejected(self):
        with pytest.raises(OpRejected, match="unknown attribute stock"):
            apply_model_op(MY, DeleteRow("Item", 0))


class TestCellOps:
    def test_set_label(self):
        m2 = apply_model_op(M, SetLabel(Point(0, 5), "Grand Total"))
        assert m2.cells[Point(0, 5)].text == "Grand Total"
        # empty text clears the cell
        m3 = apply_model_op(M, SetLabel(Point(0, 5), ""))
        assert Point(0, 5) not in m3.cells

    def test_set_default_keeps_type_and_constraint(self):
        m2 = apply_model_op(M, SetDefault(Point(1, 3), NumberVal(2)))
        assert m2.cells[Point(1, 3)].default == NumberVal(2)
        with pytest.raises(OpRejected, match="default must stay a number"):
            apply_model_op(M, SetDefault(Point(1, 3), TextVal("x")))
        with pytest.raises(OpRejected, match="default -1 violates >=0"):
            apply_model_op(M, SetDefault(Point(1, 3), NumberVal(-1)))
        with pytest.raises(OpRejected, match=r"\(0,0\) is not an input cell"):
            apply_model_op(M, SetDefault(Point(0, 0), NumberVal(1)))

    def test_set_constraint(self):
        m2 = apply_model_op(M, SetConstraint(Point(1, 3), parse_constraint(">=0 && <=99")))
        assert str(m2.cells[Point(1, 3)].constraint) == ">=0 && <=99"
        m3 = apply_model_op(M, SetConstraint(Point(1, 3), None))
        assert m3.cells[Point(1, 3)].constraint is None
        with pytest.raises(OpRejected, match="constraints apply to number inputs only"):
            apply_model_op(M, SetConstraint(Point(0, 3), parse_constraint(">=0")))
        with pytest.raises(OpRejected, match="default 0 violates >=5"):
            apply_model_op(M, SetConstraint(Point(1, 3), parse_constraint(">=5")))

    def test_set_formula(self):
        m2 = apply_model_op(M, SetFormula(Point(1, 5), parse_formula("SUM(stock)+0")))
        assert render_expr(m2.cells[Point(1, 5)].expr) == "SUM(stock)+0"
        with pytest.raises(OpRejected) as exc:
            apply_model_op(M, SetFormula(Point(1, 5), parse_formula("total")))
        assert str(exc.value) == "operation breaks the model: formula cycle involving total"
        with pytest.raises(OpRejected, match="unknown attribute wat"):
            apply_model_op(M, SetFormula(Point(1, 5), parse_formula("SUM(wat)")))
        with pytest.raises(OpRejected, match=r"\(1,3\) is not a formula cell"):
            apply_model_op(M, SetFormula(Point(1, 3), parse_formula("SUM(stock)")))

    def test_add_attribute(self):
        m2 = apply_model_op(M, AddAttribute(Point(0, 4), "note", TextVal("")))
        assert m2.cells[Point(0, 4)].name == "note"
        with pytest.raises(OpRejected, match=r"\(1,3\) is not a free label cell"):
            apply_model_op(M, AddAttribute(Point(1, 3), "x", NumberVal(0)))
        with pytest.raises(OpRejected, match="bad attribute name '9bad'"):
            apply_model_op(M, AddAttribute(Point(0, 4), "9bad", NumberVal(0)))
        with pytest.raises(OpRejected, match="attribute stock is ambiguous"):
            apply_model_op(M, AddAttribute(Point(0, 4), "stock", NumberVal(0)))


class TestRenames:
    def test_rename_attribute_rewrites_formulas(self):
        m2 = apply_model_op(M, RenameAttribute("stock", "qty"))
        assert m2.cells[Point(1, 3)].name == "qty"
        assert render_expr(m2.cells[Point(1, 5)].expr) == "SUM(qty)"

    def test_rename_class_rewrites_qualifiers(self):
        m2 = apply_model_op(BUDGET_MODEL, RenameClass("Income", "Rev"))
        assert "Rev" in {c.name for c in m2.classes}
        rewritten = [
            render_expr(c.expr)
            for _, c in m2.attr_cells()
            if hasattr(c, "expr") and "Rev.total" in render_expr(c.expr)
        ]
        assert rewritten == ["Rev.total-total", "Rev.total-total"]

    def test_rename_rejections(self):
        with pytest.raises(OpRejected, match="attribute total exists in several classes; rename is ambiguous"):
            apply_model_op(BUDGET_MODEL, RenameAttribute("total", "t2"))
        with pytest.raises(OpRejected, match="no attribute named wat"):
            apply_model_op(M, RenameAttribute("wat", "x"))
        with pytest.raises(OpRejected, match="duplicate attribute stock in class Item"):
            apply_model_op(M, RenameAttribute("desc", "stock"))
        with pytest.raises(OpRejected, match="unknown class Wat"):
            apply_model_op(M, RenameClass("Wat", "X"))
        with pytest.raises(OpRejected, match="class Category already exists"):
            apply_model_op(M, RenameClass("Item", "Category"))
        with pytest.raises(OpRejected, match="bad class name '9x'"):
            apply_model_op(M, RenameClass("Item", "9x"))

    def test_rename_must_keep_bindings(self):
        # giving Category's cat the name sold would capture avg's reference
        with pytest.raises(OpRejected, match="attribute sold is ambiguous"):
            apply_model_op(MY, RenameAttribute("cat", "sold"))


class TestOpMapping:
    def test_set_label_fans_out_per_context(self):
        doc = inventory_fig_instance()
        ops = to_instance_ops(M, doc, SetLabel(Point(0, 2), "Cat"))
        assert ops == [
            SetLabelAt(parse_addr("A3"), "Cat"),
            SetLabelAt(parse_addr("A8"), "Cat"),
        ]
        docy = inventory_year_fig_instance()
        ops = to_instance_ops(MY, docy, SetLabel(Point(1, 2), "Stock!"))
        assert [str(op.addr) for op in ops] == ["B3", "D3", "B8", "D8"]

    def test_add_attribute_seeds_defaults(self):
        doc = inventory_fig_instance()
        ops = to_instance_ops(M, doc, AddAttribute(Point(0, 4), "note", TextVal("")))
        assert ops == [
            SetValue(parse_addr("A7"), TextVal("")),
            SetValue(parse_addr("A11"), TextVal("")),
        ]

    def test_set_formula_translates_per_context(self):
        doc = inventory_fig_instance()
        ops = to_instance_ops(M, doc, SetFormula(Point(1, 5), parse_formula("SUM(stock)+0")))
        assert ops == [SetFormulaAt(parse_addr("B12"), "SUM(B4:B6,B9:B10)+0")]

    def test_structural_ops_map_to_grid_wide_ops(self):
        doc = inventory_fig_instance()
        assert to_instance_ops(M, doc, AddRow("Category", 1)) == [InsertRowAll("Category", 1)]
        assert to_instance_ops(M, doc, SetDefault(Point(1, 3), NumberVal(1))) == []
        assert to_instance_ops(M, doc, RenameAttribute("stock", "qty")) == []

    def test_lift_value_edits_stay_instance_local(self):
        doc = inventory_fig_instance()
        assert to_model_op(M, doc, SetValue(parse_addr("B4"), NumberVal(9))) is None
        assert to_model_op(M, doc, AddObject("Item", (("Category", 0),), None)) is None
        with pytest.raises(OpRejected, match="-3 violates >=0"):
            to_model_op(M, doc, SetValue(parse_addr("B4"), NumberVal(-3)))

    def test_lift_label_and_formula_edits(self):
        doc = inventory_fig_instance()
        assert to_model_op(M, doc, SetLabelAt(parse_addr("A12"), "Sum")) == SetLabel(Point(0, 5), "Sum")
        lifted = to_model_op(M, doc, SetFormulaAt(parse_addr("B12"), "SUM(B4:B6,B9:B10)+1"))
        assert lifted == SetFormula(Point(1, 5), parse_formula("SUM(stock)+1"))
        assert to_model_op(M, doc, InsertRowAll("Category", 1)) == AddRow("Category", 1)

    def test_lift_rejects_non_generalizing_formula(self):
        doc = inventory_fig_instance()
        with pytest.raises(OpRejected) as exc:
            to_model_op(M, doc, SetFormulaAt(parse_addr("B12"), "SUM(B4:B6)"))
        assert str(exc.value) == (
            "formula does not generalize: cells for stock do not match its objects exactly"
        )


class TestSync:
    def test_model_edit_reembeds_values(self):
        doc = inventory_fig_instance()
        m2, i2 = sync_apply_model(M, doc, AddRow("Category", 1))
        assert i2.height == 14
        assert i2.values[parse_addr("A5")] == TextVal("apple")
        assert i2.values[parse_addr("B5")] == NumberVal(5)
        assert check(m2, i2) == []

    def test_constraint_tightening_needs_force(self):
        doc = inventory_fig_instance()
        op = SetConstraint(Point(1, 3), parse_constraint(">=0 && <=7"))
        with pytest.raises(OpRejected) as exc:
            sync_apply_model(M, doc, op)
        assert exc.value.reasons == ["B6", "B10"]
        m2, i2 = sync_apply_model(M, doc, op, force=True)
        assert [str(d) for d in check(m2, i2)] == [
            "ConstraintViolation B6 8 violates >=0 && <=7",
            "ConstraintViolation B10 10 violates >=0 && <=7",
        ]

    def test_add_object_never_touches_the_model(self):
        doc = inventory_fig_instance()
        m2, i2 = sync_apply_instance(M, doc, AddObject("Item", (("Category", 0),), None))
        assert m2 == M
        assert i2.formulas[parse_addr("B13")] == "SUM(B4:B7,B10:B11)"

    def test_structural_instance_op_lifts_to_model(self):
        doc = inventory_fig_instance()
        m2, i2 = sync_apply_instance(M, doc, InsertRowAll("Category", 1))
        assert m2 != M and m2.height == 7
        assert i2.height == 14
        assert check(m2, i2) == []

    def test_divergent_instance_is_rejected(self):
        doc = inventory_fig_instance()
        other = apply_model_op(M, SetLabel(Point(0, 0), "X"))
        with pytest.raises(OpRejected, match="instance was generated from a different model"):
            sync_apply_instance(other, doc, SetValue(parse_addr("B4"), NumberVal(1)))

    def test_bad_value_surfaces_diagnostics(self):
        doc = inventory_fig_instance()
        with pytest.raises(OpRejected) as exc:
            sync_apply_instance(M, doc, SetValue(parse_addr("B4"), NumberVal(-2)))
        assert exc.value.reasons == ["-2 violates >=0"]

    def test_unsafe_structural_op_coevolves_embedded_model(self):
        doc = inventory_fig_instance()
        i2 = apply_instance_op(doc, InsertRowAll("Category", 1))
        assert i2.model.height == 7
        assert i2.height == 14
        assert check(i2.model, i2) == []

    def test_delete_row_all_drops_one_line_per_object(self):
        src = (
            'tabula "t" {\n'
            "  grid 1 x 4\n"
            "  class T range (0,0) .. (0,3) expand none\n"
            "  class R range (0,1) .. (0,2) expand down\n"
            "  cells {\n"
            "    (0,1): input a = 1\n"
            "    (0,2): input b = 2\n"
            "  }\n"
            "}\n"
        )
        doc = create(parse_model(src))
        doc = apply_instance_op(doc, AddObject("R", (), None))
        doc, diags = set_value(doc, parse_addr("A2"), NumberVal(9))
        assert diags == []
        i2 = apply_instance_op(doc, DeleteRowAll("R", 0))
        assert {str(a): v.num for a, v in i2.values.items()} == {
            "A2": Decimal(2),
            "A3": Decimal(2),
        }
        assert check(i2.model, i2) == []


CANONICAL_SCRIPT = """\
set-label (0,5) "Grand Total"
set-constraint (1,3) >=0 && <=100
set-formula (1,5) SUM(stock)+0
add-attribute (0,2) catname ""
add-row Category 1
rename-attribute stock qty
set-value B4 7
set-value A4 "two words"
set-formula-at B12 SUM(B4:B6)
set-label-at A12 "Totals"
add-object Item Category=0 at=end
remove-object Item Category=0 Item=1
insert-row-all Category 1
set-constraint (1,3) none
"""


class TestOpScripts:
    def test_parse_render_round_trip(self):
        ops = parse_op_script(CANONICAL_SCRIPT, M)
        assert "\n".join(render_op(op) for op in ops) + "\n" == CANONICAL_SCRIPT

    def test_comments_and_blank_lines(self):
        ops = parse_op_script('\n# note\nset-value B4 7  # trailing\n\n', M)
        assert ops == [SetValue(parse_addr("B4"), NumberVal(7))]

    def test_hash_inside_strings_is_text(self):
        (op,) = parse_op_script('set-label (0,5) "a # b"\n', M)
        assert op == SetLabel(Point(0, 5), "a # b")

    def test_class_prefix_resolution(self):
        assert parse_op_line("add-row item 0", MY) == AddRow("Item", 0)
        assert parse_op_line("add-row itemy 0", MY) == AddRow("ItemYear", 0)
        # an exact name wins even when it prefixes another class
        assert parse_op_line("add-row category 0", MY) == AddRow("Category", 0)
        with pytest.raises(OpRejected, match="'catego' matches Category, CategoryYear"):
            parse_op_line("add-row catego 0", MY)
        with pytest.raises(OpRejected, match="'c' matches Category, CategoryYear"):
            parse_op_line("add-row c 0", MY)
        with pytest.raises(OpRejected, match="'i' matches Inventory, Item, ItemYear"):
            parse_op_line("add-row i 0", MY)

    @pytest.mark.parametrize(
        "line,message",
        [
            ("wat B4 7", "unknown operation 'wat'"),
            ("set-value 7", "bad cell address '7'"),
            ("set-value B4", "expected a number or string"),
            ("set-value B4 7 extra", "unexpected trailing input 'extra'"),
            ("add-object C x=0", "no class matches 'x'"),
            ("set-label (0,5) unquoted", "expected a quoted string"),
            ("add-row Wat 1", "no class matches 'Wat'"),
            ('set-value B4 "unterminated', "unterminated string"),
            ("remove-object Item Category=0", "remove-object needs Item=<index>"),
            ("add-object Item at=wat", "bad insert position 'wat'"),
        ],
    )
    def test_parse_errors(self, line, message):
        with pytest.raises(OpRejected) as exc:
            parse_op_line(line, M)
        assert str(exc.value) == f"line: {message}"

    def test_script_errors_carry_line_numbers(self):
        with pytest.raises(OpRejected, match="line 4: unknown operation 'wat'"):
            parse_op_script("set-value B4 7\n\n# ok\nwat\n", M)


class TestOpJson:
    @pytest.mark.parametrize(
        "data,expected",
        [
            ({"op": "set-value", "addr": "B4", "value": 7}, SetValue(parse_addr("B4"), NumberVal(7))),
            ({"op": "set-value", "addr": "B4", "value": "x"}, SetValue(parse_addr("B4"), TextVal("x"))),
            ({"op": "set-label", "point": [0, 5], "text": "T"}, SetLabel(Point(0, 5), "T")),
            ({"op": "set-default", "point": [1, 3], "value": 2}, SetDefault(Point(1, 3), NumberVal(2))),
            (
                {"op": "set-constraint", "point": [1, 3], "constraint": ">=0 && <=9"},
                SetConstraint(Point(1, 3), parse_constraint(">=0 && <=9")),
            ),
            ({"op": "set-constraint", "point": [1, 3], "constraint": None}, SetConstraint(Point(1, 3), None)),
            (
                {"op": "set-formula", "point": [1, 5], "formula": "SUM(stock)"},
                SetFormula(Point(1, 5), parse_formula("SUM(stock)")),
            ),
            (
                {"op": "add-attribute", "point": [0, 4], "name": "note", "default": ""},
                AddAttribute(Point(0, 4), "note", TextVal("")),
            ),
            ({"op": "add-row", "cls": "Category", "offset": 1}, AddRow("Category", 1)),
            ({"op": "rename-attribute", "old": "stock", "new": "qty"}, RenameAttribute("stock", "qty")),
            ({"op": "rename-class", "old": "Item", "new": "Product"}, RenameClass("Item", "Product")),
            (
                {"op": "set-formula-at", "addr": "B12", "text": "SUM(B4:B6)"},
                SetFormulaAt(parse_addr("B12"), "SUM(B4:B6)"),
            ),
            (
                {"op": "add-object", "cls": "Item", "ctx": {"Category": 0}, "at": "end"},
                AddObject("Item", (("Category", 0),), None),
            ),
            (
                {"op": "add-object", "cls": "Item", "ctx": {"Category": 0}, "at": 1},
                AddObject("Item", (("Category", 0),), 1),
            ),
            (
                {"op": "remove-object", "cls": "Item", "ctx": {"Category": 0}, "index": 1},
                RemoveObject("Item", (("Category", 0),), 1),
            ),
            ({"op": "insert-row-all", "cls": "Category", "offset": 1}, InsertRowAll("Category", 1)),
            ({"op": "delete-row-all", "cls": "Category", "offset": 0}, DeleteRowAll("Category", 0)),
        ],
    )
    def test_decodes(self, data, expected):
        assert op_from_json(M, data) == expected

    @pytest.mark.parametrize(
        "data,message",
        [
            ({"op": "wat"}, "unknown operation 'wat'"),
            ({}, 'each operation needs an "op" name'),
            ({"op": "set-value", "addr": "B4", "value": True}, "cell values are numbers or strings"),
            ({"op": "set-value", "addr": "B4", "value": None}, "cell values are numbers or strings"),
            ({"op": "set-value", "addr": "B4"}, "cell values are numbers or strings"),
            ({"op": "set-label", "point": [0], "text": "x"}, "point must be [col, row]"),
            ({"op": "set-value", "addr": "wat", "value": 1}, "bad cell address 'wat'"),
            ({"op": "add-row", "cls": "Wat", "offset": 0}, "add-row needs a valid class name"),
            ({"op": "add-row", "cls": "Category", "offset": -1}, "add-row needs a non-negative offset"),
            ({"op": "add-object", "cls": "Item", "ctx": {"Wat": 0}}, "unknown class 'Wat' in ctx"),
            ({"op": "set-formula", "point": [1, 5], "formula": "SUM("}, "bad formula: expected expression, got 'end of input'"),
            ({"op": "set-constraint", "point": [1, 3], "constraint": "wat"}, "bad constraint: expected comparison, got 'wat'"),
        ],
    )
    def test_rejects(self, data, message):
        with pytest.raises(OpRejected) as exc:
            op_from_json(M, data)
        assert str(exc.value) == message

    def test_float_values_stay_exact(self):
        op = op_from_json(M, {"op": "set-value", "addr": "B4", "value": 2.5})
        assert op.value == NumberVal(Decimal("2.5"))

"""Built-in example models and the instances shown in the docs.

The DSL sources here are the same text as the files under tabula/models/.
Each *_MODEL constant is the parsed form; the instance builders reproduce
the worked examples (a two-category inventory, a three-item list, a
two-year single-product sheet).
"""

from __future__ import annotations

from decimal import Decimal

from .instance import InstanceDoc, StructureError, _materialize, recalc, tree_from_json
from .model import Point, TabulaModel
from .text import parse_model
from .values import NumberVal, TextVal, Value

INVENTORY_SRC = """\
tabula "Inventory" {
  grid 2 x 6
  class Inventory range (0,0) .. (1,5) expand none
  class Category range (0,2) .. (1,4) expand down
  class Item range (0,3) .. (1,3) expand down
  cells {
    (0,0): label "Inventory"
    (0,3): input desc = ""
    (1,3): input stock = 0 : >=0
    (0,5): label "Total"
    (1,5): formula total = SUM(stock)
  }
}
"""

INVENTORY_YEAR_SRC = """\
tabula "Inventory per year" {
  grid 4 x 6
  class Inventory range (0,0) .. (3,5) expand none
  class Year range (1,0) .. (2,5) expand right
  class Category range (0,2) .. (3,4) expand down
  class CategoryYear range (1,2) .. (2,4) expand both
  class Item range (0,3) .. (3,3) expand down
  class ItemYear range (1,3) .. (2,3) expand both
  cells {
    (0,0): label "Inventory"
    (1,0): input year = 2000
    (0,2): input cat = ""
    (1,2): label "stock"
    (2,2): label "sold"
    (3,2): label "Average sold"
    (0,3): input desc = ""
    (1,3): input stock = 0 : >=0
    (2,3): input sold = 0 : >=0
    (3,3): formula avg = AVERAGE(sold)
    (0,5): label "Total"
    (1,5): formula total = SUM(stock)
  }
}
"""

ITEMS_SRC = """\
tabula "Items" {
  grid 2 x 3
  class Items range (0,0) .. (1,2) expand none
  class Item range (0,1) .. (1,1) expand down
  cells {
    (0,0): label "Items"
    (0,1): input desc = ""
    (1,1): input stock = 0 : >=0
    (0,2): label "Total"
    (1,2): formula total = SUM(stock)
  }
}
"""

APPLE_YEARS_SRC = """\
tabula "Apple inventory" {
  grid 4 x 3
  class Inventory range (0,0) .. (3,2) expand none
  class Year range (1,0) .. (2,2) expand right
  cells {
    (0,0): label "Inventory"
    (1,0): input year = 2000
    (1,1): label "stock"
    (2,1): label "sold"
    (3,1): label "Average sold"
    (0,2): label "apple"
    (1,2): input stock = 0 : >=0
    (2,2): input sold = 0 : >=0
    (3,2): formula avg = AVERAGE(sold)
  }
}
"""

BUDGET_SRC = """\
tabula "Personal budget" {
  grid 3 x 12
  class Budget range (0,0) .. (2,11) expand none
  class Month range (1,0) .. (1,11) expand right
  class Income range (0,4) .. (2,6) expand none
  class IncomeItem range (0,5) .. (2,5) expand down
  class IncomeMonth range (1,4) .. (1,6) expand both
  class IncomeItemMonth range (1,5) .. (1,5) expand both
  class Expense range (0,8) .. (2,10) expand down
  class ExpenseItem range (0,9) .. (2,9) expand down
  class ExpenseMonth range (1,8) .. (1,10) expand both
  class ExpenseItemMonth range (1,9) .. (1,9) expand both
  cells {
    (0,0): label "Personal Budget"
    (1,1): input month = ""
    (2,1): label "Year"
    (0,2): label "Total Expenses"
    (1,2): formula total = SUM(Expense.total)
    (2,2): formula total = SUM(Expense.total)
    (0,3): label "Cash short/extra"
    (1,3): formula cash = Income.total - total
    (2,3): formula cash = Income.total - total
    (0,4): label "Income"
    (0,5): input desc = ""
    (1,5): input income = 0 : >=0
    (2,5): formula year = SUM(income)
    (0,6): label "Total"
    (1,6): formula total = SUM(income)
    (2,6): formula total = SUM(year)
    (0,7): label "Expenses"
    (0,8): input cat = ""
    (0,9): input desc = ""
    (1,9): input expense = 0 : >=0
    (2,9): formula avg = AVERAGE(expense)
    (0,10): label "Total"
    (1,10): formula total = SUM(expense)
    (2,10): formula total = SUM(avg)
  }
}
"""


def _static_budget_src() -> str:
    months = ["Jan", "Feb", "Mar", "Apr", "May", "Jun",
              "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
    lines = [
        'tabula "Personal budget (fixed months)" {',
        "  grid 14 x 12",
        "  class Budget range (0,0) .. (13,11) expand none",
        "  class Income range (0,4) .. (13,6) expand none",
        "  class IncomeItem range (0,5) .. (13,5) expand down",
        "  class Expense range (0,8) .. (13,10) expand down",
        "  class ExpenseItem range (0,9) .. (13,9) expand down",
        "  cells {",
        '    (0,0): label "Personal Budget"',
    ]
    for i, m in enumerate(months, start=1):
        lines.append(f'    ({i},1): label "{m}"')
    lines.append('    (13,1): label "Year"')
    lines.append('    (0,2): label "Total Expenses"')
    for i in range(1, 13):
        lines.append(f"    ({i},2): formula tExp{i} = SUM(Expense.expTot{i})")
    lines.append("    (13,2): formula tExpYear = SUM(Expense.expTotYear)")
    lines.append('    (0,3): label "Cash short/extra"')
    for i in range(1, 13):
        lines.append(f"    ({i},3): formula cash{i} = Income.incTot{i} - tExp{i}")
    lines.append("    (13,3): formula cashYear = Income.incTotYear - tExpYear")
    lines.append('    (0,4): label "Income"')
    lines.append('    (0,5): input desc = ""')
    for i in range(1, 13):
        lines.append(f"    ({i},5): input inc{i} = 0")
    args = ",".join(f"inc{i}" for i in range(1, 13))
    lines.append(f"    (13,5): formula incYear = SUM({args})")
    lines.append('    (0,6): label "Total"')
    for i in range(1, 13):
        lines.append(f"    ({i},6): formula incTot{i} = SUM(inc{i})")
    lines.append("    (13,6): formula incTotYear = SUM(incYear)")
    lines.append('    (0,7): label "Expenses"')
    lines.append('    (0,8): input cat = ""')
    lines.append('    (0,9): input desc = ""')
    for i in range(1, 13):
        lines.append(f"    ({i},9): input exp{i} = 0")
    args = ",".join(f"exp{i}" for i in range(1, 13))
    lines.append(f"    (13,9): formula expYear = SUM({args})")
    lines.append('    (0,10): label "Total"')
    for i in range(1, 13):
        lines.append(f"    ({i},10): formula expTot{i} = SUM(exp{i})")
    lines.append("    (13,10): formula expTotYear = SUM(expYear)")
    lines.append("  }")
    lines.append("}")
    return "\n".join(lines) + "\n"


BUDGET_STATIC_SRC = _static_budget_src()

INVENTORY_MODEL = parse_model(INVENTORY_SRC)
INVENTORY_YEAR_MODEL = parse_model(INVENTORY_YEAR_SRC)
ITEMS_MODEL = parse_model(ITEMS_SRC)
APPLE_YEARS_MODEL = parse_model(APPLE_YEARS_SRC)
BUDGET_MODEL = parse_model(BUDGET_SRC)
BUDGET_STATIC_MODEL = parse_model(BUDGET_STATIC_SRC)

FIXTURES: dict[str, TabulaModel] = {
    "inventory": INVENTORY_MODEL,
    "inventory_year": INVENTORY_YEAR_MODEL,
    "items": ITEMS_MODEL,
    "apple_years": APPLE_YEARS_MODEL,
    "budget": BUDGET_MODEL,
    "budget_static": BUDGET_STATIC_MODEL,
}


def _build(
    model: TabulaModel, objects: dict, cells: list[tuple[Point, dict, Value]]
) -> InstanceDoc:
    tree = tree_from_json(model, objects)
    doc = _materialize(model, tree, None)
    values = dict(doc.values)
    for point, ctx, value in cells:
        addr = doc.index.addr_of(point, ctx)
        if addr not in values:
            raise StructureError(f"{addr} is not an input cell")
        values[addr] = value
    return recalc(InstanceDoc(model, tree, values, doc.labels, doc.formulas))


def _n(x) -> NumberVal:
    return NumberVal(Decimal(str(x)))


def inventory_fig_instance() -> InstanceDoc:
    """Two categories (Fruit with three items, Legumes with two)."""
    model = INVENTORY_MODEL
    desc, stock = Point(0, 3), Point(1, 3)
    data = {
        (0, 0): ("apple", 5),
        (0, 1): ("banana", 2),
        (0, 2): ("cherry", 8),
        (1, 0): ("beans", 7),
        (1, 1): ("peas", 10),
    }
    cells: list[tuple[Point, dict, Value]] = []
    for (c, i), (name, n) in data.items():
        ctx = {"Category": c, "Item": i}
        cells.append((desc, dict(ctx), TextVal(name)))
        cells.append((stock, dict(ctx), _n(n)))
    return _build(model, {"Category": [{"Item": 3}, {"Item": 2}]}, cells)


def items_fig_instance() -> InstanceDoc:
    """Three items with stocks 5, 2 and 8 (total 15)."""
    model = ITEMS_MODEL
    cells: list[tuple[Point, dict, Value]] = []
    for i, (name, n) in enumerate([("apple", 5), ("banana", 2), ("cherry", 8)]):
        cells.append((Point(0, 1), {"Item": i}, TextVal(name)))
        cells.append((Point(1, 1), {"Item": i}, _n(n)))
    return _build(model, {"Item": 3}, cells)


def apple_years_fig_instance() -> InstanceDoc:
    """Two years of one product; sold 12 and 16, so the average is 14."""
    model = APPLE_YEARS_MODEL
    cells: list[tuple[Point, dict, Value]] = []
    for y, (year, stock, sold) in enumerate([(2000, 5, 12), (2001, 4, 16)]):
        cells.append((Point(1, 0), {"Year": y}, _n(year)))
        cells.append((Point(1, 2), {"Year": y}, _n(stock)))
        cells.append((Point(2, 2), {"Year": y}, _n(sold)))
    return _build(model, {"Year": 2}, cells)


def inventory_year_fig_instance() -> InstanceDoc:
    """The two-category inventory spread over two years."""
    model = INVENTORY_YEAR_MODEL
    cells: list[tuple[Point, dict, Value]] = []
    for y, year in enumerate([2000, 2001]):
        cells.append((Point(1, 0), {"Year": y}, _n(year)))
    names = {(0, 0): "apple", (0, 1): "banana", (0, 2): "cherry",
             (1, 0): "beans", (1, 1): "peas"}
    stock = {(0, 0): (5, 4), (0, 1): (2, 3), (0, 2): (8, 7),
             (1, 0): (7, 9), (1, 1): (10, 6)}
    sold = {(0, 0): (12, 16), (0, 1): (1, 2), (0, 2): (4, 4),
            (1, 0): (3, 5), (1, 1): (9, 8)}
    for (c, i), name in names.items():
        item = {"Category": c, "Item": i}
        cells.append((Point(0, 3), dict(item), TextVal(name)))
        for y in range(2):
            ctx = {"Category": c, "Item": i, "Year": y}
            cells.append((Point(1, 3), dict(ctx), _n(stock[(c, i)][y])))
            cells.append((Point(2, 3), dict(ctx), _n(sold[(c, i)][y])))
    return _build(model, {"Category": [{"Item": 3}, {"Item": 2}], "Year": 2}, cells)

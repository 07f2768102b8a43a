"""Tabula: a model-driven spreadsheet engine.

Models describe a grid of labels, typed inputs and attribute formulas carved
into nested repeating classes; instances expand those classes into concrete
spreadsheets with A1 formulas, stay checkable against the model, and edits on
either side replicate to the other.
"""

from .evolution import (
    InstanceOp,
    ModelOp,
    OpRejected,
    apply_instance_op,
    apply_model_op,
    sync_apply_instance,
    sync_apply_model,
    to_instance_ops,
    to_model_op,
)
from .formula import CellAddr, CellRange, CycleError, EvalError, FormulaError
from .instance import (
    Diagnostic,
    ExpansionError,
    InstanceDoc,
    ObjectTree,
    StructureError,
    add_object,
    check,
    create,
    evaluate,
    export_csv,
    load_instance,
    recalc,
    remove_object,
    save_instance,
    set_value,
)
from .layout import LayoutViolation, classify, validate_layout
from .model import Metrics, TabulaModel, metrics
from .text import ModelParseError, parse_model, print_model
from .values import NumberVal, TabulaError, TextVal

__version__ = "0.1.0"

__all__ = [
    "CellAddr",
    "CellRange",
    "CycleError",
    "Diagnostic",
    "EvalError",
    "ExpansionError",
    "FormulaError",
    "InstanceDoc",
    "InstanceOp",
    "LayoutViolation",
    "Metrics",
    "ModelOp",
    "ModelParseError",
    "NumberVal",
    "ObjectTree",
    "OpRejected",
    "StructureError",
    "TabulaError",
    "TabulaModel",
    "TextVal",
    "add_object",
    "apply_instance_op",
    "apply_model_op",
    "check",
    "classify",
    "create",
    "evaluate",
    "export_csv",
    "load_instance",
    "metrics",
    "parse_model",
    "print_model",
    "recalc",
    "remove_object",
    "save_instance",
    "set_value",
    "sync_apply_instance",
    "sync_apply_model",
    "to_instance_ops",
    "to_model_op",
    "validate_layout",
]

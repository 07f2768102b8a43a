"""Command line interface.

Exit codes: 0 on success (and on "nothing to report"), 1 when validation,
checking or an operation reports problems, 2 for usage, file and parse
errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import tempfile
from pathlib import Path

from .evolution import (
    ModelOp,
    OpRejected,
    _strip_comment,
    apply_model_op,
    parse_op_line,
    sync_apply_instance,
    sync_apply_model,
)

_MODEL_OPS = ModelOp.__args__
from .instance import (
    InstanceDoc,
    _materialize,
    check,
    create,
    export_csv,
    load_instance,
    recalc,
    save_instance,
    tree_from_json,
)
from .layout import validate_layout
from .model import TabulaModel, metrics
from .refs import validate_semantics
from .text import ModelParseError, parse_model, print_model
from .values import TabulaError


def _use_color(stream) -> bool:
    if os.environ.get("TABULA_NO_COLOR"):
        return False
    return hasattr(stream, "isatty") and stream.isatty()


def _paint(text: str, code: str, stream) -> str:
    if _use_color(stream):
        return f"\x1b[{code}m{text}\x1b[0m"
    return text


def _fail(message: str, code: int = 2) -> "NoReturn":  # noqa: F821
    print(_paint("error:", "31", sys.stderr), message, file=sys.stderr)
    raise SystemExit(code)


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        _fail(f"cannot read {path}: {exc.strerror or exc}")


def _write_text(path: str, text: str) -> None:
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=str(target.parent) or ".", prefix=target.name)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, target)
    except OSError as exc:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        _fail(f"cannot write {path}: {exc.strerror or exc}")


def _load_model(path: str) -> TabulaModel:
    src = _read_text(path)
    try:
        return parse_model(src)
    except ModelParseError as exc:
        for d in exc.diagnostics:
            print(f"{path}:{d}", file=sys.stderr)
        raise SystemExit(2) from None


def _load_model_lenient(path: str) -> TabulaModel | None:
    """Parse without failing the process; used by validate, which reports."""
    src = _read_text(path)
    try:
        return parse_model(src)
    except ModelParseError as exc:
        for d in exc.diagnostics:
            print(f"{path}:{d}")
        return None


def _load_instance(path: str) -> InstanceDoc:
    try:
        return load_instance(path)
    except (OSError, json.JSONDecodeError) as exc:
        _fail(f"cannot load {path}: {exc}")
    except TabulaError as exc:
        _fail(f"cannot load {path}: {exc}")


def cmd_validate(args) -> int:
    model = _load_model_lenient(args.model)
    if model is None:
        return 1
    violations = validate_layout(model)
    if violations:
        for v in violations:
            print(str(v))
        return 1
    errors = validate_semantics(model)
    if errors:
        for point, message in errors:
            print(f"{point} {message}")
        return 1
    return 0


def cmd_metrics(args) -> int:
    model = _load_model(args.model)
    print(metrics(model).row())
    return 0


def cmd_print(args) -> int:
    model = _load_model(args.model)
    sys.stdout.write(print_model(model))
    return 0


def cmd_create(args) -> int:
    model = _load_model(args.model)
    try:
        if args.objects:
            raw = json.loads(args.objects)
            tree = tree_from_json(model, raw)
            doc = recalc(_materialize(model, tree, args.ref or None))
        else:
            doc = create(model, model_ref=args.ref or None)
    except (TabulaError, json.JSONDecodeError, ValueError) as exc:
        _fail(str(exc))
    save_instance(doc, args.output)
    return 0


def cmd_check(args) -> int:
    model = _load_model(args.model)
    doc = _load_instance(args.instance)
    diags = check(model, doc)
    for d in diags:
        print(str(d))
    return 1 if diags else 0


def cmd_recalc(args) -> int:
    doc = _load_instance(args.instance)
    try:
        doc = recalc(doc)
    except TabulaError as exc:
        _fail(str(exc), 1)
    save_instance(doc, args.instance)
    return 0


def cmd_export(args) -> int:
    doc = _load_instance(args.instance)
    text = export_csv(doc, mode=args.mode)
    if args.output:
        _write_text(args.output, text)
    else:
        sys.stdout.write(text)
    return 0


def _run_script(
    path: str,
    model: TabulaModel,
    instance: InstanceDoc | None,
    model_only: bool,
    force: bool,
) -> tuple[TabulaModel, InstanceDoc | None]:
    """Apply a script atomically: any failure leaves both documents as they
    were on disk."""
    text = _read_text(path)
    for n, raw in enumerate(text.splitlines(), start=1):
        line = _strip_comment(raw)
        if not line:
            continue
        where = f"{path}:{n}"
        try:
            op = parse_op_line(line, model, where=where)
        except OpRejected as exc:
            _fail(str(exc))
        try:
            if isinstance(op, _MODEL_OPS):
                if instance is None:
                    model = apply_model_op(model, op)
                else:
                    model, instance = sync_apply_model(model, instance, op, force)
            else:
                if model_only:
                    _fail(f"{where}: {line.split()[0]} is an instance operation")
                assert instance is not None
                model, instance = sync_apply_instance(model, instance, op, force)
        except OpRejected as exc:
            print(f"{where}: rejected: {exc}", file=sys.stderr)
            for reason in exc.reasons:
                if reason != str(exc):
                    print(f"  {reason}", file=sys.stderr)
            raise SystemExit(1) from None
    return model, instance


def cmd_apply_model(args) -> int:
    model = _load_model(args.model)
    instance = _load_instance(args.sync) if args.sync else None
    model, instance = _run_script(
        args.ops, model, instance, model_only=instance is None, force=args.force
    )
    _write_text(args.output or args.model, print_model(model))
    if instance is not None:
        save_instance(instance, args.sync)
        if args.force:
            for d in check(model, instance):
                print(str(d))
    return 0


def cmd_apply_instance(args) -> int:
    model = _load_model(args.model)
    instance = _load_instance(args.instance)
    if model != instance.model:
        _fail("instance was generated from a different model", 1)
    model, instance = _run_script(args.ops, model, instance, model_only=False, force=args.force)
    _write_text(args.model, print_model(model))
    save_instance(instance, args.instance)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    model = _load_model(args.model)
    if args.instance:
        instance = _load_instance(args.instance)
        if instance.model != model:
            _fail("instance was generated from a different model", 1)
    else:
        instance = create(model)
    static = args.static
    if static is None:
        bundled = Path(__file__).resolve().parents[2] / "frontend" / "dist"
        if bundled.is_dir():
            static = str(bundled)
    app = create_app(
        model,
        instance,
        model_path=args.model,
        instance_path=args.instance,
        static_dir=static,
    )
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return 0


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(
        prog="tabula", description="model-driven spreadsheets"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model against the layout rules")
    p.add_argument("model")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("metrics", help="print width height classes attributes inputs formulas")
    p.add_argument("model")
    p.set_defaults(fn=cmd_metrics)

    p = sub.add_parser("print", help="print the canonical form of a model")
    p.add_argument("model")
    p.set_defaults(fn=cmd_print)

    p = sub.add_parser("create", help="generate a conforming instance")
    p.add_argument("model")
    p.add_argument("-o", "--output", required=True)
    p.add_argument("--objects", help="object counts as JSON, e.g. '{\"Item\": 3}'")
    p.add_argument("--ref", help="store a path to the model instead of inlining it")
    p.set_defaults(fn=cmd_create)

    p = sub.add_parser("check", help="report where an instance breaks its model")
    p.add_argument("model")
    p.add_argument("instance")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("recalc", help="recompute all formulas in place")
    p.add_argument("instance")
    p.set_defaults(fn=cmd_recalc)

    p = sub.add_parser("export", help="write the sheet as CSV")
    p.add_argument("instance")
    p.add_argument("--mode", choices=("values", "formulas"), default="values")
    p.add_argument("-o", "--output")
    p.set_defaults(fn=cmd_export)

    p = sub.add_parser("apply-model", help="run model operations from a script")
    p.add_argument("model")
    p.add_argument("ops")
    p.add_argument("-o", "--output", help="write the result here instead of in place")
    p.add_argument("--sync", help="instance file to co-evolve")
    p.add_argument("--force", action="store_true",
                   help="keep instance values that violate a tightened constraint")
    p.set_defaults(fn=cmd_apply_model)

    p = sub.add_parser("apply-instance", help="run instance operations, co-evolving the model")
    p.add_argument("model")
    p.add_argument("instance")
    p.add_argument("ops")
    p.add_argument("--force", action="store_true")
    p.set_defaults(fn=cmd_apply_instance)

    p = sub.add_parser("serve", help="serve the web UI and HTTP API")
    p.add_argument("--model", required=True)
    p.add_argument("--instance")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--static", help="directory with the web UI build")
    p.set_defaults(fn=cmd_serve)

    args = parser.parse_args(argv)
    try:
        return args.fn(args)
    except SystemExit:
        raise
    except BrokenPipeError:
        return 0


if __name__ == "__main__":
    raise SystemExit(main())

"""HTTP API over one model/instance pair.

State lives in memory behind a lock; each accepted batch of operations
bumps a revision counter, and writers must name the revision they saw
(optimistic concurrency: a stale baseRev gets 409). Every exposed revision
is conforming: the instance checks clean against the model.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse, PlainTextResponse

from .evolution import (
    ModelOp,
    OpRejected,
    op_from_json,
    sync_apply_instance,
    sync_apply_model,
)
from .formula import CellAddr, render_constraint
from .instance import (
    InstanceDoc,
    check,
    export_csv,
    save_instance,
    tree_to_json,
)
from .layout import classify, owner_of
from .model import FormulaCell, Input, TabulaModel, cell_at, metrics
from .text import print_model
from .values import NumberVal

_MODEL_OPS = ModelOp.__args__


@dataclass
class _State:
    model: TabulaModel
    instance: InstanceDoc
    revision: int = 0


def _value_json(v):
    if isinstance(v, NumberVal):
        n = v.num
        return int(n) if n == n.to_integral_value() else float(n)
    return v.text


def _snapshot(state: _State) -> dict:
    model, doc = state.model, state.instance
    info = classify(model)
    order = {c.name: i for i, c in enumerate(model.classes)}
    classes = [
        {
            "name": c.name,
            "range": [[c.range.left, c.range.top], [c.range.right, c.range.bottom]],
            "expansion": c.expansion.value,
            "role": info[c.name].role.value,
            "parents": list(info[c.name].parents),
            "color": order[c.name],
        }
        for c in model.classes
    ]
    cells = []
    index = doc.index
    for ri in range(doc.height):
        for ci in range(doc.width):
            addr = CellAddr(ci, ri)
            point, ctx = index.model_cell_at(addr)
            cell = cell_at(model, point)
            owner = owner_of(model, point)
            entry = {
                "addr": str(addr),
                "row": ri,
                "col": ci,
                "model": [point.col, point.row],
                "ctx": ctx,
                "owner": owner.name,
                "color": order[owner.name],
            }
            if isinstance(cell, Input):
                entry["kind"] = "input"
                entry["editable"] = True
                v = doc.values.get(addr, cell.default)
                entry["value"] = _value_json(v)
                entry["display"] = str(v)
                if cell.constraint is not None:
                    entry["constraint"] = render_constraint(cell.constraint)
                entry["name"] = cell.name
            elif isinstance(cell, FormulaCell):
                entry["kind"] = "formula"
                # computed, not typed into; edited via set-formula-at, not set-value
                entry["editable"] = False
                entry["formula"] = doc.formulas.get(addr, "")
                computed = doc.computed.get(addr)
                entry["display"] = "" if computed is None else str(computed)
                if computed is not None and isinstance(computed, NumberVal):
                    entry["value"] = _value_json(computed)
                entry["name"] = cell.name
            else:
                text = doc.labels.get(addr, "")
                entry["kind"] = "label" if text else "blank"
                entry["editable"] = False
                entry["display"] = text
            cells.append(entry)
    blocks = [
        {
            "cls": b.cls,
            "axis": b.axis,
            "ctx": dict(b.ctx),
            "start": b.start,
            "end": b.end,
        }
        for b in index.blocks()
    ]
    return {
        "revision": state.revision,
        "model": {
            "name": model.name,
            "text": print_model(model),
            "width": model.width,
            "height": model.height,
            "classes": classes,
        },
        "grid": {"width": doc.width, "height": doc.height, "cells": cells},
        "objects": tree_to_json(model, doc.tree),
        "blocks": blocks,
        "diagnostics": [
            {"kind": d.kind, "addr": None if d.addr is None else str(d.addr), "message": d.message}
            for d in check(model, doc)
        ],
    }


def create_app(
    model: TabulaModel,
    instance: InstanceDoc,
    model_path: str | None = None,
    instance_path: str | None = None,
    static_dir: str | None = None,
) -> FastAPI:
    app = FastAPI(title="tabula", docs_url=None, redoc_url=None)
    state = _State(model=model, instance=instance)
    lock = threading.Lock()

    def persist() -> None:
        if model_path is not None:
            Path(model_path).write_text(print_model(state.model), encoding="utf-8")
        if instance_path is not None:
            save_instance(state.instance, instance_path)

    @app.get("/api/state")
    def get_state():
        with lock:
            return _snapshot(state)

    @app.get("/api/metrics")
    def get_metrics():
        with lock:
            m = metrics(state.model)
            return {
                "width": m.width,
                "height": m.height,
                "classes": m.classes,
                "attributes": m.attributes,
                "inputs": m.inputs,
                "formulas": m.formulas,
                "row": m.row(),
            }

    @app.get("/api/export.csv")
    def get_export(mode: str = "values"):
        if mode not in ("values", "formulas"):
            return JSONResponse(
                {"errors": [{"message": "mode must be values or formulas"}]}, status_code=422
            )
        with lock:
            return PlainTextResponse(export_csv(state.instance, mode=mode), media_type="text/csv")

    async def _apply_batch(request: Request, model_ops: bool):
        try:
            payload = await request.json()
        except Exception:
            return JSONResponse({"errors": [{"message": "invalid JSON"}]}, status_code=422)
        if not isinstance(payload, dict) or not isinstance(payload.get("ops"), list):
            return JSONResponse(
                {"errors": [{"message": 'payload must be {"baseRev": n, "ops": [...]}'}]},
                status_code=422,
            )
        base = payload.get("baseRev")
        force = bool(payload.get("force", False))
        with lock:
            if base != state.revision:
                return JSONResponse(
                    {"error": "stale revision", "revision": state.revision}, status_code=409
                )
            m, doc = state.model, state.instance
            try:
                for raw in payload["ops"]:
                    op = op_from_json(m, raw)
                    is_model = isinstance(op, _MODEL_OPS)
                    if model_ops and not is_model:
                        raise OpRejected(f"{raw.get('op')} is an instance operation")
                    if not model_ops and is_model:
                        raise OpRejected(f"{raw.get('op')} is a model operation")
                    if is_model:
                        m, doc = sync_apply_model(m, doc, op, force)
                    else:
                        m, doc = sync_apply_instance(m, doc, op, force)
            except OpRejected as exc:
                # the headline message first; extra reasons only when they add detail
                head: dict[str, str] = {"message": str(exc)}
                if exc.kind is not None:
                    head["kind"] = exc.kind
                if exc.addr is not None:
                    head["addr"] = exc.addr
                entries = [head]
                entries += [{"message": r} for r in exc.reasons if r != str(exc)]
                return JSONResponse({"errors": entries}, status_code=422)
            state.model, state.instance = m, doc
            state.revision += 1
            persist()
            return _snapshot(state)

    @app.post("/api/instance/ops")
    async def post_instance_ops(request: Request):
        return await _apply_batch(request, model_ops=False)

    @app.post("/api/model/ops")
    async def post_model_ops(request: Request):
        return await _apply_batch(request, model_ops=True)

    if static_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=static_dir, html=True), name="ui")

    return app

/**
 * Operation payloads for POST /api/instance/ops and /api/model/ops.
 *
 * Each builder produces exactly one documented engine operation; the UI has
 * no moves that do not correspond to one of these.
 */

import type { CellEntry } from "./types.js";

export type InstanceOpJson =
  | { op: "set-value"; addr: string; value: number | string }
  | { op: "set-formula-at"; addr: string; text: string }
  | { op: "set-label-at"; addr: string; text: string }
  | { op: "add-object"; cls: string; ctx: Record<string, number>; at: number | "end" }
  | { op: "remove-object"; cls: string; ctx: Record<string, number>; index: number };

export type ModelOpJson =
  | { op: "set-label"; point: [number, number]; text: string }
  | { op: "set-default"; point: [number, number]; value: number | string }
  | { op: "set-constraint"; point: [number, number]; constraint: string | null }
  | { op: "set-formula"; point: [number, number]; formula: string };

export type OpJson = InstanceOpJson | ModelOpJson;

export const setValue = (addr: string, value: number | string): InstanceOpJson => ({
  op: "set-value",
  addr,
  value,
});

export const setFormulaAt = (addr: string, text: string): InstanceOpJson => ({
  op: "set-formula-at",
  addr,
  text,
});

export const addObject = (
  cls: string,
  ctx: Record<string, number>,
  at: number | "end" = "end",
): InstanceOpJson => ({ op: "add-object", cls, ctx, at });

export const removeObject = (
  cls: string,
  ctx: Record<string, number>,
  index: number,
): InstanceOpJson => ({ op: "remove-object", cls, ctx, index });

export const setLabel = (point: [number, number], text: string): ModelOpJson => ({
  op: "set-label",
  point,
  text,
});

export const setConstraint = (
  point: [number, number],
  constraint: string | null,
): ModelOpJson => ({ op: "set-constraint", point, constraint });

export const setFormula = (point: [number, number], formula: string): ModelOpJson => ({
  op: "set-formula",
  point,
  formula,
});

/**
 * Interpret text typed into an input cell.
 *
 * Numeric cells take anything that parses as a finite number; everything
 * else is passed through as text and the engine decides. A number typed
 * into a text cell stays text (the cell's type is fixed by its default).
 */
export function parseCellInput(raw: string, cell: CellEntry): number | string {
  if (typeof cell.value === "number") {
    const t = raw.trim();
    const n = Number(t);
    if (t !== "" && Number.isFinite(n)) return n;
  }
  return raw;
}

/** The cell an op targets, for anchoring a rejection badge. */
export function opAnchor(op: OpJson): string | null {
  switch (op.op) {
    case "set-value":
    case "set-formula-at":
    case "set-label-at":
      return op.addr;
    default:
      return null;
  }
}

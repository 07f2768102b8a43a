/**
 * Wire types for the engine's HTTP API.
 *
 * The shapes mirror GET /api/state exactly; assertSnapshot() narrows an
 * untyped response and names the first offending field when the payload is
 * not a snapshot, so the caller can show one clear error banner instead of
 * crashing mid-render.
 */

export type Expansion = "none" | "down" | "right" | "both";
export type ClassRole = "base" | "vertical" | "horizontal" | "relation";
export type CellKind = "label" | "input" | "formula" | "blank";

export interface ClassEntry {
  name: string;
  range: [[number, number], [number, number]];
  expansion: Expansion;
  role: ClassRole;
  parents: string[];
  /** Stable palette index; equal for every cell the class owns. */
  color: number;
}

export interface CellEntry {
  addr: string;
  row: number;
  col: number;
  /** Model-grid point this cell instantiates, as [col, row]. */
  model: [number, number];
  /** Object index per repeating class this cell sits under. */
  ctx: Record<string, number>;
  owner: string;
  color: number;
  kind: CellKind;
  /** True only for cells whose value a set-value op may change. */
  editable: boolean;
  display: string;
  value?: number | string;
  formula?: string;
  constraint?: string;
  name?: string;
}

export interface BlockEntry {
  cls: string;
  axis: "row" | "col";
  ctx: Record<string, number>;
  start: number;
  end: number;
}

export interface DiagnosticEntry {
  kind: string;
  addr: string | null;
  message: string;
}

export interface Snapshot {
  revision: number;
  model: {
    name: string;
    text: string;
    width: number;
    height: number;
    classes: ClassEntry[];
  };
  grid: {
    width: number;
    height: number;
    cells: CellEntry[];
  };
  objects: unknown;
  blocks: BlockEntry[];
  diagnostics: DiagnosticEntry[];
}

export class SnapshotError extends Error {
  override name = "SnapshotError";
}

function fail(path: string, want: string): never {
  throw new SnapshotError(`${path}: expected ${want}`);
}

function rec(v: unknown, path: string): Record<string, unknown> {
  if (typeof v !== "object" || v === null || Array.isArray(v)) fail(path, "an object");
  return v as Record<string, unknown>;
}

function num(v: unknown, path: string): number {
  if (typeof v !== "number" || !Number.isFinite(v)) fail(path, "a number");
  return v;
}

function str(v: unknown, path: string): string {
  if (typeof v !== "string") fail(path, "a string");
  return v;
}

function arr(v: unknown, path: string): unknown[] {
  if (!Array.isArray(v)) fail(path, "an array");
  return v;
}

function point(v: unknown, path: string): [number, number] {
  const a = arr(v, path);
  if (a.length !== 2) fail(path, "a [col, row] pair");
  return [num(a[0], `${path}[0]`), num(a[1], `${path}[1]`)];
}

function ctxMap(v: unknown, path: string): Record<string, number> {
  const r = rec(v, path);
  for (const k of Object.keys(r)) num(r[k], `${path}.${k}`);
  return r as Record<string, number>;
}

const KINDS = new Set<string>(["label", "input", "formula", "blank"]);

/** Validate a decoded /api/state payload and return it typed. */
export function assertSnapshot(data: unknown): Snapshot {
  const top = rec(data, "snapshot");
  num(top.revision, "snapshot.revision");

  const model = rec(top.model, "snapshot.model");
  str(model.name, "snapshot.model.name");
  str(model.text, "snapshot.model.text");
  num(model.width, "snapshot.model.width");
  num(model.height, "snapshot.model.height");
  for (const [i, c] of arr(model.classes, "snapshot.model.classes").entries()) {
    const p = `snapshot.model.classes[${i}]`;
    const e = rec(c, p);
    str(e.name, `${p}.name`);
    const rg = arr(e.range, `${p}.range`);
    if (rg.length !== 2) fail(`${p}.range`, "two corner points");
    point(rg[0], `${p}.range[0]`);
    point(rg[1], `${p}.range[1]`);
    str(e.expansion, `${p}.expansion`);
    str(e.role, `${p}.role`);
    arr(e.parents, `${p}.parents`);
    num(e.color, `${p}.color`);
  }

  const grid = rec(top.grid, "snapshot.grid");
  const width = num(grid.width, "snapshot.grid.width");
  const height = num(grid.height, "snapshot.grid.height");
  const cells = arr(grid.cells, "snapshot.grid.cells");
  if (cells.length !== width * height) {
    fail("snapshot.grid.cells", `${width * height} cells for a ${width}x${height} grid`);
  }
  for (const [i, c] of cells.entries()) {
    const p = `snapshot.grid.cells[${i}]`;
    const e = rec(c, p);
    str(e.addr, `${p}.addr`);
    num(e.row, `${p}.row`);
    num(e.col, `${p}.col`);
    point(e.model, `${p}.model`);
    ctxMap(e.ctx, `${p}.ctx`);
    str(e.owner, `${p}.owner`);
    num(e.color, `${p}.color`);
    if (!KINDS.has(str(e.kind, `${p}.kind`))) fail(`${p}.kind`, "a cell kind");
    if (typeof e.editable !== "boolean") fail(`${p}.editable`, "a boolean");
    str(e.display, `${p}.display`);
  }

  for (const [i, b] of arr(top.blocks, "snapshot.blocks").entries()) {
    const p = `snapshot.blocks[${i}]`;
    const e = rec(b, p);
    str(e.cls, `${p}.cls`);
    const axis = str(e.axis, `${p}.axis`);
    if (axis !== "row" && axis !== "col") fail(`${p}.axis`, '"row" or "col"');
    ctxMap(e.ctx, `${p}.ctx`);
    num(e.start, `${p}.start`);
    num(e.end, `${p}.end`);
  }

  for (const [i, d] of arr(top.diagnostics, "snapshot.diagnostics").entries()) {
    const p = `snapshot.diagnostics[${i}]`;
    const e = rec(d, p);
    str(e.kind, `${p}.kind`);
    if (e.addr !== null) str(e.addr, `${p}.addr`);
    str(e.message, `${p}.message`);
  }

  return data as Snapshot;
}

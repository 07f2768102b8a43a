/**
 * Pure snapshot-to-view-model mapping.
 *
 * Everything the grid shows is derived here from the last server-confirmed
 * snapshot plus local rejection badges; there is no optimistic state, so a
 * rejected edit disappears on the next render by construction.
 */

import type { BlockEntry, CellEntry, DiagnosticEntry, Snapshot } from "./types.js";
import { SnapshotError } from "./types.js";
import { classEdge, classFill } from "./palette.js";
import type { OpJson } from "./ops.js";

export interface Badge {
  kind: string;
  message: string;
}

/** A batch held after a revision conflict, waiting for retry or discard. */
export interface PendingBatch {
  lane: "instance" | "model";
  ops: OpJson[];
  anchor: string | null;
}

export interface CellView {
  addr: string;
  row: number;
  col: number;
  kind: CellEntry["kind"];
  display: string;
  editable: boolean;
  owner: string;
  colorIndex: number;
  /** Background fill when the overlay is on, else null. */
  fill: string | null;
  /** Formula text for formula cells, shown as a tooltip. */
  tooltip: string | null;
  badge: Badge | null;
  modelPoint: [number, number];
  ctx: Record<string, number>;
  name: string | null;
  constraint: string | null;
  value: number | string | null;
}

export interface LegendEntry {
  name: string;
  colorIndex: number;
  fill: string;
  edge: string;
  role: string;
  expansion: string;
}

/** "+ object" control: appends one object to a repeating-class family. */
export interface AddHandle {
  cls: string;
  parentCtx: Record<string, number>;
  axis: "row" | "col";
  /** Grid row (or column) index of the family's last occupied line. */
  anchor: number;
  label: string;
}

/** "− object" control: removes one concrete object. */
export interface RemoveHandle {
  cls: string;
  parentCtx: Record<string, number>;
  index: number;
  axis: "row" | "col";
  start: number;
  end: number;
  label: string;
}

export interface GridView {
  width: number;
  height: number;
  rows: CellView[][];
  legend: LegendEntry[] | null;
  blocks: BlockEntry[];
  addHandles: AddHandle[];
  removeHandles: RemoveHandle[];
  diagnostics: DiagnosticEntry[];
  pending: PendingBatch | null;
}

export interface GridViewOptions {
  overlay: boolean;
  badges?: Map<string, Badge>;
  pending?: PendingBatch | null;
}

function parentCtxOf(block: BlockEntry): Record<string, number> {
  const out: Record<string, number> = {};
  for (const [k, v] of Object.entries(block.ctx)) {
    if (k !== block.cls) out[k] = v;
  }
  return out;
}

function familyKey(cls: string, parentCtx: Record<string, number>): string {
  const parts = Object.keys(parentCtx)
    .sort()
    .map((k) => `${k}=${parentCtx[k]}`);
  return `${cls}|${parts.join(",")}`;
}

function buildHandles(blocks: BlockEntry[]): {
  add: AddHandle[];
  remove: RemoveHandle[];
} {
  const families = new Map<string, AddHandle>();
  const remove: RemoveHandle[] = [];
  for (const b of blocks) {
    const parentCtx = parentCtxOf(b);
    const key = familyKey(b.cls, parentCtx);
    const existing = families.get(key);
    if (existing === undefined) {
      families.set(key, {
        cls: b.cls,
        parentCtx,
        axis: b.axis,
        anchor: b.end,
        label: `+ ${b.cls}`,
      });
    } else if (b.end > existing.anchor) {
      existing.anchor = b.end;
    }
    const index = b.ctx[b.cls];
    if (index === undefined) continue; // defensive; the engine always includes it
    remove.push({
      cls: b.cls,
      parentCtx,
      index,
      axis: b.axis,
      start: b.start,
      end: b.end,
      label: `− ${b.cls} ${index + 1}`,
    });
  }
  return { add: [...families.values()], remove };
}

/** Badges from persisted conformance diagnostics, overridden by local ones. */
export function mergeBadges(
  diagnostics: DiagnosticEntry[],
  local: Map<string, Badge>,
): Map<string, Badge> {
  const merged = new Map<string, Badge>();
  for (const d of diagnostics) {
    if (d.addr !== null) merged.set(d.addr, { kind: d.kind, message: d.message });
  }
  for (const [addr, badge] of local) merged.set(addr, badge);
  return merged;
}

export function buildGridView(snap: Snapshot, opts: GridViewOptions): GridView {
  const { width, height } = snap.grid;
  const badges = mergeBadges(snap.diagnostics, opts.badges ?? new Map());

  const rows: CellView[][] = Array.from({ length: height }, () => []);
  for (const cell of snap.grid.cells) {
    if (cell.row < 0 || cell.row >= height || cell.col < 0 || cell.col >= width) {
      throw new SnapshotError(`cell ${cell.addr} is outside the ${width}x${height} grid`);
    }
    rows[cell.row]![cell.col] = {
      addr: cell.addr,
      row: cell.row,
      col: cell.col,
      kind: cell.kind,
      display: cell.display,
      editable: cell.editable,
      owner: cell.owner,
      colorIndex: cell.color,
      fill: opts.overlay ? classFill(cell.color) : null,
      tooltip: cell.kind === "formula" ? (cell.formula ?? null) : null,
      badge: badges.get(cell.addr) ?? null,
      modelPoint: cell.model,
      ctx: cell.ctx,
      name: cell.name ?? null,
      constraint: cell.constraint ?? null,
      value: cell.value ?? null,
    };
  }
  for (const [r, row] of rows.entries()) {
    for (let c = 0; c < width; c++) {
      if (row[c] === undefined) {
        throw new SnapshotError(`no cell at row ${r}, column ${c}`);
      }
    }
  }

  const legend: LegendEntry[] | null = opts.overlay
    ? [...snap.model.classes]
        .sort((a, b) => a.color - b.color)
        .map((c) => ({
          name: c.name,
          colorIndex: c.color,
          fill: classFill(c.color),
          edge: classEdge(c.color),
          role: c.role,
          expansion: c.expansion,
        }))
    : null;

  const { add, remove } = buildHandles(snap.blocks);
  return {
    width,
    height,
    rows,
    legend,
    blocks: snap.blocks,
    addHandles: add,
    removeHandles: remove,
    diagnostics: snap.diagnostics,
    pending: opts.pending ?? null,
  };
}

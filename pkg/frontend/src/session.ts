/**
 * Editor session: the one mutable object between the API client and the DOM.
 *
 * State changes only when the server confirms something. A submit either
 * replaces the snapshot (accepted), leaves it and raises badges (rejected),
 * or refreshes it and parks the batch for the user to retry (revision
 * conflict). Subscribers are notified after every settled submit.
 */

import { EngineClient, Lane } from "./client.js";
import { OpJson, opAnchor, parseCellInput, setValue } from "./ops.js";
import type { Snapshot } from "./types.js";
import {
  AddHandle,
  Badge,
  GridView,
  PendingBatch,
  RemoveHandle,
  buildGridView,
} from "./viewmodel.js";
import { addObject, removeObject } from "./ops.js";

export class EditorSession {
  overlay = false;
  modelMode = false;
  /** Local rejection badges by cell address. */
  badges = new Map<string, Badge>();
  /** Message with no cell to point at (transport trouble, whole-batch rejections). */
  banner: string | null = null;
  /** Batch refused because of a stale revision, awaiting retry or discard. */
  conflict: PendingBatch | null = null;

  private listeners: Array<() => void> = [];

  constructor(
    readonly client: EngineClient,
    public snapshot: Snapshot,
  ) {}

  static async connect(client: EngineClient): Promise<EditorSession> {
    return new EditorSession(client, await client.state());
  }

  subscribe(fn: () => void): void {
    this.listeners.push(fn);
  }

  private emit(): void {
    for (const fn of this.listeners) fn();
  }

  get revision(): number {
    return this.snapshot.revision;
  }

  view(): GridView {
    return buildGridView(this.snapshot, {
      overlay: this.overlay,
      badges: this.badges,
      pending: this.conflict,
    });
  }

  toggleOverlay(): void {
    this.overlay = !this.overlay;
    this.emit();
  }

  toggleModelMode(): void {
    this.modelMode = !this.modelMode;
    this.emit();
  }

  async refresh(): Promise<void> {
    this.snapshot = await this.client.state();
    this.emit();
  }

  /**
   * Post one batch against the current revision.
   *
   * anchor names the cell a rejection badge should land on when the engine
   * does not anchor the rejection itself; ops that target a cell supply it
   * automatically.
   */
  async submit(lane: Lane, ops: OpJson[], anchor: string | null = null): Promise<boolean> {
    this.banner = null;
    for (const op of ops) {
      const a = opAnchor(op);
      if (a !== null) this.badges.delete(a);
    }
    if (anchor !== null) this.badges.delete(anchor);

    const result = await this.client.postOps(lane, ops, this.snapshot.revision);
    if (result.status === "applied") {
      this.snapshot = result.snapshot;
      this.conflict = null;
      this.emit();
      return true;
    }
    if (result.status === "stale") {
      // someone else moved the document; show their state, keep our batch
      this.snapshot = await this.client.state();
      this.conflict = { lane, ops, anchor };
      this.emit();
      return false;
    }
    const fallback = anchor ?? ops.map(opAnchor).find((a) => a !== null) ?? null;
    const floating: string[] = [];
    for (const entry of result.errors) {
      const at = entry.addr ?? fallback;
      if (at !== null) {
        this.badges.set(at, {
          kind: entry.kind ?? "Rejected",
          message: entry.message,
        });
      } else {
        floating.push(entry.message);
      }
    }
    if (floating.length > 0) this.banner = floating.join("; ");
    this.emit();
    return false;
  }

  /** Parse text typed into an input cell and submit it as a set-value. */
  async submitCellEdit(addr: string, raw: string): Promise<boolean> {
    const cell = this.snapshot.grid.cells.find((c) => c.addr === addr);
    if (cell === undefined || cell.kind !== "input") {
      this.banner = `${addr} is not an input cell`;
      this.emit();
      return false;
    }
    return this.submit("instance", [setValue(addr, parseCellInput(raw, cell))]);
  }

  async addObject(handle: AddHandle): Promise<boolean> {
    return this.submit("instance", [addObject(handle.cls, handle.parentCtx, "end")]);
  }

  async removeObject(handle: RemoveHandle): Promise<boolean> {
    return this.submit("instance", [removeObject(handle.cls, handle.parentCtx, handle.index)]);
  }

  async retryConflict(): Promise<boolean> {
    const batch = this.conflict;
    if (batch === null) return false;
    this.conflict = null;
    return this.submit(batch.lane, batch.ops, batch.anchor);
  }

  discardConflict(): void {
    this.conflict = null;
    this.emit();
  }
}

/**
 * Typed client for the engine's HTTP API.
 *
 * The two interesting non-success answers are part of the protocol, not
 * failures: 409 means our revision is stale, 422 means the batch was
 * rejected and nothing changed. Anything else unexpected throws.
 */

import { assertSnapshot, Snapshot } from "./types.js";
import type { OpJson } from "./ops.js";

export type Lane = "instance" | "model";

export interface RejectEntry {
  message: string;
  /** Diagnostic kind (e.g. ConstraintViolation) when the engine anchors the rejection. */
  kind?: string;
  /** Cell the rejection is anchored at, when known. */
  addr?: string;
}

export type OpResult =
  | { status: "applied"; snapshot: Snapshot }
  | { status: "stale"; revision: number }
  | { status: "rejected"; errors: RejectEntry[] };

export class TransportError extends Error {
  override name = "TransportError";

  constructor(
    message: string,
    readonly status: number,
  ) {
    super(message);
  }
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

/** What a session needs from the server; ApiClient is the real one. */
export interface EngineClient {
  state(): Promise<Snapshot>;
  postOps(lane: Lane, ops: OpJson[], baseRev: number, force?: boolean): Promise<OpResult>;
  exportUrl(mode: "values" | "formulas"): string;
}

export class ApiClient implements EngineClient {
  private fetchImpl: FetchLike;

  constructor(
    readonly baseUrl: string = "",
    fetchImpl?: FetchLike,
  ) {
    this.fetchImpl = fetchImpl ?? ((input, init) => fetch(input, init));
  }

  async state(): Promise<Snapshot> {
    const res = await this.fetchImpl(`${this.baseUrl}/api/state`);
    if (!res.ok) throw new TransportError(`GET /api/state failed (${res.status})`, res.status);
    return assertSnapshot(await res.json());
  }

  async postOps(lane: Lane, ops: OpJson[], baseRev: number, force = false): Promise<OpResult> {
    const res = await this.fetchImpl(`${this.baseUrl}/api/${lane}/ops`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ baseRev, ops, force }),
    });
    if (res.status === 409) {
      const body = (await res.json()) as { revision?: number };
      return { status: "stale", revision: body.revision ?? -1 };
    }
    if (res.status === 422) {
      const body = (await res.json()) as { errors?: RejectEntry[] };
      const errors = Array.isArray(body.errors) ? body.errors : [];
      return {
        status: "rejected",
        errors: errors.length > 0 ? errors : [{ message: "operation rejected" }],
      };
    }
    if (!res.ok) {
      throw new TransportError(`POST /api/${lane}/ops failed (${res.status})`, res.status);
    }
    return { status: "applied", snapshot: assertSnapshot(await res.json()) };
  }

  async metrics(): Promise<Record<string, unknown>> {
    const res = await this.fetchImpl(`${this.baseUrl}/api/metrics`);
    if (!res.ok) throw new TransportError(`GET /api/metrics failed (${res.status})`, res.status);
    return (await res.json()) as Record<string, unknown>;
  }

  exportUrl(mode: "values" | "formulas"): string {
    return `${this.baseUrl}/api/export.csv?mode=${mode}`;
  }
}

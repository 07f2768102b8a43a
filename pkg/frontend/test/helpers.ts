import { readFileSync } from "node:fs";
import { assertSnapshot, Snapshot } from "../src/types.js";

/**
 * A real /api/state response for the inventory model with categories of
 * three and two items, captured from a live engine (see README for the
 * capture command). Tests get a fresh deep copy each time.
 */
const raw = readFileSync(new URL("./fixtures/inventory-snapshot.json", import.meta.url), "utf8");

export function inventorySnapshot(): Snapshot {
  return assertSnapshot(JSON.parse(raw));
}

export function cellOf(snap: Snapshot, addr: string) {
  const cell = snap.grid.cells.find((c) => c.addr === addr);
  if (cell === undefined) throw new Error(`no cell ${addr} in fixture`);
  return cell;
}

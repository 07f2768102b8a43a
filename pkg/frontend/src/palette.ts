/**
 * Class colors for the model overlay.
 *
 * One light background per palette index, dark enough borders to read as a
 * legend swatch. Indices beyond the table wrap around.
 */

const FILLS = [
  "#dbeafe", // blue
  "#dcfce7", // green
  "#fef3c7", // amber
  "#fce7f3", // pink
  "#e0e7ff", // indigo
  "#ccfbf1", // teal
  "#fee2e2", // red
  "#ededed", // gray
];

const EDGES = [
  "#1d4ed8",
  "#15803d",
  "#b45309",
  "#be185d",
  "#4338ca",
  "#0f766e",
  "#b91c1c",
  "#525252",
];

export function classFill(index: number): string {
  return FILLS[((index % FILLS.length) + FILLS.length) % FILLS.length]!;
}

export function classEdge(index: number): string {
  return EDGES[((index % EDGES.length) + EDGES.length) % EDGES.length]!;
}

/** How many palette entries exist before colors repeat. */
export const PALETTE_SIZE = FILLS.length;

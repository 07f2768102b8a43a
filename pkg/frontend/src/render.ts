/**
 * DOM rendering. The whole app re-renders from the session's view model
 * after every confirmed change; grids here are small enough that diffing
 * would buy nothing.
 */

import { EditorSession } from "./session.js";
import { setConstraint, setFormulaAt, setLabel } from "./ops.js";
import type { CellView, GridView } from "./viewmodel.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className !== undefined) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

function button(label: string, title: string, onClick: () => void): HTMLButtonElement {
  const b = el("button", "", label);
  b.type = "button";
  b.title = title;
  b.addEventListener("click", onClick);
  return b;
}

function colLetters(index: number): string {
  let n = index;
  let out = "";
  do {
    out = String.fromCharCode(65 + (n % 26)) + out;
    n = Math.floor(n / 26) - 1;
  } while (n >= 0);
  return out;
}

/** Swap a cell's content for a text input; Enter commits, Escape cancels. */
function inlineEdit(
  host: HTMLElement,
  initial: string,
  placeholder: string,
  onCommit: (text: string) => void,
  onCancel: () => void,
): void {
  host.textContent = "";
  const input = el("input", "inline-edit");
  input.value = initial;
  input.placeholder = placeholder;
  let settled = false;
  const commit = () => {
    if (settled) return;
    settled = true;
    onCommit(input.value);
  };
  const cancel = () => {
    if (settled) return;
    settled = true;
    onCancel();
  };
  input.addEventListener("keydown", (e) => {
    if (e.key === "Enter") commit();
    else if (e.key === "Escape") cancel();
  });
  input.addEventListener("blur", () => commit());
  host.appendChild(input);
  input.focus();
  input.select();
}

function renderHeader(session: EditorSession): HTMLElement {
  const bar = el("header", "topbar");
  bar.appendChild(el("h1", "", session.snapshot.model.name));
  bar.appendChild(el("span", "rev", `rev ${session.revision}`));

  const overlayBtn = button("Colors", "Toggle the class-color model overlay", () =>
    session.toggleOverlay(),
  );
  overlayBtn.setAttribute("aria-pressed", String(session.overlay));
  overlayBtn.classList.toggle("on", session.overlay);
  bar.appendChild(overlayBtn);

  const modeBtn = button(
    "Model mode",
    "Edit the model (labels, constraints) instead of values",
    () => session.toggleModelMode(),
  );
  modeBtn.setAttribute("aria-pressed", String(session.modelMode));
  modeBtn.classList.toggle("on", session.modelMode);
  bar.appendChild(modeBtn);

  for (const mode of ["values", "formulas"] as const) {
    const a = el("a", "export", `csv: ${mode}`);
    a.href = session.client.exportUrl(mode);
    a.target = "_blank";
    bar.appendChild(a);
  }
  return bar;
}

function renderNotices(session: EditorSession): HTMLElement {
  const box = el("div", "notices");
  if (session.banner !== null) {
    box.appendChild(el("div", "banner", session.banner));
  }
  if (session.conflict !== null) {
    const c = el("div", "conflict");
    c.appendChild(
      el(
        "span",
        "",
        `The document changed on the server (now rev ${session.revision}). Retry your edit against the new state?`,
      ),
    );
    c.appendChild(button("Retry", "Re-apply the held edit", () => void session.retryConflict()));
    c.appendChild(button("Discard", "Drop the held edit", () => session.discardConflict()));
    box.appendChild(c);
  }
  return box;
}

function renderLegend(view: GridView): HTMLElement | null {
  if (view.legend === null) return null;
  const box = el("div", "legend");
  for (const entry of view.legend) {
    const item = el("span", "legend-item");
    const swatch = el("span", "swatch");
    swatch.style.background = entry.fill;
    swatch.style.borderColor = entry.edge;
    item.appendChild(swatch);
    item.appendChild(el("span", "", `${entry.name} (${entry.expansion})`));
    box.appendChild(item);
  }
  return box;
}

function renderCell(td: HTMLTableCellElement, cell: CellView, session: EditorSession): void {
  td.dataset.addr = cell.addr;
  td.dataset.kind = cell.kind;
  if (cell.fill !== null) td.style.background = cell.fill;

  if (cell.badge !== null) {
    td.classList.add("flagged");
    const badge = el("span", "badge", cell.badge.kind);
    badge.title = cell.badge.message;
    td.appendChild(badge);
  }

  if (cell.kind === "input" && !session.modelMode) {
    const input = el("input", "cell-input");
    input.value = cell.display;
    if (cell.constraint !== null) input.title = `${cell.name}: ${cell.constraint}`;
    else if (cell.name !== null) input.title = cell.name;
    input.addEventListener("keydown", (e) => {
      if (e.key === "Enter") input.blur();
      else if (e.key === "Escape") {
        input.value = cell.display;
        input.blur();
      }
    });
    input.addEventListener("blur", () => {
      if (input.value !== cell.display) void session.submitCellEdit(cell.addr, input.value);
    });
    td.appendChild(input);
    return;
  }

  const span = el("span", "display", cell.display);
  if (cell.tooltip !== null) {
    td.classList.add("formula");
    span.title = `= ${cell.tooltip}`;
  }
  td.appendChild(span);

  if (cell.kind === "formula" && !session.modelMode) {
    // double-click edits the translated formula; the engine only accepts
    // edits that still generalize over whole object families
    td.addEventListener("dblclick", () => {
      inlineEdit(
        td,
        cell.tooltip ?? "",
        "A1 formula",
        (text) => void session.submit("instance", [setFormulaAt(cell.addr, text)], cell.addr),
        () => session.discardConflict(),
      );
    });
  }

  if (session.modelMode) {
    if (cell.kind === "label" || cell.kind === "blank") {
      td.classList.add("model-editable");
      td.title = "Click to edit this label everywhere it appears";
      td.addEventListener("click", () => {
        inlineEdit(
          td,
          cell.display,
          "label",
          (text) => void session.submit("model", [setLabel(cell.modelPoint, text)], cell.addr),
          () => session.discardConflict(),
        );
      });
    } else if (cell.kind === "input") {
      td.classList.add("model-editable");
      td.title = `Click to edit the constraint on ${cell.name ?? "this input"}`;
      td.addEventListener("click", () => {
        inlineEdit(
          td,
          cell.constraint ?? "",
          "constraint, e.g. >=0 (empty clears)",
          (text) => {
            const c = text.trim() === "" ? null : text.trim();
            void session.submit("model", [setConstraint(cell.modelPoint, c)], cell.addr);
          },
          () => session.discardConflict(),
        );
      });
    }
  }
}

function renderGrid(view: GridView, session: EditorSession): HTMLElement {
  const wrap = el("div", "gridwrap");
  const table = el("table", "grid");

  const thead = el("thead");
  const headRow = el("tr");
  headRow.appendChild(el("th", "corner"));
  for (let c = 0; c < view.width; c++) {
    const th = el("th", "colhdr", colLetters(c));
    // column-axis object removal sits on the block's first column header
    for (const h of view.removeHandles) {
      if (h.axis === "col" && h.start === c) {
        th.appendChild(
          button("−", `Remove ${h.cls} ${h.index + 1}`, () => void session.removeObject(h)),
        );
      }
    }
    headRow.appendChild(th);
  }
  const headGutter = el("th", "gutter");
  for (const h of view.addHandles) {
    if (h.axis === "col") {
      headGutter.appendChild(
        button(h.label, `Add one ${h.cls}`, () => void session.addObject(h)),
      );
    }
  }
  headRow.appendChild(headGutter);
  thead.appendChild(headRow);
  table.appendChild(thead);

  const tbody = el("tbody");
  for (const [r, rowCells] of view.rows.entries()) {
    const tr = el("tr");
    tr.appendChild(el("th", "rowhdr", String(r + 1)));
    for (const cell of rowCells) {
      const td = el("td");
      renderCell(td, cell, session);
      tr.appendChild(td);
    }
    const gutter = el("td", "gutter");
    for (const h of view.removeHandles) {
      if (h.axis === "row" && h.start === r) {
        gutter.appendChild(
          button("−", `Remove ${h.cls} ${h.index + 1}`, () => void session.removeObject(h)),
        );
      }
    }
    for (const h of view.addHandles) {
      if (h.axis === "row" && h.anchor === r) {
        gutter.appendChild(button(h.label, `Add one ${h.cls}`, () => void session.addObject(h)));
      }
    }
    tr.appendChild(gutter);
    tbody.appendChild(tr);
  }
  table.appendChild(tbody);
  wrap.appendChild(table);
  return wrap;
}

function renderDiagnostics(view: GridView): HTMLElement | null {
  if (view.diagnostics.length === 0) return null;
  const box = el("div", "diags");
  box.appendChild(el("h2", "", "Conformance"));
  for (const d of view.diagnostics) {
    box.appendChild(el("div", "diag", `${d.kind} ${d.addr ?? "-"} ${d.message}`));
  }
  return box;
}

export function render(root: HTMLElement, session: EditorSession): void {
  const view = session.view();
  root.textContent = "";
  root.appendChild(renderHeader(session));
  root.appendChild(renderNotices(session));
  const legend = renderLegend(view);
  if (legend !== null) root.appendChild(legend);
  root.appendChild(renderGrid(view, session));
  const diags = renderDiagnostics(view);
  if (diags !== null) root.appendChild(diags);
}

/** Render now and after every session change. */
export function mount(root: HTMLElement, session: EditorSession): void {
  session.subscribe(() => render(root, session));
  render(root, session);
}

/** DOM rendering. Pure functions from view-models to table markup;
 * every cell shows a value the service sent (or the totals sum of the
 * rendered column). Waits are printed with one decimal.
 */

import type { PlanView, QueueDetailView } from "./state.js";

function el<K extends keyof HTMLElementTagNameMap>(
  doc: Document,
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = doc.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

export function minutesLabel(minutes: number): string {
  return minutes.toFixed(1);
}

export function renderPlan(
  container: HTMLElement,
  view: PlanView,
  onOpenQueue?: (taskId: string) => void,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  container.appendChild(
    el(doc, "p", "plan-revision", `Plan revision ${view.revision}`),
  );
  const table = el(doc, "table", "plan-table");
  const head = el(doc, "tr");
  for (const label of ["#", "Task", "Wait (min)", "In queue", "Constraint"]) {
    head.appendChild(el(doc, "th", undefined, label));
  }
  table.appendChild(head);
  view.rows.forEach((row, index) => {
    const tr = el(doc, "tr", row.moved ? "plan-row moved" : "plan-row");
    tr.dataset.task = row.taskId;
    tr.appendChild(el(doc, "td", undefined, String(index + 1)));
    tr.appendChild(el(doc, "td", "task-name", row.taskId));
    tr.appendChild(el(doc, "td", "wait-min", minutesLabel(row.waitMin)));
    tr.appendChild(el(doc, "td", "queue-length", String(row.queueLength)));
    tr.appendChild(el(doc, "td", "dependency-badge", row.dependencyBadge));
    if (onOpenQueue) {
      tr.addEventListener("click", () => onOpenQueue(row.taskId));
    }
    table.appendChild(tr);
  });
  container.appendChild(table);
}

export function renderQueueDetail(
  container: HTMLElement,
  view: QueueDetailView,
): void {
  const doc = container.ownerDocument;
  container.replaceChildren();
  container.appendChild(
    el(
      doc,
      "p",
      "queue-heading",
      `${view.taskId} — ${view.department}, ${view.windows} window(s), ` +
        `revision ${view.revision}`,
    ),
  );
  const table = el(doc, "table", "queue-table");
  const head = el(doc, "tr");
  for (const label of ["Patient", "Gender", "Age", "Status", "Predicted (min)"]) {
    head.appendChild(el(doc, "th", undefined, label));
  }
  table.appendChild(head);
  for (const row of view.rows) {
    const tr = el(doc, "tr", "queue-row");
    tr.appendChild(el(doc, "td", undefined, row.patientId));
    tr.appendChild(el(doc, "td", undefined, row.gender));
    tr.appendChild(el(doc, "td", undefined, String(row.age)));
    tr.appendChild(el(doc, "td", undefined, row.status));
    tr.appendChild(el(doc, "td", "predicted-min", minutesLabel(row.predictedMin)));
    table.appendChild(tr);
  }
  const totals = el(doc, "tr", "totals-row");
  const label = el(doc, "td", undefined, "Total");
  label.colSpan = 4;
  totals.appendChild(label);
  totals.appendChild(el(doc, "td", "total-min", minutesLabel(view.totalMin)));
  table.appendChild(totals);
  container.appendChild(table);
}

export function renderFormError(element: HTMLElement, message: string | null): void {
  element.textContent = message ?? "";
  element.hidden = message === null;
}

/** Staleness banner: shown while polls fail, so the user knows the
 * tables below are the last good data, not live. */
export function renderStaleness(element: HTMLElement, stale: boolean): void {
  element.hidden = !stale;
  element.textContent = stale
    ? "Connection lost — showing the last known queues. Retrying…"
    : "";
}

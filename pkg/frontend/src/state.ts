/** View-models derived from service responses.
 *
 * Invariant: nothing here sorts rows or recomputes waits. Row order is
 * exactly the service's plan order; minutes are the service's numbers.
 * The only derived values are presentation hints (dependency badges,
 * moved-row flags) and the queue totals row, which is the sum of the
 * per-row minutes that are actually rendered.
 */

import type { DependencyPair, PlanResponse, QueueDetail } from "./api.js";

export interface PlanRow {
  taskId: string;
  waitMin: number;
  queueLength: number;
  /** "after X, Y" when the request declared prerequisites for this task. */
  dependencyBadge: string;
  /** True when the row sits at a different position than last render. */
  moved: boolean;
}

export interface PlanView {
  revision: number;
  rows: PlanRow[];
}

export function buildPlanView(
  response: PlanResponse,
  dependencies: DependencyPair[],
  previous: PlanView | null = null,
): PlanView {
  const requested = new Set(response.plan.map((entry) => entry.task_id));
  const previousIndex = new Map<string, number>(
    (previous?.rows ?? []).map((row, index) => [row.taskId, index]),
  );
  const rows = response.plan.map((entry, index) => {
    const prereqs = dependencies
      .filter(([before, after]) => after === entry.task_id && requested.has(before))
      .map(([before]) => before);
    const seenAt = previousIndex.get(entry.task_id);
    return {
      taskId: entry.task_id,
      waitMin: entry.predicted_wait_min,
      queueLength: entry.queue_length,
      dependencyBadge: prereqs.length > 0 ? `after ${prereqs.join(", ")}` : "",
      moved: seenAt !== undefined && seenAt !== index,
    };
  });
  return { revision: response.revision, rows };
}

export interface QueueRow {
  patientId: string;
  gender: string;
  age: number;
  status: string;
  predictedMin: number;
}

export interface QueueDetailView {
  taskId: string;
  revision: number;
  windows: number;
  department: string;
  rows: QueueRow[];
  /** Sum of the rendered per-patient minutes, to one decimal. */
  totalMin: number;
}

export function buildQueueDetailView(detail: QueueDetail): QueueDetailView {
  const rows = detail.patients.map((patient) => ({
    patientId: patient.patient_id,
    gender: patient.gender,
    age: patient.age,
    status: patient.status,
    predictedMin: patient.predicted_min,
  }));
  const total = rows.reduce((sum, row) => sum + row.predictedMin, 0);
  return {
    taskId: detail.task_id,
    revision: detail.revision,
    windows: detail.windows,
    department: detail.department,
    rows,
    totalMin: Math.round(total * 10) / 10,
  };
}

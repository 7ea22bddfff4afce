/** Application wiring: request form, recommended-plan table, queue
 * detail drill-down, and the periodic refresh that keeps both in step
 * with the service.
 */

import {
  ApiClient,
  ApiError,
  type DependencyPair,
  type RecommendRequest,
} from "./api.js";
import { DEFAULT_POLL_INTERVAL_MS, Poller } from "./poller.js";
import {
  renderFormError,
  renderPlan,
  renderQueueDetail,
  renderStaleness,
} from "./render.js";
import {
  buildPlanView,
  buildQueueDetailView,
  type PlanView,
} from "./state.js";

export interface AppOptions {
  pollIntervalMs?: number;
}

export interface App {
  root: HTMLElement;
  form: HTMLFormElement;
  submitButton: HTMLButtonElement;
  planContainer: HTMLElement;
  queueContainer: HTMLElement;
  errorBox: HTMLElement;
  stalenessBanner: HTMLElement;
  poller: Poller;
  /** How many times the plan table was (re)rendered. */
  readonly planRenderCount: number;
  submit(): Promise<void>;
  openQueue(taskId: string): Promise<void>;
  refresh(): Promise<void>;
}

export function parseDependencies(text: string): DependencyPair[] {
  const pairs: DependencyPair[] = [];
  for (const raw of text.split(/[\n,]/)) {
    const line = raw.trim();
    if (!line) continue;
    const parts = line.split(">").map((part) => part.trim());
    if (parts.length !== 2 || !parts[0] || !parts[1]) {
      throw new Error(
        `cannot read constraint "${line}" — write it as: first task > later task`,
      );
    }
    pairs.push([parts[0], parts[1]]);
  }
  return pairs;
}

function field(doc: Document, labelText: string, input: HTMLElement): HTMLElement {
  const wrap = doc.createElement("label");
  wrap.className = "field";
  const span = doc.createElement("span");
  span.textContent = labelText;
  wrap.appendChild(span);
  wrap.appendChild(input);
  return wrap;
}

export async function initApp(
  root: HTMLElement,
  client: ApiClient,
  options: AppOptions = {},
): Promise<App> {
  const doc = root.ownerDocument;
  root.replaceChildren();

  const banner = doc.createElement("div");
  banner.className = "staleness-banner";
  banner.hidden = true;
  root.appendChild(banner);

  const form = doc.createElement("form");
  form.className = "request-form";
  const patientId = doc.createElement("input");
  patientId.name = "patient_id";
  patientId.value = "guest";
  const gender = doc.createElement("select");
  gender.name = "gender";
  for (const value of ["female", "male"]) {
    const option = doc.createElement("option");
    option.value = value;
    option.textContent = value;
    gender.appendChild(option);
  }
  const age = doc.createElement("input");
  age.name = "age";
  age.type = "number";
  age.value = "40";
  const dependencies = doc.createElement("textarea");
  dependencies.name = "dependencies";
  dependencies.placeholder = "one constraint per line: first task > later task";

  form.appendChild(field(doc, "Card number", patientId));
  form.appendChild(field(doc, "Gender", gender));
  form.appendChild(field(doc, "Age", age));

  const taskBox = doc.createElement("fieldset");
  taskBox.className = "task-choices";
  const legend = doc.createElement("legend");
  legend.textContent = "Required tasks";
  taskBox.appendChild(legend);
  form.appendChild(taskBox);
  form.appendChild(field(doc, "Order constraints", dependencies));

  const submitButton = doc.createElement("button");
  submitButton.type = "submit";
  submitButton.textContent = "Recommend visit order";
  submitButton.disabled = true;
  form.appendChild(submitButton);

  const errorBox = doc.createElement("p");
  errorBox.className = "form-error";
  errorBox.hidden = true;
  form.appendChild(errorBox);
  root.appendChild(form);

  const planContainer = doc.createElement("section");
  planContainer.className = "plan-view";
  root.appendChild(planContainer);
  const queueContainer = doc.createElement("section");
  queueContainer.className = "queue-view";
  root.appendChild(queueContainer);

  const summaries = await client.getTasks();
  for (const summary of summaries) {
    const label = doc.createElement("label");
    label.className = "task-choice";
    const checkbox = doc.createElement("input");
    checkbox.type = "checkbox";
    checkbox.value = summary.task_id;
    checkbox.addEventListener("change", updateGuard);
    label.appendChild(checkbox);
    label.appendChild(
      doc.createTextNode(` ${summary.task_id} (${summary.queue_length} waiting)`),
    );
    taskBox.appendChild(label);
  }

  function chosenTasks(): string[] {
    return Array.from(
      taskBox.querySelectorAll<HTMLInputElement>("input[type=checkbox]:checked"),
      (box) => box.value,
    );
  }

  function updateGuard(): void {
    submitButton.disabled = chosenTasks().length === 0;
  }

  let currentRequest: RecommendRequest | null = null;
  let currentPlan: PlanView | null = null;
  let openQueueTask: string | null = null;
  let lastQueueRevision: number | null = null;
  let planRenderCount = 0;

  function showPlan(view: PlanView): void {
    currentPlan = view;
    planRenderCount += 1;
    renderPlan(planContainer, view, (taskId) => {
      void openQueue(taskId);
    });
  }

  async function submit(): Promise<void> {
    const tasks = chosenTasks();
    if (tasks.length === 0) return; // guarded by the disabled button
    let pairs: DependencyPair[];
    try {
      pairs = parseDependencies(dependencies.value);
    } catch (error) {
      renderFormError(errorBox, (error as Error).message);
      return;
    }
    const request: RecommendRequest = {
      patient: {
        patient_id: patientId.value.trim() || "guest",
        gender: gender.value,
        age: Number(age.value),
      },
      tasks,
      dependencies: pairs,
    };
    try {
      const response = await client.recommend(request);
      renderFormError(errorBox, null);
      currentRequest = request;
      showPlan(buildPlanView(response, request.dependencies, null));
      poller.start();
    } catch (error) {
      planContainer.replaceChildren(); // an invalid request has no plan
      currentRequest = null;
      currentPlan = null;
      if (error instanceof ApiError) {
        renderFormError(errorBox, error.detail);
      } else {
        renderFormError(
          errorBox,
          "Cannot reach the service — check the connection and retry.",
        );
      }
    }
  }

  async function openQueue(taskId: string): Promise<void> {
    const detail = await client.getQueue(taskId);
    openQueueTask = taskId;
    lastQueueRevision = detail.revision;
    renderQueueDetail(queueContainer, buildQueueDetailView(detail));
  }

  async function refresh(): Promise<void> {
    if (currentRequest === null || currentPlan === null) return;
    const response = await client.recommend(currentRequest);
    if (response.revision !== currentPlan.revision) {
      showPlan(buildPlanView(response, currentRequest.dependencies, currentPlan));
    }
    if (openQueueTask !== null) {
      const detail = await client.getQueue(openQueueTask);
      if (detail.revision !== lastQueueRevision) {
        lastQueueRevision = detail.revision;
        renderQueueDetail(queueContainer, buildQueueDetailView(detail));
      }
    }
  }

  const poller = new Poller(
    refresh,
    (stale) => renderStaleness(banner, stale),
    options.pollIntervalMs ?? DEFAULT_POLL_INTERVAL_MS,
  );

  form.addEventListener("submit", (event) => {
    event.preventDefault();
    void submit();
  });

  return {
    root,
    form,
    submitButton,
    planContainer,
    queueContainer,
    errorBox,
    stalenessBanner: banner,
    poller,
    get planRenderCount() {
      return planRenderCount;
    },
    submit,
    openQueue,
    refresh,
  };
}

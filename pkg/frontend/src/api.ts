/** Typed client for the treatment queue HTTP service.
 *
 * The UI talks to the service exclusively through this module; every
 * response is passed through as-is so views stay a pure rendering of
 * what the service said.
 */

export interface TaskSummary {
  task_id: string;
  windows: number;
  queue_length: number;
  revision: number;
}

export interface PlanEntry {
  task_id: string;
  predicted_wait_min: number;
  queue_length: number;
}

export interface PlanResponse {
  revision: number;
  plan: PlanEntry[];
}

export interface QueuePatient {
  patient_id: string;
  gender: string;
  age: number;
  status: string;
  predicted_min: number;
}

export interface QueueDetail {
  task_id: string;
  revision: number;
  windows: number;
  department: string;
  doctor: string;
  queue_length: number;
  predicted_wait_min: number;
  patients: QueuePatient[];
}

export type DependencyPair = [string, string];

export interface RecommendRequest {
  patient: { patient_id: string; gender: string; age: number };
  tasks: string[];
  dependencies: DependencyPair[];
}

export interface MutationResponse {
  revision: number;
}

export interface Health {
  status: string;
  revision: number;
}

/** A non-2xx service reply, carrying the HTTP status and detail text. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: string,
  ) {
    super(`service replied ${status}: ${detail}`);
    this.name = "ApiError";
  }
}

export type FetchLike = (
  input: string,
  init?: RequestInit,
) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, init);
    if (!response.ok) {
      let detail = response.statusText;
      try {
        const body = (await response.json()) as { detail?: string };
        if (typeof body.detail === "string") detail = body.detail;
      } catch {
        // keep the status text when the body is not JSON
      }
      throw new ApiError(response.status, detail);
    }
    return (await response.json()) as T;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  health(): Promise<Health> {
    return this.request<Health>("/healthz");
  }

  getTasks(): Promise<TaskSummary[]> {
    return this.request<TaskSummary[]>("/tasks");
  }

  getQueue(taskId: string): Promise<QueueDetail> {
    return this.request<QueueDetail>(`/queues/${encodeURIComponent(taskId)}`);
  }

  recommend(request: RecommendRequest): Promise<PlanResponse> {
    return this.post<PlanResponse>("/recommend", request);
  }

  mutate(
    taskId: string,
    body: Record<string, unknown>,
  ): Promise<MutationResponse> {
    return this.post<MutationResponse>(
      `/queues/${encodeURIComponent(taskId)}/mutations`,
      body,
    );
  }
}

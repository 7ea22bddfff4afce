/** Polling behaviour: scripted service mutations become visible within
 * two poll intervals, unchanged revisions cause no re-render, and
 * transient failures keep the last-good view behind a staleness banner.
 */

import { Poller } from "../src/poller.js";
import { checkTask, mountApp, planRowCells, planRowTasks } from "./mount.js";
import { fiveTaskService } from "./scripted.js";

const INTERVAL_MS = 1000;
const FIVE_TASKS = ["checkup", "blood test", "CT scan", "MR scan", "payment"];

async function mountAndSubmit() {
  const service = fiveTaskService();
  const app = await mountApp(service, INTERVAL_MS);
  for (const task of FIVE_TASKS) checkTask(app, task);
  await app.submit();
  return { service, app };
}

describe("polling", () => {
  beforeEach(() => {
    vi.useFakeTimers();
    document.body.replaceChildren();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("makes a scripted queue mutation visible within two poll intervals", async () => {
    const { service, app } = await mountAndSubmit();
    expect(planRowTasks(app)[0]).toBe("payment");

    // Scripted mutation: arrivals at the cashier push payment behind the
    // CT scan, so the first two plan rows swap.
    service.plan = [
      { task_id: "CT scan", predicted_wait_min: 2.0, queue_length: 1 },
      { task_id: "payment", predicted_wait_min: 12.0, queue_length: 4 },
      ...service.plan.slice(2),
    ];
    service.revision = 2;

    await vi.advanceTimersByTimeAsync(2 * INTERVAL_MS);
    expect(planRowTasks(app)).toEqual([
      "CT scan",
      "payment",
      "checkup",
      "blood test",
      "MR scan",
    ]);
    // The swap is visually flagged on exactly the rows that moved.
    expect(planRowCells(app, "CT scan").classList.contains("moved")).toBe(true);
    expect(planRowCells(app, "payment").classList.contains("moved")).toBe(true);
    expect(planRowCells(app, "checkup").classList.contains("moved")).toBe(false);
    expect(app.planContainer.textContent).toContain("Plan revision 2");
  });

  it("does not re-render while the revision is unchanged", async () => {
    const { service, app } = await mountAndSubmit();
    const renders = app.planRenderCount;
    const callsBefore = service.calls.length;

    await vi.advanceTimersByTimeAsync(3 * INTERVAL_MS);
    expect(app.planRenderCount).toBe(renders);
    expect(planRowTasks(app)[0]).toBe("payment");
    // It still polled each interval — the revision just never changed.
    expect(service.calls.length).toBeGreaterThan(callsBefore);
  });

  it("keeps the last-good view behind a staleness banner during outages", async () => {
    const { service, app } = await mountAndSubmit();
    service.failNextFetches = 1;

    await vi.advanceTimersByTimeAsync(INTERVAL_MS);
    expect(app.stalenessBanner.hidden).toBe(false);
    expect(app.stalenessBanner.textContent).toContain("Connection lost");
    // Last-good rows stay on screen.
    expect(planRowTasks(app)).toHaveLength(5);

    await vi.advanceTimersByTimeAsync(INTERVAL_MS);
    expect(app.stalenessBanner.hidden).toBe(true);
    expect(app.poller.stale).toBe(false);
  });

  it("refreshes an open queue detail when its revision changes", async () => {
    const { service, app } = await mountAndSubmit();
    await app.openQueue("blood test");
    expect(app.queueContainer.querySelectorAll("tr.queue-row")).toHaveLength(3);

    const queue = service.queues["blood test"]!;
    queue.patients = queue.patients.slice(1); // the first patient finished
    queue.queue_length = 2;
    service.revision = 2;

    await vi.advanceTimersByTimeAsync(INTERVAL_MS);
    const rows = app.queueContainer.querySelectorAll("tr.queue-row");
    expect(rows).toHaveLength(2);
    expect(rows[0]?.querySelector("td")?.textContent).toBe("P000002");
    expect(app.queueContainer.textContent).toContain("revision 2");
  });
});

describe("Poller", () => {
  beforeEach(() => {
    vi.useFakeTimers();
  });

  afterEach(() => {
    vi.useRealTimers();
  });

  it("keeps at most one tick in flight", async () => {
    let ticks = 0;
    let release: () => void = () => {};
    const poller = new Poller(
      () =>
        new Promise<void>((resolve) => {
          ticks += 1;
          release = resolve;
        }),
      () => {},
      100,
    );
    poller.start();
    await vi.advanceTimersByTimeAsync(350);
    expect(ticks).toBe(1); // interval fired three times, later runs collapsed
    release();
    await vi.advanceTimersByTimeAsync(100);
    expect(ticks).toBe(2);
    poller.stop();
    expect(poller.running).toBe(false);
  });

  it("reports stale transitions only when the state changes", async () => {
    const transitions: boolean[] = [];
    let fail = true;
    const poller = new Poller(
      async () => {
        if (fail) throw new Error("down");
      },
      (stale) => transitions.push(stale),
      100,
    );
    poller.start();
    await vi.advanceTimersByTimeAsync(300); // three failures, one transition
    expect(transitions).toEqual([true]);
    fail = false;
    await vi.advanceTimersByTimeAsync(200);
    expect(transitions).toEqual([true, false]);
    poller.stop();
  });

  it("does not double-schedule on repeated start calls", async () => {
    let ticks = 0;
    const poller = new Poller(async () => {
      ticks += 1;
    });
    poller.start();
    poller.start();
    expect(poller.intervalMs).toBe(5000);
    await vi.advanceTimersByTimeAsync(5000);
    expect(ticks).toBe(1);
    poller.stop();
  });
});

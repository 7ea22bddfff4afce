/** Periodic refresh with at most one in-flight tick.
 *
 * The tick callback does the fetching and re-rendering; the poller only
 * schedules it, collapses overlapping runs, and tracks staleness:
 * a failed tick keeps the last-good views and raises the stale flag, a
 * later success clears it.
 */

export const DEFAULT_POLL_INTERVAL_MS = 5000;

export class Poller {
  private timer: ReturnType<typeof setInterval> | null = null;
  private inFlight = false;
  private staleFlag = false;

  constructor(
    private readonly tick: () => Promise<void>,
    private readonly onStaleChange: (stale: boolean) => void = () => {},
    readonly intervalMs: number = DEFAULT_POLL_INTERVAL_MS,
  ) {}

  get stale(): boolean {
    return this.staleFlag;
  }

  get running(): boolean {
    return this.timer !== null;
  }

  start(): void {
    if (this.timer !== null) return;
    this.timer = setInterval(() => {
      void this.poll();
    }, this.intervalMs);
  }

  stop(): void {
    if (this.timer !== null) {
      clearInterval(this.timer);
      this.timer = null;
    }
  }

  /** Run one tick now (also used by each interval firing). */
  async poll(): Promise<void> {
    if (this.inFlight) return;
    this.inFlight = true;
    try {
      await this.tick();
      this.setStale(false);
    } catch {
      this.setStale(true);
    } finally {
      this.inFlight = false;
    }
  }

  private setStale(stale: boolean): void {
    if (stale !== this.staleFlag) {
      this.staleFlag = stale;
      this.onStaleChange(stale);
    }
  }
}

/**
 * Latest-wins scheduler: one request in flight per session, at most one
 * queued. A click during an in-flight segmentation replaces any earlier
 * queued refresh, so the mask catches up in a single request.
 */

export class LatestWins {
  private busy = false;
  private pending: (() => void) | null = null;

  submit<T>(task: () => Promise<T>, deliver: (result: T) => void, fail: (err: unknown) => void): void {
    const run = () => {
      this.busy = true;
      task().then(
        (result) => {
          deliver(result);
          this.settle();
        },
        (err) => {
          fail(err);
          this.settle();
        },
      );
    };
    if (this.busy) {
      this.pending = run;
    } else {
      run();
    }
  }

  get inFlight(): boolean {
    return this.busy;
  }

  private settle(): void {
    this.busy = false;
    const next = this.pending;
    this.pending = null;
    if (next) {
      next();
    }
  }
}

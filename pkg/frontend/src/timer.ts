/**
 * Decision timer: starts when a render completes and reads out when the
 * teacher clicks, so the reported decision_ms excludes network time.
 */
export class DecisionTimer {
  private startedAt: number | null = null;

  constructor(private readonly now: () => number = () => performance.now()) {}

  markRendered(): void {
    this.startedAt = this.now();
  }

  /** Milliseconds since the last render, never negative. */
  read(): number {
    if (this.startedAt === null) return 0;
    return Math.max(0, Math.round(this.now() - this.startedAt));
  }
}

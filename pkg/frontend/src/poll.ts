/** Render-job status polling with cancellation. At most one loop runs;
 * starting a new poll or calling cancel() stops the previous one. */

import type { ApiClient, JobStatus } from "./api.js";

const realSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

export class JobPoller {
  private active: symbol | null = null;

  constructor(
    private readonly client: Pick<ApiClient, "jobStatus">,
    private readonly intervalMs = 1000,
    private readonly sleep: (ms: number) => Promise<void> = realSleep,
  ) {}

  /** Poll until the job settles; resolves null if cancelled or superseded. */
  async start(jobId: string,
              onUpdate: (s: JobStatus) => void): Promise<JobStatus | null> {
    const token = Symbol(jobId);
    this.active = token;
    for (;;) {
      let status: JobStatus;
      try {
        status = await this.client.jobStatus(jobId);
      } catch (err) {
        if (this.active === token) this.active = null;
        throw err;
      }
      if (this.active !== token) return null;
      onUpdate(status);
      if (status.state === "done" || status.state === "failed") {
        this.active = null;
        return status;
      }
      await this.sleep(this.intervalMs);
      if (this.active !== token) return null;
    }
  }

  cancel(): void {
    this.active = null;
  }

  get polling(): boolean {
    return this.active !== null;
  }
}

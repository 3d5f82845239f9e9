import type { LabelClient } from "./api.js";
import type { Progress, Role, Task } from "./types.js";

export interface RecentLabel {
  setId: string;
  frameIndex: number;
  label: number;
}

const RECENT_CAPACITY = 5;

/**
 * One annotator's session. The server is the single source of truth: the
 * current task and the progress counts always come from the latest
 * responses, never from anything cached locally. The recent-label ring
 * exists purely so the undo key has something to display.
 */
export class SessionState {
  task: Task | null = null;
  done = 0;
  total = 0;
  finished = false;
  readonly recent: RecentLabel[] = [];

  constructor(
    readonly client: LabelClient,
    readonly annotator: string,
    readonly role: Role,
  ) {}

  async refresh(): Promise<void> {
    const progress: Progress = await this.client.progress(this.annotator);
    this.done = progress.done;
    this.total = progress.total;
    this.task = await this.client.nextTask(this.annotator);
    this.finished = this.task === null;
  }

  /** Submit a label for the current task and advance to the server's next. */
  async label(label: number): Promise<void> {
    if (!this.task) return;
    const current = this.task;
    await this.client.submitLabel(this.annotator, current.set_id, current.frame_index, label);
    this.recent.push({ setId: current.set_id, frameIndex: current.frame_index, label });
    if (this.recent.length > RECENT_CAPACITY) this.recent.shift();
    await this.refresh();
  }

  /** Revert this annotator's most recent label; the frame comes back. */
  async undo(): Promise<void> {
    await this.client.undo(this.annotator);
    this.recent.pop();
    await this.refresh();
  }
}

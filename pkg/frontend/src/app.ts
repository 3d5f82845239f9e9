import { ApiError, ConnectionError, HttpClient, type LabelClient } from "./api.js";
import { SessionState } from "./session.js";
import { View } from "./view.js";
import { LABEL_KEYS, type Role } from "./types.js";

export interface AppOptions {
  annotator: string;
  role?: Role;
  review?: boolean;
  baseUrl?: string;
  client?: LabelClient;
  root?: HTMLElement;
}

/**
 * Wires keyboard input, the session state and the DOM together. Operations
 * run through a single promise queue so keystrokes never interleave
 * requests; `idle()` resolves once everything queued has settled.
 */
export class App {
  readonly state: SessionState;
  readonly view: View;
  readonly review: boolean;
  private queue: Promise<void> = Promise.resolve();
  private readonly keyListener = (event: KeyboardEvent) => this.handleKey(event.key);

  constructor(opts: AppOptions) {
    const role: Role = opts.role ?? "labeler";
    const client = opts.client ?? new HttpClient(opts.baseUrl ?? "");
    this.state = new SessionState(client, opts.annotator, role);
    this.review = Boolean(opts.review) && role !== "checker";
    const root = opts.root ?? (document.getElementById("app") as HTMLElement);
    this.view = new View(root, `Labeling as ${opts.annotator} (${role})`, this.review);
  }

  start(): Promise<void> {
    document.addEventListener("keydown", this.keyListener);
    this.enqueue(() => this.refreshAll());
    return this.idle();
  }

  stop(): void {
    document.removeEventListener("keydown", this.keyListener);
  }

  idle(): Promise<void> {
    return this.queue;
  }

  handleKey(key: string): void {
    if (this.view.bannerVisible) {
      this.enqueue(() => this.refreshAll());
      return;
    }
    if ((LABEL_KEYS as readonly string[]).includes(key)) {
      this.enqueue(() => this.label(Number(key)));
    } else if (key === "u") {
      this.enqueue(() => this.undo());
    } else if (key === "g" && this.review) {
      this.enqueue(() => this.refreshAgreement());
    }
  }

  private enqueue(op: () => Promise<void>): void {
    this.queue = this.queue.then(op, op);
  }

  private async guard(op: () => Promise<void>): Promise<void> {
    try {
      await op();
      this.view.hideBanner();
      this.view.clearInlineError();
    } catch (err) {
      if (err instanceof ConnectionError) {
        this.view.showBanner(err.message);
      } else if (err instanceof ApiError) {
        this.view.showInlineError(err.message);
      } else {
        this.view.showInlineError(String(err));
      }
    }
    this.view.update(this.state);
  }

  private refreshAll(): Promise<void> {
    return this.guard(async () => {
      await this.state.refresh();
      if (this.review) await this.refreshAgreementBody();
    });
  }

  private label(label: number): Promise<void> {
    return this.guard(() => this.state.label(label));
  }

  private undo(): Promise<void> {
    return this.guard(() => this.state.undo());
  }

  private refreshAgreement(): Promise<void> {
    return this.guard(() => this.refreshAgreementBody());
  }

  private async refreshAgreementBody(): Promise<void> {
    this.view.renderAgreement(await this.state.client.agreement());
  }
}

/** Entry point for the browser: reads annotator/role/review from the URL. */
export function bootstrapFromLocation(): App {
  const params = new URLSearchParams(window.location.search);
  const annotator = params.get("annotator") ?? "a1";
  const role: Role = params.get("role") === "checker" ? "checker" : "labeler";
  const app = new App({
    annotator,
    role,
    review: params.get("review") === "1",
  });
  void app.start();
  return app;
}

import type { AgreementPayload, Progress, Task } from "./types.js";

/** Server rejected the request (4xx/5xx with a diagnostic). */
export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

/** The server could not be reached at all. */
export class ConnectionError extends Error {}

export interface LabelClient {
  nextTask(annotator: string): Promise<Task | null>;
  submitLabel(annotator: string, setId: string, frameIndex: number, label: number): Promise<void>;
  undo(annotator: string): Promise<void>;
  progress(annotator: string): Promise<Progress>;
  agreement(): Promise<AgreementPayload>;
}

async function detail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") return body.detail;
  } catch {
    /* non-JSON error body */
  }
  return `request failed with status ${res.status}`;
}

export class HttpClient implements LabelClient {
  constructor(readonly baseUrl: string = "") {}

  private async request(path: string, init?: RequestInit): Promise<Response> {
    let res: Response;
    try {
      res = await fetch(this.baseUrl + path, init);
    } catch (err) {
      throw new ConnectionError(`server unreachable: ${String(err)}`);
    }
    if (!res.ok && res.status !== 204) {
      throw new ApiError(res.status, await detail(res));
    }
    return res;
  }

  async nextTask(annotator: string): Promise<Task | null> {
    const res = await this.request(`/api/task?annotator=${encodeURIComponent(annotator)}`);
    if (res.status === 204) return null;
    return (await res.json()) as Task;
  }

  async submitLabel(
    annotator: string,
    setId: string,
    frameIndex: number,
    label: number,
  ): Promise<void> {
    await this.request("/api/label", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ annotator, set_id: setId, frame_index: frameIndex, label }),
    });
  }

  async undo(annotator: string): Promise<void> {
    await this.request("/api/undo", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ annotator }),
    });
  }

  async progress(annotator: string): Promise<Progress> {
    const res = await this.request(`/api/progress?annotator=${encodeURIComponent(annotator)}`);
    return (await res.json()) as Progress;
  }

  async agreement(): Promise<AgreementPayload> {
    const res = await this.request("/api/agreement");
    return (await res.json()) as AgreementPayload;
  }
}

// Thin fetch wrappers around the four task-server endpoints. All server
// interaction in the client goes through this module.

import {
  SubmissionAck,
  SubmissionAckSchema,
  SubmissionDocument,
  SubmissionSchema,
  TaskDocument,
  TaskDocumentSchema,
} from "./schema.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    detail?: string,
  ) {
    super(detail ? `${code}: ${detail}` : code);
    this.name = "ApiError";
  }
}

async function errorFrom(response: Response): Promise<ApiError> {
  let code = `HTTP ${response.status}`;
  let detail: string | undefined;
  try {
    const body = await response.json();
    if (typeof body?.error === "string") code = body.error;
    if (typeof body?.detail === "string") detail = body.detail;
  } catch {
    // non-JSON error body; the status code is all we have
  }
  return new ApiError(response.status, code, detail);
}

export class TaskServerClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: typeof fetch = fetch,
  ) {}

  /** Lease the next open task; repeated calls return the live lease. */
  async nextTask(workerId: string): Promise<TaskDocument> {
    const url = `${this.baseUrl}/api/task/next?worker=${encodeURIComponent(workerId)}`;
    const response = await this.fetchFn(url);
    if (!response.ok) throw await errorFrom(response);
    return TaskDocumentSchema.parse(await response.json());
  }

  /** Where the audio element should stream a clip from. */
  clipUrl(clipId: string): string {
    return `${this.baseUrl}/api/clip/${encodeURIComponent(clipId)}`;
  }

  async fetchClip(clipId: string): Promise<ArrayBuffer> {
    const response = await this.fetchFn(this.clipUrl(clipId));
    if (!response.ok) throw await errorFrom(response);
    return response.arrayBuffer();
  }

  /** Submit answers; safe to retry, the server deduplicates per task. */
  async submit(doc: SubmissionDocument): Promise<SubmissionAck> {
    SubmissionSchema.parse(doc); // never send a malformed document
    const response = await this.fetchFn(`${this.baseUrl}/api/submission`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(doc),
    });
    if (!response.ok) throw await errorFrom(response);
    return SubmissionAckSchema.parse(await response.json());
  }
}

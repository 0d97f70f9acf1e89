// Typed client for the annotation campaign service. The server is the
// single source of truth; this wrapper only shapes requests and decodes
// the {code, message} error envelope.

export interface ApiConfig {
  baseUrl: string;
}

export interface TupleRef {
  tuple_id: string;
  emotion: string;
  item_ids: string[];
}

export interface AssignmentItem {
  id: string;
  text: string;
}

export interface Assignment {
  annotator_id: string;
  tuple: TupleRef;
  items: AssignmentItem[];
  served_at: number;
}

export type NextResponse =
  | { done: true }
  | { done: false; assignment: Assignment };

export interface Progress {
  annotator_id: string;
  judged: number;
  total: number;
}

// A judgment can only be built through buildJudgment in session.ts, which
// refuses incomplete or self-contradictory selections.
export interface JudgmentBody {
  tuple_id: string;
  annotator_id: string;
  best: string;
  worst: string;
}

export type SubmitResult =
  | { kind: "ok"; progress: Progress }
  | { kind: "conflict"; message: string }
  | { kind: "invalid"; message: string };

interface SubmitEnvelope {
  acknowledged: boolean;
  progress: Progress;
}

interface ErrorEnvelope {
  code: string;
  message: string;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
  ) {
    super(message);
  }
}

async function decodeError(response: Response): Promise<ErrorEnvelope> {
  try {
    const body = (await response.json()) as ErrorEnvelope;
    if (typeof body.message === "string") return body;
  } catch {
    // fall through to a generic envelope
  }
  return { code: "unknown", message: `request failed with ${response.status}` };
}

export class AnnotationApi {
  private readonly base: string;

  constructor(
    config: ApiConfig,
    private readonly fetchImpl: typeof fetch = fetch,
  ) {
    this.base = config.baseUrl.replace(/\/+$/, "");
  }

  async nextTuple(
    campaignId: string,
    annotator: string,
    emotion: string,
  ): Promise<NextResponse> {
    const params = new URLSearchParams({ annotator, emotion });
    const response = await this.fetchImpl(
      `${this.base}/campaigns/${encodeURIComponent(campaignId)}/next?${params}`,
    );
    if (!response.ok) {
      const err = await decodeError(response);
      throw new ApiError(response.status, err.message);
    }
    return (await response.json()) as NextResponse;
  }

  async submitJudgment(
    campaignId: string,
    judgment: JudgmentBody,
  ): Promise<SubmitResult> {
    const response = await this.fetchImpl(
      `${this.base}/campaigns/${encodeURIComponent(campaignId)}/judgments`,
      {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(judgment),
      },
    );
    if (response.ok) {
      const body = (await response.json()) as SubmitEnvelope;
      return { kind: "ok", progress: body.progress };
    }
    const err = await decodeError(response);
    if (response.status === 409) return { kind: "conflict", message: err.message };
    if (response.status === 400) return { kind: "invalid", message: err.message };
    throw new ApiError(response.status, err.message);
  }

  async progress(campaignId: string, annotator: string): Promise<Progress> {
    const params = new URLSearchParams({ annotator });
    const response = await this.fetchImpl(
      `${this.base}/campaigns/${encodeURIComponent(campaignId)}/progress?${params}`,
    );
    if (!response.ok) {
      const err = await decodeError(response);
      throw new ApiError(response.status, err.message);
    }
    return (await response.json()) as Progress;
  }
}

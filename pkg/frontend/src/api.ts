/**
 * Typed client for the review service HTTP API.
 *
 * The UI talks to the service exclusively through this module; every
 * number it displays (revisions, alignment counts, rates) is a value the
 * server returned, never something computed locally.
 */

export type SampleStatus = "raw" | "clean" | "rejected";
export type ImageStage = "raw" | "processed";

export interface SampleView {
  id: string;
  batch: string;
  author: number;
  seq: number;
  ground_truth: string;
  status: SampleStatus;
  revision: number;
  split: string;
  stages: string[];
}

export interface SamplePage {
  items: SampleView[];
  total: number;
  page: number;
  pages: number;
}

export type OpKind = "match" | "substitute" | "delete" | "insert";

export interface AlignmentOp {
  op: OpKind;
  ref: string | null;
  hyp: string | null;
}

export interface AlignmentPayload {
  S: number;
  D: number;
  I: number;
  matches: number;
  N: number;
  ops: AlignmentOp[];
}

export interface RecognizeResponse {
  hypothesis: string;
  alignment: AlignmentPayload;
  cer: number;
  wer?: number;
}

export interface ReprocessParams {
  blur_k?: number;
  threshold?: number;
  invert?: boolean;
}

export interface ReprocessResponse {
  id: string;
  revision: number;
  stage: "processed";
  width: number;
  height: number;
  low_contrast: boolean;
}

export interface Violation {
  position: number;
  codepoint: string;
}

export interface PatchBody {
  ground_truth?: string;
  status?: SampleStatus;
  expected_revision: number;
  force?: boolean;
}

/** Non-2xx response; `detail` carries the server's error payload. */
export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly detail: unknown,
  ) {
    super(`HTTP ${status}`);
  }
}

export type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

async function parseOrThrow<T>(response: Response): Promise<T> {
  if (response.ok) {
    return (await response.json()) as T;
  }
  let detail: unknown = null;
  try {
    detail = ((await response.json()) as { detail?: unknown }).detail ?? null;
  } catch {
    // non-JSON error body: keep detail null
  }
  throw new ApiError(response.status, detail);
}

export class ReviewApi {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (input, init) => fetch(input, init),
  ) {}

  listSamples(params: {
    split?: string;
    status?: string;
    author?: string;
    page?: number;
    page_size?: number;
  } = {}): Promise<SamplePage> {
    const query = new URLSearchParams();
    for (const [key, value] of Object.entries(params)) {
      if (value !== undefined) query.set(key, String(value));
    }
    const suffix = query.toString() ? `?${query.toString()}` : "";
    return this.get<SamplePage>(`/samples${suffix}`);
  }

  getSample(id: string): Promise<SampleView> {
    return this.get<SampleView>(`/samples/${id}`);
  }

  /** URL for an <img> tag; revision busts stale browser caches. */
  imageUrl(id: string, stage: ImageStage, revision: number): string {
    return `${this.baseUrl}/samples/${id}/image?stage=${stage}&v=${revision}`;
  }

  patchSample(id: string, body: PatchBody): Promise<SampleView> {
    return this.send<SampleView>("PATCH", `/samples/${id}`, body);
  }

  reprocess(id: string, params: ReprocessParams): Promise<ReprocessResponse> {
    return this.send<ReprocessResponse>("POST", `/samples/${id}/reprocess`, params);
  }

  recognize(id: string, engine: string): Promise<RecognizeResponse> {
    return this.send<RecognizeResponse>("POST", `/samples/${id}/recognize`, { engine });
  }

  health(): Promise<{ status: string; samples: number }> {
    return this.get(`/healthz`);
  }

  private async get<T>(path: string): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`);
    return parseOrThrow<T>(response);
  }

  private async send<T>(method: string, path: string, body: unknown): Promise<T> {
    const response = await this.fetchFn(`${this.baseUrl}${path}`, {
      method,
      headers: { "content-type": "application/json" },
      body: JSON.stringify(body),
    });
    return parseOrThrow<T>(response);
  }
}

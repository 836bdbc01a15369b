/** Typed client for the session service JSON API.
 *
 * Every payload is passed through verbatim; the UI renders these objects
 * directly so nothing on screen can diverge from what the service said.
 */

export interface DatasetSummary {
  id: string;
  name: string;
  n: number;
  f: number;
  classes: number;
  labeled: boolean;
}

export interface DatasetDetail extends DatasetSummary {
  feature_names: string[];
  projection: [number, number][];
}

export interface SessionSummary {
  id: string;
  dataset_id: string;
  ensemble_id: string;
  status: "generating" | "idle" | "awaiting_answer" | "done" | "failed";
  budget: number;
  m: number;
  pool_size: number;
  seed: number;
  u: number;
  clusterings?: number;
  skipped?: number;
  error?: string;
}

export interface QueryInstance {
  index: number;
  features: Record<string, number>;
  projection: [number, number];
}

export interface QueryPayload {
  pair: [number, number];
  instances: [QueryInstance, QueryInstance];
  progress: { u: number; budget: number };
}

export interface ProvenanceInfo {
  algorithm: string;
  params: Record<string, number | string>;
  seed: number | null;
}

export interface TopEntry extends ProvenanceInfo {
  weight: number;
}

export interface AnswerPayload {
  progress: { u: number; budget: number };
  status: string;
  top: TopEntry[];
}

export interface ResultPayload {
  assignment: number[];
  provenance: ProvenanceInfo;
  cluster_sizes: { label: number; size: number }[];
  ari: number | null;
  progress: { u: number; budget: number };
  no_constraints_yet: boolean;
}

export type AnswerKind = "must_link" | "cannot_link";

export class ApiError extends Error {
  constructor(
    public status: number,
    public code: string,
    message: string,
  ) {
    super(message);
  }
}

/** Hook receiving every successful response body, keyed by endpoint. */
export type ResponseListener = (endpoint: string, payload: unknown) => void;

export class ApiClient {
  constructor(
    private baseUrl: string = "",
    private listener: ResponseListener | null = null,
  ) {}

  private async request<T>(
    endpoint: string,
    path: string,
    init?: RequestInit,
  ): Promise<T> {
    const resp = await fetch(this.baseUrl + path, init);
    let body: unknown = null;
    try {
      body = await resp.json();
    } catch {
      body = null;
    }
    if (!resp.ok) {
      const err = body as { code?: string; message?: string } | null;
      throw new ApiError(
        resp.status,
        err?.code ?? "http_error",
        err?.message ?? `${resp.status} on ${path}`,
      );
    }
    this.listener?.(endpoint, body);
    return body as T;
  }

  uploadDataset(
    csvText: string,
    labelCol: string | null,
    name: string,
  ): Promise<DatasetSummary> {
    const params = new URLSearchParams({ name });
    if (labelCol) params.set("label_col", labelCol);
    return this.request("upload", `/datasets?${params}`, {
      method: "POST",
      headers: { "content-type": "text/csv" },
      body: csvText,
    });
  }

  dataset(id: string): Promise<DatasetDetail> {
    return this.request("dataset", `/datasets/${id}`);
  }

  startSession(options: {
    dataset_id: string;
    budget: number;
    m?: number;
    pool_size?: number;
    seed?: number;
  }): Promise<SessionSummary> {
    return this.request("session", "/sessions", {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify(options),
    });
  }

  session(id: string): Promise<SessionSummary> {
    return this.request("session", `/sessions/${id}`);
  }

  query(id: string): Promise<QueryPayload> {
    return this.request("query", `/sessions/${id}/query`);
  }

  answer(id: string, kind: AnswerKind): Promise<AnswerPayload> {
    return this.request("answer", `/sessions/${id}/answer`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: JSON.stringify({ kind }),
    });
  }

  result(id: string): Promise<ResultPayload> {
    return this.request("result", `/sessions/${id}/result`);
  }
}

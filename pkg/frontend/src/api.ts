/**
 * Typed client for the model query service.
 *
 * Every response is an envelope `{request_id, seed, payload}` serialized
 * canonically by the server, so identical (endpoint, payload, seed) triples
 * yield byte-identical bodies.  The client never post-processes statistics:
 * payloads are handed to the panels exactly as received.
 *
 * Concurrency rule: at most one in-flight request per panel — issuing a new
 * request under the same panel key aborts the previous one.
 */

export type NodeKind = "continuous" | "categorical";
export type Stage = "raw" | "pruned" | "symbolic";

export interface GraphNode {
  name: string;
  kind: NodeKind;
  levels?: number;
}

export interface GraphDoc {
  nodes: GraphNode[];
  edges: [string, string][];
}

export interface DiagnosticsSummary {
  mmd_obs: number;
  rf_acc_obs: number;
  dhsic_pvalue: number;
  min_hsic_pvalue: number | null;
}

export interface ModelPayload {
  graph: GraphDoc;
  kinds: Record<string, NodeKind>;
  levels: Record<string, number>;
  stage: Stage;
  formulas: Record<string, string>;
  diagnostics: DiagnosticsSummary | null;
}

export interface HistogramData {
  kind: NodeKind;
  counts: number[];
  /** Bin edges; present for continuous histograms (length counts+1). */
  edges?: number[];
  /** Category levels; present for categorical histograms. */
  levels?: number[];
}

export interface SamplePayload {
  n: number;
  row_count: number;
  rows: Record<string, number[]>;
  histograms: Record<string, HistogramData>;
  interventions: Record<string, number>;
}

export interface CounterfactualPayload {
  row: Record<string, number>;
  point_valued: boolean;
  category_probs: Record<string, number[]>;
  noise: Record<string, number>;
}

export interface PdpPayload {
  node: string;
  parent: string;
  grid: number[];
  delta: number[];
  baseline: string;
}

export interface AtePayload {
  node: string;
  parent: string;
  from: number;
  to: number;
  ate: number;
}

export interface PrpPayload {
  node: string;
  row_id: number | null;
  contributions: Record<string, number>;
  intercept: number;
  total: number;
}

export interface NodeTest {
  node: string;
  parents: string[];
  hsic_statistic: number;
  hsic_pvalue: number;
}

export interface DiagnosticsPayload {
  node_tests: NodeTest[];
  dhsic_statistic: number;
  dhsic_pvalue: number;
  mmd_obs: number;
  rf_acc_obs: number;
  interventions: { label: string; mmd: number; rf_accuracy: number }[];
  notes: string[];
}

export interface Envelope<T> {
  request_id: string;
  seed: number | null;
  payload: T;
}

export interface SampleRequest {
  n: number;
  interventions?: Record<string, number>;
  standardized?: boolean;
  seed?: number;
}

export interface CounterfactualRequest {
  factual_row: Record<string, number>;
  interventions: Record<string, number>;
  standardized?: boolean;
  override?: boolean;
  seed?: number;
}

export interface AteRequest {
  node: string;
  parent: string;
  from: number;
  to: number;
}

/** Error document returned by the service on any non-2xx status. */
export interface ErrorDoc {
  error: string;
  message: string;
  offenders?: string[];
  nodes?: string[];
  max_n?: number;
}

/** A non-2xx response, carrying the decoded error document. */
export class ApiError extends Error {
  readonly status: number;
  readonly code: string;
  readonly doc: ErrorDoc;

  constructor(status: number, doc: ErrorDoc) {
    super(doc.message);
    this.name = "ApiError";
    this.status = status;
    this.code = doc.error;
    this.doc = doc;
  }

  /** Nodes blocking point identification, for 409 explanations. */
  get offenders(): string[] {
    return this.doc.offenders ?? [];
  }
}

export type FetchLike = (
  url: string,
  init?: { method?: string; headers?: Record<string, string>; body?: string; signal?: AbortSignal },
) => Promise<{ ok: boolean; status: number; text(): Promise<string> }>;

export class ApiClient {
  private readonly base: string;
  private readonly fetchFn: FetchLike;
  private readonly inflight = new Map<string, AbortController>();

  constructor(base = "", fetchFn?: FetchLike) {
    this.base = base.replace(/\/+$/, "");
    this.fetchFn = fetchFn ?? ((url, init) => fetch(url, init));
  }

  /** Abort the in-flight request for `panel`, if any. */
  cancel(panel: string): void {
    this.inflight.get(panel)?.abort();
    this.inflight.delete(panel);
  }

  private async request<T>(
    panel: string,
    path: string,
    init?: { method?: string; body?: unknown },
  ): Promise<T> {
    this.cancel(panel);
    const controller = new AbortController();
    this.inflight.set(panel, controller);
    try {
      const response = await this.fetchFn(this.base + path, {
        method: init?.method ?? "GET",
        headers: init?.body !== undefined ? { "content-type": "application/json" } : undefined,
        body: init?.body !== undefined ? JSON.stringify(init.body) : undefined,
        signal: controller.signal,
      });
      const text = await response.text();
      if (!response.ok) {
        let doc: ErrorDoc;
        try {
          doc = JSON.parse(text) as ErrorDoc;
        } catch {
          doc = { error: "bad-response", message: text || `HTTP ${response.status}` };
        }
        throw new ApiError(response.status, doc);
      }
      return JSON.parse(text) as T;
    } finally {
      if (this.inflight.get(panel) === controller) this.inflight.delete(panel);
    }
  }

  health(): Promise<{ status: string; stage: Stage }> {
    return this.request("health", "/healthz");
  }

  model(): Promise<Envelope<ModelPayload>> {
    return this.request("model", "/api/model");
  }

  sample(req: SampleRequest): Promise<Envelope<SamplePayload>> {
    return this.request("sample", "/api/sample", { method: "POST", body: req });
  }

  counterfactual(req: CounterfactualRequest): Promise<Envelope<CounterfactualPayload>> {
    return this.request("counterfactual", "/api/counterfactual", { method: "POST", body: req });
  }

  pdp(node: string, parent: string, points?: number): Promise<Envelope<PdpPayload>> {
    const extra = points === undefined ? "" : `&points=${points}`;
    return this.request(
      "pdp",
      `/api/pdp?node=${encodeURIComponent(node)}&parent=${encodeURIComponent(parent)}${extra}`,
    );
  }

  ate(req: AteRequest): Promise<Envelope<AtePayload>> {
    return this.request("ate", "/api/ate", { method: "POST", body: req });
  }

  /** PRP for a row of the server-held evaluation data. */
  prpByRow(node: string, row: number): Promise<Envelope<PrpPayload>> {
    return this.request("prp", `/api/prp?node=${encodeURIComponent(node)}&row=${row}`);
  }

  /** PRP for a caller-supplied raw row. */
  prp(node: string, row: Record<string, number>): Promise<Envelope<PrpPayload>> {
    return this.request("prp", "/api/prp", { method: "POST", body: { node, row } });
  }

  diagnostics(): Promise<Envelope<DiagnosticsPayload>> {
    return this.request("diagnostics", "/api/diagnostics");
  }
}

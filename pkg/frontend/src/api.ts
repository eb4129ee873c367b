import {
  ClusterDoc,
  RelabelResult,
  RunInfo,
  ScreeDoc,
  StorylineDoc,
  TableViewRow,
  ThreadDoc,
} from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly code: string,
    message: string,
    readonly stage?: string,
  ) {
    super(message);
  }
}

export type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

/** Thin typed wrapper over the HTTP API; every view reads through here. */
export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    const resp = await this.fetchFn(this.baseUrl + path, init);
    if (!resp.ok) {
      let code = "error";
      let message = resp.statusText;
      let stage: string | undefined;
      try {
        const body = await resp.json();
        code = body.code ?? code;
        message = body.message ?? message;
        stage = body.stage;
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(resp.status, code, message, stage);
    }
    return resp.json() as Promise<T>;
  }

  private post<T>(path: string, body: unknown): Promise<T> {
    return this.request<T>(path, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(body),
    });
  }

  listDatasets(): Promise<{ dataset_id: string; stats: Record<string, unknown> }[]> {
    return this.request("/api/datasets");
  }

  uploadDataset(name: string, content: string, format = "csv") {
    return this.post<{ dataset_id: string }>("/api/datasets", { name, format, content });
  }

  thread(datasetId: string, threadId: string): Promise<ThreadDoc> {
    return this.request(
      `/api/datasets/${encodeURIComponent(datasetId)}/threads/${encodeURIComponent(threadId)}`,
    );
  }

  startRun(dataset: string, config: Record<string, unknown>): Promise<RunInfo> {
    return this.post("/api/runs", { dataset, config });
  }

  listRuns(): Promise<RunInfo[]> {
    return this.request("/api/runs");
  }

  run(runId: string): Promise<RunInfo> {
    return this.request(`/api/runs/${runId}`);
  }

  clusters(runId: string): Promise<ClusterDoc[]> {
    return this.request(`/api/runs/${runId}/clusters`);
  }

  cluster(runId: string, clusterId: number): Promise<ClusterDoc> {
    return this.request(`/api/runs/${runId}/clusters/${clusterId}`);
  }

  storyline(runId: string, clusterId: number, rt?: number): Promise<StorylineDoc> {
    const query = rt === undefined ? "" : `?rt=${rt}`;
    return this.request(`/api/runs/${runId}/clusters/${clusterId}/storyline${query}`);
  }

  tableview(runId: string, k?: number): Promise<TableViewRow[]> {
    const query = k === undefined ? "" : `?k=${k}`;
    return this.request(`/api/runs/${runId}/tableview${query}`);
  }

  async heatmapCsv(runId: string): Promise<string> {
    const resp = await this.fetchFn(`${this.baseUrl}/api/runs/${runId}/heatmap`);
    if (!resp.ok) {
      throw new ApiError(resp.status, "error", resp.statusText);
    }
    return resp.text();
  }

  scree(runId: string): Promise<ScreeDoc> {
    return this.request(`/api/runs/${runId}/scree`);
  }

  relabel(runId: string, classes: Record<string, string[]>): Promise<RelabelResult> {
    return this.post(`/api/runs/${runId}/relabel`, { classes });
  }
}

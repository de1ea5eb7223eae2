/** Typed client for the stemweld service HTTP API. */

export type Role = "vocals" | "accompaniment";
export type JobState = "queued" | "running" | "done" | "failed";

export interface KeyInfo {
  tonic: string;
  mode: string;
}

export interface TrackInfo {
  id: string;
  bpm: number;
  key: KeyInfo;
  duration: number;
  segments: string[];
}

export interface RankEntry {
  rank: number;
  song_id: string;
  score: number;
}

export interface RankResponse {
  base: string;
  role: Role;
  source: string;
  candidates: RankEntry[];
}

export interface AsymmetryStats {
  mean_abs_diff: number;
  max_abs_diff: number;
  frobenius_index: number;
}

export interface MatrixResponse {
  source: string;
  song_ids: string[];
  values: (number | null)[][];
  asymmetry: AsymmetryStats;
}

export interface ClustersResponse {
  model: string;
  threshold: number;
  linkage: string;
  items: [string, string][];
  labels: number[];
  n_clusters: number;
}

export interface PairingSummary {
  label: string;
  fill: string;
  n_placements: number;
}

export interface PlanSummary {
  semitone_shift: number;
  overrides: [string, number][];
  pairings: PairingSummary[];
}

export interface JobStatus {
  job_id: string;
  state: JobState;
  error?: string;
  plan?: PlanSummary;
}

export interface MashupOverrides {
  semitones?: number | null;
  tempo_ratio?: number | null;
  donor_gain?: number;
  base_gain?: number;
}

export interface MashupRequest {
  base: string;
  donor: string;
  donor_role: Role;
  allow_self?: boolean;
  overrides?: MashupOverrides;
}

export class ApiError extends Error {
  constructor(readonly status: number, message: string) {
    super(message);
    this.name = "ApiError";
  }
}

export function otherRole(role: Role): Role {
  return role === "vocals" ? "accompaniment" : "vocals";
}

type FetchLike = (input: string, init?: RequestInit) => Promise<Response>;

const defaultFetch: FetchLike = (input, init) => globalThis.fetch(input, init);

export class ApiClient {
  constructor(
    private readonly baseUrl: string = "",
    private readonly fetchFn: FetchLike = defaultFetch,
  ) {}

  private async request<T>(path: string, init?: RequestInit): Promise<T> {
    let resp: Response;
    try {
      resp = await this.fetchFn(this.baseUrl + path, init);
    } catch (err) {
      throw new ApiError(0, `service unreachable: ${String(err)}`);
    }
    if (!resp.ok) {
      let detail = `${resp.status} ${resp.statusText}`;
      try {
        const body = (await resp.json()) as { detail?: unknown };
        if (body && body.detail !== undefined) detail = String(body.detail);
      } catch {
        // body was not JSON; keep the status line
      }
      throw new ApiError(resp.status, detail);
    }
    return (await resp.json()) as T;
  }

  library(): Promise<TrackInfo[]> {
    return this.request("/api/library");
  }

  sources(): Promise<{ sources: string[]; embedding_models: string[] }> {
    return this.request("/api/sources");
  }

  rank(base: string, role: Role, source: string): Promise<RankResponse> {
    const q = new URLSearchParams({ base, role, source });
    return this.request(`/api/rank?${q}`);
  }

  submitMashup(req: MashupRequest): Promise<{ job_id: string }> {
    return this.request("/api/mashup", {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify(req),
    });
  }

  jobStatus(jobId: string): Promise<JobStatus> {
    return this.request(`/api/mashup/${jobId}/status`);
  }

  audioUrl(jobId: string): string {
    return `${this.baseUrl}/api/mashup/${jobId}/audio`;
  }

  matrix(source: string): Promise<MatrixResponse> {
    return this.request(`/api/matrix?${new URLSearchParams({ source })}`);
  }

  clusters(model: string, threshold: number,
           linkage = "average"): Promise<ClustersResponse> {
    const q = new URLSearchParams({
      model,
      threshold: String(threshold),
      linkage,
    });
    return this.request(`/api/clusters?${q}`);
  }
}

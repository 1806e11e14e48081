/** Typed client for the tfscope HTTP service. All displayed numbers come
 * from these calls; nothing numerical is recomputed client-side. */

export interface CubeInfo {
  id: string;
  ny: number;
  nx: number;
  nt: number;
  nvars: number;
  n_valid: number;
}

export type JobState = "queued" | "running" | "done" | "failed";

export interface JobRecord {
  id: string;
  kind: "characterize" | "unmix";
  state: JobState;
  cube: string;
  config: Record<string, unknown>;
  result: Record<string, unknown> | null;
  error: string | null;
}

export interface UnmixSummary {
  threshold_pct: number;
  fraction_below: number;
  mean: number;
  median: number;
  max: number;
}

export interface PointCloud {
  dimNames: string[];
  /** subsample row ids, cell rows, cell cols, one entry per point */
  sid: Int32Array;
  y: Int32Array;
  x: Int32Array;
  /** column-major: dims[d][i] is dimension d of point i */
  dims: Float64Array[];
}

export interface SeriesEntry {
  sample_id: number;
  y: number;
  x: number;
  /** values[t][v] */
  values: number[][];
}

export type Method = "pca" | "le" | "pctsne";

/** Parse a TFS CSV body (sample_id,y,x,dim...; CRLF line endings). */
export function parseTfsCsv(text: string): PointCloud {
  const lines = text.split("\r\n").filter((line) => line.length > 0);
  if (lines.length === 0) throw new Error("empty TFS CSV");
  const header = lines[0]!.split(",");
  if (header[0] !== "sample_id" || header[1] !== "y" || header[2] !== "x") {
    throw new Error(`unexpected TFS header: ${lines[0]}`);
  }
  const dimNames = header.slice(3);
  const n = lines.length - 1;
  const sid = new Int32Array(n);
  const y = new Int32Array(n);
  const x = new Int32Array(n);
  const dims = dimNames.map(() => new Float64Array(n));
  for (let i = 0; i < n; i++) {
    const parts = lines[i + 1]!.split(",");
    if (parts.length !== header.length) {
      throw new Error(`row ${i} has ${parts.length} fields, expected ${header.length}`);
    }
    sid[i] = Number(parts[0]);
    y[i] = Number(parts[1]);
    x[i] = Number(parts[2]);
    for (let d = 0; d < dimNames.length; d++) dims[d]![i] = Number(parts[3 + d]);
  }
  return { dimNames, sid, y, x, dims };
}

async function getJson<T>(url: string): Promise<T> {
  const res = await fetch(url);
  const body = await res.json();
  if (!res.ok) throw new Error(body.error ?? `GET ${url} failed (${res.status})`);
  return body as T;
}

async function postJson<T>(url: string, payload: unknown): Promise<T> {
  const res = await fetch(url, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(payload),
  });
  const body = await res.json();
  if (!res.ok) throw new Error(body.error ?? `POST ${url} failed (${res.status})`);
  return body as T;
}

export const api = {
  async listCubes(): Promise<CubeInfo[]> {
    return (await getJson<{ cubes: CubeInfo[] }>("/cubes")).cubes;
  },

  async listJobs(): Promise<JobRecord[]> {
    return (await getJson<{ jobs: JobRecord[] }>("/jobs")).jobs;
  },

  async getJob(jobId: string): Promise<JobRecord> {
    return getJson<JobRecord>(`/jobs/${jobId}`);
  },

  async registerCube(path: string): Promise<CubeInfo> {
    return postJson<CubeInfo>("/cubes", { path });
  },

  async submitCharacterize(cube: string, config: Record<string, unknown>): Promise<JobRecord> {
    return postJson<JobRecord>("/jobs", { kind: "characterize", cube, config });
  },

  async submitUnmix(job: string, sampleIds: number[], nonneg = false): Promise<JobRecord> {
    return postJson<JobRecord>("/unmix", { job, sample_ids: sampleIds, nonneg });
  },

  async points(jobId: string, method: Method, dims?: number[]): Promise<PointCloud> {
    const query = dims && dims.length > 0 ? `?dims=${dims.join(",")}` : "";
    const res = await fetch(`/embeddings/${jobId}/${method}/points${query}`);
    if (!res.ok) {
      const body = await res.json().catch(() => ({}));
      throw new Error(body.error ?? `points fetch failed (${res.status})`);
    }
    return parseTfsCsv(await res.text());
  },

  async series(cube: string, sampleIds: number[]): Promise<SeriesEntry[]> {
    const body = await getJson<{ series: SeriesEntry[] }>(
      `/series?cube=${cube}&samples=${sampleIds.join(",")}`
    );
    return body.series;
  },

  async mapBytes(jobId: string, name: string): Promise<ArrayBuffer> {
    const res = await fetch(`/maps/${jobId}/${name}`);
    if (!res.ok) throw new Error(`map ${name} fetch failed (${res.status})`);
    return res.arrayBuffer();
  },
};

export type Api = typeof api;

/** Yield the job record until it reaches a terminal state. */
export async function* pollJob(
  client: Pick<Api, "getJob">,
  jobId: string,
  intervalMs = 750
): AsyncGenerator<JobRecord> {
  while (true) {
    const job = await client.getJob(jobId);
    yield job;
    if (job.state === "done" || job.state === "failed") return;
    await new Promise((resolve) => setTimeout(resolve, intervalMs));
  }
}

/** Session state and its reconstruction from the service. The service is
 * the single source of truth: a refresh rebuilds everything below from
 * GET /jobs and GET /cubes, so nothing here needs client persistence. */

import type { Api, CubeInfo, JobRecord, Method, UnmixSummary } from "./api.js";

export const MAX_PICKS = 10;

export interface PanelDims {
  pca: [number, number];
  le: [number, number];
  pctsne: [number, number];
}

export interface SessionState {
  cube: CubeInfo | null;
  charJobId: string | null;
  /** displayed dim pair per panel, 1-based as the service counts dims */
  panelDims: PanelDims;
  /** ordered endmember picks, linear cell ids, capped at MAX_PICKS */
  picks: number[];
  unmixJobId: string | null;
  unmixSummary: UnmixSummary | null;
}

export function emptyState(): SessionState {
  return {
    cube: null,
    charJobId: null,
    panelDims: { pca: [1, 2], le: [1, 2], pctsne: [1, 2] },
    picks: [],
    unmixJobId: null,
    unmixSummary: null,
  };
}

/** Append a pick, ignoring duplicates and enforcing the cap. */
export function addPick(state: SessionState, sampleId: number): boolean {
  if (state.picks.includes(sampleId)) return false;
  if (state.picks.length >= MAX_PICKS) return false;
  state.picks.push(sampleId);
  return true;
}

export function removePick(state: SessionState, sampleId: number): boolean {
  const at = state.picks.indexOf(sampleId);
  if (at < 0) return false;
  state.picks.splice(at, 1);
  return true;
}

export function setPanelDims(state: SessionState, method: Method, dims: [number, number]): void {
  state.panelDims[method] = dims;
}

function summaryFrom(record: JobRecord): UnmixSummary | null {
  const result = record.result;
  if (!result || typeof result !== "object") return null;
  const summary = (result as { summary?: unknown }).summary;
  if (!summary || typeof summary !== "object") return null;
  return summary as UnmixSummary;
}

/** Rebuild the session from the service alone: the newest finished
 * characterization wins, and the newest unmix derived from it restores
 * the picks and summary. */
export async function restoreSession(
  client: Pick<Api, "listJobs" | "listCubes">
): Promise<SessionState> {
  const state = emptyState();
  const jobs = await client.listJobs();
  const chars = jobs.filter((j) => j.kind === "characterize" && j.state === "done");
  if (chars.length === 0) return state;
  const char = chars[chars.length - 1]!;
  state.charJobId = char.id;
  const cubes = await client.listCubes();
  state.cube = cubes.find((c) => c.id === char.cube) ?? null;
  const unmixes = jobs.filter(
    (j) =>
      j.kind === "unmix" &&
      j.state === "done" &&
      j.config["job"] === char.id &&
      Array.isArray(j.config["sample_ids"])
  );
  if (unmixes.length === 0) return state;
  const unmix = unmixes[unmixes.length - 1]!;
  state.unmixJobId = unmix.id;
  state.picks = (unmix.config["sample_ids"] as number[]).slice(0, MAX_PICKS);
  state.unmixSummary = summaryFrom(unmix);
  return state;
}

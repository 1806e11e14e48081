/** Single-page explorer wiring: three linked embedding panels, endmember
 * picking, unmix submission, and misfit feedback. Long work stays on the
 * service as polled jobs; the interaction thread never blocks. */

import { api, JobRecord, Method, PointCloud, pollJob, UnmixSummary } from "./api.js";
import { MapStrip } from "./maps.js";
import { PICK_PALETTE, ScatterPanel } from "./scatter.js";
import { SeriesChart } from "./seriesChart.js";
import { addPick, emptyState, MAX_PICKS, removePick, restoreSession, SessionState } from "./state.js";

const METHODS: Method[] = ["pca", "le", "pctsne"];
const METHOD_TITLES: Record<Method, string> = { pca: "PC", le: "LE", pctsne: "PC(t-SNE)" };

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node as T;
}

class App {
  state: SessionState = emptyState();
  charJob: JobRecord | null = null;
  panels = new Map<Method, ScatterPanel>();
  clouds = new Map<Method, PointCloud>();
  sidToDrawn = new Map<Method, Map<number, number>>();
  /** sid -> cell row/col, from the first loaded cloud */
  cellOf = new Map<number, { y: number; x: number }>();
  chart: SeriesChart;
  maps: MapStrip;
  private seriesEpoch = 0;

  constructor() {
    for (const method of METHODS) {
      const body = el<HTMLDivElement>(`panel-body-${method}`);
      const panel = new ScatterPanel(body, {
        onPick: (i) => this.togglePickFromPanel(method, i),
        onLasso: (i) => this.pickFromPanel(method, i, "lasso"),
        onHover: (i) => this.linkHover(method, i),
      });
      this.panels.set(method, panel);
      el<HTMLSelectElement>(`dim-a-${method}`).addEventListener("change", () =>
        this.changeDims(method)
      );
      el<HTMLSelectElement>(`dim-b-${method}`).addEventListener("change", () =>
        this.changeDims(method)
      );
    }
    this.chart = new SeriesChart(el("series-holder"));
    this.maps = new MapStrip(el("maps"));
    el<HTMLButtonElement>("unmix-btn").addEventListener("click", () => {
      void this.runUnmix();
    });
    el<HTMLButtonElement>("lasso-toggle").addEventListener("click", () => {
      const on = !this.panels.get("pca")!.lassoMode;
      for (const panel of this.panels.values()) panel.lassoMode = on;
      el("lasso-toggle").classList.toggle("active", on);
    });
    el<HTMLSelectElement>("job-select").addEventListener("change", () => {
      const picked = el<HTMLSelectElement>("job-select").value;
      if (picked) void this.loadCharacterization(picked, { keepPicks: false });
    });
  }

  status(message: string, isError = false): void {
    const node = el("status");
    node.textContent = message;
    node.classList.toggle("error", isError);
  }

  // -- bootstrap ---------------------------------------------------------

  async start(): Promise<void> {
    try {
      this.status("restoring session from service");
      this.state = await restoreSession(api);
      await this.refreshJobSelect();
      if (this.state.charJobId) {
        await this.loadCharacterization(this.state.charJobId, { keepPicks: true });
        if (this.state.unmixJobId) await this.showUnmixResult(this.state.unmixJobId);
        this.status("session restored");
      } else {
        const jobs = await api.listJobs();
        const pending = jobs.filter(
          (j) => j.kind === "characterize" && (j.state === "queued" || j.state === "running")
        );
        if (pending.length > 0) {
          await this.loadCharacterization(pending[pending.length - 1]!.id, { keepPicks: false });
        } else {
          this.status("no characterization jobs yet; submit one against the service first");
        }
      }
    } catch (err) {
      this.status((err as Error).message, true);
    }
  }

  async refreshJobSelect(): Promise<void> {
    const jobs = await api.listJobs();
    const select = el<HTMLSelectElement>("job-select");
    select.replaceChildren();
    for (const job of jobs.filter((j) => j.kind === "characterize")) {
      const option = document.createElement("option");
      option.value = job.id;
      option.textContent = `${job.id} (${job.cube}, ${job.state})`;
      select.appendChild(option);
    }
    if (this.state.charJobId) select.value = this.state.charJobId;
  }

  // -- characterization loading -----------------------------------------

  async loadCharacterization(jobId: string, opts: { keepPicks: boolean }): Promise<void> {
    if (!opts.keepPicks) {
      this.state.picks = [];
      this.state.unmixJobId = null;
      this.state.unmixSummary = null;
      this.renderUnmixPanel();
    }
    let record = await api.getJob(jobId);
    if (record.kind !== "characterize") throw new Error(`${jobId} is not a characterization`);
    if (record.state === "queued" || record.state === "running") {
      record = await this.watchProgress(jobId);
    }
    this.hideProgress();
    if (record.state === "failed") {
      this.status(record.error ?? `${jobId} failed`, true);
      return;
    }
    this.charJob = record;
    this.state.charJobId = record.id;
    this.state.cube = (await api.listCubes()).find((c) => c.id === record.cube) ?? null;
    el("cube-info").textContent = this.state.cube
      ? `${this.state.cube.id}: ${this.state.cube.ny} x ${this.state.cube.nx} cells, ` +
        `${this.state.cube.nt} steps, ${this.state.cube.nvars} var(s)`
      : record.cube;
    await this.refreshJobSelect();

    this.status("fetching point clouds");
    const clouds = await Promise.all(METHODS.map((m) => api.points(record.id, m)));
    this.cellOf.clear();
    METHODS.forEach((method, k) => {
      const cloud = clouds[k]!;
      this.clouds.set(method, cloud);
      this.fillDimSelects(method, cloud.dimNames);
      this.state.panelDims[method] = [1, 2];
      this.showCloud(method, cloud, [1, 2]);
      if (k === 0) {
        for (let i = 0; i < cloud.sid.length; i++) {
          this.cellOf.set(cloud.sid[i]!, { y: cloud.y[i]!, x: cloud.x[i]! });
        }
      }
    });
    this.state.picks = this.state.picks.filter((sid) => this.cellOf.has(sid));
    this.renderPicks();
    this.status(`${clouds[0]!.sid.length} samples loaded`);
  }

  private async watchProgress(jobId: string): Promise<JobRecord> {
    const progress = el("progress");
    progress.classList.remove("hidden");
    let last: JobRecord | null = null;
    for await (const job of pollJob(api, jobId)) {
      last = job;
      el("progress-text").textContent = `${job.id} (${job.kind}) is ${job.state}`;
      await this.refreshJobSelect();
    }
    return last!;
  }

  private hideProgress(): void {
    el("progress").classList.add("hidden");
  }

  private fillDimSelects(method: Method, dimNames: string[]): void {
    for (const [suffix, selected] of [
      ["a", 1],
      ["b", 2],
    ] as const) {
      const select = el<HTMLSelectElement>(`dim-${suffix}-${method}`);
      select.replaceChildren();
      dimNames.forEach((name, i) => {
        const option = document.createElement("option");
        option.value = String(i + 1);
        option.textContent = name;
        if (i + 1 === selected) option.selected = true;
        select.appendChild(option);
      });
    }
  }

  private showCloud(method: Method, cloud: PointCloud, dims: [number, number]): void {
    const panel = this.panels.get(method)!;
    const [a, b] = dims;
    const xs = cloud.dims.length >= Math.max(a, b) ? cloud.dims[a - 1]! : cloud.dims[0]!;
    const ys = cloud.dims.length >= Math.max(a, b) ? cloud.dims[b - 1]! : cloud.dims[0]!;
    panel.setData(xs, ys);
    const bySid = new Map<number, number>();
    for (let d = 0; d < panel.drawnToFull.length; d++) {
      bySid.set(cloud.sid[panel.drawnToFull[d]!]!, d);
    }
    this.sidToDrawn.set(method, bySid);
    this.applyPickStates(method);
  }

  /** A dim switch re-requests only that panel's coordinates. */
  private async changeDims(method: Method): Promise<void> {
    if (!this.charJob) return;
    const a = Number(el<HTMLSelectElement>(`dim-a-${method}`).value);
    const b = Number(el<HTMLSelectElement>(`dim-b-${method}`).value);
    this.state.panelDims[method] = [a, b];
    try {
      const cloud = await api.points(this.charJob.id, method, [a, b]);
      this.clouds.set(method, cloud);
      this.showCloud(method, cloud, [1, 2]); // fetched CSV holds just the two dims
    } catch (err) {
      this.status((err as Error).message, true);
    }
  }

  // -- linked highlighting ----------------------------------------------

  private sidAtDrawn(method: Method, drawnIndex: number): number {
    const panel = this.panels.get(method)!;
    const cloud = this.clouds.get(method)!;
    return cloud.sid[panel.drawnToFull[drawnIndex]!]!;
  }

  linkHover(origin: Method, drawnIndex: number): void {
    const sid = drawnIndex >= 0 ? this.sidAtDrawn(origin, drawnIndex) : -1;
    for (const method of METHODS) {
      const panel = this.panels.get(method)!;
      const local = sid >= 0 ? this.sidToDrawn.get(method)?.get(sid) ?? -1 : -1;
      panel.setHover(local);
    }
    el("hover-info").textContent =
      sid >= 0
        ? `sample ${sid} (y=${this.cellOf.get(sid)?.y}, x=${this.cellOf.get(sid)?.x})`
        : "";
  }

  // -- endmember picking -------------------------------------------------

  private togglePickFromPanel(method: Method, drawnIndex: number): void {
    const sid = this.sidAtDrawn(method, drawnIndex);
    if (this.state.picks.includes(sid)) {
      removePick(this.state, sid);
      this.afterPicksChanged();
      return;
    }
    this.pickFromPanel(method, drawnIndex, "click");
  }

  private pickFromPanel(method: Method, drawnIndex: number, how: "click" | "lasso"): void {
    const sid = this.sidAtDrawn(method, drawnIndex);
    if (!addPick(this.state, sid)) {
      this.status(
        this.state.picks.includes(sid)
          ? `sample ${sid} is already picked`
          : `pick cap reached (${MAX_PICKS}); remove one first`,
        true
      );
      return;
    }
    this.status(`picked sample ${sid} by ${how}`);
    this.afterPicksChanged();
  }

  private afterPicksChanged(): void {
    for (const method of METHODS) this.applyPickStates(method);
    this.renderPicks();
    void this.refreshSeries();
  }

  private applyPickStates(method: Method): void {
    const bySid = this.sidToDrawn.get(method);
    const panel = this.panels.get(method);
    if (!bySid || !panel) return;
    const marks = new Map<number, number>();
    this.state.picks.forEach((sid, order) => {
      const drawn = bySid.get(sid);
      if (drawn !== undefined) marks.set(drawn, order);
    });
    panel.setPickStates(marks);
  }

  private renderPicks(): void {
    const list = el("pick-list");
    list.replaceChildren();
    this.state.picks.forEach((sid, order) => {
      const item = document.createElement("li");
      const swatch = document.createElement("span");
      swatch.className = "swatch";
      swatch.style.background = PICK_PALETTE[order % PICK_PALETTE.length]!;
      const cell = this.cellOf.get(sid);
      const label = document.createElement("span");
      label.textContent = cell ? `sample ${sid} (y=${cell.y}, x=${cell.x})` : `sample ${sid}`;
      const drop = document.createElement("button");
      drop.textContent = "remove";
      drop.addEventListener("click", () => {
        removePick(this.state, sid);
        this.afterPicksChanged();
      });
      item.appendChild(swatch);
      item.appendChild(label);
      item.appendChild(drop);
      list.appendChild(item);
    });
    const button = el<HTMLButtonElement>("unmix-btn");
    const note = el("unmix-note");
    if (this.state.picks.length < 2) {
      button.disabled = true;
      note.textContent = "unmixing needs at least 2 endmember picks";
    } else {
      button.disabled = false;
      note.textContent = `${this.state.picks.length} endmembers selected`;
    }
  }

  private async refreshSeries(): Promise<void> {
    const epoch = ++this.seriesEpoch;
    const cubeId = this.charJob?.cube;
    if (!cubeId || this.state.picks.length === 0) {
      this.chart.setSeries([], []);
      return;
    }
    try {
      const entries = await api.series(cubeId, this.state.picks);
      if (epoch !== this.seriesEpoch) return; // a newer fetch superseded this one
      const orderOf = new Map(this.state.picks.map((sid, i) => [sid, i]));
      this.chart.setSeries(
        entries,
        entries.map((e) => orderOf.get(e.sample_id) ?? 0)
      );
    } catch (err) {
      if (epoch === this.seriesEpoch) this.status((err as Error).message, true);
    }
  }

  // -- unmixing ----------------------------------------------------------

  private async runUnmix(): Promise<void> {
    if (!this.charJob || this.state.picks.length < 2) return;
    const button = el<HTMLButtonElement>("unmix-btn");
    button.disabled = true;
    try {
      this.status("submitting unmix job");
      const submitted = await api.submitUnmix(this.charJob.id, this.state.picks.slice());
      let record: JobRecord = submitted;
      for await (const job of pollJob(api, submitted.id)) {
        record = job;
        this.status(`${job.id} is ${job.state}`);
      }
      if (record.state === "failed") {
        this.status(record.error ?? `${record.id} failed`, true);
        return;
      }
      await this.showUnmixResult(record.id);
      this.status(`${record.id} done`);
    } catch (err) {
      this.status((err as Error).message, true);
    } finally {
      button.disabled = this.state.picks.length < 2;
    }
  }

  /** Render summary numbers and maps for a finished unmix job; replaces
   * whatever result was shown before. */
  private async showUnmixResult(jobId: string): Promise<void> {
    const record = await api.getJob(jobId);
    if (record.state !== "done" || !record.result) return;
    this.state.unmixJobId = jobId;
    this.state.unmixSummary = (record.result as { summary?: UnmixSummary }).summary ?? null;
    this.renderUnmixPanel();
    const files = ((record.result as { files?: string[] }).files ?? []).slice();
    await this.maps.showUnmixMaps(jobId, files);
  }

  private renderUnmixPanel(): void {
    const box = el("summary");
    box.replaceChildren();
    if (!this.state.unmixJobId || !this.state.unmixSummary) {
      box.textContent = "no unmix result yet";
      this.maps.clear();
      return;
    }
    const s = this.state.unmixSummary;
    const headline = document.createElement("p");
    headline.className = "headline";
    headline.textContent =
      `${(s.fraction_below * 100).toFixed(1)}% of samples under ` +
      `${s.threshold_pct.toFixed(0)}% misfit`;
    box.appendChild(headline);
    const table = document.createElement("dl");
    for (const [key, value] of [
      ["job", this.state.unmixJobId],
      ["mean misfit %", s.mean.toPrecision(4)],
      ["median misfit %", s.median.toPrecision(4)],
      ["max misfit %", s.max.toPrecision(4)],
    ] as const) {
      const dt = document.createElement("dt");
      dt.textContent = key;
      const dd = document.createElement("dd");
      dd.textContent = String(value);
      table.appendChild(dt);
      table.appendChild(dd);
    }
    box.appendChild(table);
  }
}

const app = new App();
void app.start();

/** Canvas line chart for picked-sample time series. Values are drawn
 * exactly as the service returned them; no client-side rescaling beyond
 * the plot transform. */

import type { SeriesEntry } from "./api.js";
import { PICK_PALETTE } from "./scatter.js";

export class SeriesChart {
  readonly canvas: HTMLCanvasElement;

  constructor(container: HTMLElement) {
    this.canvas = document.createElement("canvas");
    this.canvas.className = "series-chart";
    container.appendChild(this.canvas);
    new ResizeObserver(() => this.redraw()).observe(container);
  }

  private entries: SeriesEntry[] = [];
  /** pick order per entry, indexes PICK_PALETTE */
  private orders: number[] = [];

  setSeries(entries: SeriesEntry[], orders: number[]): void {
    this.entries = entries;
    this.orders = orders;
    this.redraw();
  }

  private redraw(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const dpr = window.devicePixelRatio || 1;
    const w = this.canvas.parentElement?.clientWidth || 300;
    const h = this.canvas.parentElement?.clientHeight || 160;
    this.canvas.width = Math.max(1, Math.round(w * dpr));
    this.canvas.height = Math.max(1, Math.round(h * dpr));
    ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
    ctx.fillStyle = "#17191e";
    ctx.fillRect(0, 0, w, h);
    if (this.entries.length === 0) {
      ctx.fillStyle = "#5b616e";
      ctx.font = "12px sans-serif";
      ctx.textAlign = "center";
      ctx.fillText("pick samples to see their time series", w / 2, h / 2);
      return;
    }
    let lo = Infinity;
    let hi = -Infinity;
    let nt = 0;
    for (const entry of this.entries) {
      nt = Math.max(nt, entry.values.length);
      for (const step of entry.values) {
        for (const v of step) {
          if (v < lo) lo = v;
          if (v > hi) hi = v;
        }
      }
    }
    if (!(hi > lo)) {
      hi = lo + 1;
    }
    const padL = 42;
    const padR = 8;
    const padT = 8;
    const padB = 20;
    const plotW = w - padL - padR;
    const plotH = h - padT - padB;
    const sx = (t: number): number => padL + (nt > 1 ? (t / (nt - 1)) * plotW : plotW / 2);
    const sy = (v: number): number => padT + (1 - (v - lo) / (hi - lo)) * plotH;

    ctx.strokeStyle = "#2a2e36";
    ctx.lineWidth = 1;
    ctx.strokeRect(padL, padT, plotW, plotH);
    ctx.fillStyle = "#8a91a0";
    ctx.font = "10px sans-serif";
    ctx.textAlign = "right";
    ctx.fillText(hi.toPrecision(3), padL - 4, padT + 8);
    ctx.fillText(lo.toPrecision(3), padL - 4, padT + plotH);
    ctx.textAlign = "center";
    ctx.fillText("0", padL, h - 6);
    ctx.fillText(String(nt - 1), padL + plotW, h - 6);

    this.entries.forEach((entry, e) => {
      const color = PICK_PALETTE[(this.orders[e] ?? e) % PICK_PALETTE.length]!;
      const nvars = entry.values[0]?.length ?? 0;
      for (let v = 0; v < nvars; v++) {
        ctx.strokeStyle = color;
        ctx.lineWidth = 1.5;
        ctx.setLineDash(v === 0 ? [] : [5, 3]);
        ctx.beginPath();
        entry.values.forEach((step, t) => {
          const px = sx(t);
          const py = sy(step[v]!);
          if (t === 0) ctx.moveTo(px, py);
          else ctx.lineTo(px, py);
        });
        ctx.stroke();
      }
    });
    ctx.setLineDash([]);
  }
}

/** Map strip: fetches unmix result PGM/PPM maps and draws them decoded
 * onto canvases, nearest-neighbor scaled so cells stay crisp. */

import { api } from "./api.js";
import { decodePnm } from "./pgm.js";

function drawPnm(buffer: ArrayBuffer, canvas: HTMLCanvasElement): void {
  const image = decodePnm(buffer);
  canvas.width = image.width;
  canvas.height = image.height;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  const pixels = ctx.createImageData(image.width, image.height);
  pixels.data.set(image.rgba);
  ctx.putImageData(pixels, 0, 0);
}

export class MapStrip {
  constructor(private container: HTMLElement) {}

  clear(): void {
    this.container.replaceChildren();
  }

  /** Render every .pgm/.ppm the unmix job declared, misfit first. */
  async showUnmixMaps(jobId: string, files: string[]): Promise<void> {
    this.clear();
    const maps = files.filter((f) => f.endsWith(".pgm") || f.endsWith(".ppm"));
    maps.sort((a, b) => {
      const rank = (name: string): number => (name.startsWith("misfit") ? 0 : 1);
      return rank(a) - rank(b) || a.localeCompare(b);
    });
    for (const name of maps) {
      const cell = document.createElement("figure");
      cell.className = "map-cell";
      const canvas = document.createElement("canvas");
      canvas.className = "map-canvas";
      const caption = document.createElement("figcaption");
      caption.textContent = name.replace(/\.(pgm|ppm)$/, "");
      cell.appendChild(canvas);
      cell.appendChild(caption);
      this.container.appendChild(cell);
      try {
        drawPnm(await api.mapBytes(jobId, name), canvas);
      } catch (err) {
        caption.textContent = `${name}: ${(err as Error).message}`;
      }
    }
  }
}

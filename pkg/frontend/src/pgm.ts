/** Binary PNM (P5 grayscale, P6 RGB) decoding. Browsers cannot render
 * PNM via <img>, so maps are decoded here and drawn onto a canvas. */

export interface PnmImage {
  width: number;
  height: number;
  /** RGBA, width * height * 4, alpha 255 */
  rgba: Uint8ClampedArray;
}

/** Read the next whitespace-delimited ASCII token, skipping # comments. */
function nextToken(bytes: Uint8Array, pos: number): [string, number] {
  while (pos < bytes.length) {
    const b = bytes[pos]!;
    if (b === 0x23) {
      while (pos < bytes.length && bytes[pos] !== 0x0a) pos++;
    } else if (b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d) {
      pos++;
    } else {
      break;
    }
  }
  const start = pos;
  while (pos < bytes.length) {
    const b = bytes[pos]!;
    if (b === 0x20 || b === 0x09 || b === 0x0a || b === 0x0d || b === 0x23) break;
    pos++;
  }
  if (pos === start) throw new Error("truncated PNM header");
  let token = "";
  for (let i = start; i < pos; i++) token += String.fromCharCode(bytes[i]!);
  return [token, pos];
}

export function decodePnm(buffer: ArrayBuffer): PnmImage {
  const bytes = new Uint8Array(buffer);
  let pos: number;
  let magic: string;
  [magic, pos] = nextToken(bytes, 0);
  if (magic !== "P5" && magic !== "P6") {
    throw new Error(`unsupported PNM magic ${magic}`);
  }
  let widthTok: string, heightTok: string, maxvalTok: string;
  [widthTok, pos] = nextToken(bytes, pos);
  [heightTok, pos] = nextToken(bytes, pos);
  [maxvalTok, pos] = nextToken(bytes, pos);
  const width = Number(widthTok);
  const height = Number(heightTok);
  const maxval = Number(maxvalTok);
  if (!Number.isInteger(width) || !Number.isInteger(height) || width <= 0 || height <= 0) {
    throw new Error(`bad PNM dimensions ${widthTok} x ${heightTok}`);
  }
  if (!Number.isInteger(maxval) || maxval <= 0 || maxval > 255) {
    throw new Error(`unsupported PNM maxval ${maxvalTok}`);
  }
  pos++; // single whitespace byte separates header from raster
  const channels = magic === "P6" ? 3 : 1;
  const needed = width * height * channels;
  if (bytes.length - pos < needed) {
    throw new Error(`PNM raster truncated: ${bytes.length - pos} of ${needed} bytes`);
  }
  const rgba = new Uint8ClampedArray(width * height * 4);
  const scale = 255 / maxval;
  for (let i = 0; i < width * height; i++) {
    const src = pos + i * channels;
    const r = bytes[src]! * scale;
    rgba[i * 4] = r;
    rgba[i * 4 + 1] = channels === 3 ? bytes[src + 1]! * scale : r;
    rgba[i * 4 + 2] = channels === 3 ? bytes[src + 2]! * scale : r;
    rgba[i * 4 + 3] = 255;
  }
  return { width, height, rgba };
}

/** Pure picking geometry: nearest point, lasso membership, and the
 * extremity-ranked candidate a lasso resolves to. */

export interface Vec2 {
  x: number;
  y: number;
}

/** Index of the point within tolerance closest to (px, py), or -1. */
export function nearestPoint(
  xs: ArrayLike<number>,
  ys: ArrayLike<number>,
  px: number,
  py: number,
  tolerance: number
): number {
  let best = -1;
  let bestD2 = tolerance * tolerance;
  const n = xs.length;
  for (let i = 0; i < n; i++) {
    const dx = xs[i]! - px;
    const dy = ys[i]! - py;
    const d2 = dx * dx + dy * dy;
    if (d2 <= bestD2) {
      best = i;
      bestD2 = d2;
    }
  }
  return best;
}

/** Ray-casting point-in-polygon; boundary points count as inside. */
export function pointInPolygon(x: number, y: number, polygon: Vec2[]): boolean {
  let inside = false;
  const n = polygon.length;
  for (let i = 0, j = n - 1; i < n; j = i++) {
    const a = polygon[i]!;
    const b = polygon[j]!;
    const crosses = a.y > y !== b.y > y;
    if (crosses && x < ((b.x - a.x) * (y - a.y)) / (b.y - a.y) + a.x) {
      inside = !inside;
    }
  }
  return inside;
}

/** Indices of points falling inside the lasso polygon. */
export function lassoSelect(
  xs: ArrayLike<number>,
  ys: ArrayLike<number>,
  polygon: Vec2[]
): number[] {
  if (polygon.length < 3) return [];
  const selected: number[] = [];
  for (let i = 0; i < xs.length; i++) {
    if (pointInPolygon(xs[i]!, ys[i]!, polygon)) selected.push(i);
  }
  return selected;
}

/** Among candidate indices, the one farthest from the cloud centroid in
 * the displayed plane. A lasso resolves to this single extreme sample so
 * picks stay apex-like rather than interior. */
export function extremityCandidate(
  xs: ArrayLike<number>,
  ys: ArrayLike<number>,
  candidates: number[]
): number {
  if (candidates.length === 0) return -1;
  const n = xs.length;
  let cx = 0;
  let cy = 0;
  for (let i = 0; i < n; i++) {
    cx += xs[i]!;
    cy += ys[i]!;
  }
  cx /= n;
  cy /= n;
  let best = candidates[0]!;
  let bestD2 = -1;
  for (const i of candidates) {
    const dx = xs[i]! - cx;
    const dy = ys[i]! - cy;
    const d2 = dx * dx + dy * dy;
    if (d2 > bestD2) {
      best = i;
      bestD2 = d2;
    }
  }
  return best;
}

/** Evenly strided decimation down to cap points; identity under cap. */
export function decimate(n: number, cap: number): Int32Array {
  if (n <= cap) {
    const all = new Int32Array(n);
    for (let i = 0; i < n; i++) all[i] = i;
    return all;
  }
  const out = new Int32Array(cap);
  for (let i = 0; i < cap; i++) out[i] = Math.floor((i * n) / cap);
  return out;
}

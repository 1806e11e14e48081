/** GPU point panel: one embedding projection with pan, zoom, hover,
 * click picking, and lasso. Falls back to canvas 2D when WebGL is
 * unavailable so the tool still works under software rendering. */

import { decimate, extremityCandidate, lassoSelect, nearestPoint, Vec2 } from "./geometry.js";

export const PICK_PALETTE = [
  "#e41a1c", "#377eb8", "#4daf4a", "#984ea3", "#ff7f00",
  "#a65628", "#f781bf", "#17becf", "#bcbd22", "#8c564b",
];

const MAX_POINTS_DRAWN = 100_000;
const HIT_TOLERANCE_PX = 8;

const VERT_SRC = `
attribute vec2 a_pos;
attribute float a_state;
uniform vec2 u_center;
uniform vec2 u_scale;
uniform vec3 u_palette[10];
varying vec3 v_color;
void main() {
  vec2 clip = (a_pos - u_center) * u_scale;
  gl_Position = vec4(clip, 0.0, 1.0);
  float size = 3.0;
  vec3 color = vec3(0.35, 0.47, 0.64);
  if (a_state > 8.5) {
    color = vec3(1.0, 0.62, 0.05);
    size = 7.0;
  } else if (a_state > -0.5) {
    int idx = int(a_state + 0.5);
    for (int i = 0; i < 10; i++) {
      if (i == idx) color = u_palette[i];
    }
    size = 9.0;
  }
  v_color = color;
  gl_PointSize = size;
}
`;

const FRAG_SRC = `
precision mediump float;
varying vec3 v_color;
void main() {
  vec2 d = gl_PointCoord - vec2(0.5);
  if (dot(d, d) > 0.25) discard;
  gl_FragColor = vec4(v_color, 0.85);
}
`;

const STATE_HOVER = 9.0;
const STATE_NONE = -1.0;

function hexToRgb(hex: string): [number, number, number] {
  return [
    parseInt(hex.slice(1, 3), 16) / 255,
    parseInt(hex.slice(3, 5), 16) / 255,
    parseInt(hex.slice(5, 7), 16) / 255,
  ];
}

export interface ScatterCallbacks {
  /** click resolved to one drawn point */
  onPick(pointIndex: number): void;
  /** lasso resolved to its extremity candidate */
  onLasso(pointIndex: number): void;
  /** hover moved to a point (or -1 when it left) */
  onHover(pointIndex: number): void;
}

export class ScatterPanel {
  readonly canvas: HTMLCanvasElement;
  readonly overlay: HTMLCanvasElement;
  private gl: WebGLRenderingContext | null = null;
  private program: WebGLProgram | null = null;
  private posBuffer: WebGLBuffer | null = null;
  private stateBuffer: WebGLBuffer | null = null;

  /** data-space coordinates of drawn (possibly decimated) points */
  private xs = new Float32Array(0);
  private ys = new Float32Array(0);
  private states = new Float32Array(0);
  /** drawn index -> index into the full point cloud */
  drawnToFull: Int32Array = new Int32Array(0);

  private centerX = 0;
  private centerY = 0;
  private scaleX = 1;
  private scaleY = 1;
  private screenXs = new Float32Array(0);
  private screenYs = new Float32Array(0);
  private screenStale = true;

  private dragging = false;
  private dragTravel = 0;
  private lassoPath: Vec2[] | null = null;
  private lastPointer: Vec2 = { x: 0, y: 0 };
  private hoverIndex = -1;
  lassoMode = false;

  constructor(container: HTMLElement, private callbacks: ScatterCallbacks) {
    this.canvas = document.createElement("canvas");
    this.canvas.className = "scatter-gl";
    this.overlay = document.createElement("canvas");
    this.overlay.className = "scatter-overlay";
    container.appendChild(this.canvas);
    container.appendChild(this.overlay);
    this.gl = this.canvas.getContext("webgl", { antialias: true });
    if (this.gl) this.initGl(this.gl);
    this.bindEvents();
    new ResizeObserver(() => this.resize()).observe(container);
    this.resize();
  }

  private initGl(gl: WebGLRenderingContext): void {
    const compile = (type: number, src: string): WebGLShader => {
      const shader = gl.createShader(type)!;
      gl.shaderSource(shader, src);
      gl.compileShader(shader);
      if (!gl.getShaderParameter(shader, gl.COMPILE_STATUS)) {
        throw new Error(`shader compile failed: ${gl.getShaderInfoLog(shader)}`);
      }
      return shader;
    };
    const program = gl.createProgram()!;
    gl.attachShader(program, compile(gl.VERTEX_SHADER, VERT_SRC));
    gl.attachShader(program, compile(gl.FRAGMENT_SHADER, FRAG_SRC));
    gl.linkProgram(program);
    if (!gl.getProgramParameter(program, gl.LINK_STATUS)) {
      throw new Error(`program link failed: ${gl.getProgramInfoLog(program)}`);
    }
    this.program = program;
    this.posBuffer = gl.createBuffer();
    this.stateBuffer = gl.createBuffer();
    gl.useProgram(program);
    const palette = new Float32Array(30);
    PICK_PALETTE.forEach((hex, i) => palette.set(hexToRgb(hex), i * 3));
    gl.uniform3fv(gl.getUniformLocation(program, "u_palette"), palette);
    gl.enable(gl.BLEND);
    gl.blendFunc(gl.SRC_ALPHA, gl.ONE_MINUS_SRC_ALPHA);
  }

  /** Load a point cloud (full-resolution data coords); decimates past the
   * draw cap and resets the view to fit. */
  setData(xs: Float64Array, ys: Float64Array): void {
    this.drawnToFull = decimate(xs.length, MAX_POINTS_DRAWN);
    const n = this.drawnToFull.length;
    this.xs = new Float32Array(n);
    this.ys = new Float32Array(n);
    for (let i = 0; i < n; i++) {
      this.xs[i] = xs[this.drawnToFull[i]!]!;
      this.ys[i] = ys[this.drawnToFull[i]!]!;
    }
    this.states = new Float32Array(n).fill(STATE_NONE);
    this.screenXs = new Float32Array(n);
    this.screenYs = new Float32Array(n);
    this.hoverIndex = -1;
    if (this.gl && this.posBuffer) {
      this.gl.bindBuffer(this.gl.ARRAY_BUFFER, this.posBuffer);
      const interleaved = new Float32Array(n * 2);
      for (let i = 0; i < n; i++) {
        interleaved[i * 2] = this.xs[i]!;
        interleaved[i * 2 + 1] = this.ys[i]!;
      }
      this.gl.bufferData(this.gl.ARRAY_BUFFER, interleaved, this.gl.STATIC_DRAW);
      this.uploadStates();
    }
    this.fitView();
    this.render();
  }

  /** Mark pick states: map of drawn-point index -> pick order (0-based). */
  setPickStates(picksByDrawnIndex: Map<number, number>): void {
    this.states.fill(STATE_NONE);
    for (const [index, order] of picksByDrawnIndex) {
      if (index >= 0 && index < this.states.length) {
        this.states[index] = Math.min(order, 8);
      }
    }
    if (this.hoverIndex >= 0 && this.states[this.hoverIndex] === STATE_NONE) {
      this.states[this.hoverIndex] = STATE_HOVER;
    }
    this.uploadStates();
    this.render();
  }

  setHover(drawnIndex: number): void {
    if (drawnIndex === this.hoverIndex) return;
    if (this.hoverIndex >= 0 && this.states[this.hoverIndex] === STATE_HOVER) {
      this.states[this.hoverIndex] = STATE_NONE;
    }
    this.hoverIndex = drawnIndex;
    if (drawnIndex >= 0 && this.states[drawnIndex] === STATE_NONE) {
      this.states[drawnIndex] = STATE_HOVER;
    }
    this.uploadStates();
    this.render();
  }

  private uploadStates(): void {
    if (this.gl && this.stateBuffer) {
      this.gl.bindBuffer(this.gl.ARRAY_BUFFER, this.stateBuffer);
      this.gl.bufferData(this.gl.ARRAY_BUFFER, this.states, this.gl.DYNAMIC_DRAW);
    }
  }

  private fitView(): void {
    if (this.xs.length === 0) return;
    let minX = Infinity, maxX = -Infinity, minY = Infinity, maxY = -Infinity;
    for (let i = 0; i < this.xs.length; i++) {
      const x = this.xs[i]!, y = this.ys[i]!;
      if (x < minX) minX = x;
      if (x > maxX) maxX = x;
      if (y < minY) minY = y;
      if (y > maxY) maxY = y;
    }
    this.centerX = (minX + maxX) / 2;
    this.centerY = (minY + maxY) / 2;
    this.scaleX = 1.8 / Math.max(maxX - minX, 1e-12);
    this.scaleY = 1.8 / Math.max(maxY - minY, 1e-12);
    this.screenStale = true;
  }

  private resize(): void {
    const dpr = window.devicePixelRatio || 1;
    const w = this.canvas.clientWidth || this.canvas.parentElement?.clientWidth || 300;
    const h = this.canvas.clientHeight || this.canvas.parentElement?.clientHeight || 300;
    for (const c of [this.canvas, this.overlay]) {
      c.width = Math.max(1, Math.round(w * dpr));
      c.height = Math.max(1, Math.round(h * dpr));
    }
    this.screenStale = true;
    this.render();
  }

  private dataToScreenX(x: number): number {
    const w = this.canvas.clientWidth || 1;
    return ((x - this.centerX) * this.scaleX + 1) * 0.5 * w;
  }

  private dataToScreenY(y: number): number {
    const h = this.canvas.clientHeight || 1;
    return (1 - (y - this.centerY) * this.scaleY) * 0.5 * h;
  }

  private screenToDataX(px: number): number {
    const w = this.canvas.clientWidth || 1;
    return ((px / w) * 2 - 1) / this.scaleX + this.centerX;
  }

  private screenToDataY(py: number): number {
    const h = this.canvas.clientHeight || 1;
    return (1 - (py / h) * 2) / this.scaleY + this.centerY;
  }

  private refreshScreenCoords(): void {
    if (!this.screenStale) return;
    for (let i = 0; i < this.xs.length; i++) {
      this.screenXs[i] = this.dataToScreenX(this.xs[i]!);
      this.screenYs[i] = this.dataToScreenY(this.ys[i]!);
    }
    this.screenStale = false;
  }

  render(): void {
    if (this.gl) this.renderGl(this.gl);
    else this.render2d();
    this.renderOverlay();
  }

  private renderGl(gl: WebGLRenderingContext): void {
    gl.viewport(0, 0, this.canvas.width, this.canvas.height);
    gl.clearColor(0.09, 0.1, 0.12, 1);
    gl.clear(gl.COLOR_BUFFER_BIT);
    if (!this.program || this.xs.length === 0) return;
    gl.useProgram(this.program);
    gl.uniform2f(gl.getUniformLocation(this.program, "u_center"), this.centerX, this.centerY);
    gl.uniform2f(gl.getUniformLocation(this.program, "u_scale"), this.scaleX, this.scaleY);
    const aPos = gl.getAttribLocation(this.program, "a_pos");
    gl.bindBuffer(gl.ARRAY_BUFFER, this.posBuffer);
    gl.enableVertexAttribArray(aPos);
    gl.vertexAttribPointer(aPos, 2, gl.FLOAT, false, 0, 0);
    const aState = gl.getAttribLocation(this.program, "a_state");
    gl.bindBuffer(gl.ARRAY_BUFFER, this.stateBuffer);
    gl.enableVertexAttribArray(aState);
    gl.vertexAttribPointer(aState, 1, gl.FLOAT, false, 0, 0);
    gl.drawArrays(gl.POINTS, 0, this.xs.length);
  }

  private render2d(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx) return;
    const dpr = window.devicePixelRatio || 1;
    ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
    ctx.fillStyle = "#17191e";
    ctx.fillRect(0, 0, this.canvas.clientWidth, this.canvas.clientHeight);
    this.refreshScreenCoords();
    for (let i = 0; i < this.xs.length; i++) {
      const state = this.states[i]!;
      let radius = 1.5;
      let color = "rgba(90, 120, 163, 0.85)";
      if (state === STATE_HOVER) {
        radius = 3.5;
        color = "#ffa00d";
      } else if (state >= 0) {
        radius = 4.5;
        color = PICK_PALETTE[Math.min(state, 9)]!;
      }
      ctx.fillStyle = color;
      ctx.beginPath();
      ctx.arc(this.screenXs[i]!, this.screenYs[i]!, radius, 0, Math.PI * 2);
      ctx.fill();
    }
  }

  private renderOverlay(): void {
    const ctx = this.overlay.getContext("2d");
    if (!ctx) return;
    const dpr = window.devicePixelRatio || 1;
    ctx.setTransform(dpr, 0, 0, dpr, 0, 0);
    ctx.clearRect(0, 0, this.overlay.clientWidth, this.overlay.clientHeight);
    if (this.lassoPath && this.lassoPath.length > 1) {
      ctx.strokeStyle = "#ffa00d";
      ctx.lineWidth = 1.5;
      ctx.setLineDash([4, 3]);
      ctx.beginPath();
      ctx.moveTo(this.lassoPath[0]!.x, this.lassoPath[0]!.y);
      for (const p of this.lassoPath.slice(1)) ctx.lineTo(p.x, p.y);
      ctx.closePath();
      ctx.stroke();
      ctx.setLineDash([]);
    }
  }

  private pointerPos(ev: MouseEvent): Vec2 {
    const rect = this.overlay.getBoundingClientRect();
    return { x: ev.clientX - rect.left, y: ev.clientY - rect.top };
  }

  private bindEvents(): void {
    const el = this.overlay;
    el.addEventListener("pointerdown", (ev) => {
      el.setPointerCapture(ev.pointerId);
      const p = this.pointerPos(ev);
      this.lastPointer = p;
      if (this.lassoMode || ev.shiftKey) {
        this.lassoPath = [p];
      } else {
        this.dragging = true;
        this.dragTravel = 0;
      }
    });
    el.addEventListener("pointermove", (ev) => {
      const p = this.pointerPos(ev);
      if (this.lassoPath) {
        this.lassoPath.push(p);
        this.renderOverlay();
        return;
      }
      if (this.dragging) {
        const dxData = this.screenToDataX(p.x) - this.screenToDataX(this.lastPointer.x);
        const dyData = this.screenToDataY(p.y) - this.screenToDataY(this.lastPointer.y);
        this.centerX -= dxData;
        this.centerY -= dyData;
        this.dragTravel += Math.hypot(p.x - this.lastPointer.x, p.y - this.lastPointer.y);
        this.lastPointer = p;
        this.screenStale = true;
        this.render();
        return;
      }
      this.refreshScreenCoords();
      const hit = nearestPoint(this.screenXs, this.screenYs, p.x, p.y, HIT_TOLERANCE_PX);
      if (hit !== this.hoverIndex) this.callbacks.onHover(hit);
    });
    el.addEventListener("pointerup", (ev) => {
      const p = this.pointerPos(ev);
      if (this.lassoPath) {
        const path = this.lassoPath;
        this.lassoPath = null;
        this.renderOverlay();
        if (path.length >= 3) {
          this.refreshScreenCoords();
          const inside = lassoSelect(this.screenXs, this.screenYs, path);
          const candidate = extremityCandidate(this.screenXs, this.screenYs, inside);
          if (candidate >= 0) this.callbacks.onLasso(candidate);
        }
        return;
      }
      if (this.dragging) {
        this.dragging = false;
        return;
      }
      void p;
    });
    el.addEventListener("click", (ev) => {
      if (this.dragTravel > 3) {
        this.dragTravel = 0;
        return; // a pan, not a pick
      }
      const p = this.pointerPos(ev);
      this.refreshScreenCoords();
      const hit = nearestPoint(this.screenXs, this.screenYs, p.x, p.y, HIT_TOLERANCE_PX);
      if (hit >= 0) this.callbacks.onPick(hit);
    });
    el.addEventListener("pointerleave", () => this.callbacks.onHover(-1));
    el.addEventListener(
      "wheel",
      (ev) => {
        ev.preventDefault();
        const p = this.pointerPos(ev);
        const dataX = this.screenToDataX(p.x);
        const dataY = this.screenToDataY(p.y);
        const factor = Math.exp(-ev.deltaY * 0.0015);
        this.scaleX *= factor;
        this.scaleY *= factor;
        this.centerX = dataX - (dataX - this.centerX) / factor;
        this.centerY = dataY - (dataY - this.centerY) / factor;
        this.screenStale = true;
        this.render();
      },
      { passive: false }
    );
    el.addEventListener("dblclick", () => {
      this.fitView();
      this.render();
    });
  }
}

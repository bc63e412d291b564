// Angular-spectrum heatmap: TDOA grid on the vertical axis (positive delays
// up), time scrolling left to right, the located tau drawn over it. Raster
// construction is pure and testable; only the *View classes at the bottom
// touch canvas APIs.

import type { ColumnRing, ScalarRing } from "./ring.js";

export interface RasterImage {
  width: number;
  height: number;
  /** RGBA, row-major, width*height*4 bytes. */
  data: Uint8ClampedArray<ArrayBuffer>;
}

export const OVERLAY_RGB: readonly [number, number, number] = [255, 255, 255];

// Dark-to-bright perceptual ramp, linearly interpolated between anchors.
const RAMP: ReadonlyArray<readonly [number, number, number]> = [
  [0, 0, 4],
  [87, 16, 110],
  [188, 55, 84],
  [249, 142, 9],
  [252, 255, 164],
];

export function colormap(t: number): [number, number, number] {
  const x = t <= 0 ? 0 : t >= 1 ? 1 : t;
  const pos = x * (RAMP.length - 1);
  const i = Math.min(Math.floor(pos), RAMP.length - 2);
  const frac = pos - i;
  const a = RAMP[i];
  const b = RAMP[i + 1];
  return [
    Math.round(a[0] + frac * (b[0] - a[0])),
    Math.round(a[1] + frac * (b[1] - a[1])),
    Math.round(a[2] + frac * (b[2] - a[2])),
  ];
}

/** Grid index for a row of a K-row raster. Row 0 is the top = highest index. */
export function rowToTdoaIndex(row: number, k: number): number {
  return k - 1 - row;
}

export function tdoaIndexToRow(index: number, k: number): number {
  return k - 1 - index;
}

/**
 * Map a click's vertical offset inside the canvas (CSS pixels) to the TDOA
 * grid index rendered at that height.
 */
export function clickToTdoaIndex(offsetY: number, cssHeight: number, k: number): number {
  const row = Math.floor((offsetY / cssHeight) * k);
  const clamped = Math.min(Math.max(row, 0), k - 1);
  return rowToTdoaIndex(clamped, k);
}

/** Max-pool rows down to at most targetRows. Used for the gain display. */
export function decimateRows(column: Float32Array, targetRows: number): Float32Array {
  const n = column.length;
  if (n <= targetRows) {
    return column;
  }
  const out = new Float32Array(targetRows);
  for (let r = 0; r < targetRows; r++) {
    const lo = Math.floor((r * n) / targetRows);
    const hi = Math.max(Math.floor(((r + 1) * n) / targetRows), lo + 1);
    let m = column[lo];
    for (let i = lo + 1; i < hi; i++) {
      if (column[i] > m) {
        m = column[i];
      }
    }
    out[r] = m;
  }
  return out;
}

function paintColumn(
  img: RasterImage,
  x: number,
  values: Float32Array,
  lo: number,
  hi: number,
): void {
  const k = values.length;
  const span = hi - lo;
  for (let row = 0; row < img.height; row++) {
    const v = values[rowToTdoaIndex(row, k)];
    const t = span > 0 ? (v - lo) / span : 0.5;
    const [r, g, b] = colormap(t);
    const o = (row * img.width + x) * 4;
    img.data[o] = r;
    img.data[o + 1] = g;
    img.data[o + 2] = b;
    img.data[o + 3] = 255;
  }
}

/**
 * Render the angular-spectrum history into an RGBA raster, newest column at
 * the right, each column min-max normalized on its own. The located tau for
 * each column is overdrawn in OVERLAY_RGB. Returns null while the buffer is
 * empty (callers draw a placeholder instead).
 */
export function angularRaster(
  angular: ColumnRing,
  tau: ScalarRing,
  maxCols: number,
): RasterImage | null {
  const cols = Math.min(angular.length, maxCols);
  if (cols === 0) {
    return null;
  }
  const k = angular.rows;
  const img: RasterImage = {
    width: cols,
    height: k,
    data: new Uint8ClampedArray(cols * k * 4),
  };
  const first = angular.length - cols;
  for (let x = 0; x < cols; x++) {
    const col = angular.column(first + x);
    let lo = col[0];
    let hi = col[0];
    for (let i = 1; i < k; i++) {
      if (col[i] < lo) lo = col[i];
      if (col[i] > hi) hi = col[i];
    }
    paintColumn(img, x, col, lo, hi);
    if (first + x < tau.length) {
      const row = tdoaIndexToRow(tau.at(first + x), k);
      if (row >= 0 && row < k) {
        const o = (row * cols + x) * 4;
        img.data[o] = OVERLAY_RGB[0];
        img.data[o + 1] = OVERLAY_RGB[1];
        img.data[o + 2] = OVERLAY_RGB[2];
        img.data[o + 3] = 255;
      }
    }
  }
  return img;
}

/** Gain history raster with a fixed [0, 1] scale, low bins at the bottom. */
export function gainsRaster(
  gains: ColumnRing,
  maxCols: number,
  maxRows: number,
): RasterImage | null {
  const cols = Math.min(gains.length, maxCols);
  if (cols === 0) {
    return null;
  }
  const rows = Math.min(gains.rows, maxRows);
  const img: RasterImage = {
    width: cols,
    height: rows,
    data: new Uint8ClampedArray(cols * rows * 4),
  };
  const first = gains.length - cols;
  for (let x = 0; x < cols; x++) {
    paintColumn(img, x, decimateRows(gains.column(first + x), rows), 0, 1);
  }
  return img;
}

export function bannerText(status: "connecting" | "connected" | "disconnected"): string | null {
  if (status === "disconnected") {
    return "disconnected: showing last received frames";
  }
  if (status === "connecting") {
    return "connecting...";
  }
  return null;
}

// --- canvas glue (browser only) ----------------------------------------------

type ClickHandler = (tdoaIndex: number) => void;

/**
 * Owns one canvas and redraws it from raster snapshots. Scaling happens via
 * drawImage from a scratch canvas so a K x cols raster fills whatever CSS
 * size the page gives the element, without smoothing artifacts.
 */
export class HeatmapView {
  private canvas: HTMLCanvasElement;
  private ctx: CanvasRenderingContext2D;
  private scratch: HTMLCanvasElement;
  private onClick: ClickHandler | null = null;
  private rowsShown = 0;

  constructor(canvas: HTMLCanvasElement) {
    this.canvas = canvas;
    const ctx = canvas.getContext("2d");
    if (!ctx) {
      throw new Error("2d canvas context unavailable");
    }
    this.ctx = ctx;
    this.ctx.imageSmoothingEnabled = false;
    this.scratch = document.createElement("canvas");
    canvas.addEventListener("click", (ev) => {
      if (this.onClick && this.rowsShown > 0) {
        const rect = this.canvas.getBoundingClientRect();
        this.onClick(clickToTdoaIndex(ev.clientY - rect.top, rect.height, this.rowsShown));
      }
    });
  }

  setClickHandler(handler: ClickHandler | null): void {
    this.onClick = handler;
  }

  draw(
    raster: RasterImage | null,
    capacityCols: number,
    banner: string | null,
    placeholder: string,
  ): void {
    const w = this.canvas.width;
    const h = this.canvas.height;
    this.ctx.fillStyle = "#101018";
    this.ctx.fillRect(0, 0, w, h);
    if (raster) {
      this.rowsShown = raster.height;
      if (this.scratch.width !== raster.width || this.scratch.height !== raster.height) {
        this.scratch.width = raster.width;
        this.scratch.height = raster.height;
      }
      const sctx = this.scratch.getContext("2d")!;
      sctx.putImageData(new ImageData(raster.data, raster.width, raster.height), 0, 0);
      this.ctx.imageSmoothingEnabled = false;
      // Newest data stays pinned to the right edge while the buffer fills.
      const frac = Math.min(raster.width / Math.max(capacityCols, 1), 1);
      const drawW = Math.max(Math.round(frac * w), 1);
      this.ctx.drawImage(this.scratch, w - drawW, 0, drawW, h);
    } else {
      this.rowsShown = 0;
      this.ctx.fillStyle = "#8890a0";
      this.ctx.font = "14px system-ui, sans-serif";
      this.ctx.textAlign = "center";
      this.ctx.fillText(placeholder, w / 2, h / 2);
    }
    if (banner) {
      this.ctx.fillStyle = "rgba(180, 40, 40, 0.85)";
      this.ctx.fillRect(0, 0, w, 22);
      this.ctx.fillStyle = "#ffffff";
      this.ctx.font = "12px system-ui, sans-serif";
      this.ctx.textAlign = "left";
      this.ctx.fillText(banner, 8, 15);
    }
  }
}

/** Directed-matrix heatmap helpers. Rows are vocal donors, columns are
 * accompaniment donors, matching the service's export order, so the picture
 * and any exported CSV agree cell for cell. */

import type { ClustersResponse, MatrixResponse } from "./api.js";

/** Value range over non-null cells; falls back to [0, 1] when empty. */
export function matrixRange(values: (number | null)[][]): { min: number; max: number } {
  let min = Infinity;
  let max = -Infinity;
  for (const row of values) {
    for (const v of row) {
      if (v === null || Number.isNaN(v)) continue;
      if (v < min) min = v;
      if (v > max) max = v;
    }
  }
  if (min > max) return { min: 0, max: 1 };
  return { min, max };
}

/** Cold-to-warm ramp; null (self pair) renders as neutral grey. */
export function cellColor(value: number | null, min: number, max: number): string {
  if (value === null || Number.isNaN(value)) return "#3a3a42";
  const t = max > min ? Math.min(1, Math.max(0, (value - min) / (max - min))) : 0.5;
  const r = Math.round(40 + 215 * t);
  const g = Math.round(56 + 84 * (1 - Math.abs(t - 0.5) * 2));
  const b = Math.round(255 - 215 * t);
  return `rgb(${r},${g},${b})`;
}

export function drawHeatmap(canvas: HTMLCanvasElement, matrix: MatrixResponse): void {
  const n = matrix.song_ids.length;
  const ctx = canvas.getContext("2d");
  if (!ctx) return;
  ctx.clearRect(0, 0, canvas.width, canvas.height);
  if (n === 0) return;
  const cell = Math.max(4, Math.floor(Math.min(canvas.width, canvas.height) / n));
  const { min, max } = matrixRange(matrix.values);
  for (let i = 0; i < n; i++) {
    for (let j = 0; j < n; j++) {
      ctx.fillStyle = cellColor(matrix.values[i]![j]!, min, max);
      ctx.fillRect(j * cell, i * cell, cell - 1, cell - 1);
    }
  }
}

/** Cluster membership lists ordered by label, items as "song/role". */
export function groupClusters(c: ClustersResponse): string[][] {
  const groups = new Map<number, string[]>();
  c.labels.forEach((label, idx) => {
    const item = c.items[idx]!;
    const list = groups.get(label) ?? [];
    list.push(`${item[0]}/${item[1]}`);
    groups.set(label, list);
  });
  return [...groups.entries()].sort((a, b) => a[0] - b[0]).map(([, v]) => v);
}

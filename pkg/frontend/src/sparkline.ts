/** Inline SVG score curve with a marker at the estimated change month. */

import type { ScorePoint } from './types.js';

export interface SparklineSpec {
  points: ScorePoint[];
  pivotMonth: number | null;
  width?: number;
  height?: number;
}

export function sparklineSvg({ points, pivotMonth, width = 360, height = 72 }: SparklineSpec): string {
  if (points.length === 0) {
    return `<svg class="sparkline" viewBox="0 0 ${width} ${height}"></svg>`;
  }
  const months = points.map((p) => p.timestamp_month);
  const lo = Math.min(...months);
  const hi = Math.max(...months);
  const spanX = Math.max(1, hi - lo);
  const pad = 4;
  const x = (m: number) => pad + ((m - lo) / spanX) * (width - 2 * pad);
  const y = (s: number) => height - pad - s * (height - 2 * pad);
  const path = points
    .map((p, i) => `${i === 0 ? 'M' : 'L'}${x(p.timestamp_month).toFixed(1)},${y(p.score).toFixed(1)}`)
    .join(' ');
  const midline = `<line class="spark-mid" x1="${pad}" y1="${y(0.5)}" x2="${width - pad}" y2="${y(0.5)}"/>`;
  let marker = '';
  if (pivotMonth !== null && pivotMonth >= lo && pivotMonth <= hi) {
    const mx = x(pivotMonth).toFixed(1);
    marker = `<line class="spark-pivot" x1="${mx}" y1="0" x2="${mx}" y2="${height}"/>`;
  }
  return (
    `<svg class="sparkline" viewBox="0 0 ${width} ${height}">` +
    `${midline}${marker}<path class="spark-line" d="${path}"/></svg>`
  );
}

// Pure SVG geometry for the season timeline: score polyline, active
// threshold curve, segment boundaries, and query markers. Coordinates
// only; no DOM access, so everything here is unit-testable.

import type { SegmentInfo } from "./types.js";
import type { TimelinePoint } from "./viewmodel.js";

export interface Viewport {
  width: number;
  height: number;
  padding: number;
}

export interface Scale {
  x(t: number): number;
  y(value: number): number;
  yMax: number;
}

export function makeScale(
  points: TimelinePoint[],
  horizon: number,
  view: Viewport,
): Scale {
  let yMax = 0;
  for (const p of points) {
    if (p.score > yMax) yMax = p.score;
    if (p.threshold !== null && p.threshold > yMax) yMax = p.threshold;
  }
  if (yMax <= 0) yMax = 1;
  const innerW = view.width - 2 * view.padding;
  const innerH = view.height - 2 * view.padding;
  return {
    x: (t) => view.padding + ((t - 1) / Math.max(horizon - 1, 1)) * innerW,
    y: (v) => view.height - view.padding - (v / yMax) * innerH,
    yMax,
  };
}

export function scorePath(points: TimelinePoint[], scale: Scale): string {
  return points
    .map((p, i) => `${i === 0 ? "M" : "L"}${scale.x(p.t)},${scale.y(p.score)}`)
    .join(" ");
}

export function thresholdPath(points: TimelinePoint[], scale: Scale): string {
  // step-wise line with gaps where no threshold rule is active
  const parts: string[] = [];
  let pen = false;
  for (const p of points) {
    if (p.threshold === null) {
      pen = false;
      continue;
    }
    const cmd = pen ? "L" : "M";
    parts.push(`${cmd}${scale.x(p.t)},${scale.y(p.threshold)}`);
    pen = true;
  }
  return parts.join(" ");
}

export function segmentBoundaries(
  segments: SegmentInfo[],
  scale: Scale,
  view: Viewport,
): { x: number; y1: number; y2: number }[] {
  // a line at the start of every segment after the first
  return segments
    .filter((s) => s.t0 > 1)
    .map((s) => ({
      x: scale.x(s.t0),
      y1: view.padding,
      y2: view.height - view.padding,
    }));
}

export function markerPositions(
  markers: { t: number; score: number; forced: boolean }[],
  scale: Scale,
): { cx: number; cy: number; forced: boolean }[] {
  return markers.map((m) => ({
    cx: scale.x(m.t),
    cy: scale.y(m.score),
    forced: m.forced,
  }));
}

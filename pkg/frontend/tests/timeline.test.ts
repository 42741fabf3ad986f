import { describe, expect, it } from "vitest";

import {
  makeScale,
  markerPositions,
  scorePath,
  segmentBoundaries,
  thresholdPath,
  Viewport,
} from "../src/timeline.js";
import { timelinePoints } from "../src/viewmodel.js";
import { midSeasonState } from "./fixtures.js";

const VIEW: Viewport = { width: 100, height: 60, padding: 10 };

describe("scale", () => {
  it("maps t=1 to the left edge and t=horizon to the right edge", () => {
    const points = timelinePoints(midSeasonState);
    const scale = makeScale(points, 10, VIEW);
    expect(scale.x(1)).toBe(10);
    expect(scale.x(10)).toBe(90);
  });

  it("maps zero to the bottom and the max value to the top", () => {
    const points = timelinePoints(midSeasonState);
    const scale = makeScale(points, 10, VIEW);
    expect(scale.y(0)).toBe(50);
    expect(scale.y(scale.yMax)).toBe(10);
  });

  it("covers thresholds when they exceed all scores", () => {
    const points = [
      { t: 1, score: 0.1, threshold: 2.0 },
      { t: 2, score: 0.3, threshold: 1.0 },
    ];
    const scale = makeScale(points, 2, VIEW);
    expect(scale.yMax).toBe(2.0);
  });

  it("degenerate all-zero input still yields a usable scale", () => {
    const scale = makeScale([{ t: 1, score: 0, threshold: null }], 1, VIEW);
    expect(scale.yMax).toBe(1);
    expect(Number.isFinite(scale.x(1))).toBe(true);
  });
});

describe("paths", () => {
  it("score path visits one point per step", () => {
    const points = timelinePoints(midSeasonState);
    const scale = makeScale(points, 10, VIEW);
    const d = scorePath(points, scale);
    expect(d.startsWith("M")).toBe(true);
    expect(d.split(" ").length).toBe(points.length);
  });

  it("threshold path breaks where the rule has no threshold", () => {
    const points = [
      { t: 1, score: 0.1, threshold: 0.5 },
      { t: 2, score: 0.2, threshold: null },
      { t: 3, score: 0.3, threshold: 0.4 },
      { t: 4, score: 0.4, threshold: 0.4 },
    ];
    const scale = makeScale(points, 4, VIEW);
    const d = thresholdPath(points, scale);
    expect(d.match(/M/g)?.length).toBe(2); // two disjoint strokes
    expect(d.match(/L/g)?.length).toBe(1);
  });

  it("empty threshold history yields an empty path", () => {
    const points = [{ t: 1, score: 0.1, threshold: null }];
    const scale = makeScale(points, 1, VIEW);
    expect(thresholdPath(points, scale)).toBe("");
  });
});

describe("segments and markers", () => {
  it("draws one boundary per segment after the first", () => {
    const points = timelinePoints(midSeasonState);
    const scale = makeScale(points, 10, VIEW);
    const lines = segmentBoundaries(midSeasonState.plan.segments, scale, VIEW);
    expect(lines.length).toBe(1);
    expect(lines[0].x).toBe(scale.x(6));
  });

  it("marker positions follow the scale", () => {
    const points = timelinePoints(midSeasonState);
    const scale = makeScale(points, 10, VIEW);
    const [marker] = markerPositions(
      [{ t: 5, score: 0.0, forced: true }],
      scale,
    );
    expect(marker.cx).toBe(scale.x(5));
    expect(marker.cy).toBe(scale.y(0));
    expect(marker.forced).toBe(true);
  });
});

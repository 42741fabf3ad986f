// DOM rendering. Values are printed with String(...) so the displayed
// text is exactly the JSON value the service sent.

import {
  makeScale,
  markerPositions,
  scorePath,
  segmentBoundaries,
  thresholdPath,
  Viewport,
} from "./timeline.js";
import type { SessionState } from "./types.js";
import {
  BannerModel,
  probabilityBars,
  queryMarkers,
  statusBanner,
  timelinePoints,
} from "./viewmodel.js";

const SVG_NS = "http://www.w3.org/2000/svg";
const VIEW: Viewport = { width: 860, height: 300, padding: 28 };

export function renderBanner(el: HTMLElement, banner: BannerModel): void {
  el.textContent = banner.text;
  el.dataset.kind = banner.kind;
  el.className = `banner banner-${banner.kind}`;
}

export function renderProbabilities(el: HTMLElement, state: SessionState): void {
  el.replaceChildren();
  for (const bar of probabilityBars(state)) {
    const row = document.createElement("div");
    row.className = "prob-row";
    const name = document.createElement("span");
    name.className = "prob-name";
    name.textContent = bar.expertId;
    const track = document.createElement("div");
    track.className = "prob-track";
    const fill = document.createElement("div");
    fill.className = "prob-fill";
    fill.style.width = `${bar.probability * 100}%`;
    track.appendChild(fill);
    const value = document.createElement("span");
    value.className = "prob-value";
    value.textContent = String(bar.probability);
    row.append(name, track, value);
    el.appendChild(row);
  }
}

export function renderTimeline(svg: SVGSVGElement, state: SessionState): void {
  svg.replaceChildren();
  svg.setAttribute("viewBox", `0 0 ${VIEW.width} ${VIEW.height}`);
  const points = timelinePoints(state);
  const scale = makeScale(points, state.horizon, VIEW);

  for (const boundary of segmentBoundaries(state.plan.segments, scale, VIEW)) {
    const line = document.createElementNS(SVG_NS, "line");
    line.setAttribute("x1", String(boundary.x));
    line.setAttribute("x2", String(boundary.x));
    line.setAttribute("y1", String(boundary.y1));
    line.setAttribute("y2", String(boundary.y2));
    line.setAttribute("class", "segment-boundary");
    svg.appendChild(line);
  }
  if (points.length > 0) {
    const threshold = document.createElementNS(SVG_NS, "path");
    threshold.setAttribute("d", thresholdPath(points, scale));
    threshold.setAttribute("class", "threshold-line");
    svg.appendChild(threshold);
    const score = document.createElementNS(SVG_NS, "path");
    score.setAttribute("d", scorePath(points, scale));
    score.setAttribute("class", "score-line");
    svg.appendChild(score);
  }
  for (const marker of markerPositions(queryMarkers(state), scale)) {
    const dot = document.createElementNS(SVG_NS, "circle");
    dot.setAttribute("cx", String(marker.cx));
    dot.setAttribute("cy", String(marker.cy));
    dot.setAttribute("r", "6");
    dot.setAttribute("class", marker.forced ? "query-forced" : "query-triggered");
    svg.appendChild(dot);
  }
}

export function renderQueryTable(el: HTMLElement, state: SessionState): void {
  el.replaceChildren();
  for (const q of state.query_records) {
    const row = document.createElement("tr");
    for (const cell of [
      String(q.segment_index),
      String(q.query_time),
      String(q.label),
      String(q.score_at_query),
      q.forced ? "forced" : "triggered",
    ]) {
      const td = document.createElement("td");
      td.textContent = cell;
      row.appendChild(td);
    }
    el.appendChild(row);
  }
}

export function renderAll(state: SessionState): void {
  const banner = document.getElementById("banner") as HTMLElement;
  renderBanner(banner, statusBanner(state));
  renderProbabilities(
    document.getElementById("probabilities") as HTMLElement,
    state,
  );
  renderTimeline(
    document.getElementById("timeline") as unknown as SVGSVGElement,
    state,
  );
  renderQueryTable(document.getElementById("queries") as HTMLElement, state);
  const meta = document.getElementById("session-meta") as HTMLElement;
  meta.textContent =
    `session ${state.id} | ${state.strategy} | day ${state.step}/${state.horizon}` +
    ` | samples ${state.query_records.length}/${state.budget} | ${state.status}`;
  const labelForm = document.getElementById("label-form") as HTMLFieldSetElement;
  labelForm.disabled = state.status !== "awaiting_label";
  const obsForm = document.getElementById("observation-form") as HTMLFieldSetElement;
  obsForm.disabled = state.status !== "awaiting_observation";
}

// View-model extraction. Everything displayed comes verbatim from the
// service payload; the only transformation allowed is number-to-string
// formatting at render time (the dumb-client contract).

import type { DecisionPayload, SessionState } from "./types.js";

export interface ProbabilityBar {
  expertId: string;
  probability: number; // exactly the service value
}

export interface BannerModel {
  kind: "sample" | "wait" | "complete" | "idle";
  text: string;
  forced: boolean;
}

export function probabilityBars(state: SessionState): ProbabilityBar[] {
  return state.expert_ids.map((expertId, i) => ({
    expertId,
    probability: state.probabilities[i],
  }));
}

export function statusBanner(state: SessionState): BannerModel {
  if (state.status === "complete") {
    return {
      kind: "complete",
      text: `Season complete: ${state.query_records.length} of ${state.budget} samples used`,
      forced: false,
    };
  }
  if (state.status === "awaiting_label") {
    return {
      kind: "sample",
      text: `SAMPLE NOW - enter the measured label for day ${state.pending_query_time}`,
      forced: false,
    };
  }
  return {
    kind: "idle",
    text: `Awaiting observation for day ${state.step + 1} of ${state.horizon}`,
    forced: false,
  };
}

export function decisionBanner(payload: DecisionPayload): BannerModel {
  if (payload.decision === "sample") {
    return {
      kind: "sample",
      text: payload.forced
        ? `SAMPLE NOW (day ${payload.t}) - forced at segment end`
        : `SAMPLE NOW (day ${payload.t}) - score ${payload.score} crossed the threshold`,
      forced: payload.forced,
    };
  }
  return {
    kind: "wait",
    text: `Wait (day ${payload.t}) - score ${payload.score}`,
    forced: false,
  };
}

export interface TimelinePoint {
  t: number;
  score: number;
  threshold: number | null;
}

export function timelinePoints(state: SessionState): TimelinePoint[] {
  return state.score_history.map((score, i) => ({
    t: i + 1,
    score,
    threshold: state.threshold_history[i],
  }));
}

export function queryMarkers(state: SessionState) {
  return state.query_records.map((q) => ({
    t: q.query_time,
    score: q.score_at_query,
    forced: q.forced,
    label: q.label,
  }));
}

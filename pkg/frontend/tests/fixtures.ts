import type { DecisionPayload, SessionState } from "../src/types.js";

// A mid-season snapshot as the service would send it, with deliberately
// awkward long decimals so value fidelity is actually exercised.
export const midSeasonState: SessionState = {
  id: "abc123def456",
  strategy: "ets",
  status: "awaiting_label",
  step: 7,
  horizon: 10,
  budget: 2,
  plan: {
    segments: [
      { index: 1, t0: 1, te: 5 },
      { index: 2, t0: 6, te: 10 },
    ],
  },
  probabilities: [0.7310585786300049, 0.2689414213699951],
  expert_ids: ["m0", "m1"],
  score_history: [0.1, 0.30000000000000004, 0.55, 0.2, 0.0, 0.4, 0.9251234567890123],
  threshold_history: [0.5, 0.5, 0.5, 0.5, 0.5, 0.6180339887498949, 0.6180339887498949],
  prediction_history: [1.1, 1.2, 1.3, 1.4, 1.5, 1.6, 1.7000000000000002],
  pending_query_time: 7,
  query_records: [
    {
      segment_index: 1,
      query_time: 5,
      label: -0.3333333333333333,
      score_at_query: 0.0,
      forced: true,
    },
  ],
  declines: 0,
  event_count: 9,
};

export const sampleDecision: DecisionPayload = {
  t: 7,
  segment_index: 2,
  score: 0.9251234567890123,
  threshold: 0.6180339887498949,
  window: null,
  decision: "sample",
  forced: false,
  probabilities: [0.7310585786300049, 0.2689414213699951],
  prediction: 1.7000000000000002,
};

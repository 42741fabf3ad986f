// Payload shapes mirroring the advisor service responses verbatim.
// The client renders these values as-is: no score, threshold, or
// probability is ever recomputed here.

export interface SegmentInfo {
  index: number;
  t0: number;
  te: number;
}

export interface QueryRecord {
  segment_index: number;
  query_time: number;
  label: number;
  score_at_query: number;
  forced: boolean;
}

export interface SessionState {
  id: string;
  strategy: string;
  status: "awaiting_observation" | "awaiting_label" | "complete";
  step: number;
  horizon: number;
  budget: number;
  plan: { segments: SegmentInfo[] };
  probabilities: number[];
  expert_ids: string[];
  score_history: number[];
  threshold_history: (number | null)[];
  prediction_history: number[];
  pending_query_time: number | null;
  query_records: QueryRecord[];
  declines: number;
  event_count: number;
}

export interface WindowState {
  length: number | null;
  end: number | null;
  max: number | null;
}

export interface DecisionPayload {
  t: number;
  segment_index: number;
  score: number;
  threshold: number | null;
  window: WindowState | null;
  decision: "sample" | "wait";
  forced: boolean;
  probabilities: number[];
  prediction: number;
}

export interface LabelResponse {
  t: number;
  probabilities: number[];
  queries_used: number;
  status: string;
}

export interface CreateSessionRequest {
  horizon: number;
  budget: number;
  strategy: string;
  eta?: number;
}

import type {
  CreateSessionRequest,
  DecisionPayload,
  LabelResponse,
  SessionState,
} from "./types.js";

export class ApiError extends Error {
  constructor(public status: number, detail: string) {
    super(detail);
  }
}

async function request<T>(path: string, init?: RequestInit): Promise<T> {
  const response = await fetch(path, {
    headers: { "Content-Type": "application/json" },
    ...init,
  });
  const body = await response.json().catch(() => ({}));
  if (!response.ok) {
    const detail =
      typeof body?.detail === "string" ? body.detail : response.statusText;
    throw new ApiError(response.status, detail);
  }
  return body as T;
}

export function sessionPath(id: string, suffix = ""): string {
  return `/sessions/${encodeURIComponent(id)}${suffix}`;
}

export function createSession(req: CreateSessionRequest): Promise<SessionState> {
  return request("/sessions", { method: "POST", body: JSON.stringify(req) });
}

export function getState(id: string): Promise<SessionState> {
  return request(sessionPath(id));
}

export function postObservation(
  id: string,
  t: number,
  features: number[],
): Promise<DecisionPayload> {
  return request(sessionPath(id, "/observations"), {
    method: "POST",
    body: JSON.stringify({ t, features }),
  });
}

export function postLabel(id: string, t: number, y: number): Promise<LabelResponse> {
  return request(sessionPath(id, "/labels"), {
    method: "POST",
    body: JSON.stringify({ t, y }),
  });
}

export function postDecline(id: string): Promise<{ t: number; status: string }> {
  return request(sessionPath(id, "/decline"), { method: "POST" });
}

import {
  ApiError,
  createSession,
  getState,
  postDecline,
  postLabel,
  postObservation,
} from "./api.js";
import { renderAll, renderBanner } from "./render.js";
import { decisionBanner } from "./viewmodel.js";

let sessionId: string | null = null;

function el<T extends HTMLElement>(id: string): T {
  return document.getElementById(id) as T;
}

function showError(message: string): void {
  const box = el<HTMLElement>("error");
  box.textContent = message;
  box.hidden = message === "";
}

async function refresh(): Promise<void> {
  if (!sessionId) return;
  renderAll(await getState(sessionId));
}

async function guard(action: () => Promise<void>): Promise<void> {
  try {
    showError("");
    await action();
  } catch (err) {
    showError(err instanceof ApiError ? `${err.status}: ${err.message}` : String(err));
    await refresh().catch(() => undefined);
  }
}

function parseFeatures(raw: string): number[] {
  const values = raw
    .split(/[\s,]+/)
    .filter((v) => v.length > 0)
    .map(Number);
  if (values.length === 0 || values.some((v) => !Number.isFinite(v))) {
    throw new ApiError(0, "features must be a list of numbers");
  }
  return values;
}

function wire(): void {
  el<HTMLFormElement>("create-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void guard(async () => {
      const state = await createSession({
        horizon: Number(el<HTMLInputElement>("create-horizon").value),
        budget: Number(el<HTMLInputElement>("create-budget").value),
        strategy: el<HTMLSelectElement>("create-strategy").value,
      });
      sessionId = state.id;
      el<HTMLInputElement>("obs-t").value = "1";
      renderAll(state);
    });
  });

  el<HTMLFormElement>("observe-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void guard(async () => {
      if (!sessionId) throw new ApiError(0, "create a session first");
      const t = Number(el<HTMLInputElement>("obs-t").value);
      const features = parseFeatures(el<HTMLInputElement>("obs-features").value);
      const decision = await postObservation(sessionId, t, features);
      renderBanner(el("banner"), decisionBanner(decision));
      await refresh();
      if (decision.decision === "wait") {
        el<HTMLInputElement>("obs-t").value = String(t + 1);
        el<HTMLInputElement>("obs-features").value = "";
      } else {
        el<HTMLInputElement>("label-t").value = String(t);
      }
    });
  });

  el<HTMLFormElement>("label-entry").addEventListener("submit", (event) => {
    event.preventDefault();
    void guard(async () => {
      if (!sessionId) throw new ApiError(0, "create a session first");
      const t = Number(el<HTMLInputElement>("label-t").value);
      const y = Number(el<HTMLInputElement>("label-y").value);
      await postLabel(sessionId, t, y);
      await refresh();
      el<HTMLInputElement>("obs-t").value = String(t + 1);
      el<HTMLInputElement>("label-y").value = "";
    });
  });

  el<HTMLButtonElement>("decline-button").addEventListener("click", () => {
    void guard(async () => {
      if (!sessionId) throw new ApiError(0, "create a session first");
      await postDecline(sessionId);
      await refresh();
      const t = Number(el<HTMLInputElement>("label-t").value);
      el<HTMLInputElement>("obs-t").value = String(t + 1);
    });
  });

  el<HTMLFormElement>("load-form").addEventListener("submit", (event) => {
    event.preventDefault();
    void guard(async () => {
      sessionId = el<HTMLInputElement>("load-id").value.trim();
      await refresh();
    });
  });
}

document.addEventListener("DOMContentLoaded", wire);

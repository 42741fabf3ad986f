"""Live season-advisor service.

Wraps the step-driven engine core behind JSON-over-HTTP so a human
operator can post daily observations, receive sample-now/wait
recommendations with the rule state that produced them, and post measured
labels that trigger weight updates. Because sessions drive the exact same
``OnlineRun`` state machine as the offline engine, replaying a completed
session through ``engine.run`` reproduces it bit for bit.

Sessions persist as append-only JSONL event logs, one file per session;
on startup the service replays whatever logs it finds, so a restart
resumes mid-season sessions.
"""

from __future__ import annotations

import hashlib
import json
import threading
import uuid
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel, Field

from . import engine
from .engine import EngineConfig, OnlineRun
from .ensemble import Expert
from .errors import ConfigError, ValidationError
from .prior import EpisodicPrior

AWAITING_OBSERVATION = "awaiting_observation"
AWAITING_LABEL = "awaiting_label"
COMPLETE = "complete"


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()


class GrowingEpisode:
    """Feature stream that accumulates one observation per step."""

    def __init__(self, episode_id: str, dim: int, horizon: int):
        self.id = episode_id
        self.dim = dim
        self.horizon = horizon
        self._rows: List[list] = []

    @property
    def features(self) -> np.ndarray:
        if not self._rows:
            return np.zeros((0, self.dim))
        return np.asarray(self._rows, dtype=float)

    @property
    def n_steps(self) -> int:
        return len(self._rows)

    def append(self, row) -> None:
        row = [float(v) for v in row]
        if len(row) != self.dim:
            raise ValidationError(
                f"observation has {len(row)} features; session expects {self.dim}"
            )
        if not all(np.isfinite(row)):
            raise ValidationError("observation features must be finite")
        self._rows.append(row)

    def drop_last(self) -> None:
        self._rows.pop()


class Session:
    """One live season: engine core + growing episode + append-only event log."""

    def __init__(
        self,
        session_id: str,
        experts: List[Expert],
        horizon: int,
        budget: int,
        strategy: str,
        dim: int,
        prior: Optional[EpisodicPrior],
        config: EngineConfig,
        log_path: Optional[Path] = None,
    ):
        self.id = session_id
        self.strategy = engine.canonical_strategy(strategy)
        self.run = OnlineRun(
            experts, horizon, budget, self.strategy, prior=prior, config=config
        )
        self.episode = GrowingEpisode(f"session-{session_id}", dim, horizon)
        self.events: List[dict] = []
        self.declines = 0
        self.lock = threading.Lock()
        self._log_path = log_path
        self._log_fh = None
        if log_path is not None:
            log_path.parent.mkdir(parents=True, exist_ok=True)
            self._log_fh = log_path.open("a")

    # -- event log ----------------------------------------------------------

    def record(self, kind: str, payload: dict) -> None:
        event = {"ts": _now(), "type": kind, **payload}
        self.events.append(event)
        if self._log_fh is not None:
            self._log_fh.write(json.dumps(event) + "\n")
            self._log_fh.flush()

    # -- state --------------------------------------------------------------

    @property
    def status(self) -> str:
        if self.run.awaiting_label:
            return AWAITING_LABEL
        if len(self.run.queries) >= self.run.budget or self.run.complete:
            return COMPLETE
        return AWAITING_OBSERVATION

    def observe(self, t: int, features) -> dict:
        if self.status == COMPLETE:
            raise HTTPException(409, detail="session is complete")
        if self.status == AWAITING_LABEL:
            raise HTTPException(
                409, detail=f"label for t={self.run.pending_query_time} is pending"
            )
        if t != self.run.t + 1:
            raise HTTPException(
                409, detail=f"out-of-order step {t}; expected {self.run.t + 1}"
            )
        try:
            self.episode.append(features)
        except ValidationError as exc:
            raise HTTPException(422, detail=str(exc)) from None
        try:
            outcome = self.run.advance(self.episode, t)
        except ValidationError as exc:
            self.episode.drop_last()
            raise HTTPException(409, detail=str(exc)) from None
        decision = outcome.decision
        payload = {
            "t": t,
            "segment_index": outcome.segment_index,
            "score": outcome.score,
            "threshold": outcome.threshold,
            "window": _window_state(outcome.rule_state),
            "decision": "sample" if (decision is not None and decision.selected) else "wait",
            "forced": bool(decision.forced) if decision is not None else False,
            "probabilities": self.run.state.probabilities.tolist(),
            "prediction": outcome.prediction,
        }
        self.record("observation", {"t": t, "features": list(map(float, features)),
                                     "decision": payload["decision"],
                                     "forced": payload["forced"]})
        return payload

    def label(self, t: int, y: float) -> dict:
        if not self.run.awaiting_label:
            raise HTTPException(409, detail="no query is pending a label")
        pending = self.run.pending_query_time
        if t != pending:
            raise HTTPException(
                409, detail=f"pending query is at t={pending}, not t={t}"
            )
        try:
            self.run.provide_label(self.episode, float(y))
        except ValidationError as exc:
            raise HTTPException(422, detail=str(exc)) from None
        self.record("label", {"t": t, "y": float(y)})
        return {
            "t": t,
            "probabilities": self.run.state.probabilities.tolist(),
            "queries_used": len(self.run.queries),
            "status": self.status,
        }

    def decline(self) -> dict:
        if not self.run.awaiting_label:
            raise HTTPException(409, detail="no pending recommendation to decline")
        t = self.run.pending_query_time
        self.run.decline()
        self.declines += 1
        self.record("decline", {"t": t})
        return {"t": t, "status": self.status, "declines": self.declines}

    def snapshot(self) -> dict:
        plan = self.run.plan
        return {
            "id": self.id,
            "strategy": self.strategy,
            "status": self.status,
            "step": self.run.t,
            "horizon": plan.horizon,
            "budget": plan.budget,
            "plan": {
                "segments": [
                    {"index": s.index, "t0": s.t0, "te": s.te} for s in plan.segments
                ]
            },
            "probabilities": self.run.state.probabilities.tolist(),
            "expert_ids": [e.id for e in self.run.state.experts],
            "score_history": [float(v) for v in self.run.scores],
            "threshold_history": [
                None if v is None else float(v) for v in self.run.thresholds
            ],
            "prediction_history": [float(v) for v in self.run.predictions],
            "pending_query_time": self.run.pending_query_time,
            "query_records": [
                {
                    "segment_index": q.segment_index,
                    "query_time": q.query_time,
                    "label": q.label,
                    "score_at_query": q.score_at_query,
                    "forced": q.forced,
                }
                for q in self.run.queries
            ],
            "declines": self.declines,
            "event_count": len(self.events),
        }


def _window_state(rule_state: dict) -> Optional[dict]:
    if rule_state.get("rule") != "sa":
        return None
    return {
        "length": rule_state.get("window"),
        "end": rule_state.get("window_end"),
        "max": rule_state.get("window_max"),
    }


# ---------------------------------------------------------------------------
# Service
# ---------------------------------------------------------------------------


class CreateSessionRequest(BaseModel):
    horizon: int = Field(gt=0)
    budget: int = Field(gt=0)
    strategy: str
    eta: Optional[float] = None


class ObservationRequest(BaseModel):
    t: int
    features: List[float]


class LabelRequest(BaseModel):
    t: int
    y: float


class AdvisorService:
    """Owns the expert committee, the prior, and all live sessions."""

    def __init__(
        self,
        experts: List[Expert],
        dim: int,
        prior: Optional[EpisodicPrior] = None,
        config: EngineConfig = EngineConfig(),
        session_dir: Optional[str] = None,
    ):
        if len(experts) < 2:
            raise ConfigError("the advisor needs at least 2 experts")
        self.experts = list(experts)
        self.dim = dim
        self.prior = prior
        self.config = config
        self.session_dir = Path(session_dir) if session_dir else None
        self.sessions: dict = {}
        self._lock = threading.Lock()
        self.app = self._build_app()
        if self.session_dir is not None:
            self._resume_sessions()

    # -- session management ---------------------------------------------

    def create_session(self, req: CreateSessionRequest, session_id=None) -> Session:
        if req.budget > req.horizon:
            raise HTTPException(
                422, detail=f"budget {req.budget} exceeds horizon {req.horizon}"
            )
        strategy = req.strategy
        config = self.config
        if req.eta is not None:
            if req.eta <= 0:
                raise HTTPException(422, detail="eta must be positive")
            config = EngineConfig(
                eta=req.eta,
                loss=config.loss,
                ets_grid_size=config.ets_grid_size,
                score_kind=config.score_kind,
                prior_cap=config.prior_cap,
            )
        session_id = session_id or uuid.uuid4().hex[:12]
        log_path = (
            self.session_dir / f"{session_id}.jsonl" if self.session_dir else None
        )
        try:
            session = Session(
                session_id,
                self.experts,
                req.horizon,
                req.budget,
                strategy,
                self.dim,
                self.prior,
                config,
                log_path=log_path,
            )
        except (ConfigError, ValidationError) as exc:
            raise HTTPException(422, detail=str(exc)) from None
        session.record(
            "created",
            {
                "id": session_id,
                "horizon": req.horizon,
                "budget": req.budget,
                "strategy": strategy,
                "eta": config.eta,
            },
        )
        with self._lock:
            self.sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        with self._lock:
            session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, detail=f"unknown session {session_id!r}")
        return session

    def _resume_sessions(self) -> None:
        for path in sorted(self.session_dir.glob("*.jsonl")):
            events = [
                json.loads(line)
                for line in path.read_text().splitlines()
                if line.strip()
            ]
            if not events or events[0]["type"] != "created":
                continue
            head = events[0]
            # replay without writing, then reattach the log for appends
            session = Session(
                head["id"],
                self.experts,
                head["horizon"],
                head["budget"],
                head["strategy"],
                self.dim,
                self.prior,
                EngineConfig(
                    eta=head.get("eta", self.config.eta),
                    loss=self.config.loss,
                    ets_grid_size=self.config.ets_grid_size,
                    score_kind=self.config.score_kind,
                    prior_cap=self.config.prior_cap,
                ),
                log_path=None,
            )
            session.events.append(head)
            for event in events[1:]:
                if event["type"] == "observation":
                    session.episode.append(event["features"])
                    session.run.advance(session.episode, event["t"])
                elif event["type"] == "label":
                    session.run.provide_label(session.episode, event["y"])
                elif event["type"] == "decline":
                    session.run.decline()
                    session.declines += 1
                session.events.append(event)
            session._log_fh = path.open("a")
            session._log_path = path
            with self._lock:
                self.sessions[session.id] = session

    # -- HTTP layer -------------------------------------------------------

    def _build_app(self) -> FastAPI:
        app = FastAPI(title="season advisor", version="0.1.0")
        service = self

        @app.get("/health")
        def health():
            digest = hashlib.sha256(
                json.dumps(
                    {
                        "experts": [e.id for e in service.experts],
                        "dim": service.dim,
                        "eta": service.config.eta,
                        "prior": len(service.prior) if service.prior else 0,
                    },
                    sort_keys=True,
                ).encode()
            ).hexdigest()[:12]
            return {
                "service": "boal-advisor",
                "status": "ok",
                "sessions": len(service.sessions),
                "config_digest": digest,
            }

        @app.post("/sessions", status_code=201)
        def create(req: CreateSessionRequest):
            session = service.create_session(req)
            return session.snapshot()

        @app.get("/sessions/{session_id}")
        def get_state(session_id: str):
            return service.get(session_id).snapshot()

        @app.post("/sessions/{session_id}/observations")
        def observe(session_id: str, req: ObservationRequest):
            session = service.get(session_id)
            with session.lock:
                return session.observe(req.t, req.features)

        @app.post("/sessions/{session_id}/labels")
        def label(session_id: str, req: LabelRequest):
            session = service.get(session_id)
            with session.lock:
                return session.label(req.t, req.y)

        @app.post("/sessions/{session_id}/decline")
        def decline(session_id: str):
            session = service.get(session_id)
            with session.lock:
                return session.decline()

        frontend = Path(__file__).resolve().parents[2] / "frontend"
        dist = frontend / "dist"
        if dist.exists():
            from fastapi.staticfiles import StaticFiles

            @app.get("/")
            def index():
                from fastapi.responses import FileResponse

                return FileResponse(frontend / "index.html")

            app.mount("/dist", StaticFiles(directory=dist), name="dist")

        return app


def advisor_from_config(cfg) -> AdvisorService:
    """Build the service from a CLI RunConfig (synthetic experts + CSV prior)."""
    if cfg.problem_kind == "synthetic":
        from .bench import gen_family, gen_streams

        _, experts = gen_family(cfg.family)
        prior = gen_streams(cfg.stream, cfg.n_prior, id_prefix="prior")
        dim = cfg.stream.dim
    else:
        raise ConfigError(
            "serve requires parametric experts (problem_kind: synthetic); "
            "trace-backed experts cannot score live observations"
        )
    if cfg.advisor.strategy in engine.PRIOR_STRATEGIES and prior is None:
        raise ConfigError(f"strategy {cfg.advisor.strategy!r} requires a prior")
    return AdvisorService(
        experts,
        dim,
        prior=prior,
        config=cfg.engine_config(),
        session_dir=cfg.advisor.session_dir,
    )

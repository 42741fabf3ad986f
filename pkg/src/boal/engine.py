"""Budgeted online run loop.

Partitions the horizon into one segment per query, streams committee
scores through the configured stopping rule inside each segment, queries
the label at the selected step (forced at the segment end if the rule
never fires), and applies one multiplicative weight update per query.

``OnlineRun`` is the resumable step-driven core: callers feed observations
one step at a time and supply labels when asked. ``run`` drives it over a
fully labeled episode; the advisor service drives it from HTTP requests.
Both paths execute byte-identical state transitions.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from . import ensemble, stopping
from .ensemble import EnsembleState, LossSpec
from .errors import ConfigError, ValidationError
from .prior import EpisodicPrior, historical_traces
from .stopping import (
    FixedThresholdStepper,
    FixedTimeStepper,
    ScheduleStepper,
    SecretaryStepper,
    SegmentStepper,
    StopDecision,
)

SA = "sa"
PSA = "psa"
ETS = "ets"
UNIFORM = "uniform"
MAX_ORACLE = "max"
BASE = "base"

RUN_STRATEGIES = (SA, PSA, ETS, UNIFORM)
PRIOR_STRATEGIES = (PSA, ETS)


def canonical_strategy(name: str) -> str:
    key = str(name).strip().lower()
    aliases = {"uni": UNIFORM, "max_oracle": MAX_ORACLE, "maxoracle": MAX_ORACLE}
    key = aliases.get(key, key)
    if key not in RUN_STRATEGIES + (MAX_ORACLE, BASE):
        raise ConfigError(f"unknown strategy {name!r}")
    return key


@dataclass(frozen=True)
class Segment:
    index: int  # 1-based
    t0: int
    te: int

    @property
    def length(self) -> int:
        return self.te - self.t0 + 1


@dataclass(frozen=True)
class BudgetPlan:
    """Partition of [1, T] into B contiguous segments, one query each.

    The first B-1 segments have length floor(T/B); the last absorbs the
    remainder so the whole horizon stays covered.
    """

    horizon: int
    budget: int
    segments: tuple

    def segment_of(self, t: int) -> Segment:
        for seg in self.segments:
            if seg.t0 <= t <= seg.te:
                return seg
        raise ValidationError(f"step {t} outside horizon 1..{self.horizon}")


def plan_segments(horizon: int, budget: int) -> BudgetPlan:
    if not (1 <= budget <= horizon):
        raise ValidationError(
            f"budget must satisfy 1 <= B <= T; got B={budget}, T={horizon}"
        )
    size = horizon // budget
    segments = []
    for i in range(1, budget + 1):
        t0 = size * (i - 1) + 1
        te = size * i if i < budget else horizon
        segments.append(Segment(i, t0, te))
    return BudgetPlan(horizon, budget, tuple(segments))


def uniform_query_times(horizon: int, budget: int) -> list:
    """Evenly spaced interior query times ceil(i*T/(B+1)), clamped into segments."""
    plan = plan_segments(horizon, budget)
    times = []
    for seg in plan.segments:
        raw = math.ceil(seg.index * horizon / (budget + 1))
        times.append(min(max(raw, seg.t0), seg.te))
    return times


@dataclass(frozen=True)
class EngineConfig:
    eta: float = 1.0
    loss: LossSpec = field(default_factory=LossSpec)
    ets_grid_size: int = 50
    ets_grid: Optional[Sequence[float]] = None  # explicit override
    psa_opt_override: Optional[float] = None  # fixed OPT instead of the prior estimate
    score_kind: str = "variance"  # or "spread"
    prior_cap: Optional[int] = None
    record_segment_traces: bool = False
    # test seam: replaces the live score stream, never the prior statistics
    score_fn: Optional[Callable] = None


@dataclass
class QueryRecord:
    segment_index: int
    query_time: int
    label: float
    score_at_query: float
    forced: bool


@dataclass
class StepOutcome:
    t: int
    segment_index: int
    prediction: float
    score: float
    threshold: Optional[float]
    decision: Optional[StopDecision]
    rule_state: dict


@dataclass
class RunResult:
    queries: list
    per_step_predictions: np.ndarray
    final_state: EnsembleState
    plan: BudgetPlan
    segment_traces: Optional[list] = None

    @property
    def per_query_scores(self) -> np.ndarray:
        return np.array([q.score_at_query for q in self.queries], dtype=float)

    @property
    def query_times(self) -> list:
        return [q.query_time for q in self.queries]


class OnlineRun:
    """Step-driven executor of one budgeted run.

    Protocol per step t = 1..T: call ``advance(episode, t)``; if the outcome
    decision selects, obtain the label and call ``provide_label`` (or
    ``decline`` to skip — an operator extension, not part of the core loop)
    before advancing further.
    """

    def __init__(
        self,
        experts: Sequence[ensemble.Expert],
        horizon: int,
        budget: int,
        strategy: str,
        prior: Optional[EpisodicPrior] = None,
        config: EngineConfig = EngineConfig(),
        _allow_oracle: bool = False,
    ):
        strategy = canonical_strategy(strategy)
        allowed = RUN_STRATEGIES + ((MAX_ORACLE,) if _allow_oracle else ())
        if strategy not in allowed:
            raise ConfigError(
                f"strategy {strategy!r} cannot drive an online run; pick one of {allowed}"
            )
        needs_prior = strategy == ETS or (
            strategy == PSA and config.psa_opt_override is None
        )
        if needs_prior and prior is None:
            raise ConfigError(f"strategy {strategy!r} requires an episodic prior")
        if prior is not None and prior.horizon < horizon:
            raise ConfigError(
                f"prior horizon {prior.horizon} shorter than run horizon {horizon}"
            )
        self.strategy = strategy
        self.config = config
        self.plan = plan_segments(horizon, budget)
        self.state = EnsembleState.uniform(experts, eta=config.eta)
        self.prior = prior.capped(config.prior_cap) if prior is not None else None
        self._uniform_times = (
            uniform_query_times(horizon, budget) if strategy == UNIFORM else None
        )
        self._t = 0
        self._seg_pos = 0  # segments fully entered so far
        self._stepper: Optional[SegmentStepper] = None
        self._segment_queried = False
        self._pending: Optional[StepOutcome] = None
        self.queries: list = []
        self.predictions: list = []
        self.scores: list = []
        self.thresholds: list = []
        self.segment_traces: Optional[list] = [] if config.record_segment_traces else None
        self._warmed = False

    # -- state inspection ---------------------------------------------------

    @property
    def t(self) -> int:
        return self._t

    @property
    def horizon(self) -> int:
        return self.plan.horizon

    @property
    def budget(self) -> int:
        return self.plan.budget

    @property
    def awaiting_label(self) -> bool:
        return self._pending is not None

    @property
    def pending_query_time(self) -> Optional[int]:
        return self._pending.t if self._pending is not None else None

    @property
    def complete(self) -> bool:
        return self._t >= self.horizon and self._pending is None

    @property
    def current_segment(self) -> Segment:
        return self.plan.segments[max(self._seg_pos - 1, 0)]

    # -- core transitions ---------------------------------------------------

    def advance(self, episode, t: int) -> StepOutcome:
        if self._pending is not None:
            raise ValidationError(
                f"a label for step {self._pending.t} is pending; provide or decline it first"
            )
        if t != self._t + 1:
            raise ValidationError(f"out-of-order step {t}; expected {self._t + 1}")
        if t > self.horizon:
            raise ValidationError(f"step {t} beyond horizon {self.horizon}")
        self._warm_caches(episode)
        segment = self.plan.segment_of(t)
        if t == segment.t0:
            self._enter_segment(segment, episode)
        prediction = ensemble.predict(self.state, episode, t)
        s_t = self._score(episode, t)
        threshold = self._stepper.threshold_at(t)
        decision = None
        if not self._segment_queried:
            decision = self._stepper.step(t, s_t)
        outcome = StepOutcome(
            t=t,
            segment_index=segment.index,
            prediction=prediction,
            score=s_t,
            threshold=threshold,
            decision=decision,
            rule_state=self._stepper.describe(),
        )
        self._t = t
        self.predictions.append(prediction)
        self.scores.append(s_t)
        self.thresholds.append(threshold)
        if decision is not None and decision.selected:
            self._pending = outcome
        return outcome

    def provide_label(self, episode, y: float) -> EnsembleState:
        if self._pending is None:
            raise ValidationError("no query is pending a label")
        t_q = self._pending.t
        losses = ensemble.losses_from_label(
            self.state, episode, t_q, y, self.config.loss
        )
        self.state = ensemble.update(self.state, losses)
        self.queries.append(
            QueryRecord(
                segment_index=self._pending.segment_index,
                query_time=t_q,
                label=float(y),
                score_at_query=self._pending.score,
                forced=self._pending.decision.forced,
            )
        )
        self._pending = None
        self._segment_queried = True
        return self.state

    def decline(self) -> None:
        """Drop the pending recommendation and keep streaming (operator extension)."""
        if self._pending is None:
            raise ValidationError("no query is pending to decline")
        self._pending = None

    # -- internals ----------------------------------------------------------

    def _warm_caches(self, episode) -> None:
        if self._warmed:
            return
        if episode.features.shape[0] >= self.horizon:
            ensemble.prediction_matrix(self.state, episode, 1, self.horizon)
        self._warmed = True

    def _score(self, episode, t: int) -> float:
        if self.config.score_fn is not None:
            return float(self.config.score_fn(self.state, episode, t))
        if self.config.score_kind == "spread":
            return ensemble.score_spread(self.state, episode, t)
        return ensemble.score(self.state, episode, t)

    def _prior_traces(self, t0: int, te: int) -> list:
        return historical_traces(
            self.prior, t0, te, self.state, score_kind=self.config.score_kind
        )

    def _enter_segment(self, segment: Segment, episode) -> None:
        t0, te = segment.t0, segment.te
        self._seg_pos = segment.index
        self._segment_queried = False
        if self.strategy == SA:
            self._stepper = SecretaryStepper(t0, te)
        elif self.strategy == PSA:
            if self.config.psa_opt_override is not None:
                opt = float(self.config.psa_opt_override)
            else:
                traces = self._prior_traces(t0, te)
                opt = float(np.mean([tr.max() for tr in traces]))
            self._stepper = ScheduleStepper(
                t0, te, stopping.psa_schedule(opt, stopping.SegmentContext.start(t0, te))
            )
        elif self.strategy == ETS:
            traces = self._prior_traces(t0, te)
            if self.config.ets_grid is not None:
                grid = np.asarray(self.config.ets_grid, dtype=float)
            else:
                grid = stopping.quantile_grid(
                    np.concatenate(traces), self.config.ets_grid_size
                )
            choice = stopping.ets_choose(traces, grid)
            self._stepper = FixedThresholdStepper(t0, te, choice.chosen, choice)
        elif self.strategy == UNIFORM:
            self._stepper = FixedTimeStepper(
                t0, te, self._uniform_times[segment.index - 1]
            )
        elif self.strategy == MAX_ORACLE:
            # analysis-only: peeks at the whole segment before it streams
            live = self._live_trace(episode, t0, te)
            pick = t0 + stopping.max_oracle(live) - 1
            self._stepper = FixedTimeStepper(t0, te, pick, rule=MAX_ORACLE)
        else:  # pragma: no cover - guarded in __init__
            raise ConfigError(f"unhandled strategy {self.strategy!r}")
        if self.segment_traces is not None:
            self.segment_traces.append(self._live_trace(episode, t0, te))

    def _live_trace(self, episode, t0: int, te: int) -> np.ndarray:
        if self.config.score_fn is not None:
            return np.array(
                [self.config.score_fn(self.state, episode, t) for t in range(t0, te + 1)]
            )
        return ensemble.score_trace(
            self.state, episode, t0, te, kind=self.config.score_kind
        )

    def result(self) -> RunResult:
        return RunResult(
            queries=list(self.queries),
            per_step_predictions=np.array(self.predictions, dtype=float),
            final_state=self.state,
            plan=self.plan,
            segment_traces=self.segment_traces,
        )


def run(
    episode,
    experts: Sequence[ensemble.Expert],
    strategy: str,
    budget: int,
    prior: Optional[EpisodicPrior] = None,
    config: EngineConfig = EngineConfig(),
    label_fn: Optional[Callable] = None,
    _allow_oracle: bool = False,
) -> RunResult:
    """Execute one full budgeted run over a labeled episode (or label oracle).

    ``label_fn(episode, t)`` supplies queried labels; by default the
    episode's own labels are read. Exactly one query is issued per segment.
    """
    if label_fn is None:
        if episode.labels is None:
            raise ConfigError(
                f"episode {episode.id!r} has no labels and no label oracle was given"
            )
        label_fn = lambda ep, t: ep.label(t)
    session = OnlineRun(
        experts,
        episode.horizon,
        budget,
        strategy,
        prior=prior,
        config=config,
        _allow_oracle=_allow_oracle,
    )
    for t in range(1, episode.horizon + 1):
        outcome = session.advance(episode, t)
        if outcome.decision is not None and outcome.decision.selected:
            try:
                y = label_fn(episode, t)
            except Exception as exc:
                raise RuntimeError(f"label oracle failed at t={t}: {exc}") from exc
            session.provide_label(episode, y)
    return session.result()


def run_score_comparison(
    episode,
    experts: Sequence[ensemble.Expert],
    strategies: Sequence[str],
    budget: int,
    prior: Optional[EpisodicPrior] = None,
    config: EngineConfig = EngineConfig(),
    label_fn: Optional[Callable] = None,
    include_oracle: bool = True,
) -> dict:
    """Independent replays of the same episode, one per strategy.

    Each strategy owns its weight trajectory, so selected-score averages are
    comparable in the hindsight-oracle sense segment by segment. The max
    oracle is appended unless already requested or disabled.
    """
    names = [canonical_strategy(s) for s in strategies]
    if include_oracle and MAX_ORACLE not in names:
        names.append(MAX_ORACLE)
    results = {}
    for name in names:
        results[name] = run(
            episode,
            experts,
            name,
            budget,
            prior=prior,
            config=config,
            label_fn=label_fn,
            _allow_oracle=True,
        )
    return results


def baseline_predictions(
    experts: Sequence[ensemble.Expert], episode, eta: float = 1.0
) -> np.ndarray:
    """Uniform-weight committee predictions over the whole horizon (no queries)."""
    state = EnsembleState.uniform(experts, eta=eta)
    P = ensemble.prediction_matrix(state, episode, 1, episode.horizon)
    return state.probabilities @ P

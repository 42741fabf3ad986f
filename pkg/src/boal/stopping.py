"""Single-selection stopping rules over a segment's score stream.

Each rule consumes one score per step and must commit to exactly one
selection per segment, never revisiting past steps: the classic secretary
rule (SA), a decreasing threshold schedule scaled by an estimated expected
maximum (PSA), a single threshold tuned on historical score traces (ETS),
a fixed-time baseline, and a hindsight max oracle for analysis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError

SELECT = "select"
WAIT_ACTION = "wait"


@dataclass(frozen=True)
class StopDecision:
    action: str
    forced: bool = False

    def __post_init__(self):
        if self.action not in (SELECT, WAIT_ACTION):
            raise ValidationError(f"unknown action {self.action!r}")
        if self.forced and self.action != SELECT:
            raise ValidationError("forced decisions must select")

    @property
    def selected(self) -> bool:
        return self.action == SELECT


WAIT = StopDecision(WAIT_ACTION)


@dataclass(frozen=True)
class SegmentContext:
    """Position within one segment: bounds t0..te and the current step."""

    t0: int
    te: int
    step: int

    def __post_init__(self):
        if not (1 <= self.t0 <= self.te):
            raise ValidationError(f"invalid segment bounds [{self.t0}, {self.te}]")
        if not (self.t0 <= self.step <= self.te):
            raise ValidationError(
                f"step {self.step} outside segment [{self.t0}, {self.te}]"
            )

    @property
    def length(self) -> int:
        return self.te - self.t0 + 1

    @classmethod
    def start(cls, t0: int, te: int) -> "SegmentContext":
        return cls(t0, te, t0)


# ---------------------------------------------------------------------------
# Secretary rule (SA)
# ---------------------------------------------------------------------------


class SecretaryState:
    """State for the 1/e observation rule on a single segment.

    The first floor(length/e) scores are observed without selecting; after
    the window, the first score strictly above the window maximum is taken,
    with a forced selection at the segment end.
    """

    def __init__(self, t0: int, te: int):
        self.t0 = t0
        self.te = te
        self.window = math.floor((te - t0 + 1) / math.e)
        self.s_max = -math.inf
        self._expected = t0

    @property
    def window_end(self) -> int:
        """Last step index inside the observation window (t0 - 1 if empty)."""
        return self.t0 + self.window - 1


def sa_new(ctx: SegmentContext) -> SecretaryState:
    return SecretaryState(ctx.t0, ctx.te)


def sa_step(state: SecretaryState, s_t: float, ctx: SegmentContext) -> StopDecision:
    if (ctx.t0, ctx.te) != (state.t0, state.te):
        raise ValidationError("context does not match the segment this state was built for")
    if ctx.step != state._expected:
        raise ValidationError(
            f"out-of-order step {ctx.step}; expected {state._expected}"
        )
    state._expected += 1
    if ctx.step <= state.window_end:
        state.s_max = max(state.s_max, s_t)
        return WAIT
    if ctx.step == state.te:
        return StopDecision(SELECT, forced=True)
    if s_t > state.s_max:
        return StopDecision(SELECT)
    return WAIT


# ---------------------------------------------------------------------------
# Prophet-secretary rule (PSA)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdSchedule:
    """Decreasing per-step thresholds tau_t = opt * (1 - exp((t - te)/length)).

    The final threshold is exactly 0, so a positive score always selects at
    the segment end and a zero score falls through to the forced selection.
    """

    opt: float
    taus: np.ndarray

    def tau_at(self, ctx: SegmentContext) -> float:
        index = ctx.step - ctx.te + len(self.taus) - 1
        if not (0 <= index < len(self.taus)):
            raise ValidationError(
                f"step {ctx.step} outside the scheduled segment ending at {ctx.te}"
            )
        return float(self.taus[index])


def psa_schedule(opt: float, ctx: SegmentContext) -> ThresholdSchedule:
    if not (np.isfinite(opt) and opt >= 0):
        raise ValidationError(f"opt estimate must be a nonnegative real, got {opt!r}")
    t = np.arange(ctx.t0, ctx.te + 1, dtype=float)
    taus = opt * (1.0 - np.exp((t - ctx.te) / ctx.length))
    taus.flags.writeable = False
    return ThresholdSchedule(float(opt), taus)


def psa_step(schedule: ThresholdSchedule, s_t: float, ctx: SegmentContext) -> StopDecision:
    if s_t > schedule.tau_at(ctx):
        return StopDecision(SELECT)
    if ctx.step == ctx.te:
        return StopDecision(SELECT, forced=True)
    return WAIT


# ---------------------------------------------------------------------------
# Empirical threshold selection (ETS)
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ETSChoice:
    grid: np.ndarray
    estimates: np.ndarray
    chosen: float


def simulate_threshold(trace: np.ndarray, tau: float) -> float:
    """Value a fixed-threshold rule obtains on one historical trace.

    The first score strictly greater than tau, or the final score when no
    score exceeds it (mirroring the forced end-of-segment selection).
    """
    above = trace > tau
    if above.any():
        return float(trace[int(np.argmax(above))])
    return float(trace[-1])


def ets_choose(historical_traces: Sequence[np.ndarray], grid) -> ETSChoice:
    """Pick the threshold whose simulated mean selected score is best.

    Ties break toward the smallest threshold, which triggers earlier and
    leans less on the forced end-of-segment fallback.
    """
    traces = [np.asarray(tr, dtype=float) for tr in historical_traces]
    if len(traces) == 0:
        raise ValidationError("ETS needs at least one historical trace")
    length = len(traces[0])
    if length == 0:
        raise ValidationError("historical traces must be nonempty")
    if any(len(tr) != length for tr in traces):
        raise ValidationError("historical traces must share a common length")
    grid = np.sort(np.asarray(grid, dtype=float))
    if grid.size == 0:
        raise ValidationError("threshold grid must be nonempty")

    T = np.stack(traces)                        # (K, L)
    above = T[:, :, None] > grid[None, None, :]  # (K, L, M)
    has_hit = above.any(axis=1)                  # (K, M)
    first_hit = above.argmax(axis=1)             # (K, M); 0 when no hit
    hit_vals = np.take_along_axis(T, first_hit, axis=1)
    selected = np.where(has_hit, hit_vals, T[:, -1:])
    estimates = selected.mean(axis=0)
    best = int(np.argmax(estimates))             # first max = smallest tau
    grid.flags.writeable = False
    estimates.flags.writeable = False
    return ETSChoice(grid=grid, estimates=estimates, chosen=float(grid[best]))


def ets_step(tau_star: float, s_t: float, ctx: SegmentContext) -> StopDecision:
    if s_t > tau_star:
        return StopDecision(SELECT)
    if ctx.step == ctx.te:
        return StopDecision(SELECT, forced=True)
    return WAIT


def quantile_grid(values, m: int) -> np.ndarray:
    """Candidate thresholds at m evenly spaced quantiles (levels 0..1) of values."""
    values = np.asarray(values, dtype=float).ravel()
    if values.size == 0:
        raise ValidationError("cannot build a threshold grid from no values")
    if m < 1:
        raise ValidationError(f"grid size must be >= 1, got {m}")
    return np.unique(np.quantile(values, np.linspace(0.0, 1.0, m)))


# ---------------------------------------------------------------------------
# Baselines
# ---------------------------------------------------------------------------


def uniform_step(ctx: SegmentContext, query_time: int) -> StopDecision:
    """Select exactly at the planned query time; never forced."""
    if not (ctx.t0 <= query_time <= ctx.te):
        raise ValidationError(
            f"query time {query_time} outside segment [{ctx.t0}, {ctx.te}]"
        )
    if ctx.step == query_time:
        return StopDecision(SELECT)
    return WAIT


def max_oracle(trace) -> int:
    """Hindsight argmax over a full segment trace, 1-based; earliest on ties."""
    trace = np.asarray(trace, dtype=float)
    if trace.size == 0:
        raise ValidationError("max oracle needs a nonempty trace")
    return int(np.argmax(trace)) + 1


# ---------------------------------------------------------------------------
# Sequential drivers used by the engine
# ---------------------------------------------------------------------------


class SegmentStepper:
    """Feeds an in-order score stream through a per-step rule for one segment.

    Enforces that steps arrive as t0, t0+1, ..., te; keeps stepping after a
    declined selection (the rule itself is stateless past its own memory).
    """

    def __init__(self, t0: int, te: int):
        self.t0 = t0
        self.te = te
        self._next = t0

    def step(self, t: int, s_t: float) -> StopDecision:
        if t != self._next:
            raise ValidationError(f"out-of-order step {t}; expected {self._next}")
        self._next += 1
        return self._decide(s_t, SegmentContext(self.t0, self.te, t))

    def _decide(self, s_t: float, ctx: SegmentContext) -> StopDecision:
        raise NotImplementedError

    def threshold_at(self, t: int) -> Optional[float]:
        """Active threshold at step t, when the rule has one."""
        return None

    def describe(self) -> dict:
        """Rule parameters worth surfacing to a human operator."""
        return {}


class SecretaryStepper(SegmentStepper):
    def __init__(self, t0: int, te: int):
        super().__init__(t0, te)
        self.state = SecretaryState(t0, te)

    def _decide(self, s_t, ctx):
        return sa_step(self.state, s_t, ctx)

    def describe(self):
        return {
            "rule": "sa",
            "window": self.state.window,
            "window_end": self.state.window_end,
            "window_max": None if math.isinf(self.state.s_max) else self.state.s_max,
        }


class ScheduleStepper(SegmentStepper):
    def __init__(self, t0: int, te: int, schedule: ThresholdSchedule):
        super().__init__(t0, te)
        self.schedule = schedule

    def _decide(self, s_t, ctx):
        return psa_step(self.schedule, s_t, ctx)

    def threshold_at(self, t):
        return self.schedule.tau_at(SegmentContext(self.t0, self.te, t))

    def describe(self):
        return {"rule": "psa", "opt": self.schedule.opt}


class FixedThresholdStepper(SegmentStepper):
    def __init__(self, t0: int, te: int, tau_star: float, choice: Optional[ETSChoice] = None):
        super().__init__(t0, te)
        self.tau_star = float(tau_star)
        self.choice = choice

    def _decide(self, s_t, ctx):
        return ets_step(self.tau_star, s_t, ctx)

    def threshold_at(self, t):
        return self.tau_star

    def describe(self):
        return {"rule": "ets", "tau_star": self.tau_star}


class FixedTimeStepper(SegmentStepper):
    def __init__(self, t0: int, te: int, query_time: int, rule: str = "uniform"):
        super().__init__(t0, te)
        if not (t0 <= query_time <= te):
            raise ValidationError(
                f"query time {query_time} outside segment [{t0}, {te}]"
            )
        self.query_time = int(query_time)
        self.rule = rule

    def _decide(self, s_t, ctx):
        if self.rule == "uniform":
            return uniform_step(ctx, self.query_time)
        # hindsight oracle: identical mechanics, selection time fixed upfront
        if ctx.step == self.query_time:
            return StopDecision(SELECT)
        return WAIT

    def describe(self):
        return {"rule": self.rule, "query_time": self.query_time}

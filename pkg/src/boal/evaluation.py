"""Experimental protocol: leave-one-out priors, multi-budget runs, significance.

Reproduces the benchmark methodology end to end: every evaluation episode
is run once per (strategy, budget) cell with the other episodes serving as
its unlabeled prior, per-run RMSEs and selected scores are aggregated, and
paired Wilcoxon signed-rank tests compare strategies on identical episode
sets. The whole protocol is deterministic given the problem's seeds.
"""

from __future__ import annotations

import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import engine
from .bench import BenchmarkProblem
from .engine import BASE, MAX_ORACLE, EngineConfig, canonical_strategy
from .errors import ConfigError, DegenerateInputError, ValidationError
from .prior import EpisodicPrior

DEFAULT_STRATEGIES = (BASE, "uniform", "sa", "psa", "ets")
DEFAULT_BUDGETS = (2, 3, 4, 10)

PRIOR_LEAVE_ONE_OUT = "leave_one_out"
PRIOR_FIXED = "fixed"


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------


def rmse(predictions, labels) -> float:
    """Root mean square error between two equal-length sequences."""
    predictions = np.asarray(predictions, dtype=float)
    labels = np.asarray(labels, dtype=float)
    if predictions.shape != labels.shape or predictions.ndim != 1 or len(predictions) < 1:
        raise ValidationError(
            f"predictions and labels must be equal-length vectors, got "
            f"{predictions.shape} vs {labels.shape}"
        )
    if not (np.all(np.isfinite(predictions)) and np.all(np.isfinite(labels))):
        raise ValidationError("rmse inputs must be finite")
    return float(np.sqrt(np.mean((predictions - labels) ** 2)))


@dataclass(frozen=True)
class WilcoxonResult:
    statistic: float  # W-: rank sum of negative differences (a - b)
    p_value: float
    significant: bool
    direction: int  # sign of the median difference a - b
    n: int
    method: str  # "exact" or "normal"


EXACT_LIMIT = 12


def _ranks_with_ties(values: np.ndarray) -> np.ndarray:
    """Average ranks (1-based) of |values|, ties averaged."""
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=float)
    i = 0
    sorted_vals = values[order]
    while i < len(values):
        j = i
        while j + 1 < len(values) and sorted_vals[j + 1] == sorted_vals[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0
        i = j + 1
    return ranks


def wilcoxon_signed_rank(a, b, alpha: float = 0.05) -> WilcoxonResult:
    """Two-sided paired Wilcoxon signed-rank test on differences a - b.

    Zero differences are dropped; ranks of tied absolute differences are
    averaged. For n <= 12 the p-value comes from full enumeration of the
    2^n sign assignments; beyond that, a normal approximation with tie
    and continuity corrections is used.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValidationError("paired samples must be equal-length vectors")
    diffs = a - b
    diffs = diffs[diffs != 0.0]
    n = len(diffs)
    if n == 0:
        raise DegenerateInputError("all paired differences are zero")
    if n < 5:
        raise ValidationError(
            f"need at least 5 nonzero paired differences, got {n}"
        )
    ranks = _ranks_with_ties(np.abs(diffs))
    w_minus = float(ranks[diffs < 0].sum())
    w_plus = float(ranks[diffs > 0].sum())

    if n <= EXACT_LIMIT:
        # null distribution of W- by enumeration over sign assignments
        signs = np.array(
            list(itertools.product((0.0, 1.0), repeat=n)), dtype=float
        )
        w_null = signs @ ranks
        p_low = float(np.mean(w_null <= w_minus))
        p_high = float(np.mean(w_null >= w_minus))
        p = min(1.0, 2.0 * min(p_low, p_high))
        method = "exact"
    else:
        mean_w = n * (n + 1) / 4.0
        tie_sizes = np.unique(ranks, return_counts=True)[1]
        tie_term = float(np.sum(tie_sizes**3 - tie_sizes)) / 48.0
        var_w = n * (n + 1) * (2 * n + 1) / 24.0 - tie_term
        z = (abs(w_minus - mean_w) - 0.5) / math.sqrt(var_w)
        z = max(z, 0.0)
        p = min(1.0, 2.0 * 0.5 * math.erfc(z / math.sqrt(2.0)))
        method = "normal"

    direction = int(np.sign(np.median(diffs)))
    return WilcoxonResult(
        statistic=w_minus,
        p_value=p,
        significant=bool(p < alpha),
        direction=direction,
        n=n,
        method=method,
    )


# ---------------------------------------------------------------------------
# Protocol
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ProtocolSpec:
    budgets: tuple = DEFAULT_BUDGETS
    strategies: tuple = DEFAULT_STRATEGIES
    runs_per_setting: Optional[int] = None  # cap on evaluation episodes; None = all
    prior_policy: str = PRIOR_LEAVE_ONE_OUT
    include_max_oracle: bool = True
    rmse_mode: str = "online"  # or "posthoc": replay predictions with final weights
    alpha: float = 0.05
    engine: EngineConfig = field(default_factory=EngineConfig)

    def __post_init__(self):
        if len(self.budgets) < 1 or any(b < 1 for b in self.budgets):
            raise ValidationError("budgets must be a nonempty sequence of integers >= 1")
        if len(self.strategies) < 1:
            raise ConfigError("strategy list must not be empty")
        object.__setattr__(
            self, "strategies", tuple(canonical_strategy(s) for s in self.strategies)
        )
        object.__setattr__(self, "budgets", tuple(int(b) for b in self.budgets))
        if self.prior_policy not in (PRIOR_LEAVE_ONE_OUT, PRIOR_FIXED):
            raise ConfigError(f"unknown prior policy {self.prior_policy!r}")
        if self.rmse_mode not in ("online", "posthoc"):
            raise ConfigError(f"unknown rmse mode {self.rmse_mode!r}")
        if self.runs_per_setting is not None and self.runs_per_setting < 1:
            raise ValidationError("runs_per_setting must be >= 1 when set")


@dataclass
class CellRow:
    strategy: str
    budget: int
    episode_id: str
    rmse: float
    mean_selected_score: Optional[float]  # None for the no-query baseline
    query_times: list


@dataclass
class ProtocolResult:
    spec: ProtocolSpec
    problem_name: str
    rows: list
    episode_ids: list

    def per_run(self, strategy: str, budget: int) -> list:
        strategy = canonical_strategy(strategy)
        return [r for r in self.rows if r.strategy == strategy and r.budget == budget]

    def rmse_vector(self, strategy: str, budget: int) -> np.ndarray:
        if canonical_strategy(strategy) == BASE:
            budget = 0  # the baseline never queries; one row per episode
        rows = self.per_run(strategy, budget)
        return np.array([r.rmse for r in rows], dtype=float)

    def mean_rmse(self, strategy: str, budget: int) -> float:
        return float(self.rmse_vector(strategy, budget).mean())

    def mean_selected_score(self, strategy: str, budget: int) -> Optional[float]:
        rows = self.per_run(strategy, budget)
        vals = [r.mean_selected_score for r in rows if r.mean_selected_score is not None]
        return float(np.mean(vals)) if vals else None

    def wilcoxon(self, strategy_a: str, strategy_b: str, budget: int) -> WilcoxonResult:
        """Paired test on per-episode RMSEs of two strategies at one budget."""
        a = self.rmse_vector(strategy_a, budget)
        b = self.rmse_vector(strategy_b, budget)
        return wilcoxon_signed_rank(a, b, alpha=self.spec.alpha)

    def wilcoxon_table(self) -> list:
        """All pairwise comparisons per budget, degenerate pairs skipped."""
        out = []
        querying = [s for s in self.spec.strategies if s != BASE]
        names = ([BASE] if BASE in self.spec.strategies else []) + querying
        for budget in self.spec.budgets:
            for x, y in itertools.combinations(names, 2):
                try:
                    res = self.wilcoxon(x, y, budget)
                except (DegenerateInputError, ValidationError) as exc:
                    out.append(
                        {"budget": budget, "a": x, "b": y, "error": str(exc)}
                    )
                    continue
                out.append(
                    {
                        "budget": budget,
                        "a": x,
                        "b": y,
                        "statistic": res.statistic,
                        "p_value": res.p_value,
                        "significant": res.significant,
                        "direction": res.direction,
                        "n": res.n,
                        "method": res.method,
                    }
                )
        return out


def _posthoc_predictions(result, episode) -> np.ndarray:
    from . import ensemble

    state = result.final_state
    P = ensemble.prediction_matrix(state, episode, 1, episode.horizon)
    return state.probabilities @ P


def _episode_cells(args):
    """All protocol cells for one evaluation episode (worker-safe)."""
    problem, spec, index = args
    episode = problem.eval_episodes[index]
    prior = _prior_for(problem, spec, episode.id)
    rows = []
    if BASE in spec.strategies:
        preds = engine.baseline_predictions(
            problem.experts, episode, eta=spec.engine.eta
        )
        rows.append(
            CellRow(BASE, 0, episode.id, rmse(preds, episode.labels), None, [])
        )
    strategies = [s for s in spec.strategies if s != BASE]
    if spec.include_max_oracle and MAX_ORACLE not in strategies:
        strategies.append(MAX_ORACLE)
    for budget in spec.budgets:
        for strategy in strategies:
            result = engine.run(
                episode,
                problem.experts,
                strategy,
                budget,
                prior=prior,
                config=spec.engine,
                _allow_oracle=(strategy == MAX_ORACLE),
            )
            if spec.rmse_mode == "posthoc":
                preds = _posthoc_predictions(result, episode)
            else:
                preds = result.per_step_predictions
            rows.append(
                CellRow(
                    strategy,
                    budget,
                    episode.id,
                    rmse(preds, episode.labels),
                    float(result.per_query_scores.mean()),
                    result.query_times,
                )
            )
    return index, rows


def _prior_for(problem: BenchmarkProblem, spec: ProtocolSpec, episode_id: str):
    if spec.prior_policy == PRIOR_FIXED:
        if problem.prior_episodes is None:
            raise ConfigError("fixed prior policy needs a prior episode pool")
        pool = problem.prior_episodes.without(episode_id)
    else:
        pool = EpisodicPrior(
            tuple(ep for ep in problem.eval_episodes if ep.id != episode_id)
        )
    return pool.capped(spec.engine.prior_cap)


def run_protocol(
    spec: ProtocolSpec, problem: BenchmarkProblem, jobs: int = 1
) -> ProtocolResult:
    """Execute the full protocol; deterministic regardless of job count."""
    n_eval = len(problem.eval_episodes)
    if spec.runs_per_setting is not None:
        n_eval = min(n_eval, spec.runs_per_setting)
    if n_eval < 1:
        raise ConfigError("no evaluation episodes available")
    needs_prior = any(s in engine.PRIOR_STRATEGIES for s in spec.strategies)
    if needs_prior and spec.prior_policy == PRIOR_LEAVE_ONE_OUT and n_eval < 2:
        raise ConfigError(
            "leave-one-out priors need at least 2 evaluation episodes"
        )
    indices = list(range(n_eval))
    tasks = [(problem, spec, i) for i in indices]
    if jobs > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_episode_cells, tasks))
    else:
        outcomes = [_episode_cells(t) for t in tasks]
    outcomes.sort(key=lambda pair: pair[0])  # deterministic reduction order
    rows = [row for _, cell_rows in outcomes for row in cell_rows]
    return ProtocolResult(
        spec=spec,
        problem_name=problem.name,
        rows=rows,
        episode_ids=[problem.eval_episodes[i].id for i in indices],
    )

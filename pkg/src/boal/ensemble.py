"""Hedge-weighted expert committee.

Maintains a committee of fixed predictors under multiplicative weights:
the committee prediction is the probability-weighted average of expert
outputs, weights decay exponentially in observed losses, and the
active-learning score is the probability-weighted prediction variance
(with the weight-blind max spread available as an alternative).
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import EvaluationError, ValidationError

# Additive log-weight used to zero out an expert: exp() of it underflows to a
# subnormal, so the expert carries no visible probability mass but every
# log-weight stays a finite float.
LOG_WEIGHT_FLOOR = -745.0

LOSS_KINDS = ("squared", "absolute")


class Expert(ABC):
    """A fixed predictor mapping a feature-history prefix to a real value.

    ``predict(episode, t)`` must be a pure function of ``(episode.id, t)``:
    results are memoized under that key, so episode ids must be stable for
    a given feature stream. Subclasses implement ``_predict`` and may
    override ``_compute_trace`` with a vectorized version.
    """

    def __init__(self, expert_id: str):
        self.id = str(expert_id)
        self._trace_cache: dict[str, np.ndarray] = {}
        self._point_cache: dict[tuple[str, int], float] = {}

    @abstractmethod
    def _predict(self, episode, t: int) -> float:
        ...

    def _compute_trace(self, episode, te: int) -> np.ndarray:
        out = np.empty(te)
        for t in range(1, te + 1):
            key = (episode.id, t)
            if key not in self._point_cache:
                self._point_cache[key] = self._call(episode, t)
            out[t - 1] = self._point_cache[key]
        return out

    def _call(self, episode, t: int) -> float:
        try:
            return float(self._predict(episode, t))
        except Exception as exc:
            raise EvaluationError(
                f"expert {self.id!r} failed on episode {getattr(episode, 'id', '?')!r} "
                f"at t={t}: {exc}"
            ) from exc

    def predict(self, episode, t: int) -> float:
        cached = self._trace_cache.get(episode.id)
        if cached is not None and len(cached) >= t:
            return float(cached[t - 1])
        key = (episode.id, t)
        if key not in self._point_cache:
            self._point_cache[key] = self._call(episode, t)
        return self._point_cache[key]

    def trace(self, episode, t0: int, te: int) -> np.ndarray:
        """Predictions at steps t0..te (inclusive, 1-based)."""
        cached = self._trace_cache.get(episode.id)
        if cached is None or len(cached) < te:
            try:
                cached = np.asarray(self._compute_trace(episode, te), dtype=float)
            except EvaluationError:
                raise
            except Exception as exc:
                raise EvaluationError(
                    f"expert {self.id!r} failed on episode {getattr(episode, 'id', '?')!r}: {exc}"
                ) from exc
            self._trace_cache[episode.id] = cached
        return cached[t0 - 1 : te]


@dataclass(frozen=True)
class LossSpec:
    """Per-step expert loss: squared (default) or absolute, optionally capped."""

    kind: str = "squared"
    clip: Optional[float] = None

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValidationError(f"loss kind must be one of {LOSS_KINDS}, got {self.kind!r}")
        if self.clip is not None and not self.clip > 0:
            raise ValidationError(f"loss clip must be > 0 when set, got {self.clip!r}")


class EnsembleState:
    """Immutable committee state: experts, log-domain weights, learning rate.

    Weights are stored as logs and re-centered so the maximum is always 0;
    only log-weight differences matter for the induced probabilities.
    """

    __slots__ = ("experts", "log_weights", "eta")

    def __init__(self, experts: Sequence[Expert], log_weights, eta: float = 1.0):
        experts = tuple(experts)
        if len(experts) < 2:
            raise ValidationError(f"an ensemble needs at least 2 experts, got {len(experts)}")
        lw = np.array(log_weights, dtype=float)
        if lw.shape != (len(experts),):
            raise ValidationError(
                f"log_weights shape {lw.shape} does not match {len(experts)} experts"
            )
        if not np.all(np.isfinite(lw)):
            raise ValidationError("log_weights must all be finite")
        if not (np.isfinite(eta) and eta > 0):
            raise ValidationError(f"eta must be a positive real, got {eta!r}")
        lw.flags.writeable = False
        object.__setattr__(self, "experts", experts)
        object.__setattr__(self, "log_weights", lw)
        object.__setattr__(self, "eta", float(eta))

    def __setattr__(self, name, value):
        raise AttributeError("EnsembleState is immutable; update() returns a new state")

    @classmethod
    def uniform(cls, experts: Sequence[Expert], eta: float = 1.0) -> "EnsembleState":
        return cls(experts, np.zeros(len(tuple(experts))), eta)

    @classmethod
    def concentrated(
        cls, experts: Sequence[Expert], index: int, eta: float = 1.0
    ) -> "EnsembleState":
        """All probability mass on one expert; the rest sit at the log floor."""
        experts = tuple(experts)
        lw = np.full(len(experts), LOG_WEIGHT_FLOOR)
        lw[index] = 0.0
        return cls(experts, lw, eta)

    @property
    def n_experts(self) -> int:
        return len(self.experts)

    @property
    def probabilities(self) -> np.ndarray:
        w = np.exp(self.log_weights - self.log_weights.max())
        return w / w.sum()


def expert_predictions(state: EnsembleState, episode, t: int) -> np.ndarray:
    """Vector of all expert predictions at step t."""
    return np.array([e.predict(episode, t) for e in state.experts], dtype=float)


def prediction_matrix(state: EnsembleState, episode, t0: int, te: int) -> np.ndarray:
    """Expert predictions over steps t0..te as an (N, te-t0+1) matrix."""
    _check_range(episode, t0, te)
    return np.stack([e.trace(episode, t0, te) for e in state.experts])


def predict(state: EnsembleState, episode, t: int) -> float:
    """Probability-weighted average of expert predictions at step t."""
    _check_range(episode, t, t)
    return float(state.probabilities @ expert_predictions(state, episode, t))


def losses_from_label(
    state: EnsembleState, episode, t: int, y_star: float, spec: LossSpec = LossSpec()
) -> np.ndarray:
    """Per-expert loss of predicting at step t against the revealed label."""
    if not np.isfinite(y_star):
        raise ValidationError(f"label must be finite, got {y_star!r}")
    diff = expert_predictions(state, episode, t) - float(y_star)
    losses = diff**2 if spec.kind == "squared" else np.abs(diff)
    if spec.clip is not None:
        losses = np.minimum(losses, spec.clip)
    return losses


def update(state: EnsembleState, losses) -> EnsembleState:
    """Multiplicative weight update: log w_i -= eta * loss_i, then re-center.

    Re-centering (subtracting the max) keeps log-weights finite under large
    losses and leaves the probabilities unchanged.
    """
    losses = np.asarray(losses, dtype=float)
    if losses.shape != (state.n_experts,):
        raise ValidationError(
            f"expected {state.n_experts} losses, got shape {losses.shape}"
        )
    if not np.all(np.isfinite(losses)):
        raise ValidationError("losses must all be finite")
    if np.any(losses < 0):
        raise ValidationError("losses must be nonnegative")
    lw = state.log_weights - state.eta * losses
    lw = lw - lw.max()
    return EnsembleState(state.experts, lw, state.eta)


def _weighted_variance(p: np.ndarray, preds: np.ndarray) -> float:
    y = p @ preds
    return float(p @ (preds - y) ** 2)


def score(state: EnsembleState, episode, t: int) -> float:
    """Committee disagreement at step t: probability-weighted prediction variance."""
    _check_range(episode, t, t)
    return _weighted_variance(state.probabilities, expert_predictions(state, episode, t))


def score_spread(state: EnsembleState, episode, t: int) -> float:
    """Max absolute gap between any two expert predictions; ignores weights."""
    _check_range(episode, t, t)
    preds = expert_predictions(state, episode, t)
    return float(preds.max() - preds.min())


def score_trace(
    state: EnsembleState, episode, t0: int, te: int, kind: str = "variance"
) -> np.ndarray:
    """Scores at steps t0..te under the current weights.

    ``kind`` selects the variance score (default) or the max-spread score.
    """
    P = prediction_matrix(state, episode, t0, te)
    if kind == "spread":
        return P.max(axis=0) - P.min(axis=0)
    if kind != "variance":
        raise ValidationError(f"unknown score kind {kind!r}")
    p = state.probabilities
    y = p @ P
    return p @ (P - y) ** 2


def _check_range(episode, t0: int, te: int) -> None:
    horizon = episode.horizon
    if not (1 <= t0 <= te <= horizon):
        raise ValidationError(
            f"step range [{t0}, {te}] out of bounds for horizon {horizon}"
        )

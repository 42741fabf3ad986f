"""Historical episode store and the segment statistics derived from it.

An episodic prior is a set of unlabeled feature streams aligned to the live
season's calendar. For a segment [t0, te] it supplies, under the committee's
current weights, the per-episode score traces and the mean per-episode
maximum score (the OPT estimate the prophet-secretary schedule is scaled by).
Labels are never read here.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

from . import ensemble
from .ensemble import EnsembleState
from .errors import ValidationError


class Episode:
    """One finite-horizon feature stream, optionally labeled.

    ``features`` is a (T, d) array; ``labels``, when present, is a length-T
    vector of finite reals. Ids must be stable per feature content: expert
    prediction caches key on them.
    """

    __slots__ = ("id", "features", "labels")

    def __init__(self, episode_id: str, features, labels=None):
        self.id = str(episode_id)
        feats = np.asarray(features, dtype=float)
        if feats.ndim == 1:
            feats = feats[:, None]
        if feats.ndim != 2 or feats.shape[0] < 1:
            raise ValidationError(
                f"episode {self.id!r}: features must be a nonempty (T, d) array"
            )
        if not np.all(np.isfinite(feats)):
            raise ValidationError(f"episode {self.id!r}: features must be finite")
        feats.flags.writeable = False
        self.features = feats
        if labels is None:
            self.labels = None
        else:
            lab = np.asarray(labels, dtype=float)
            if lab.shape != (feats.shape[0],):
                raise ValidationError(
                    f"episode {self.id!r}: labels length {lab.shape} does not match "
                    f"horizon {feats.shape[0]}"
                )
            if not np.all(np.isfinite(lab)):
                raise ValidationError(f"episode {self.id!r}: labels must be finite")
            lab.flags.writeable = False
            self.labels = lab

    @property
    def horizon(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def label(self, t: int) -> float:
        if self.labels is None:
            raise ValidationError(f"episode {self.id!r} carries no labels")
        if not (1 <= t <= self.horizon):
            raise ValidationError(f"step {t} out of bounds for horizon {self.horizon}")
        return float(self.labels[t - 1])

    def __repr__(self):
        tag = "labeled" if self.labels is not None else "unlabeled"
        return f"Episode({self.id!r}, T={self.horizon}, d={self.dim}, {tag})"


@dataclass(frozen=True)
class EpisodeSlice:
    """Calendar-aligned feature window x_{t0:te} of one episode."""

    episode_id: str
    t0: int
    te: int
    features: np.ndarray


@dataclass(frozen=True)
class EpisodicPrior:
    """K historical episodes sharing a horizon and feature dimension."""

    episodes: tuple = field(default_factory=tuple)

    def __post_init__(self):
        episodes = tuple(self.episodes)
        object.__setattr__(self, "episodes", episodes)
        if len(episodes) < 1:
            raise ValidationError("an episodic prior needs at least one episode")
        horizon, dim = episodes[0].horizon, episodes[0].dim
        ids = set()
        for ep in episodes:
            if ep.horizon != horizon:
                raise ValidationError(
                    f"episode {ep.id!r} horizon {ep.horizon} != shared horizon {horizon}"
                )
            if ep.dim != dim:
                raise ValidationError(
                    f"episode {ep.id!r} dimension {ep.dim} != shared dimension {dim}"
                )
            if ep.id in ids:
                raise ValidationError(f"duplicate episode id {ep.id!r}")
            ids.add(ep.id)

    @property
    def horizon(self) -> int:
        return self.episodes[0].horizon

    @property
    def dim(self) -> int:
        return self.episodes[0].dim

    def __len__(self) -> int:
        return len(self.episodes)

    def __iter__(self) -> Iterator[Episode]:
        return iter(self.episodes)

    def ids(self) -> list:
        return [ep.id for ep in self.episodes]

    def without(self, episode_id: str) -> "EpisodicPrior":
        """Leave-one-out view: every episode except the named one."""
        kept = tuple(ep for ep in self.episodes if ep.id != episode_id)
        if len(kept) == len(self.episodes):
            return self
        return EpisodicPrior(kept)

    def capped(self, cap: Optional[int]) -> "EpisodicPrior":
        if cap is None or cap >= len(self.episodes):
            return self
        if cap < 1:
            raise ValidationError(f"prior cap must be >= 1, got {cap}")
        return EpisodicPrior(self.episodes[:cap])

    def slice(self, t0: int, te: int) -> list:
        """Feature windows x^k_{t0:te}, same absolute indices for every episode."""
        self._check_range(t0, te)
        return [
            EpisodeSlice(ep.id, t0, te, ep.features[t0 - 1 : te]) for ep in self.episodes
        ]

    def _check_range(self, t0: int, te: int) -> None:
        if not (1 <= t0 <= te <= self.horizon):
            raise ValidationError(
                f"range [{t0}, {te}] out of bounds for horizon {self.horizon}"
            )


def historical_traces(
    prior: EpisodicPrior,
    t0: int,
    te: int,
    state: EnsembleState,
    score_kind: str = "variance",
) -> list:
    """Score trace of every prior episode over [t0, te] under current weights.

    Recomputed fresh on every call: the traces move whenever the weights do.
    Expert predictions themselves are memoized upstream.
    """
    prior._check_range(t0, te)
    return [ensemble.score_trace(state, ep, t0, te, kind=score_kind) for ep in prior]


def estimate_opt(
    prior: EpisodicPrior,
    t0: int,
    te: int,
    state: EnsembleState,
    score_kind: str = "variance",
) -> float:
    """Mean over prior episodes of the maximum score in [t0, te]."""
    traces = historical_traces(prior, t0, te, state, score_kind=score_kind)
    return float(np.mean([tr.max() for tr in traces]))

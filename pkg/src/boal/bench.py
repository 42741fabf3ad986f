"""Synthetic benchmark problems and episode/expert-trace CSV handling.

The synthetic design mirrors a perturbed-simulator setup: a family of
history-dependent linear models is drawn by jittering a base parameter
vector by +/- a relative half-width, one family member is designated the
ground-truth target and the rest act as experts. Streams are seasonal
AR(1) processes so that committee disagreement has predictable
within-season structure for the episodic prior to exploit.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .ensemble import Expert
from .errors import ParseError, ValidationError
from .prior import Episode, EpisodicPrior

STREAM_PROCESSES = ("ar1_seasonal", "iid_uniform")


# ---------------------------------------------------------------------------
# Stream generation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StreamSpec:
    horizon: int = 200
    dim: int = 4
    process: str = "ar1_seasonal"
    ar_coeff: float = 0.6
    seasonal_amplitude: float = 1.25
    seasonal_cycles: float = 1.15
    noise_scale: float = 0.09
    seed: int = 6499

    def __post_init__(self):
        if self.horizon < 1 or self.dim < 1:
            raise ValidationError("horizon and dim must be positive")
        if self.process not in STREAM_PROCESSES:
            raise ValidationError(
                f"process must be one of {STREAM_PROCESSES}, got {self.process!r}"
            )
        if not (-1.0 < self.ar_coeff < 1.0):
            raise ValidationError(f"AR coefficient must lie in (-1, 1), got {self.ar_coeff}")
        if self.seasonal_amplitude < 0 or self.noise_scale < 0:
            raise ValidationError("amplitude and noise scale must be nonnegative")


# Seasonal envelope shape (fractions of the horizon / relative heights).
# Two growth pulses, a minor one early and a dominant one late in the
# season, echo how committee disagreement fans out over a growing season:
# the per-step disagreement rises through each pulse and collapses between
# them, which is what gives informed stopping rules room over fixed-time
# and windowed baselines.
MINOR_PULSE_CENTER = 0.23
MINOR_PULSE_SHARPNESS = 125.0
MINOR_PULSE_HEIGHT = 0.46
MAJOR_PULSE_CENTER = 0.92
MAJOR_PULSE_SHARPNESS = 19.25


def seasonal_profile(spec: StreamSpec) -> np.ndarray:
    """Shared deterministic seasonal component, (T, d).

    A two-pulse envelope modulates a slowly rotating direction: phases are
    spread evenly across dimensions and advance by ``seasonal_cycles``
    turns per season, so different times of the season excite different
    feature directions.
    """
    T, d = spec.horizon, spec.dim
    t = np.arange(1, T + 1, dtype=float)
    minor = MINOR_PULSE_HEIGHT * np.exp(
        -MINOR_PULSE_SHARPNESS * ((t - MINOR_PULSE_CENTER * T) / T) ** 2
    )
    major = np.exp(-MAJOR_PULSE_SHARPNESS * ((t - MAJOR_PULSE_CENTER * T) / T) ** 2)
    envelope = minor + major
    phases = 2.0 * math.pi * np.arange(d) / d
    angle = 2.0 * math.pi * spec.seasonal_cycles * t[:, None] / T
    return spec.seasonal_amplitude * envelope[:, None] * np.sin(angle + phases[None, :])


def gen_streams(spec: StreamSpec, count: int, id_prefix: str = "ep") -> EpisodicPrior:
    """Draw ``count`` episodes from the stream process, deterministic per seed."""
    if count < 1:
        raise ValidationError(f"episode count must be >= 1, got {count}")
    rng = np.random.default_rng(spec.seed)
    episodes = []
    if spec.process == "iid_uniform":
        for k in range(count):
            feats = rng.uniform(0.0, 1.0, size=(spec.horizon, spec.dim))
            episodes.append(Episode(f"{id_prefix}{k:03d}", feats))
        return EpisodicPrior(tuple(episodes))

    seasonal = seasonal_profile(spec)
    for k in range(count):
        noise = rng.normal(0.0, spec.noise_scale, size=(spec.horizon, spec.dim))
        feats = np.empty((spec.horizon, spec.dim))
        feats[0] = seasonal[0] + noise[0]
        for t in range(1, spec.horizon):
            feats[t] = seasonal[t] + spec.ar_coeff * (feats[t - 1] - seasonal[t - 1]) + noise[t]
        episodes.append(Episode(f"{id_prefix}{k:03d}", feats))
    return EpisodicPrior(tuple(episodes))


# ---------------------------------------------------------------------------
# Parametric model family
# ---------------------------------------------------------------------------


class DecayedHistory:
    """Shared per-episode cache of the decayed cumulative feature matrix.

    g_t = decay * g_{t-1} + x_t, stored per episode id and grown on demand,
    so all family members reuse one recursion per episode. Works for
    complete episodes and for live episodes whose features grow in place.
    """

    def __init__(self, decay: float):
        if not (0.0 <= decay < 1.0):
            raise ValidationError(f"decay must lie in [0, 1), got {decay}")
        self.decay = decay
        self._cache: dict[str, np.ndarray] = {}

    def matrix(self, episode, upto: int) -> np.ndarray:
        """Rows g_1..g_upto for the episode."""
        n_avail = episode.features.shape[0]
        if upto > n_avail:
            raise ValidationError(
                f"episode {episode.id!r} has {n_avail} observed steps; requested {upto}"
            )
        g = self._cache.get(episode.id)
        done = 0 if g is None else g.shape[0]
        if done < upto:
            rows = np.empty((upto, episode.features.shape[1]))
            if done:
                rows[:done] = g
            prev = g[done - 1] if done else np.zeros(episode.features.shape[1])
            for t in range(done, upto):
                prev = self.decay * prev + episode.features[t]
                rows[t] = prev
            g = rows
            self._cache[episode.id] = g
        return g[:upto]


class LinearDecayModel(Expert):
    """History-dependent linear response: f(x_{1:t}) = <theta, g_t>.

    With decay 0 this is the memoryless response <theta, x_t>; larger decay
    accumulates the recent feature history, mimicking slowly-varying
    simulator state.
    """

    def __init__(self, model_id: str, theta, history: DecayedHistory):
        super().__init__(model_id)
        self.theta = np.asarray(theta, dtype=float)
        if self.theta.ndim != 1:
            raise ValidationError("theta must be a vector")
        self.history = history

    def _predict(self, episode, t: int) -> float:
        return float(self.history.matrix(episode, t)[t - 1] @ self.theta)

    def _compute_trace(self, episode, te: int) -> np.ndarray:
        # per-row dots, bit-identical to the incremental _predict path
        G = self.history.matrix(episode, te)
        return np.array([G[i] @ self.theta for i in range(te)])


@dataclass(frozen=True)
class SyntheticFamily:
    """Spec for drawing a target + expert family around a base parameter vector."""

    theta: tuple = (1.0, -0.7, 0.5, 0.9)
    perturbation: float = 0.10
    n_models: int = 15
    decay: float = 0.8
    seed: int = 2867

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        if not (0.0 < self.perturbation < 1.0):
            raise ValidationError(
                f"perturbation half-width must lie in (0, 1), got {self.perturbation}"
            )
        if self.n_models < 2:
            raise ValidationError(f"need at least 2 models, got {self.n_models}")


# Which family member becomes the ground truth, by rank of its distance
# from the family mean. A mid-high rank keeps the designated target
# meaningfully off-center (the plain committee average stays an imperfect
# baseline) without being the most extreme draw every time.
TARGET_SPREAD_QUANTILE = 0.8


def gen_family(family: SyntheticFamily):
    """Draw the model family; returns (target, experts).

    Every model's parameters are theta * (1 + u) with u ~ U(-rho, rho) per
    coordinate. The member whose parameters sit at the
    ``TARGET_SPREAD_QUANTILE`` rank of distance from the family mean is
    designated the target; the other n_models - 1 draws form the committee.
    """
    rng = np.random.default_rng(family.seed)
    base = np.asarray(family.theta, dtype=float)
    u = rng.uniform(-family.perturbation, family.perturbation, size=(family.n_models, base.size))
    thetas = base[None, :] * (1.0 + u)
    spread = np.linalg.norm(u - u.mean(axis=0), axis=1)
    order = np.argsort(spread)
    target_idx = int(order[int(round(TARGET_SPREAD_QUANTILE * (family.n_models - 1)))])
    history = DecayedHistory(family.decay)
    target = LinearDecayModel("target", thetas[target_idx], history)
    experts = [
        LinearDecayModel(f"expert-{i:02d}", thetas[i], history)
        for i in range(family.n_models)
        if i != target_idx
    ]
    return target, experts


def label_episode(episode: Episode, model: Expert) -> Episode:
    """Copy of the episode with labels filled by the model."""
    labels = model.trace(episode, 1, episode.horizon)
    return Episode(episode.id, episode.features, labels)


# ---------------------------------------------------------------------------
# Trace-backed experts
# ---------------------------------------------------------------------------


class TraceExpert(Expert):
    """Expert backed by a precomputed (episode_id, t) -> prediction table."""

    def __init__(self, expert_id: str, table: dict):
        super().__init__(expert_id)
        self.table = dict(table)

    def _predict(self, episode, t: int) -> float:
        key = (episode.id, t)
        if key not in self.table:
            raise KeyError(
                f"no trace value for episode {episode.id!r} at t={t}"
            )
        return self.table[key]


# ---------------------------------------------------------------------------
# CSV formats
# ---------------------------------------------------------------------------


def write_episodes(episodes: Sequence[Episode], path, include_labels: bool = False) -> None:
    """Episode CSV: header episode_id,t,f_1,...,f_d[,label]; rows sorted by (id, t)."""
    episodes = sorted(episodes, key=lambda ep: ep.id)
    if not episodes:
        raise ValidationError("nothing to write")
    d = episodes[0].dim
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["episode_id", "t"] + [f"f_{j}" for j in range(1, d + 1)]
        if include_labels:
            header.append("label")
        writer.writerow(header)
        for ep in episodes:
            if include_labels and ep.labels is None:
                raise ValidationError(f"episode {ep.id!r} has no labels to write")
            for t in range(1, ep.horizon + 1):
                row = [ep.id, str(t)] + [repr(float(v)) for v in ep.features[t - 1]]
                if include_labels:
                    row.append(repr(float(ep.labels[t - 1])))
                writer.writerow(row)


def load_episodes(path) -> EpisodicPrior:
    """Parse and validate an episode CSV (see ``write_episodes`` for the format)."""
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header[:2] != ["episode_id", "t"]:
            raise ParseError(f"{path}: header must start with episode_id,t")
        has_label = header[-1] == "label"
        feat_cols = header[2 : -1 if has_label else len(header)]
        d = len(feat_cols)
        if d < 1:
            raise ParseError(f"{path}: no feature columns found")

        episodes = []
        seen = set()
        cur_id, cur_feats, cur_labels, cur_t = None, [], [], 0

        def flush():
            if cur_id is None:
                return
            episodes.append(
                Episode(cur_id, np.array(cur_feats), np.array(cur_labels) if has_label else None)
            )

        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(
                    f"{path}:{lineno}: expected {len(header)} cells, got {len(row)} "
                    "(ragged feature dimension)"
                )
            ep_id, t_str = row[0], row[1]
            try:
                t = int(t_str)
            except ValueError:
                raise ParseError(f"{path}:{lineno}: t {t_str!r} is not an integer") from None
            if ep_id != cur_id:
                flush()
                if ep_id in seen:
                    raise ParseError(
                        f"{path}:{lineno}: episode id {ep_id!r} appears in two separate blocks"
                    )
                seen.add(ep_id)
                cur_id, cur_feats, cur_labels, cur_t = ep_id, [], [], 0
            if t != cur_t + 1:
                raise ParseError(
                    f"{path}:{lineno}: episode {ep_id!r} has non-contiguous t "
                    f"(got {t}, expected {cur_t + 1})"
                )
            cur_t = t
            try:
                feats = [float(v) for v in row[2 : 2 + d]]
            except ValueError:
                raise ParseError(f"{path}:{lineno}: non-numeric feature cell") from None
            cur_feats.append(feats)
            if has_label:
                try:
                    cur_labels.append(float(row[-1]))
                except ValueError:
                    raise ParseError(f"{path}:{lineno}: non-numeric label cell") from None
        flush()
    if not episodes:
        raise ParseError(f"{path}: no episode rows")
    try:
        return EpisodicPrior(tuple(episodes))
    except ValidationError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def write_expert_trace(model: Expert, episodes: Sequence[Episode], path) -> None:
    """Expert trace CSV: episode_id,t,prediction for every (episode, t)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["episode_id", "t", "prediction"])
        for ep in sorted(episodes, key=lambda e: e.id):
            values = model.trace(ep, 1, ep.horizon)
            for t in range(1, ep.horizon + 1):
                writer.writerow([ep.id, str(t), repr(float(values[t - 1]))])


def load_expert_trace(path, expert_id: Optional[str] = None) -> TraceExpert:
    path = Path(path)
    table = {}
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError(f"{path}: empty file") from None
        if header != ["episode_id", "t", "prediction"]:
            raise ParseError(f"{path}: header must be episode_id,t,prediction")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise ParseError(f"{path}:{lineno}: expected 3 cells, got {len(row)}")
            try:
                t = int(row[1])
                value = float(row[2])
            except ValueError:
                raise ParseError(f"{path}:{lineno}: malformed t or prediction") from None
            key = (row[0], t)
            if key in table:
                raise ParseError(f"{path}:{lineno}: duplicate entry for {key}")
            table[key] = value
    if not table:
        raise ParseError(f"{path}: no trace rows")
    return TraceExpert(expert_id or path.stem, table)


def load_expert_traces(paths) -> list:
    """Load one trace-backed expert per CSV path (or per file in a directory)."""
    paths = Path(paths)
    if paths.is_dir():
        files = sorted(paths.glob("*.csv"))
        if not files:
            raise ParseError(f"{paths}: no trace CSVs found")
    else:
        files = [paths]
    return [load_expert_trace(p) for p in files]


# ---------------------------------------------------------------------------
# Benchmark assembly
# ---------------------------------------------------------------------------


@dataclass
class BenchmarkProblem:
    """Everything a protocol run needs: experts, labeled eval episodes, priors."""

    name: str
    experts: list
    eval_episodes: list
    prior_episodes: Optional[EpisodicPrior] = None
    target: Optional[Expert] = None

    def __post_init__(self):
        if len(self.eval_episodes) < 1:
            raise ValidationError("a benchmark needs at least one evaluation episode")
        for ep in self.eval_episodes:
            if ep.labels is None:
                raise ValidationError(f"evaluation episode {ep.id!r} must be labeled")

    @property
    def horizon(self) -> int:
        return self.eval_episodes[0].horizon


def build_synthetic(
    stream: StreamSpec,
    family: SyntheticFamily,
    n_prior: int = 36,
    n_eval: int = 37,
    name: str = "synthetic",
) -> BenchmarkProblem:
    """Generate the default synthetic benchmark: prior + labeled eval episodes."""
    pool = gen_streams(stream, n_prior + n_eval)
    target, experts = gen_family(family)
    prior_eps = pool.episodes[:n_prior] if n_prior else None
    eval_eps = [label_episode(ep, target) for ep in pool.episodes[n_prior:]]
    return BenchmarkProblem(
        name=name,
        experts=experts,
        eval_episodes=eval_eps,
        prior_episodes=EpisodicPrior(prior_eps) if prior_eps else None,
        target=target,
    )

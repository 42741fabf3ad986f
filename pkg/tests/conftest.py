import numpy as np
import pytest

from boal.ensemble import Expert
from boal.prior import Episode, EpisodicPrior


class StubExpert(Expert):
    """Expert with a fixed per-step prediction vector, shared across episodes."""

    def __init__(self, expert_id, values):
        super().__init__(expert_id)
        self.values = np.asarray(values, dtype=float)

    def _predict(self, episode, t):
        return self.values[t - 1]


class ConstantExpert(Expert):
    def __init__(self, expert_id, value):
        super().__init__(expert_id)
        self.value = float(value)

    def _predict(self, episode, t):
        return self.value


def stub_episode(episode_id="ep", horizon=8, dim=1):
    feats = np.zeros((horizon, dim))
    return Episode(episode_id, feats)


@pytest.fixture
def episode():
    return stub_episode()


def gap_experts(gaps, base=0.0):
    """Two experts whose predictions differ by the given per-step gaps.

    Under uniform weights the variance score at step t is (gap_t / 2)^2.
    """
    gaps = np.asarray(gaps, dtype=float)
    low = StubExpert("low", np.full(len(gaps), base))
    high = StubExpert("high", base + gaps)
    return [low, high]


def prior_from_features(feature_blocks):
    eps = [Episode(f"hist-{i}", feats) for i, feats in enumerate(feature_blocks)]
    return EpisodicPrior(tuple(eps))

import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from svkit.audio import SAMPLE_RATE, Waveform
from svkit.network import TrunkConfig, init_weights


def make_wave(seed: int, seconds: float, amplitude: float = 0.3) -> Waveform:
    """Band-limited noisy tone; deterministic per seed."""
    rng = np.random.default_rng(seed)
    n = int(round(seconds * SAMPLE_RATE))
    t = np.arange(n) / SAMPLE_RATE
    freq = rng.uniform(200.0, 3500.0)
    x = amplitude * np.sin(2 * np.pi * freq * t)
    x += 0.1 * amplitude * rng.standard_normal(n)
    return Waveform(np.clip(x, -0.99, 0.99))


@pytest.fixture(scope="session")
def q_config():
    return TrunkConfig.q_sap()


@pytest.fixture(scope="session")
def q_weights(q_config):
    return init_weights(q_config, seed=0)


@pytest.fixture(scope="session")
def h_config():
    return TrunkConfig.h_asp()


@pytest.fixture(scope="session")
def h_weights(h_config):
    return init_weights(h_config, seed=0)

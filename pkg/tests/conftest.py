# conftest.py - Put the hyperstore package on sys.path and share small configs

import os
import sys

import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "hyperstore"))

from experiment_config import load_config  # noqa: E402

# Lossless channels, ideal detectors and a weak source: runs of a few
# hundredths of a second give thousands of coincidences per branch.
BRIGHT = {
    "source": {"pair_probability": 0.001, "signal_transmission": 1.0, "idler_transmission": 1.0},
    "memory": {"efficiency_override": 0.5, "transmission_override": 0.5},
    "detectors": {
        label: {"efficiency": 1.0, "dark_count_rate_hz": 0.0}
        for label in ("D1s", "D2s", "D1i", "D2i")
    },
    "run": {"target_coincidences_per_setting": 2000, "batch_pairs": 50000},
}


def pytest_configure(config):
    config.addinivalue_line("markers", "slow: long Monte Carlo runs on the default configuration")


def merged(*trees) -> dict:
    """Deep-merge override trees, later ones winning."""
    out = {}
    for tree in trees:
        for key, value in tree.items():
            if isinstance(value, dict) and isinstance(out.get(key), dict):
                out[key] = merged(out[key], value)
            else:
                out[key] = value
    return out


@pytest.fixture
def default_config():
    return load_config()


@pytest.fixture
def bright_config():
    return load_config(overrides=BRIGHT)


@pytest.fixture
def make_config():
    """Build a bright config with extra overrides."""
    def build(overrides=None, bright=True):
        base = BRIGHT if bright else {}
        return load_config(overrides=merged(base, overrides or {}))
    return build

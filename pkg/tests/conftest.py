import numpy as np
import pytest

from speakerprint.simbench import generate_fleet, run_experiment
from speakerprint.stimulus import StimulusSpec

EXPERIMENT_SEED = 7


def dft_amplitude(x, f, fs):
    """Brute-force single-bin DFT amplitude; test-side oracle."""
    n = np.arange(len(x))
    return abs(np.sum(x * np.exp(-2j * np.pi * f * n / fs))) * 2 / len(x)


@pytest.fixture(scope="session")
def spec():
    return StimulusSpec()


@pytest.fixture(scope="session")
def fleet50():
    return generate_fleet(50, seed=EXPERIMENT_SEED)


@pytest.fixture(scope="session")
def desk_experiment(fleet50):
    return run_experiment(fleet50, 60, alpha=0.7, seed=EXPERIMENT_SEED)

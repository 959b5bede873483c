import numpy as np
import pytest

from make_fixture_corpus import write_fixture_corpus
from sepeval.modules.audio import AudioSignal


@pytest.fixture
def rng():
    return np.random.default_rng(20180915)


@pytest.fixture
def make_signal(rng):
    """Factory for Gaussian noise signals."""

    def make(num_samples: int, channels: int = 2, sample_rate: int = 8000, scale: float = 0.1):
        return AudioSignal(scale * rng.standard_normal((num_samples, channels)), sample_rate)

    return make


@pytest.fixture(scope="session")
def fixture_corpus(tmp_path_factory):
    """Two 2.5 s stereo tracks at 8 kHz, one per split. Do not modify."""
    root = tmp_path_factory.mktemp("corpus")
    write_fixture_corpus(root)
    return root


@pytest.fixture
def scratch_corpus(tmp_path):
    """A fresh fixture corpus that tests may modify."""
    root = tmp_path / "corpus"
    write_fixture_corpus(root, seed=7)
    return root

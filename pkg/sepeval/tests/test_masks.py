import numpy as np
import pytest

from sepeval._exceptions import InvalidAlpha, MaskShapeMismatch
from sepeval.modules.masks import ScalarMask, SourceImages, apply_mask, ibm_mask, irm_mask
from sepeval.modules.stft import Spectrogram, StftConfig

CONFIG = StftConfig(8, 4)


def spectrogram(bins: np.ndarray) -> Spectrogram:
    return Spectrogram(bins, CONFIG, 64, 8000)


def random_sources(rng, num_sources=3, frames=6, channels=2) -> SourceImages:
    shape = (CONFIG.num_bins, frames, channels)
    return SourceImages(
        [
            spectrogram(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
            for _ in range(num_sources)
        ]
    )


@pytest.mark.parametrize("alpha", [1.0, 1.5, 2.0, 3.0])
def test_irm_partition_of_unity(rng, alpha):
    mask = irm_mask(random_sources(rng), alpha)
    assert mask.values.shape == (3, 5, 6, 2)
    assert np.all((mask.values >= 0) & (mask.values <= 1))
    np.testing.assert_allclose(mask.values.sum(axis=0), 1.0, atol=1e-12)


def test_irm_silent_bins(rng):
    sources = random_sources(rng, num_sources=4)
    for image in sources.images:
        image.bins[2, 3] = 0
    mask = irm_mask(sources)
    np.testing.assert_array_equal(mask.values[:, 2, 3], 0.25)


def test_irm_two_sources():
    a = spectrogram(np.full((5, 1, 1), 3.0 + 0j))
    b = spectrogram(np.full((5, 1, 1), 4.0j))
    sources = SourceImages([a, b])
    np.testing.assert_allclose(irm_mask(sources, 1).values[:, 0, 0, 0], [3 / 7, 4 / 7])
    np.testing.assert_allclose(irm_mask(sources, 2).values[:, 0, 0, 0], [9 / 25, 16 / 25])


def test_ibm_is_binary(rng):
    for order in (1, 2):
        mask = ibm_mask(random_sources(rng), order)
        assert set(np.unique(mask.values)) <= {0.0, 1.0}


def test_ibm_threshold():
    # |y|^p of 3, 4 and 0 against half the total
    a = spectrogram(np.full((5, 1, 1), 3.0 + 0j))
    b = spectrogram(np.full((5, 1, 1), 4.0 + 0j))
    c = spectrogram(np.zeros((5, 1, 1), dtype=complex))
    sources = SourceImages([a, b, c])
    np.testing.assert_array_equal(ibm_mask(sources, 1).values[:, 0, 0, 0], [0, 1, 0])
    np.testing.assert_array_equal(ibm_mask(sources, 2).values[:, 0, 0, 0], [0, 1, 0])

    # ties at exactly half keep both sources
    tie = SourceImages([a, spectrogram(np.full((5, 1, 1), 3.0j))])
    np.testing.assert_array_equal(ibm_mask(tie).values[:, 0, 0, 0], [1, 1])

    silent = SourceImages([c, c])
    assert not np.any(ibm_mask(silent).values)


def test_scale_invariance(rng):
    sources = random_sources(rng)
    scaled = SourceImages([image.with_bins(7.5 * image.bins) for image in sources.images])
    for compute in (irm_mask, ibm_mask):
        np.testing.assert_allclose(compute(scaled).values, compute(sources).values, atol=1e-12)


@pytest.mark.parametrize("alpha", [0, -1.0, float("nan")])
def test_invalid_alpha(rng, alpha):
    with pytest.raises(InvalidAlpha):
        irm_mask(random_sources(rng), alpha)


def test_source_shape_mismatch(rng):
    images = random_sources(rng).images
    images.append(spectrogram(np.zeros((5, 7, 2), dtype=complex)))
    with pytest.raises(MaskShapeMismatch):
        SourceImages(images)
    with pytest.raises(ValueError, match="labels"):
        SourceImages(images[:2], labels=["vocals"])


def test_apply_scalar_mask(rng):
    sources = random_sources(rng, num_sources=2)
    mixture = spectrogram(sources.stacked().sum(axis=0))
    mask = irm_mask(sources)

    estimates = [apply_mask(mask, mixture, j).bins for j in range(2)]
    np.testing.assert_allclose(estimates[0] + estimates[1], mixture.bins, atol=1e-12)
    np.testing.assert_allclose(estimates[0], mask.values[0] * mixture.bins)

    wrong = ScalarMask(np.ones((2, 5, 4, 2)), ["a", "b"])
    with pytest.raises(MaskShapeMismatch):
        apply_mask(wrong, mixture, 0)


@pytest.mark.parametrize("num_sources", [2, 3, 5])
def test_ibm_keeps_one_source_per_bin(rng, num_sources):
    sources = random_sources(rng, num_sources=num_sources, frames=50)
    for order in (1, 2):
        kept = ibm_mask(sources, order).values.sum(axis=0)
        assert kept.max() <= 1
        if num_sources == 2:
            # one of two sources always holds at least half
            np.testing.assert_array_equal(kept, 1)

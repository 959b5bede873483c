"""Scalar TF masks (IBM, IRM) and mask application."""

import logging
from typing import Sequence

import numpy as np

from sepeval._exceptions import InvalidAlpha, MaskShapeMismatch
from sepeval.modules.stft import Spectrogram

logger = logging.getLogger(__name__)


class SourceImages:
    """True source image spectrograms y_j, all of shape (F, T, I)."""

    def __init__(
        self, images: Sequence[Spectrogram], labels: Sequence[str] | None = None
    ) -> None:
        self.images = list(images)
        self.labels = (
            list(labels) if labels is not None else [str(j) for j in range(len(self.images))]
        )
        self.verify()

    def __repr__(self) -> str:
        return f"SourceImages({self.labels}, {self.shape})"

    def __len__(self) -> int:
        return len(self.images)

    @property
    def shape(self) -> tuple[int, int, int]:
        """(frequency bins, frames, channels) shared by all sources."""
        return self.images[0].shape

    def verify(self) -> None:
        """Check source count, labels and shapes."""
        if not self.images:
            raise ValueError("At least one source image is required.")
        if len(self.labels) != len(self.images):
            raise ValueError(f"{len(self.labels)} labels for {len(self.images)} sources.")
        for image in self.images[1:]:
            if image.shape != self.shape:
                raise MaskShapeMismatch(self.shape, image.shape)

    def stacked(self) -> np.ndarray:
        """Return y as an array of shape (J, F, T, I)."""
        return np.stack([image.bins for image in self.images])

    def frames(self, frame_slice: slice) -> "SourceImages":
        """Restrict every image to a range of frames."""
        return SourceImages(
            [image.with_bins(image.bins[:, frame_slice]) for image in self.images], self.labels
        )


class ScalarMask:
    """Real mask values of shape (J, F, T, I), one gain per channel and bin."""

    def __init__(self, values: np.ndarray, labels: Sequence[str]) -> None:
        self.values = values
        self.labels = list(labels)

    def __repr__(self) -> str:
        return f"ScalarMask({self.labels}, {self.values.shape})"


class MatrixMask:
    """Complex mask values of shape (J, F, T, I, I), one I x I matrix per bin."""

    def __init__(self, values: np.ndarray, labels: Sequence[str]) -> None:
        self.values = values
        self.labels = list(labels)

    def __repr__(self) -> str:
        return f"MatrixMask({self.labels}, {self.values.shape})"


def ibm_mask(sources: SourceImages, order: float = 1) -> ScalarMask:
    """
    Ideal binary mask.

    M_ij = 1 iff |y_ij|^order is at least half of the sum over sources.
    The threshold is inclusive, so exact ties keep every tying source.
    Bins where all sources are zero get 0 everywhere.
    """
    if order <= 0:
        raise InvalidAlpha(order)
    power = np.abs(sources.stacked()) ** order
    total = power.sum(axis=0)
    values = (power >= 0.5 * total) & (total > 0)
    return ScalarMask(values.astype(np.float64), sources.labels)


def irm_mask(sources: SourceImages, alpha: float = 2.0) -> ScalarMask:
    """
    Ideal ratio mask (alpha-Wiener filter).

    M_ij = |y_ij|^alpha / sum_j' |y_ij'|^alpha, and 1/J where every source is zero.
    """
    if not alpha > 0:
        raise InvalidAlpha(alpha)
    power = np.abs(sources.stacked()) ** alpha
    total = power.sum(axis=0)
    values = np.full_like(power, 1.0 / len(sources))
    np.divide(power, total, out=values, where=total > 0)
    return ScalarMask(values, sources.labels)


def apply_mask(mask: ScalarMask | MatrixMask, mixture: Spectrogram, j: int) -> Spectrogram:
    """
    Estimate source j from the mixture.

    Scalar masks gain each channel; matrix masks left-multiply x(f, t).
    """
    if isinstance(mask, MatrixMask):
        expected = mixture.shape + (mixture.num_channels,)
        if mask.values.shape[1:] != expected:
            raise MaskShapeMismatch(expected, mask.values.shape[1:])
        bins = np.einsum("ftab,ftb->fta", mask.values[j], mixture.bins)
    else:
        if mask.values.shape[1:] != mixture.shape:
            raise MaskShapeMismatch(mixture.shape, mask.values.shape[1:])
        bins = mask.values[j] * mixture.bins
    return mixture.with_bins(bins)

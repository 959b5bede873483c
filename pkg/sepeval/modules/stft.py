"""
STFT/iSTFT pair used for masking and reconstruction.

Spectrograms are one-sided, unscaled DFTs of windowed frames stored as
(bins, frames, channels), so bin powers are in signal units. Signals are
zero-padded by window - hop samples on both ends and up to a whole number of
hops, which gives every signal sample the same set of overlapping windows.
Synthesis is a weighted overlap-add normalised by the summed squared window.
"""

import logging

import numpy as np
import scipy.fft
import scipy.signal
from numpy.lib.stride_tricks import sliding_window_view

from sepeval._constants import stft_hop_size, stft_window, stft_window_size
from sepeval._exceptions import EmptySignal, InvalidStftConfig
from sepeval.modules.audio import AudioSignal

logger = logging.getLogger(__name__)


class StftConfig:
    """Window length, hop and taper of the transform."""

    def __init__(
        self,
        window_size: int = stft_window_size,
        hop_size: int = stft_hop_size,
        window: str = stft_window,
        no_verify: bool = False,
    ) -> None:
        self.window_size = int(window_size)
        self.hop_size = int(hop_size)
        self.window = window

        if not no_verify:
            self.verify()

    def __repr__(self) -> str:
        return f"StftConfig({self.window_size}, {self.hop_size}, {self.window!r})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, StftConfig):
            return NotImplemented
        return (self.window_size, self.hop_size, self.window) == (
            other.window_size,
            other.hop_size,
            other.window,
        )

    def __hash__(self) -> int:
        return hash((self.window_size, self.hop_size, self.window))

    @property
    def num_bins(self) -> int:
        """Number of one-sided frequency bins."""
        return self.window_size // 2 + 1

    @property
    def overlap(self) -> int:
        """Samples shared by consecutive frames."""
        return self.window_size - self.hop_size

    def verify(self) -> None:
        """Check window and hop sizes."""
        if self.window_size < 2 or self.window_size % 2:
            raise InvalidStftConfig(f"window size {self.window_size} must be even and >= 2")
        if self.hop_size <= 0:
            raise InvalidStftConfig(f"hop size {self.hop_size} must be positive")
        if self.hop_size > self.window_size:
            raise InvalidStftConfig(
                f"hop size {self.hop_size} exceeds window size {self.window_size}"
            )

    def taper(self) -> np.ndarray:
        """Return the periodic analysis window."""
        return scipy.signal.get_window(self.window, self.window_size)

    def is_cola(self) -> bool:
        """Check the constant-overlap-add constraint at this hop."""
        return bool(scipy.signal.check_COLA(self.taper(), self.window_size, self.overlap))


class Spectrogram:
    """Complex STFT tensor x(f, t) of shape (F, T, I)."""

    def __init__(
        self,
        bins: np.ndarray,
        config: StftConfig,
        original_length: int,
        sample_rate: int,
        no_verify: bool = False,
    ) -> None:
        self.bins = np.asarray(bins, dtype=np.complex128)
        self.config = config
        self.original_length = int(original_length)
        self.sample_rate = int(sample_rate)

        if not no_verify:
            self.verify()

    def __repr__(self) -> str:
        return f"Spectrogram({self.bins.shape}, {self.config}, {self.original_length})"

    @property
    def shape(self) -> tuple[int, int, int]:
        """(frequency bins, frames, channels)."""
        return self.bins.shape

    @property
    def num_channels(self) -> int:
        """Number of channels."""
        return self.bins.shape[2]

    def verify(self) -> None:
        """Check the bin count and finiteness."""
        if self.bins.ndim != 3:
            raise ValueError(f"Spectrogram bins must be (F, T, I), got {self.bins.shape}.")
        if self.bins.shape[0] != self.config.num_bins:
            raise ValueError(
                f"{self.bins.shape[0]} frequency bins do not match {self.config}."
            )
        if not np.all(np.isfinite(self.bins)):
            raise ValueError("Spectrogram entries must be finite.")

    def with_bins(self, bins: np.ndarray) -> "Spectrogram":
        """Return a spectrogram sharing this one's layout but holding other values."""
        return Spectrogram(
            bins, self.config, self.original_length, self.sample_rate, no_verify=True
        )


def stft(signal: AudioSignal, config: StftConfig | None = None) -> Spectrogram:
    """Transform every channel of a signal."""
    config = config if config is not None else StftConfig()
    config.verify()
    if signal.num_samples == 0:
        raise EmptySignal

    window_size, hop = config.window_size, config.hop_size
    pad = config.overlap
    # frames continue until the last sample has its full set of windows
    num_frames = (signal.num_samples - 1 + pad) // hop + 1
    total = (num_frames - 1) * hop + window_size
    padded = np.pad(signal.samples, ((pad, total - pad - signal.num_samples), (0, 0)))

    # (T, I, window_size)
    frames = sliding_window_view(padded, window_size, axis=0)[::hop]
    bins = scipy.fft.rfft(frames * config.taper(), axis=-1)
    # (T, I, F) -> (F, T, I)
    bins = np.transpose(bins, (2, 0, 1))
    return Spectrogram(bins, config, signal.num_samples, signal.sample_rate, no_verify=True)


def istft(spec: Spectrogram, original_length: int | None = None) -> AudioSignal:
    """Invert a spectrogram, trimmed (or zero-extended) to the original length."""
    config = spec.config
    if not config.is_cola():
        raise InvalidStftConfig(f"{config} does not satisfy constant overlap-add")
    length = spec.original_length if original_length is None else int(original_length)

    window = config.taper()
    window_size, hop = config.window_size, config.hop_size
    # (F, T, I) -> (T, I, window_size)
    frames = scipy.fft.irfft(np.transpose(spec.bins, (1, 2, 0)), n=window_size, axis=-1)
    frames *= window

    num_frames = frames.shape[0]
    total = (num_frames - 1) * hop + window_size
    samples = np.zeros((total, spec.num_channels))
    norm = np.zeros(total)
    for index in range(num_frames):
        start = index * hop
        samples[start : start + window_size] += frames[index].T
        norm[start : start + window_size] += window**2
    samples /= np.where(norm > 1e-10, norm, 1.0)[:, np.newaxis]

    samples = samples[config.overlap :]
    if samples.shape[0] < length:
        samples = np.pad(samples, ((0, length - samples.shape[0]), (0, 0)))
    return AudioSignal(samples[:length], spec.sample_rate, no_verify=True)

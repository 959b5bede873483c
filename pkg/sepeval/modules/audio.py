"""
Multichannel audio signals and WAV file I/O.

Supported WAV payloads (little-endian RIFF/WAVE):

    format tag 1 (PCM):          16 or 24 bits per sample
    format tag 3 (IEEE float):   32 bits per sample
    format tag 0xFFFE:           extensible header wrapping either of the above

Integer samples are scaled by 1 / 2^(bits - 1), so int16 32767 reads back as
32767 / 32768. Writing multiplies by 2^(bits - 1), rounds and clips to the
integer range. Float payloads are stored and read back unchanged.
"""

import logging
import struct
import warnings
from pathlib import Path

import numpy as np
from scipy.io import wavfile

from sepeval._exceptions import (
    MissingAudioFile,
    NonFiniteSamples,
    TruncatedPayload,
    UnsupportedCodec,
    UnwritablePath,
)

logger = logging.getLogger(__name__)

WAVE_FORMAT_PCM = 0x0001
WAVE_FORMAT_IEEE_FLOAT = 0x0003
WAVE_FORMAT_EXTENSIBLE = 0xFFFE


class AudioSignal:
    """
    Time-domain samples of shape (num_samples, num_channels) with a sample rate.

    One-dimensional input is treated as a mono signal.
    """

    def __init__(self, samples: np.ndarray, sample_rate: int, no_verify: bool = False) -> None:
        samples = np.asarray(samples, dtype=np.float64)
        if samples.ndim == 1:
            samples = samples[:, np.newaxis]
        self.samples = samples
        self.sample_rate = int(sample_rate)

        # set no_verify when the samples come out of an operation
        # on already verified signals
        if not no_verify:
            self.verify()

    def __repr__(self) -> str:
        return (
            f"AudioSignal({self.num_samples} samples, {self.num_channels} channels, "
            f"{self.sample_rate} Hz)"
        )

    def __add__(self, other: object) -> "AudioSignal":
        if not isinstance(other, AudioSignal):
            return NotImplemented
        if other.samples.shape != self.samples.shape or other.sample_rate != self.sample_rate:
            raise ValueError(f"Cannot add {other!r} to {self!r}.")
        return AudioSignal(self.samples + other.samples, self.sample_rate, no_verify=True)

    def __sub__(self, other: object) -> "AudioSignal":
        if not isinstance(other, AudioSignal):
            return NotImplemented
        return self + (-1.0) * other

    def __mul__(self, gain: float) -> "AudioSignal":
        return AudioSignal(gain * self.samples, self.sample_rate)

    __rmul__ = __mul__

    @property
    def num_samples(self) -> int:
        """Number of samples per channel."""
        return self.samples.shape[0]

    @property
    def num_channels(self) -> int:
        """Number of channels."""
        return self.samples.shape[1]

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return self.num_samples / self.sample_rate

    def verify(self) -> None:
        """Check the signal invariants."""
        if self.samples.ndim != 2 or self.samples.shape[1] < 1:
            raise ValueError(f"Samples must be (samples, channels), not {self.samples.shape}.")
        if self.sample_rate <= 0:
            raise ValueError(f"{self.sample_rate} is not a valid sample rate.")
        if not np.all(np.isfinite(self.samples)):
            raise NonFiniteSamples


class WavInfo:
    """Header fields of a WAV file."""

    def __init__(
        self,
        format_tag: int,
        num_channels: int,
        sample_rate: int,
        bits: int,
        num_samples: int,
    ) -> None:
        self.format_tag = format_tag
        self.num_channels = num_channels
        self.sample_rate = sample_rate
        self.bits = bits
        self.num_samples = num_samples

    def __repr__(self) -> str:
        return (
            f"WavInfo(tag={self.format_tag:#06x}, {self.num_channels} channels, "
            f"{self.sample_rate} Hz, {self.bits} bits, {self.num_samples} samples)"
        )

    @property
    def duration(self) -> float:
        """Length in seconds."""
        return self.num_samples / self.sample_rate


def wav_info(path: Path) -> WavInfo:
    """
    Walk the RIFF chunks of a WAV file without reading its payload.

    Raises on anything load_wav cannot read faithfully, so that every
    failure maps to one specific error.
    """
    path = Path(path)
    if not path.is_file():
        raise MissingAudioFile(path)
    file_size = path.stat().st_size

    fmt = None
    with open(path, "rb") as fin:
        header = fin.read(12)
        if len(header) < 12 or header[:4] != b"RIFF" or header[8:12] != b"WAVE":
            raise UnsupportedCodec(path, "not a RIFF/WAVE file")

        while True:
            chunk = fin.read(8)
            if len(chunk) < 8:
                missing = "fmt" if fmt is None else "data"
                raise UnsupportedCodec(path, f"missing {missing} chunk")
            chunk_id, chunk_size = struct.unpack("<4sI", chunk)

            if chunk_id == b"fmt ":
                body = fin.read(chunk_size)
                if chunk_size < 16 or len(body) < 16:
                    raise UnsupportedCodec(path, "fmt chunk is too short")
                tag, channels, rate, _, block_align, bits = struct.unpack_from("<HHIIHH", body)
                if tag == WAVE_FORMAT_EXTENSIBLE:
                    if len(body) < 26:
                        raise UnsupportedCodec(path, "extensible fmt chunk is too short")
                    # the sub-format GUID starts with the plain format tag
                    (tag,) = struct.unpack_from("<H", body, 24)
                fmt = (tag, channels, rate, block_align, bits)
            elif chunk_id == b"data":
                if fmt is None:
                    raise UnsupportedCodec(path, "data chunk precedes fmt chunk")
                available = file_size - fin.tell()
                if chunk_size > available:
                    raise TruncatedPayload(path, chunk_size, available)
                data_size = chunk_size
                break
            else:
                fin.seek(chunk_size, 1)
            # chunks are padded to an even size
            if chunk_size & 1:
                fin.seek(1, 1)

    tag, channels, rate, block_align, bits = fmt
    if channels < 1 or rate < 1:
        raise UnsupportedCodec(path, f"{channels} channels at {rate} Hz")
    supported = (tag == WAVE_FORMAT_PCM and bits in (16, 24)) or (
        tag == WAVE_FORMAT_IEEE_FLOAT and bits == 32
    )
    if not supported:
        raise UnsupportedCodec(path, f"format tag {tag:#06x} with {bits} bits per sample")
    if block_align != channels * bits // 8:
        reason = f"block alignment {block_align} for {channels} x {bits} bits"
        raise UnsupportedCodec(path, reason)
    if data_size % block_align:
        raise TruncatedPayload(path, data_size, data_size - data_size % block_align)

    return WavInfo(tag, channels, rate, bits, data_size // block_align)


def load_wav(path: Path) -> AudioSignal:
    """Read a PCM16/PCM24/float32 WAV file into samples scaled to [-1, 1]."""
    path = Path(path)
    wav_info(path)

    with warnings.catch_warnings():
        # unknown chunks (LIST, bext, ...) are skipped by the reader
        warnings.simplefilter("ignore", wavfile.WavFileWarning)
        try:
            rate, data = wavfile.read(path)
        except ValueError as e:
            raise UnsupportedCodec(path, str(e)) from e

    if np.issubdtype(data.dtype, np.integer):
        # 24-bit payloads are left-justified in int32 by the reader
        scale = float(2 ** (8 * data.dtype.itemsize - 1))
        samples = data.astype(np.float64) / scale
    else:
        samples = data.astype(np.float64)

    logger.debug("Loaded %s: %s samples at %d Hz", path, samples.shape, rate)
    return AudioSignal(samples, rate)


def save_wav(path: Path, signal: AudioSignal, bit_depth: int = 32) -> None:
    """
    Write a signal as 16-bit PCM or 32-bit float WAV.

    Float output is lossless. 16-bit output is quantized with rounding,
    so a round trip is off by at most 2^-15 for samples in [-1, 1].
    """
    path = Path(path)
    signal.verify()

    if bit_depth == 16:
        data = np.clip(np.round(signal.samples * 32768.0), -32768, 32767).astype(np.int16)
    elif bit_depth == 32:
        data = signal.samples.astype(np.float32)
    else:
        raise UnsupportedCodec(path, f"cannot encode {bit_depth}-bit samples")

    try:
        wavfile.write(path, signal.sample_rate, data)
    except OSError as e:
        raise UnwritablePath(path, e.strerror or str(e)) from e

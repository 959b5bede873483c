import struct

import numpy as np
import pytest

from sepeval._exceptions import (
    MissingAudioFile,
    NonFiniteSamples,
    TruncatedPayload,
    UnsupportedCodec,
    UnwritablePath,
)
from sepeval.modules.audio import AudioSignal, load_wav, save_wav, wav_info


def wav_bytes(
    payload: bytes,
    tag: int = 1,
    channels: int = 1,
    rate: int = 8000,
    bits: int = 16,
    extra_chunks: bytes = b"",
    data_size: int | None = None,
    fmt_extension: bytes = b"",
) -> bytes:
    block_align = channels * bits // 8
    fmt = struct.pack("<HHIIHH", tag, channels, rate, rate * block_align, block_align, bits)
    fmt += fmt_extension
    data_size = len(payload) if data_size is None else data_size
    body = (
        b"WAVE"
        + b"fmt "
        + struct.pack("<I", len(fmt))
        + fmt
        + extra_chunks
        + b"data"
        + struct.pack("<I", data_size)
        + payload
    )
    return b"RIFF" + struct.pack("<I", len(body)) + body


def test_pcm16_single_sample(tmp_path):
    data = wav_bytes(struct.pack("<h", 32767))
    assert len(data) == 46
    path = tmp_path / "one.wav"
    path.write_bytes(data)

    signal = load_wav(path)
    assert signal.samples.shape == (1, 1)
    assert signal.sample_rate == 8000
    assert signal.samples[0, 0] == 32767 / 32768


def test_pcm16_extremes(tmp_path):
    path = tmp_path / "extremes.wav"
    path.write_bytes(wav_bytes(struct.pack("<3h", -32768, 0, 16384)))
    np.testing.assert_array_equal(load_wav(path).samples[:, 0], [-1.0, 0.0, 0.5])


def test_pcm24(tmp_path):
    def pcm24(value: int) -> bytes:
        return (value & 0xFFFFFF).to_bytes(3, "little")

    # two stereo frames
    payload = pcm24(0x400000) + pcm24(-0x800000) + pcm24(0) + pcm24(-0x400000)
    path = tmp_path / "pcm24.wav"
    path.write_bytes(wav_bytes(payload, channels=2, bits=24))

    info = wav_info(path)
    assert (info.bits, info.num_channels, info.num_samples) == (24, 2, 2)
    np.testing.assert_array_equal(load_wav(path).samples, [[0.5, -1.0], [0.0, -0.5]])


def test_float_round_trip(tmp_path, make_signal):
    signal = make_signal(1000, channels=3, sample_rate=44100)
    signal = AudioSignal(signal.samples.astype(np.float32), 44100)
    path = tmp_path / "float.wav"
    save_wav(path, signal)

    loaded = load_wav(path)
    assert loaded.sample_rate == 44100
    np.testing.assert_array_equal(loaded.samples, signal.samples)
    assert wav_info(path).format_tag == 3


def test_pcm16_round_trip(tmp_path, rng):
    samples = rng.uniform(-1, 1, (500, 2))
    path = tmp_path / "pcm16.wav"
    save_wav(path, AudioSignal(samples, 16000), bit_depth=16)

    loaded = load_wav(path)
    assert np.max(np.abs(loaded.samples - samples)) <= 2**-15


def test_pcm16_clipping(tmp_path):
    path = tmp_path / "clip.wav"
    save_wav(path, AudioSignal(np.array([1.0, -1.0, 2.0]), 8000), bit_depth=16)
    expected = [32767 / 32768, -1.0, 32767 / 32768]
    np.testing.assert_array_equal(load_wav(path).samples[:, 0], expected)


def test_unknown_chunks_are_skipped(tmp_path):
    listing = b"LIST" + struct.pack("<I", 5) + b"INFOx" + b"\x00"
    path = tmp_path / "list.wav"
    path.write_bytes(wav_bytes(struct.pack("<2h", 100, -100), extra_chunks=listing))

    assert wav_info(path).num_samples == 2
    np.testing.assert_array_equal(load_wav(path).samples[:, 0], [100 / 32768, -100 / 32768])


def test_extensible_header(tmp_path):
    # cbSize, valid bits, channel mask, then the sub-format GUID led by the tag
    extension = struct.pack("<HHIH", 22, 16, 0x3, 1) + bytes(14)
    path = tmp_path / "extensible.wav"
    path.write_bytes(wav_bytes(struct.pack("<2h", 1, 2), tag=0xFFFE, fmt_extension=extension))

    info = wav_info(path)
    assert info.format_tag == 1
    assert info.num_samples == 2


def test_missing_file(tmp_path):
    with pytest.raises(MissingAudioFile):
        load_wav(tmp_path / "nothing.wav")


def test_not_a_wav(tmp_path):
    path = tmp_path / "text.wav"
    path.write_bytes(b"definitely not a wave file")
    with pytest.raises(UnsupportedCodec, match="RIFF"):
        load_wav(path)


def test_unsupported_formats(tmp_path):
    path = tmp_path / "pcm8.wav"
    path.write_bytes(wav_bytes(b"\x80\x80", bits=8))
    with pytest.raises(UnsupportedCodec, match="8 bits"):
        load_wav(path)

    path = tmp_path / "double.wav"
    path.write_bytes(wav_bytes(bytes(8), tag=3, bits=64))
    with pytest.raises(UnsupportedCodec):
        load_wav(path)

    path = tmp_path / "no_data.wav"
    data = wav_bytes(b"")
    path.write_bytes(data[: data.index(b"data")])
    with pytest.raises(UnsupportedCodec, match="data chunk"):
        load_wav(path)


def test_truncated_payload(tmp_path):
    path = tmp_path / "short.wav"
    path.write_bytes(wav_bytes(struct.pack("<h", 1), data_size=100))
    with pytest.raises(TruncatedPayload):
        load_wav(path)

    # three bytes cannot hold a whole stereo 16-bit frame
    path = tmp_path / "partial.wav"
    path.write_bytes(wav_bytes(b"\x01\x02\x03", channels=2))
    with pytest.raises(TruncatedPayload):
        wav_info(path)


def test_save_errors(tmp_path, make_signal):
    signal = make_signal(10)
    with pytest.raises(UnsupportedCodec):
        save_wav(tmp_path / "pcm24.wav", signal, bit_depth=24)
    with pytest.raises(UnwritablePath):
        save_wav(tmp_path / "missing" / "folder" / "out.wav", signal)


def test_signal_invariants():
    mono = AudioSignal(np.zeros(5), 8000)
    assert (mono.num_samples, mono.num_channels) == (5, 1)
    assert mono.duration == 5 / 8000

    with pytest.raises(NonFiniteSamples):
        AudioSignal(np.array([0.0, np.nan]), 8000)
    with pytest.raises(ValueError, match="sample rate"):
        AudioSignal(np.zeros(5), 0)
    with pytest.raises(ValueError, match="Cannot add"):
        _ = mono + AudioSignal(np.zeros(6), 8000)


def test_signal_arithmetic(make_signal):
    a, b = make_signal(20), make_signal(20)
    np.testing.assert_array_equal((a + b).samples, a.samples + b.samples)
    np.testing.assert_allclose((a - b).samples, a.samples - b.samples)
    np.testing.assert_array_equal((2 * a).samples, 2 * a.samples)

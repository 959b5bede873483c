"""
Write a small synthetic corpus in the MUSDB18 WAV layout.

Stems are filtered noise with distinct spectra and stereo panning, so every
oracle method has something to separate. The mixture is the exact sum of the
stems before quantization.
"""

import logging
from pathlib import Path

import click
import numpy as np
from scipy import signal

from sepeval._constants import stem_iter
from sepeval.modules.audio import AudioSignal, save_wav

logging.basicConfig(format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)


def synth_stems(
    rng: np.random.Generator, num_samples: int, sample_rate: int, channels: int = 2
) -> dict[str, np.ndarray]:
    """Return (num_samples, channels) arrays keyed by stem name."""
    nyquist = sample_rate / 2
    filters = {
        "vocals": signal.butter(4, [300 / nyquist, 2000 / nyquist], "bandpass", output="sos"),
        "drums": signal.butter(2, 1000 / nyquist, "highpass", output="sos"),
        "bass": signal.butter(4, 200 / nyquist, "lowpass", output="sos"),
        "other": signal.butter(2, [800 / nyquist, 3000 / nyquist], "bandpass", output="sos"),
    }

    time = np.arange(num_samples) / sample_rate
    envelopes = {
        "vocals": 0.6 + 0.4 * np.sin(2 * np.pi * 0.7 * time),
        # decaying hits four times a second
        "drums": np.exp(-12 * np.mod(time, 0.25)),
        "bass": np.ones(num_samples),
        "other": 0.5 + 0.5 * np.cos(2 * np.pi * 0.3 * time),
    }

    stems = {}
    for index, stem in enumerate(stem_iter()):
        noise = rng.standard_normal((num_samples, channels))
        shaped = signal.sosfilt(filters[stem], noise, axis=0)
        # a white floor keeps the reference correlations well conditioned
        shaped = shaped / np.std(shaped) + 0.2 * rng.standard_normal((num_samples, channels))
        colored = shaped * envelopes[stem][:, np.newaxis]
        pan = np.linspace(0.4, 1.0, channels)[:: (-1) ** index]
        colored *= pan
        stems[stem] = 0.1 * colored / max(np.max(np.abs(colored)), 1e-12)
    return stems


def write_fixture_corpus(
    root: Path,
    num_train: int = 1,
    num_test: int = 1,
    duration: float = 2.5,
    sample_rate: int = 8000,
    channels: int = 2,
    seed: int = 0,
    bit_depth: int = 32,
) -> list[Path]:
    """Write the corpus and return the track folders."""
    rng = np.random.default_rng(seed)
    num_samples = round(duration * sample_rate)
    folders = []
    for split, count in (("train", num_train), ("test", num_test)):
        for index in range(count):
            folder = Path(root) / split / f"{split}_{index:02d}"
            folder.mkdir(parents=True, exist_ok=True)
            stems = synth_stems(rng, num_samples, sample_rate, channels)
            mixture = np.sum(list(stems.values()), axis=0)
            save_wav(folder / "mixture.wav", AudioSignal(mixture, sample_rate), bit_depth)
            for stem, samples in stems.items():
                save_wav(folder / f"{stem}.wav", AudioSignal(samples, sample_rate), bit_depth)
            folders.append(folder)
            logger.info("Wrote %s", folder)
    return folders


def write_true_estimates(corpus_root: Path, output: Path) -> None:
    """Copy the true stems of every track into an estimates folder."""
    for folder in sorted(Path(corpus_root).glob("*/*")):
        target_dir = Path(output) / folder.name
        target_dir.mkdir(parents=True, exist_ok=True)
        for stem in stem_iter():
            (target_dir / f"{stem}.wav").write_bytes((folder / f"{stem}.wav").read_bytes())


@click.command()
@click.argument("root", type=click.Path(file_okay=False, path_type=Path))
@click.option("--num-train", default=1, show_default=True, type=int)
@click.option("--num-test", default=1, show_default=True, type=int)
@click.option("-d", "--duration", default=2.5, show_default=True, type=float, help="Seconds.")
@click.option("-r", "--sample-rate", default=8000, show_default=True, type=int)
@click.option("-c", "--channels", default=2, show_default=True, type=int)
@click.option("-s", "--seed", default=0, show_default=True, type=int)
@click.option("--bit-depth", default="32", show_default=True, type=click.Choice(["16", "32"]))
@click.option(
    "--true-estimates",
    default=None,
    type=click.Path(file_okay=False, path_type=Path),
    help="Also write the true stems as an estimates folder.",
)
def main(
    root: Path,
    num_train: int,
    num_test: int,
    duration: float,
    sample_rate: int,
    channels: int,
    seed: int,
    bit_depth: str,
    true_estimates: Path | None,
):
    """Write a synthetic corpus under ROOT."""
    logger.setLevel(logging.INFO)
    write_fixture_corpus(
        root, num_train, num_test, duration, sample_rate, channels, seed, int(bit_depth)
    )
    if true_estimates is not None:
        write_true_estimates(root, true_estimates)


if __name__ == "__main__":
    main()

"""
Stem corpora in the MUSDB18 WAV layout.

    root/
        train/<track name>/{mixture,drums,bass,other,vocals}.wav
        test/<track name>/{mixture,drums,bass,other,vocals}.wav

Tracks are listed in lexicographic order of their folder names.
"""

import json
import logging
from pathlib import Path
from typing import Iterable, Iterator

import numpy as np

from sepeval._constants import accompaniment_stem_iter, split_iter, stem_iter, track_file_iter
from sepeval._exceptions import AudioError, EmptyCorpus, MissingCorpusRoot, StemMismatch
from sepeval.modules.audio import AudioSignal, load_wav, wav_info

logger = logging.getLogger(__name__)


class TrackRef:
    """A validated track folder."""

    def __init__(
        self,
        name: str,
        split: str,
        path: Path,
        duration: float,
        sample_rate: int,
        channels: int,
    ) -> None:
        self.name = name
        self.split = split
        self.path = Path(path)
        self.duration = duration
        self.sample_rate = sample_rate
        self.channels = channels

    def __repr__(self) -> str:
        return f"TrackRef({self.split}/{self.name}, {self.duration:.2f} s)"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrackRef):
            return NotImplemented
        return (self.split, self.name, self.path) == (other.split, other.name, other.path)

    def __hash__(self) -> int:
        return hash((self.split, self.name))

    def stem_path(self, stem: str) -> Path:
        """Return the path of one WAV file of the track."""
        return self.path / f"{stem}.wav"

    def as_dict(self) -> dict:
        """Return the manifest entry of the track."""
        return {
            "name": self.name,
            "split": self.split,
            "duration": self.duration,
            "sample_rate": self.sample_rate,
            "channels": self.channels,
        }


class Corpus:
    """Tracks of a corpus root, grouped by split."""

    def __init__(self, root: Path, tracks: Iterable[TrackRef]) -> None:
        self.root = Path(root)
        self.tracks = list(tracks)

    def __repr__(self) -> str:
        counts = ", ".join(f"{split}: {len(self.split(split))}" for split in split_iter())
        return f"Corpus({self.root}, {counts})"

    def __len__(self) -> int:
        return len(self.tracks)

    def __iter__(self) -> Iterator[TrackRef]:
        return iter(self.tracks)

    def split(self, split: str) -> list[TrackRef]:
        """Return the tracks of one split."""
        return [track for track in self.tracks if track.split == split]

    def filter(self, split: str | None = None, names: Iterable[str] | None = None) -> "Corpus":
        """Select tracks by split and/or name."""
        names = set(names) if names else None
        return Corpus(
            self.root,
            [
                track
                for track in self.tracks
                if (split is None or track.split == split)
                and (names is None or track.name in names)
            ],
        )


def _check_track(folder: Path, split: str) -> TrackRef:
    """Return a TrackRef or raise explaining why the folder is not a valid track."""
    infos = {}
    for stem in track_file_iter():
        path = folder / f"{stem}.wav"
        if not path.is_file():
            raise ValueError(f"missing {path.name}")
        infos[stem] = wav_info(path)

    mixture = infos["mixture"]
    for stem, info in infos.items():
        layout = (info.num_samples, info.sample_rate, info.num_channels)
        if layout != (mixture.num_samples, mixture.sample_rate, mixture.num_channels):
            raise ValueError(f"{stem}.wav has (samples, rate, channels) {layout}")

    return TrackRef(
        folder.name, split, folder, mixture.duration, mixture.sample_rate, mixture.num_channels
    )


def scan_corpus(root: Path) -> Corpus:
    """
    Enumerate the train/ and test/ track folders of a corpus.

    Malformed folders are skipped with a warning.
    """
    root = Path(root)
    if not root.is_dir():
        raise MissingCorpusRoot(root)

    tracks = []
    for split in split_iter():
        split_dir = root / split
        if not split_dir.is_dir():
            logger.warning("Corpus %s has no %s split.", root, split)
            continue
        for folder in sorted(p for p in split_dir.iterdir() if p.is_dir()):
            try:
                tracks.append(_check_track(folder, split))
            except (ValueError, AudioError) as e:
                logger.warning("Skipping track %s/%s: %s", split, folder.name, e)

    if not tracks:
        raise EmptyCorpus(root)
    corpus = Corpus(root, tracks)
    logger.info("Scanned %s", corpus)
    return corpus


def load_track(ref: TrackRef) -> tuple[AudioSignal, dict[str, AudioSignal]]:
    """Load the mixture and the four stems, in stem order."""
    mixture = load_wav(ref.stem_path("mixture"))
    stems = {}
    for stem in stem_iter():
        signal = load_wav(ref.stem_path(stem))
        if (
            signal.samples.shape != mixture.samples.shape
            or signal.sample_rate != mixture.sample_rate
        ):
            raise StemMismatch(ref.name, stem, mixture.samples.shape, signal.samples.shape)
        stems[stem] = signal
    return mixture, stems


def accompaniment(stems: dict[str, AudioSignal]) -> AudioSignal:
    """Sum of the non-vocal stems."""
    names = list(accompaniment_stem_iter())
    total = stems[names[0]]
    for name in names[1:]:
        total = total + stems[name]
    return total


class MixtureReport:
    """Deviation of a mixture from the sum of its stems."""

    def __init__(self, track: str, max_deviation: float, tolerance: float) -> None:
        self.track = track
        self.max_deviation = max_deviation
        self.tolerance = tolerance

    def __repr__(self) -> str:
        verdict = "pass" if self.passed else "fail"
        return f"MixtureReport({self.track}: {self.max_deviation:.3g} {verdict})"

    @property
    def passed(self) -> bool:
        """Whether the deviation is within tolerance."""
        return self.max_deviation <= self.tolerance


def validate_mixture(ref: TrackRef, tolerance: float = 1e-2) -> MixtureReport:
    """Compare the mixture with the sum of the stems."""
    mixture, stems = load_track(ref)
    total = np.sum([stem.samples for stem in stems.values()], axis=0)
    deviation = float(np.max(np.abs(mixture.samples - total), initial=0.0))
    report = MixtureReport(ref.name, deviation, tolerance)
    if not report.passed:
        logger.warning(
            "Mixture of %s deviates from the stem sum by %.3g (tolerance %.3g).",
            ref.name,
            deviation,
            tolerance,
        )
    return report


def write_manifest(corpus: Corpus, path: Path) -> None:
    """Write track names, splits and durations as JSON."""
    manifest = {
        "root": str(corpus.root),
        "tracks": [track.as_dict() for track in corpus],
    }
    with open(path, "w", encoding="utf-8") as fout:
        json.dump(manifest, fout, indent=2, ensure_ascii=False)

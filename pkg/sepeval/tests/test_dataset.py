import json
import logging
import os
from pathlib import Path

import numpy as np
import pytest

from sepeval._constants import stem_iter
from sepeval._exceptions import EmptyCorpus, MissingCorpusRoot, StemMismatch
from sepeval.modules.audio import AudioSignal, load_wav, save_wav
from sepeval.modules.dataset import (
    accompaniment,
    load_track,
    scan_corpus,
    validate_mixture,
    write_manifest,
)


def test_scan(fixture_corpus):
    corpus = scan_corpus(fixture_corpus)
    assert len(corpus) == 2
    assert [track.name for track in corpus.split("train")] == ["train_00"]
    assert [track.name for track in corpus.split("test")] == ["test_00"]

    track = corpus.split("train")[0]
    assert track.duration == pytest.approx(2.5)
    assert (track.sample_rate, track.channels) == (8000, 2)
    assert track.stem_path("vocals") == fixture_corpus / "train" / "train_00" / "vocals.wav"


def test_filter(fixture_corpus):
    corpus = scan_corpus(fixture_corpus)
    assert [t.name for t in corpus.filter(split="train")] == ["train_00"]
    assert [t.name for t in corpus.filter(names=["test_00"])] == ["test_00"]
    assert len(corpus.filter(split="train", names=["test_00"])) == 0
    assert len(corpus.filter()) == 2


def test_malformed_folders_are_skipped(scratch_corpus, caplog):
    (scratch_corpus / "test" / "test_00" / "vocals.wav").unlink()
    (scratch_corpus / "train" / "notes").mkdir()
    with caplog.at_level(logging.WARNING, logger="sepeval"):
        corpus = scan_corpus(scratch_corpus)
    assert [track.name for track in corpus] == ["train_00"]
    assert "Skipping track test/test_00" in caplog.text
    assert "Skipping track train/notes" in caplog.text


def test_stem_length_mismatch(scratch_corpus, caplog):
    folder = scratch_corpus / "train" / "train_00"
    save_wav(folder / "bass.wav", AudioSignal(np.zeros((100, 2)), 8000))
    with caplog.at_level(logging.WARNING, logger="sepeval"):
        corpus = scan_corpus(scratch_corpus)
    assert [track.name for track in corpus] == ["test_00"]
    assert "bass.wav" in caplog.text


def test_missing_root(tmp_path):
    with pytest.raises(MissingCorpusRoot):
        scan_corpus(tmp_path / "nowhere")


def test_empty_corpus(tmp_path, caplog):
    (tmp_path / "train").mkdir()
    with caplog.at_level(logging.WARNING, logger="sepeval"):
        with pytest.raises(EmptyCorpus):
            scan_corpus(tmp_path)
    assert "no test split" in caplog.text


def test_load_track(fixture_corpus):
    track = scan_corpus(fixture_corpus).split("test")[0]
    mixture, stems = load_track(track)
    assert list(stems) == list(stem_iter())
    assert mixture.samples.shape == (20000, 2)
    for stem in stems.values():
        assert stem.samples.shape == (20000, 2)
        assert stem.sample_rate == 8000

    total = accompaniment(stems)
    np.testing.assert_allclose(
        total.samples,
        stems["drums"].samples + stems["bass"].samples + stems["other"].samples,
    )


def test_load_track_checks_stems(scratch_corpus):
    track = scan_corpus(scratch_corpus).split("train")[0]
    # folders are only checked when scanned
    save_wav(track.stem_path("other"), AudioSignal(np.zeros((100, 2)), 8000))
    with pytest.raises(StemMismatch, match="other"):
        load_track(track)


def test_validate_mixture(fixture_corpus):
    for track in scan_corpus(fixture_corpus):
        report = validate_mixture(track)
        assert report.passed
        assert report.max_deviation < 1e-6


def test_corrupted_mixture(scratch_corpus, caplog):
    track = scan_corpus(scratch_corpus).split("train")[0]
    mixture = load_wav(track.stem_path("mixture"))
    save_wav(track.stem_path("mixture"), 0.5 * mixture)

    with caplog.at_level(logging.WARNING, logger="sepeval"):
        report = validate_mixture(track, tolerance=1e-3)
    assert not report.passed
    assert report.max_deviation > 1e-3
    assert "train_00" in caplog.text


def test_manifest(fixture_corpus, tmp_path):
    path = tmp_path / "manifest.json"
    write_manifest(scan_corpus(fixture_corpus), path)
    with open(path, encoding="utf-8") as fin:
        manifest = json.load(fin)
    assert manifest["root"] == str(fixture_corpus)
    assert [(t["split"], t["name"]) for t in manifest["tracks"]] == [
        ("train", "train_00"),
        ("test", "test_00"),
    ]
    assert manifest["tracks"][0]["duration"] == pytest.approx(2.5)


@pytest.mark.skipif(
    "SEPEVAL_MUSDB_ROOT" not in os.environ, reason="needs a MUSDB18 WAV corpus"
)
def test_musdb_layout():
    corpus = scan_corpus(Path(os.environ["SEPEVAL_MUSDB_ROOT"]))
    assert len(corpus.split("train")) == 100
    assert len(corpus.split("test")) == 50
    for track in corpus:
        assert (track.sample_rate, track.channels) == (44100, 2)

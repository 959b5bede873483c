import json

import pandas as pd
import pytest
from click.testing import CliRunner

from make_fixture_corpus import write_true_estimates
from sepeval._constants import stem_iter
from sepeval.cli import cli
from sepeval.modules.audio import load_wav, save_wav
from sepeval.modules.bss_eval import FrameScores
from sepeval.modules.report import TrackScore, write_report

FAST = ["--workers", "1", "--filter-len", "32"]
FAST_STFT = ["--stft-window", "512", "--stft-hop", "128"]


@pytest.fixture
def runner():
    return CliRunner()


def write_method_reports(root, method, shift, rng):
    for i in range(20):
        sdr = rng.normal(5, 2) + shift
        frames = [FrameScores(sdr, 10.0, 10.0, 10.0, 0, 100)]
        score = TrackScore(f"t{i:02d}", method, {"vocals": frames}, 100)
        write_report(score, root / method / f"{score.track}.json")


def test_help(runner):
    result = runner.invoke(cli, ["--help"])
    assert result.exit_code == 0
    for command in ("oracle", "eval", "aggregate", "compare", "validate"):
        assert command in result.output

    result = runner.invoke(cli, ["oracle", "--help"])
    assert result.exit_code == 0
    for option in ("--corpus-root", "--method", "--alpha", "--stft-window", "--mode"):
        assert option in result.output


def test_oracle(runner, fixture_corpus, tmp_path):
    args = ["oracle", "--corpus-root", str(fixture_corpus), "-o", str(tmp_path), "-m", "irm2"]
    result = runner.invoke(cli, args + FAST + FAST_STFT)
    assert result.exit_code == 0, result.output

    method_dir = tmp_path / "IRM2"
    for track in ("train_00", "test_00"):
        written = sorted(path.name for path in (method_dir / track).iterdir())
        assert written == sorted(f"{stem}.wav" for stem in stem_iter())
        assert load_wav(method_dir / track / "vocals.wav").samples.shape == (20000, 2)
        with open(method_dir / f"{track}.json", encoding="utf-8") as fin:
            report = json.load(fin)
        assert report["method"] == "IRM2"
        assert len(report["targets"]) == 5

    summary = pd.read_csv(method_dir / "summary.csv")
    assert set(summary["method"]) == {"IRM2"}
    assert set(summary["track"]) == {"train_00", "test_00"}


def test_oracle_irm_alpha(runner, fixture_corpus, tmp_path):
    args = ["oracle", "--corpus-root", str(fixture_corpus), "-o", str(tmp_path)]
    args += ["-m", "IRM", "--alpha", "1.5", "--split", "test"]
    result = runner.invoke(cli, args + FAST + FAST_STFT)
    assert result.exit_code == 0, result.output
    assert (tmp_path / "IRM" / "test_00.json").is_file()
    assert not (tmp_path / "IRM" / "train_00").exists()


@pytest.mark.parametrize(
    "option",
    [
        ["-m", "IRM3"],
        ["-m", "IRM2", "--window", "0"],
        ["-m", "IRM2", "--stft-window", "500"],
        ["-m", "IRM2", "--alpha", "-1"],
        ["-m", "IRM2", "--mode", "v5"],
    ],
)
def test_oracle_bad_options(runner, fixture_corpus, tmp_path, option):
    args = ["oracle", "--corpus-root", str(fixture_corpus), "-o", str(tmp_path)]
    result = runner.invoke(cli, args + option)
    assert result.exit_code == 2
    assert not (tmp_path / "IRM2").exists()


def test_oracle_missing_corpus(runner, tmp_path):
    args = ["oracle", "--corpus-root", str(tmp_path / "nowhere"), "-m", "MIX"]
    result = runner.invoke(cli, args + ["-o", str(tmp_path)])
    assert result.exit_code == 1


def test_oracle_unknown_track(runner, fixture_corpus, tmp_path):
    args = ["oracle", "--corpus-root", str(fixture_corpus), "-m", "MIX", "--track", "nope"]
    result = runner.invoke(cli, args + ["-o", str(tmp_path)])
    assert result.exit_code == 2


@pytest.mark.parametrize("mode", ["v4", "v3"])
def test_eval_true_estimates(runner, fixture_corpus, tmp_path, mode):
    estimates = tmp_path / "estimates"
    write_true_estimates(fixture_corpus, estimates)
    args = ["eval", "--corpus-root", str(fixture_corpus), "-e", str(estimates), "-m", "truth"]
    args += ["-o", str(tmp_path / "out"), "--mode", mode]
    result = runner.invoke(cli, args + FAST)
    assert result.exit_code == 0, result.output

    with open(tmp_path / "out" / "truth" / "train_00.json", encoding="utf-8") as fin:
        report = json.load(fin)
    statuses = {
        entry[metric]["status"]
        for target in report["targets"].values()
        for entry in target["frames"]
        for metric in ("SDR", "ISR", "SIR", "SAR")
    }
    assert statuses == {"inf"}


def test_eval_missing_estimates(runner, fixture_corpus, tmp_path):
    args = ["eval", "--corpus-root", str(fixture_corpus), "-e", str(tmp_path / "nowhere")]
    result = runner.invoke(cli, args + ["-m", "truth", "-o", str(tmp_path)])
    assert result.exit_code == 1


def test_eval_without_any_estimate(runner, fixture_corpus, tmp_path):
    (tmp_path / "estimates").mkdir()
    args = ["eval", "--corpus-root", str(fixture_corpus), "-e", str(tmp_path / "estimates")]
    result = runner.invoke(cli, args + ["-m", "empty", "-o", str(tmp_path)] + FAST)
    assert result.exit_code == 1


def test_eval_corpus_root_from_environment(runner, fixture_corpus, tmp_path):
    estimates = tmp_path / "estimates"
    write_true_estimates(fixture_corpus, estimates)
    args = ["eval", "-e", str(estimates), "-m", "truth", "-o", str(tmp_path / "out")]
    result = runner.invoke(
        cli, args + FAST, env={"SEPEVAL_CORPUS_ROOT": str(fixture_corpus)}
    )
    assert result.exit_code == 0, result.output
    assert (tmp_path / "out" / "truth" / "summary.csv").is_file()


def test_aggregate(runner, tmp_path, rng):
    write_method_reports(tmp_path / "reports", "A", 0, rng)
    write_method_reports(tmp_path / "reports", "B", 10, rng)
    output = tmp_path / "aggregate.csv"
    tracks_output = tmp_path / "tracks.csv"
    args = ["aggregate", str(tmp_path / "reports"), "-o", str(output)]
    result = runner.invoke(cli, args + ["--tracks-output", str(tracks_output)])
    assert result.exit_code == 0, result.output

    table = pd.read_csv(output)
    assert set(table["method"]) == {"A", "B"}
    assert len(table) == 2 * 20 * 4
    sdr = table[table["metric"] == "SDR"]
    campaign = sdr.groupby("method")["campaign_median"].first()
    assert campaign["B"] > campaign["A"] + 5
    assert len(pd.read_csv(tracks_output)) == 2 * 20 * 4


def test_aggregate_without_reports(runner, tmp_path):
    (tmp_path / "empty").mkdir()
    result = runner.invoke(cli, ["aggregate", str(tmp_path / "empty")])
    assert result.exit_code == 2


def test_aggregate_malformed_report(runner, tmp_path):
    (tmp_path / "bad.json").write_text("{", encoding="utf-8")
    result = runner.invoke(cli, ["aggregate", str(tmp_path / "bad.json")])
    assert result.exit_code == 1


def test_compare(runner, tmp_path, rng):
    write_method_reports(tmp_path / "reports", "A", 0, rng)
    write_method_reports(tmp_path / "reports", "B", 10, rng)
    output = tmp_path / "significance"
    result = runner.invoke(cli, ["compare", str(tmp_path / "reports"), "-o", str(output)])
    assert result.exit_code == 0, result.output

    matrix = pd.read_csv(output / "vocals_SDR.csv", index_col="method")
    assert matrix.loc["A", "B"] < 0.05
    assert matrix.loc["A", "A"] == 1.0
    with open(output / "vocals_SDR.json", encoding="utf-8") as fin:
        data = json.load(fin)
    assert data["num_tracks"] == 20
    assert not (output / "vocals_SIR.csv").exists()


def test_compare_single_method(runner, tmp_path, rng):
    write_method_reports(tmp_path / "reports", "A", 0, rng)
    result = runner.invoke(cli, ["compare", str(tmp_path / "reports")])
    assert result.exit_code == 2


def test_validate(runner, fixture_corpus, tmp_path):
    manifest = tmp_path / "manifest.json"
    args = ["validate", "--corpus-root", str(fixture_corpus), "--manifest", str(manifest)]
    result = runner.invoke(cli, args)
    assert result.exit_code == 0, result.output
    with open(manifest, encoding="utf-8") as fin:
        assert len(json.load(fin)["tracks"]) == 2


def test_validate_corrupted(runner, scratch_corpus):
    path = scratch_corpus / "test" / "test_00" / "mixture.wav"
    save_wav(path, 2.0 * load_wav(path))
    result = runner.invoke(cli, ["validate", "--corpus-root", str(scratch_corpus)])
    assert result.exit_code == 1

    args = ["validate", "--corpus-root", str(scratch_corpus), "--skip-mixtures"]
    assert runner.invoke(cli, args).exit_code == 0
    assert runner.invoke(cli, args[:3] + ["--split", "train"]).exit_code == 0


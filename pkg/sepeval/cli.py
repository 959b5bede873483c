"""
CLI for oracle separation, evaluation, aggregation and method comparison.

    sepeval oracle     separate a corpus with an oracle method and score it
    sepeval eval       score a folder of estimates against a corpus
    sepeval aggregate  median tables from report files
    sepeval compare    pairwise significance between methods
    sepeval validate   check a corpus and its mixtures

Every option can also be set through SEPEVAL_<COMMAND>_<OPTION> environment
variables, and the corpus root through SEPEVAL_CORPUS_ROOT.
"""

import functools
import logging
import os
import sys
from pathlib import Path
from typing import Callable, Iterable

import click

from sepeval import _constants as defaults
from sepeval._constants import metric_iter, significance_threshold, split_iter, target_iter
from sepeval._exceptions import SepevalError
from sepeval.modules.bss_eval import EvalMode
from sepeval.modules.campaign import (
    AggregateTable,
    EvalConfig,
    aggregate,
    evaluate_in_root,
    oracle_track,
    run_tracks,
)
from sepeval.modules.dataset import Corpus, scan_corpus, validate_mixture, write_manifest
from sepeval.modules.oracle import OracleConfig, OracleMethod
from sepeval.modules.report import TrackScore, collect_reports, write_report
from sepeval.modules.significance import (
    SignificanceMatrix,
    pairwise_significance,
    significant_pairs,
)
from sepeval.modules.stft import StftConfig

logging.basicConfig(format="%(levelname)s: %(message)s")
logger = logging.getLogger(__name__)

REPORT_PATH = click.Path(exists=True, path_type=Path)


class CliConfig:
    """Options shared by the oracle and eval commands, checked before any work starts."""

    def __init__(
        self,
        corpus_root: Path,
        output: Path,
        method: str,
        estimates_root: Path | None = None,
        window: float = defaults.eval_window_seconds,
        hop: float = defaults.eval_hop_seconds,
        filter_len: int = defaults.filter_len,
        mode: str = EvalMode.v4_global.value,
        workers: int | None = None,
        alpha: float = defaults.irm_alpha,
        iterations: int = defaults.mwf_iterations,
        stft_window: int = defaults.stft_window_size,
        stft_hop: int = defaults.stft_hop_size,
        split: str | None = None,
        tracks: Iterable[str] = (),
    ) -> None:
        self.corpus_root = Path(corpus_root)
        self.output = Path(output)
        self.method = method
        self.estimates_root = Path(estimates_root) if estimates_root is not None else None
        self.window = window
        self.hop = hop
        self.filter_len = filter_len
        self.mode = EvalMode(mode)
        self.workers = workers if workers is not None else os.cpu_count() or 1
        self.alpha = alpha
        self.iterations = iterations
        self.stft_window = stft_window
        self.stft_hop = stft_hop
        self.split = split
        self.tracks = tuple(tracks)

        self.verify()

    def verify(self) -> None:
        """Raise click.BadParameter on the first invalid option."""
        checks = [
            ("window", self.window > 0, "must be positive"),
            ("hop", self.hop > 0, "must be positive"),
            ("filter-len", self.filter_len >= 1, "must be at least 1"),
            ("workers", self.workers >= 1, "must be at least 1"),
            ("alpha", self.alpha > 0, "must be positive"),
            ("iterations", self.iterations >= 1, "must be at least 1"),
        ]
        for name, ok, reason in checks:
            if not ok:
                raise click.BadParameter(reason, param_hint=f"--{name}")
        try:
            StftConfig(self.stft_window, self.stft_hop)
        except SepevalError as e:
            raise click.BadParameter(str(e), param_hint="--stft-window/--stft-hop") from e

    def eval_config(self) -> EvalConfig:
        """Build metric parameters from the window, hop, filter and mode options."""
        return EvalConfig(self.filter_len, self.window, self.hop, self.mode)

    def oracle_config(self) -> OracleConfig:
        """Build oracle parameters from the STFT, alpha and iterations options."""
        return OracleConfig(
            StftConfig(self.stft_window, self.stft_hop), self.alpha, self.iterations
        )

    def corpus(self) -> Corpus:
        """Scan the corpus root and apply the split and track filters."""
        corpus = scan_corpus(self.corpus_root).filter(self.split, self.tracks or None)
        if not len(corpus):
            raise click.UsageError("No tracks match --split/--track.")
        return corpus


def fatal_errors(command: Callable) -> Callable:
    """Log package errors and exit with status 1."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except SepevalError as e:
            logger.critical("%s", e)
            sys.exit(1)

    return wrapper


def log_table(title: str, rows: list[str], columns: list[str], cell: Callable) -> None:
    """Log a matrix with centred cells, one log line per row."""
    logger.info("%s", f"{title:_^{20 * (len(columns) + 1)}}")
    logger.info("%s", "".join(f"{name:^20}" for name in [""] + columns))
    for row in rows:
        logger.info("%s", f"{row:^20}" + "".join(f"{cell(row, col):^20}" for col in columns))


def log_medians(table: AggregateTable) -> None:
    """Log a table of campaign medians per method."""
    for method in table.methods:
        targets = [t for t in target_iter() if t in set(table.campaign["target"])]

        def cell(target: str, metric: str, method: str = method) -> str:
            try:
                return f"{table.median(method, target, metric):.2f}"
            except KeyError:
                return "/"

        log_table(f"{method} MEDIANS (dB)", targets, list(metric_iter()), cell)


def write_outputs(scores: list[TrackScore], method_dir: Path) -> None:
    """Write one report per track and the method's summary CSV."""
    for score in scores:
        write_report(score, method_dir / f"{score.track}.json")
    if scores:
        table = aggregate(scores)
        table.to_csv(method_dir / "summary.csv")
        log_medians(table)


def corpus_options(command: Callable) -> Callable:
    """Add the corpus selection options."""
    options = [
        click.option(
            "--corpus-root",
            required=True,
            envvar="SEPEVAL_CORPUS_ROOT",
            type=click.Path(path_type=Path),
            help="Root of a corpus with train/ and test/ track folders.",
        ),
        click.option("--split", type=click.Choice(list(split_iter())), help="Only this split."),
        click.option("--track", "tracks", multiple=True, help="Only these tracks, repeatable."),
    ]
    for option in reversed(options):
        command = option(command)
    return command


def eval_options(command: Callable) -> Callable:
    """Add the output and metric options of the oracle and eval commands."""
    options = [
        click.option(
            "-o",
            "--output",
            default=Path("output"),
            show_default=True,
            type=click.Path(file_okay=False, path_type=Path),
            help="Output directory.",
        ),
        click.option(
            "--window",
            default=defaults.eval_window_seconds,
            show_default=True,
            type=float,
            help="Evaluation window in seconds.",
        ),
        click.option(
            "--hop",
            default=defaults.eval_hop_seconds,
            show_default=True,
            type=float,
            help="Evaluation hop in seconds.",
        ),
        click.option(
            "--filter-len",
            default=defaults.filter_len,
            show_default=True,
            type=int,
            help="Length of the distortion filters in taps.",
        ),
        click.option(
            "--mode",
            default=EvalMode.v4_global.value,
            show_default=True,
            type=click.Choice([mode.value for mode in EvalMode]),
            help="v4: one set of filters per track. v3: filters recomputed per window.",
        ),
        click.option(
            "-w",
            "--workers",
            default=None,
            type=int,
            help="Tracks processed in parallel.  [default: number of cores]",
        ),
    ]
    for option in reversed(options):
        command = option(command)
    return command


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="Log debug output.")
@click.option("-q", "--quiet", is_flag=True, help="Only log warnings and errors.")
def cli(verbose: bool, quiet: bool) -> None:
    """Evaluate music source separation against stem corpora."""
    level = logging.DEBUG if verbose else logging.WARNING if quiet else logging.INFO
    logging.getLogger("sepeval").setLevel(level)


@cli.command()
@corpus_options
@eval_options
@click.option(
    "-m",
    "--method",
    required=True,
    type=click.Choice([method.value for method in OracleMethod], case_sensitive=False),
    help="Oracle method. IRM uses --alpha.",
)
@click.option(
    "--alpha",
    default=defaults.irm_alpha,
    show_default=True,
    type=float,
    help="Spectrogram exponent of the IRM method.",
)
@click.option(
    "--iterations",
    default=defaults.mwf_iterations,
    show_default=True,
    type=int,
    help="Estimation iterations of the MWF method.",
)
@click.option(
    "--stft-window",
    default=defaults.stft_window_size,
    show_default=True,
    type=int,
    help="STFT window length in samples.",
)
@click.option(
    "--stft-hop",
    default=defaults.stft_hop_size,
    show_default=True,
    type=int,
    help="STFT hop in samples.",
)
@fatal_errors
def oracle(**options) -> None:
    """
    Separate every track with an oracle method and score the estimates.

    Writes OUTPUT/METHOD/TRACK/TARGET.wav, OUTPUT/METHOD/TRACK.json and
    OUTPUT/METHOD/summary.csv.
    """
    config = CliConfig(**options)
    method = OracleMethod.parse(config.method)
    corpus = config.corpus()
    method_dir = config.output / method.value

    job = functools.partial(
        oracle_track,
        method=method,
        output_dir=method_dir,
        oracle_config=config.oracle_config(),
        eval_config=config.eval_config(),
    )
    scores, failed = run_tracks(corpus.tracks, job, config.workers, desc=method.value)
    write_outputs(scores, method_dir)
    if failed:
        logger.warning("%d of %d tracks failed: %s", len(failed), len(corpus), failed)
        sys.exit(1)


@cli.command(name="eval")
@corpus_options
@eval_options
@click.option(
    "-e",
    "--estimates-root",
    required=True,
    type=click.Path(path_type=Path),
    help="Folder holding TRACK/TARGET.wav estimates.",
)
@click.option("-m", "--method", required=True, help="Name the estimates are reported under.")
@fatal_errors
def evaluate(**options) -> None:
    """
    Score estimates against the corpus stems.

    Writes OUTPUT/METHOD/TRACK.json and OUTPUT/METHOD/summary.csv. Tracks
    that fail are logged and skipped; the command fails if all of them do.
    """
    config = CliConfig(**options)
    if not config.estimates_root.is_dir():
        logger.critical("Estimates folder %s does not exist.", config.estimates_root)
        sys.exit(1)
    corpus = config.corpus()

    job = functools.partial(
        evaluate_in_root,
        estimates_root=config.estimates_root,
        method_name=config.method,
        config=config.eval_config(),
    )
    scores, failed = run_tracks(corpus.tracks, job, config.workers, desc=config.method)
    write_outputs(scores, config.output / config.method)
    if failed:
        logger.warning("%d of %d tracks failed: %s", len(failed), len(corpus), failed)
    if not any(score.targets for score in scores):
        logger.critical("No track of %s could be evaluated.", config.method)
        sys.exit(1)


def load_reports(reports: Iterable[Path]) -> list[TrackScore]:
    """Collect the reports of files and folders, failing if there are none."""
    scores = collect_reports(reports)
    if not scores:
        raise click.UsageError("No report files found.")
    return scores


@cli.command(name="aggregate")
@click.argument("reports", nargs=-1, required=True, type=REPORT_PATH)
@click.option(
    "-o",
    "--output",
    default=Path("aggregate.csv"),
    show_default=True,
    type=click.Path(dir_okay=False, path_type=Path),
    help="CSV of track and campaign medians.",
)
@click.option(
    "--tracks-output",
    default=None,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Optional CSV of track medians only.",
)
@click.option(
    "--how",
    default="track",
    show_default=True,
    type=click.Choice(["track", "frames"]),
    help="Campaign median over track medians or over all frames.",
)
@fatal_errors
def aggregate_reports(
    reports: tuple[Path], output: Path, tracks_output: Path | None, how: str
) -> None:
    """Median scores of REPORTS (files or folders of JSON reports)."""
    table = aggregate(load_reports(reports), how)
    output.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(output)
    if tracks_output is not None:
        table.tracks_to_csv(tracks_output)
    log_medians(table)


def log_matrix(matrix: SignificanceMatrix, threshold: float) -> None:
    """Log a p-value matrix, starring pairs below the threshold."""
    marks = significant_pairs(matrix, threshold)

    def cell(a: str, b: str) -> str:
        if a == b:
            return "/"
        p = matrix.pvalue(a, b)
        return f"{p:.4f}{' *' if marks.loc[a, b] else ''}"

    title = f"{matrix.target} {matrix.metric} P-VALUES".upper()
    log_table(title, matrix.methods, matrix.methods, cell)


@cli.command()
@click.argument("reports", nargs=-1, required=True, type=REPORT_PATH)
@click.option(
    "-o",
    "--output",
    default=Path("significance"),
    show_default=True,
    type=click.Path(file_okay=False, path_type=Path),
    help="Folder for TARGET_METRIC.csv and .json matrices.",
)
@click.option(
    "-t",
    "--target",
    "targets",
    multiple=True,
    type=click.Choice(list(target_iter())),
    help="Targets to compare (repeatable).  [default: all reported]",
)
@click.option(
    "--metric",
    "metrics",
    multiple=True,
    type=click.Choice(list(metric_iter())),
    help="Metrics to compare (repeatable).  [default: SDR]",
)
@click.option(
    "--threshold",
    default=significance_threshold,
    show_default=True,
    type=click.FloatRange(0, 1),
    help="p-value below which a pair is marked significant.",
)
@fatal_errors
def compare(
    reports: tuple[Path],
    output: Path,
    targets: tuple[str],
    metrics: tuple[str],
    threshold: float,
) -> None:
    """Pairwise significance between the methods of REPORTS."""
    table = aggregate(load_reports(reports))
    if len(table.methods) < 2:
        raise click.UsageError(f"Need at least two methods to compare, got {table.methods}.")

    reported = set(table.track_medians["target"])
    targets = targets or [t for t in target_iter() if t in reported]
    output.mkdir(parents=True, exist_ok=True)
    for target in targets:
        for metric in metrics or ["SDR"]:
            medians = table.track_table(target, metric)
            if medians.shape[1] < 2:
                logger.warning("Only %s report %s, skipping it.", list(medians.columns), target)
                continue
            matrix = pairwise_significance(medians, target, metric)
            matrix.to_csv(output / f"{target}_{metric}.csv")
            matrix.to_json(output / f"{target}_{metric}.json")
            log_matrix(matrix, threshold)


@cli.command()
@corpus_options
@click.option(
    "--tolerance",
    default=1e-2,
    show_default=True,
    type=float,
    help="Largest allowed difference between mixture and stem sum.",
)
@click.option(
    "--manifest",
    default=None,
    type=click.Path(dir_okay=False, path_type=Path),
    help="Write a JSON manifest of the tracks.",
)
@click.option("--skip-mixtures", is_flag=True, help="Only check the folder layout.")
@fatal_errors
def validate(
    corpus_root: Path,
    split: str | None,
    tracks: tuple[str],
    tolerance: float,
    manifest: Path | None,
    skip_mixtures: bool,
) -> None:
    """Check the corpus layout and that each mixture equals the sum of its stems."""
    corpus = scan_corpus(corpus_root).filter(split, tracks or None)
    for name in split_iter():
        logger.info("%s: %d tracks", name, len(corpus.split(name)))

    failed = []
    if not skip_mixtures:
        failed = [
            track.name for track in corpus if not validate_mixture(track, tolerance).passed
        ]
    if manifest is not None:
        write_manifest(corpus, manifest)
    if failed:
        logger.critical("%d mixtures do not match their stems: %s", len(failed), failed)
        sys.exit(1)


def main() -> None:
    """Entry point of the sepeval script."""
    cli(auto_envvar_prefix="SEPEVAL")


if __name__ == "__main__":
    main()

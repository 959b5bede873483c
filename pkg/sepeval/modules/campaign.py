"""
Evaluation campaigns: score estimate sets track by track, then aggregate.

Stems are scored against the four-stem reference set. The accompaniment is
scored against {vocals, accompaniment}, where the reference accompaniment is
the sum of the non-vocal stems and a missing accompaniment estimate is formed
the same way from the stem estimates. The MIX anchor writes the mixture as
its accompaniment estimate too.
"""

import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from functools import partial
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np
import pandas as pd
from tqdm import tqdm

from sepeval._constants import (
    accompaniment_stem_iter,
    eval_hop_seconds,
    eval_window_seconds,
    filter_len,
    stem_iter,
    target_iter,
)
from sepeval._exceptions import SepevalError
from sepeval.modules.audio import AudioSignal, load_wav, save_wav
from sepeval.modules.bss_eval import EvalMode, bss_eval
from sepeval.modules.dataset import TrackRef, accompaniment, load_track
from sepeval.modules.oracle import OracleConfig, OracleMethod, oracle_separate
from sepeval.modules.report import TrackScore

logger = logging.getLogger(__name__)

KEYS = ["method", "target", "metric"]


class EvalConfig:
    """Metric parameters shared by every track of a campaign."""

    def __init__(
        self,
        filter_len: int = filter_len,
        window_seconds: float = eval_window_seconds,
        hop_seconds: float = eval_hop_seconds,
        mode: EvalMode = EvalMode.v4_global,
        accompaniment: bool = True,
    ) -> None:
        self.filter_len = filter_len
        self.window_seconds = window_seconds
        self.hop_seconds = hop_seconds
        self.mode = mode
        self.accompaniment = accompaniment

    def __repr__(self) -> str:
        return (
            f"EvalConfig(L={self.filter_len}, window={self.window_seconds} s, "
            f"hop={self.hop_seconds} s, {self.mode.value})"
        )

    def samples(self, sample_rate: int) -> tuple[int, int]:
        """Window and hop in samples."""
        window = max(1, round(self.window_seconds * sample_rate))
        hop = max(1, round(self.hop_seconds * sample_rate))
        return window, hop


def score_estimates(
    track: str,
    method: str,
    stems: dict[str, AudioSignal],
    estimates: dict[str, AudioSignal],
    config: EvalConfig | None = None,
) -> TrackScore:
    """Score whichever targets have an estimate."""
    config = config if config is not None else EvalConfig()
    rate = stems["vocals"].sample_rate
    window, hop = config.samples(rate)
    evaluate = partial(
        bss_eval, filter_len=config.filter_len, window=window, hop=hop, mode=config.mode
    )

    stems_order = list(stem_iter())
    present = [stem for stem in stems_order if stem in estimates]
    targets = {}
    if present:
        references = [stems[stem] for stem in stems_order]
        scores = evaluate(
            references,
            [estimates[stem] for stem in present],
            targets=[stems_order.index(stem) for stem in present],
        )
        targets.update(zip(present, scores))

    accompaniment_estimate = estimates.get("accompaniment")
    if (
        accompaniment_estimate is None
        and config.accompaniment
        and all(stem in estimates for stem in accompaniment_stem_iter())
    ):
        accompaniment_estimate = accompaniment(estimates)
    if accompaniment_estimate is not None:
        references = [stems["vocals"], accompaniment(stems)]
        (scores,) = evaluate(references, [accompaniment_estimate], targets=[1])
        targets["accompaniment"] = scores

    ordered = {target: targets[target] for target in target_iter() if target in targets}
    return TrackScore(track, method, ordered, rate)


def evaluate_track(
    track: TrackRef,
    estimates_dir: Path,
    method_name: str,
    config: EvalConfig | None = None,
) -> TrackScore:
    """Score the <target>.wav estimates of one track against its stems."""
    estimates_dir = Path(estimates_dir)
    _, stems = load_track(track)

    estimates = {}
    for target in target_iter():
        path = estimates_dir / f"{target}.wav"
        if not path.is_file():
            logger.warning("No %s estimate for %s in %s.", target, track.name, estimates_dir)
            continue
        estimates[target] = load_wav(path)

    score = score_estimates(track.name, method_name, stems, estimates, config)
    logger.debug("Scored %s", score)
    return score


def oracle_track(
    track: TrackRef,
    method: OracleMethod,
    output_dir: Path,
    oracle_config: OracleConfig | None = None,
    eval_config: EvalConfig | None = None,
) -> TrackScore:
    """Separate one track with an oracle, write the estimates and score them."""
    mixture, stems = load_track(track)
    names = list(stems)
    separated = oracle_separate(mixture, list(stems.values()), method, oracle_config, names)

    track_dir = Path(output_dir) / track.name
    track_dir.mkdir(parents=True, exist_ok=True)
    estimates = dict(zip(names, separated))
    if method is OracleMethod.MIX:
        # the anchor's accompaniment is the mixture, not the sum of its stem estimates
        estimates["accompaniment"] = AudioSignal(mixture.samples.copy(), mixture.sample_rate)
    for name, estimate in estimates.items():
        save_wav(track_dir / f"{name}.wav", estimate)

    return score_estimates(track.name, method.value, stems, estimates, eval_config)


def evaluate_in_root(
    track: TrackRef, estimates_root: Path, method_name: str, config: EvalConfig | None = None
) -> TrackScore:
    """evaluate_track on estimates_root/<track name>/, for use with run_tracks."""
    return evaluate_track(track, Path(estimates_root) / track.name, method_name, config)


def run_tracks(
    tracks: Sequence[TrackRef],
    job: Callable[[TrackRef], TrackScore],
    workers: int = 1,
    desc: str = "tracks",
) -> tuple[list[TrackScore], list[str]]:
    """
    Run a per-track job on a bounded pool of worker processes.

    job must be picklable when workers > 1. Failing tracks are logged and
    returned by name. Scores come back sorted by track name.
    """
    scores, failed = [], []

    def record(track: TrackRef, result: Callable[[], TrackScore]) -> None:
        try:
            scores.append(result())
        except SepevalError as e:
            logger.warning("Track %s failed: %s", track.name, e)
            failed.append(track.name)

    progress = tqdm(total=len(tracks), desc=desc, unit="track", leave=False)
    if workers <= 1:
        for track in tracks:
            record(track, partial(job, track))
            progress.update()
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {pool.submit(job, track): track for track in tracks}
            for future in as_completed(futures):
                record(futures[future], future.result)
                progress.update()
    progress.close()

    scores.sort(key=lambda score: score.track)
    return scores, sorted(failed)


def score_frame(scores: Iterable[TrackScore]) -> pd.DataFrame:
    """Long table of every frame score; non-finite scores become NaN."""
    rows = []
    for score in scores:
        for target, frames in score.targets.items():
            for index, frame in enumerate(frames):
                for metric, value in frame.as_dict().items():
                    rows.append((score.method, target, metric, score.track, index, value))
    frame = pd.DataFrame(rows, columns=KEYS + ["track", "frame", "score"])
    frame["score"] = frame["score"].astype(np.float64)
    frame["score"] = frame["score"].where(np.isfinite(frame["score"]))
    return frame


class AggregateTable:
    """
    Per-track medians and campaign medians per (method, target, metric).

    Medians are taken over finite frames; groups without any are NaN.
    """

    def __init__(self, track_medians: pd.DataFrame, campaign: pd.DataFrame, how: str) -> None:
        self.track_medians = track_medians
        self.campaign = campaign
        self.how = how

    def __repr__(self) -> str:
        return f"AggregateTable({len(self.campaign)} groups, by {self.how})"

    @property
    def methods(self) -> list[str]:
        """Sorted method names."""
        return sorted(self.campaign["method"].unique())

    def median(self, method: str, target: str, metric: str) -> float:
        """Return the campaign median of one group."""
        row = self.campaign[
            (self.campaign["method"] == method)
            & (self.campaign["target"] == target)
            & (self.campaign["metric"] == metric)
        ]
        if row.empty:
            raise KeyError((method, target, metric))
        return float(row["campaign_median"].iloc[0])

    def track_table(self, target: str, metric: str) -> pd.DataFrame:
        """Track medians with one row per track and one column per method."""
        rows = self.track_medians[
            (self.track_medians["target"] == target) & (self.track_medians["metric"] == metric)
        ]
        return rows.pivot(index="track", columns="method", values="track_median")

    def to_frame(self) -> pd.DataFrame:
        """Return track medians joined with the campaign median of their group."""
        merged = self.track_medians.merge(self.campaign, on=KEYS, how="left")
        return merged[KEYS + ["track", "track_median", "campaign_median"]]

    def to_csv(self, path: Path) -> None:
        """Write the merged table as CSV."""
        self.to_frame().to_csv(path, index=False)

    def tracks_to_csv(self, path: Path) -> None:
        """Write track medians as one row per (track, method, target, metric)."""
        self.track_medians[["track"] + KEYS + ["track_median"]].to_csv(path, index=False)


def aggregate(scores: Sequence[TrackScore], how: str = "track") -> AggregateTable:
    """
    Median of each (track, method, target, metric) over finite frames, then a
    campaign median over tracks ("track") or over all frames pooled ("frames").
    """
    if not scores:
        raise ValueError("Cannot aggregate an empty set of scores.")
    if how not in ("track", "frames"):
        raise ValueError(f"Unknown aggregation {how!r}.")

    frames = score_frame(scores)
    track_medians = (
        frames.groupby(KEYS + ["track"])["score"].median().reset_index(name="track_median")
    )
    if how == "track":
        campaign = track_medians.groupby(KEYS)["track_median"].median()
    else:
        campaign = frames.groupby(KEYS)["score"].median()
    return AggregateTable(track_medians, campaign.reset_index(name="campaign_median"), how)

"""
Framewise score reports and their JSON form.

    {
      "schema_version": 1,
      "track": "<name>",
      "method": "<name>",
      "sample_rate": 44100,
      "targets": {
        "vocals": {
          "frames": [
            {"time": 0.0, "duration": 1.0,
             "SDR": {"score": 5.2, "status": "finite"},
             "ISR": {"score": null, "status": "inf"}, ...}
          ]
        }
      }
    }

A file holds one such object, or a list of them.
"""

import json
import logging
import math
from enum import Enum
from pathlib import Path
from typing import Iterable

from sepeval._constants import metric_iter, schema_version
from sepeval._exceptions import MalformedReport, SchemaVersionMismatch
from sepeval.modules.bss_eval import FrameScores

logger = logging.getLogger(__name__)


class ScoreStatus(Enum):
    """How a score is stored; only finite scores carry a value."""

    finite = "finite"
    inf = "inf"
    neg_inf = "neg_inf"
    undefined = "undefined"

    @classmethod
    def of(cls, score: float) -> "ScoreStatus":
        """Classify a score."""
        if math.isnan(score):
            return cls.undefined
        if math.isinf(score):
            return cls.inf if score > 0 else cls.neg_inf
        return cls.finite

    def value_of(self, score: float | None) -> float:
        """Return the score a stored entry stands for."""
        return {
            ScoreStatus.inf: math.inf,
            ScoreStatus.neg_inf: -math.inf,
            ScoreStatus.undefined: math.nan,
        }.get(self, score)


class TrackScore:
    """Framewise scores of one method on one track, per target."""

    def __init__(
        self,
        track: str,
        method: str,
        targets: dict[str, list[FrameScores]],
        sample_rate: int,
    ) -> None:
        self.track = track
        self.method = method
        self.targets = targets
        self.sample_rate = sample_rate

    def __repr__(self) -> str:
        return f"TrackScore({self.method} on {self.track}: {list(self.targets)})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, TrackScore):
            return NotImplemented
        return (self.track, self.method, self.sample_rate, self.targets) == (
            other.track,
            other.method,
            other.sample_rate,
            other.targets,
        )

    def as_dict(self) -> dict:
        """Return the JSON object of the report."""
        return {
            "schema_version": schema_version,
            "track": self.track,
            "method": self.method,
            "sample_rate": self.sample_rate,
            "targets": {
                target: {"frames": [self._frame_dict(frame) for frame in frames]}
                for target, frames in self.targets.items()
            },
        }

    def _frame_dict(self, frame: FrameScores) -> dict:
        entry = {
            "time": frame.window_start / self.sample_rate,
            "duration": frame.window_len / self.sample_rate,
        }
        for metric, score in frame.as_dict().items():
            status = ScoreStatus.of(score)
            entry[metric] = {
                "score": score if status is ScoreStatus.finite else None,
                "status": status.value,
            }
        return entry

    @classmethod
    def from_dict(cls, data: dict, path: Path) -> "TrackScore":
        """Rebuild a TrackScore from its JSON object."""
        if not isinstance(data, dict):
            raise MalformedReport(path, "report entries must be objects")
        version = data.get("schema_version")
        if version != schema_version:
            raise SchemaVersionMismatch(path, version, schema_version)

        try:
            rate = int(data["sample_rate"])
            targets = {}
            for target, body in data["targets"].items():
                frames = []
                for entry in body["frames"]:
                    scores = [
                        ScoreStatus(entry[metric]["status"]).value_of(entry[metric]["score"])
                        for metric in metric_iter()
                    ]
                    frames.append(
                        FrameScores(
                            *scores,
                            window_start=round(entry["time"] * rate),
                            window_len=round(entry["duration"] * rate),
                        )
                    )
                targets[target] = frames
            return cls(str(data["track"]), str(data["method"]), targets, rate)
        except (KeyError, TypeError, ValueError) as e:
            raise MalformedReport(path, f"{type(e).__name__}: {e}") from e


def write_report(scores: TrackScore | Iterable[TrackScore], path: Path) -> None:
    """Write one TrackScore as an object, several as a list."""
    if isinstance(scores, TrackScore):
        payload = scores.as_dict()
    else:
        payload = [score.as_dict() for score in scores]
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fout:
        json.dump(payload, fout, indent=1, ensure_ascii=False, allow_nan=False)
        fout.write("\n")
    logger.debug("Wrote %s", path)


def read_report(path: Path) -> list[TrackScore]:
    """Read every TrackScore stored in a report file."""
    path = Path(path)
    try:
        with open(path, encoding="utf-8") as fin:
            payload = json.load(fin)
    except json.JSONDecodeError as e:
        raise MalformedReport(path, str(e)) from e

    entries = payload if isinstance(payload, list) else [payload]
    return [TrackScore.from_dict(entry, path) for entry in entries]


def collect_reports(paths: Iterable[Path]) -> list[TrackScore]:
    """Read report files, searching directories recursively for *.json."""
    scores = []
    for path in paths:
        path = Path(path)
        files = sorted(path.rglob("*.json")) if path.is_dir() else [path]
        for file in files:
            scores.extend(read_report(file))
    return scores

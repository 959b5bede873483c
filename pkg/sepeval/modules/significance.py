"""
Pairwise significance of score differences between methods.

Scores are ranked within each track (Friedman ranking) and every pair of
methods is compared with Conover's post-hoc t statistic on the rank sums:

    t = |R_a - R_b| / sqrt(2 (n A - sum_j R_j^2) / ((n - 1)(k - 1)))

with n tracks, k methods, R_j the rank sum of method j and A the sum of all
squared ranks. p-values are two-sided on (n - 1)(k - 1) degrees of freedom
and are not corrected for multiple comparisons.
"""

import json
import logging
from pathlib import Path

import numpy as np
import pandas as pd
from scipy import stats

from sepeval._constants import significance_threshold

logger = logging.getLogger(__name__)


class SignificanceMatrix:
    """Symmetric matrix of pairwise p-values with a unit diagonal."""

    def __init__(
        self,
        methods: list[str],
        pvalues: np.ndarray,
        target: str = "",
        metric: str = "",
        friedman_pvalue: float = float("nan"),
        num_tracks: int = 0,
    ) -> None:
        self.methods = list(methods)
        self.pvalues = np.asarray(pvalues, dtype=np.float64)
        self.target = target
        self.metric = metric
        self.friedman_pvalue = friedman_pvalue
        self.num_tracks = num_tracks

    def __repr__(self) -> str:
        return f"SignificanceMatrix({self.target} {self.metric}, {self.methods})"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SignificanceMatrix):
            return NotImplemented
        return self.methods == other.methods and np.array_equal(
            self.pvalues, other.pvalues, equal_nan=True
        )

    def pvalue(self, a: str, b: str) -> float:
        """Return the p-value of one pair of methods."""
        return float(self.pvalues[self.methods.index(a), self.methods.index(b)])

    def to_frame(self) -> pd.DataFrame:
        """Return the matrix as a frame indexed by method on both axes."""
        return pd.DataFrame(self.pvalues, index=self.methods, columns=self.methods)

    def to_csv(self, path: Path) -> None:
        """Write the matrix as CSV."""
        self.to_frame().to_csv(path, index_label="method")

    def as_dict(self) -> dict:
        """Return the JSON object of the matrix; NaN p-values become null."""
        def clean(value: float) -> float | None:
            return None if np.isnan(value) else float(value)

        return {
            "target": self.target,
            "metric": self.metric,
            "num_tracks": self.num_tracks,
            "friedman_pvalue": clean(self.friedman_pvalue),
            "methods": self.methods,
            "pvalues": [[clean(p) for p in row] for row in self.pvalues],
        }

    def to_json(self, path: Path) -> None:
        """Write the matrix, its Friedman p-value and track count as JSON."""
        with open(path, "w", encoding="utf-8") as fout:
            json.dump(self.as_dict(), fout, indent=2, ensure_ascii=False)


def _conover(scores: np.ndarray) -> np.ndarray:
    """p-values for all pairs of columns of a complete (tracks, methods) block."""
    n, k = scores.shape
    ranks = stats.rankdata(scores, axis=1)
    rank_sums = ranks.sum(axis=0)
    total = n * np.sum(ranks**2) - np.sum(rank_sums**2)
    dof = (n - 1) * (k - 1)
    scale = np.sqrt(2 * total / dof) if total > 0 else 0.0

    pvalues = np.ones((k, k))
    for a in range(k):
        for b in range(a + 1, k):
            diff = abs(rank_sums[a] - rank_sums[b])
            if diff == 0:
                p = 1.0
            elif scale == 0:
                p = 0.0
            else:
                p = float(2 * stats.t.sf(diff / scale, dof))
            pvalues[a, b] = pvalues[b, a] = min(p, 1.0)
    return pvalues


def _friedman(scores: np.ndarray) -> float:
    if scores.shape[1] < 3 or scores.shape[0] < 2:
        return float("nan")
    if np.all(scores == scores[:, :1]):
        return 1.0
    return float(stats.friedmanchisquare(*scores.T).pvalue)


def pairwise_significance(
    track_medians: pd.DataFrame, target: str = "", metric: str = ""
) -> SignificanceMatrix:
    """
    Test every pair of methods for a difference in their per-track scores.

    track_medians has one row per track and one column per method; missing
    scores are NaN. Tracks scored by every method are tested jointly. If fewer
    than two such tracks exist, each pair is tested on its own common tracks,
    and pairs sharing fewer than two tracks get NaN.
    """
    methods = [str(m) for m in track_medians.columns]
    if len(methods) < 2:
        raise ValueError(f"Need at least two methods to compare, got {methods}.")

    values = track_medians.to_numpy(dtype=np.float64)
    complete = values[~np.isnan(values).any(axis=1)]
    if len(complete) >= 2:
        return SignificanceMatrix(
            methods, _conover(complete), target, metric, _friedman(complete), len(complete)
        )

    logger.warning(
        "Fewer than two tracks are scored by all of %s; testing pairs separately.", methods
    )
    k = len(methods)
    pvalues = np.eye(k)
    for a in range(k):
        for b in range(a + 1, k):
            pair = values[:, [a, b]]
            pair = pair[~np.isnan(pair).any(axis=1)]
            p = _conover(pair)[0, 1] if len(pair) >= 2 else np.nan
            pvalues[a, b] = pvalues[b, a] = p
    return SignificanceMatrix(methods, pvalues, target, metric, float("nan"), len(complete))


def significant_pairs(
    matrix: SignificanceMatrix, threshold: float = significance_threshold
) -> pd.DataFrame:
    """Boolean frame marking pairs with p below the threshold."""
    frame = matrix.to_frame()
    return frame.lt(threshold) & frame.notna()

"""
BSS Eval image metrics with time-invariant (v4) or per-window (v3) distortion filters.

An estimate is projected by least squares onto the span of delayed copies
(lags 0 .. L-1) of the reference channels, truncated to the N signal samples,
once over the target's own channels and once over all references. With P_j
and P_all those projections,

    s_target  = y_j
    e_spatial = P_j(estimate) - y_j
    e_interf  = P_all(estimate) - P_j(estimate)
    e_artif   = estimate - P_all(estimate)

and SDR, ISR, SIR, SAR are energy ratios of these components per window.

The normal equations use the Gram matrix of the delayed references, which is
block Toeplitz with blocks given by reference cross-correlations, less the
products of the few samples each delay pushes past the end. All correlations
come from one zero-padded real FFT per channel.
"""

import logging
from enum import Enum
from typing import Sequence

import numpy as np
import scipy.fft
import scipy.linalg

from sepeval._constants import (
    eval_hop_seconds,
    eval_window_seconds,
    filter_len,
    gram_loading,
    zero_energy_rtol,
)
from sepeval._exceptions import (
    FilterMismatch,
    InvalidWindow,
    LengthMismatch,
    NoReferences,
    WindowTooLarge,
)
from sepeval.modules.audio import AudioSignal

logger = logging.getLogger(__name__)


class EvalMode(Enum):
    """Track-global filters (v4) or filters recomputed per window (v3)."""

    v4_global = "v4"
    v3_windowed = "v3"


class ProjectionFilters:
    """
    FIR distortion filters of shape (W, J, I, I_est, L).

    taps[w, j, i, c] maps channel i of reference j to estimate channel c when
    projecting onto all references jointly. target_taps[w, j] holds the filters
    of the projection onto reference j alone. W is 1 in global mode and the
    number of evaluation windows in windowed mode; spans lists the
    (start, length) of the samples each filter set was fitted on.
    """

    def __init__(
        self,
        taps: np.ndarray,
        target_taps: np.ndarray,
        mode: EvalMode,
        spans: Sequence[tuple[int, int]],
        singular: bool = False,
    ) -> None:
        self.taps = taps
        self.target_taps = target_taps
        self.mode = mode
        self.spans = list(spans)
        self.singular = singular

    def __repr__(self) -> str:
        return f"ProjectionFilters({self.mode.value}, {self.taps.shape})"

    @property
    def filter_len(self) -> int:
        """Number of taps per filter."""
        return self.taps.shape[-1]

    def window(self, index: int) -> "ProjectionFilters":
        """Return the filter set fitted on one window as a single-span set."""
        return ProjectionFilters(
            self.taps[index : index + 1],
            self.target_taps[index : index + 1],
            self.mode,
            [self.spans[index]],
            self.singular,
        )


class Decomposition:
    """Four components of an estimate, each of shape (num_samples, channels)."""

    def __init__(
        self,
        s_target: np.ndarray,
        e_spatial: np.ndarray,
        e_interf: np.ndarray,
        e_artif: np.ndarray,
        sample_rate: int,
    ) -> None:
        self.s_target = s_target
        self.e_spatial = e_spatial
        self.e_interf = e_interf
        self.e_artif = e_artif
        self.sample_rate = sample_rate

    def __repr__(self) -> str:
        return f"Decomposition({self.s_target.shape})"

    def total(self) -> np.ndarray:
        """Sum of the components, equal to the estimate."""
        return self.s_target + self.e_spatial + self.e_interf + self.e_artif


class FrameScores:
    """SDR, ISR, SIR, SAR in dB for one window; nan marks undefined."""

    def __init__(
        self,
        sdr: float,
        isr: float,
        sir: float,
        sar: float,
        window_start: int,
        window_len: int,
    ) -> None:
        self.sdr = sdr
        self.isr = isr
        self.sir = sir
        self.sar = sar
        self.window_start = window_start
        self.window_len = window_len

    def __repr__(self) -> str:
        return (
            f"FrameScores(SDR={self.sdr:.3f}, ISR={self.isr:.3f}, SIR={self.sir:.3f}, "
            f"SAR={self.sar:.3f} @ {self.window_start}+{self.window_len})"
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FrameScores):
            return NotImplemented
        return (
            np.array_equal(self.values(), other.values(), equal_nan=True)
            and self.window_start == other.window_start
            and self.window_len == other.window_len
        )

    def values(self) -> np.ndarray:
        """Return [SDR, ISR, SIR, SAR]."""
        return np.array([self.sdr, self.isr, self.sir, self.sar])

    def as_dict(self) -> dict[str, float]:
        """Return scores keyed by metric name."""
        return dict(zip(("SDR", "ISR", "SIR", "SAR"), self.values().tolist()))


def frame_spans(num_samples: int, window: int, hop: int) -> list[tuple[int, int]]:
    """
    Return (start, length) of every evaluation window.

    Windows start at multiples of hop while they fit in the signal. When
    samples are left over and the next multiple of hop still falls inside the
    signal, a shorter final window starts there. With hop > window the gaps
    between windows stay unscored.
    """
    if window < 1 or hop < 1:
        raise InvalidWindow(window, hop)
    if window > num_samples:
        raise WindowTooLarge(window, num_samples)

    spans = [(start, window) for start in range(0, num_samples - window + 1, hop)]
    start = spans[-1][0] + hop
    if spans[-1][0] + window < num_samples and start < num_samples:
        spans.append((start, min(window, num_samples - start)))
    return spans


class _References:
    """
    Reference channels with their spectra, Gram matrix and cached factorizations.

    Channels are flattened as k = j * I + i, the unknowns as k * L + lag.
    """

    def __init__(self, references: np.ndarray, flen: int) -> None:
        # references: (J, N, I)
        self.num_sources, self.num_samples, self.num_channels = references.shape
        self.flen = flen
        self.signals = references
        self.channels = np.transpose(references, (0, 2, 1)).reshape(-1, self.num_samples)

        self.n_fft = scipy.fft.next_fast_len(self.num_samples + flen - 1, real=True)
        self.spectra = scipy.fft.rfft(self.channels, n=self.n_fft, axis=-1)
        self._gram = None
        self._factors = {}

    @property
    def num_refs(self) -> int:
        """Number of reference channels over all sources."""
        return self.num_sources * self.num_channels

    def _lags(self, spectrum: np.ndarray) -> np.ndarray:
        return scipy.fft.irfft(spectrum, n=self.n_fft, axis=-1)

    def _tail(self) -> np.ndarray:
        """
        Delayed reference samples pushed past the end of the signal, (L - 1, K * L).

        Row n, column k * L + lag holds channel k at N + n - lag when lag > n.
        """
        flen = self.flen
        blocks = []
        for channel in self.channels:
            last = np.concatenate((np.zeros(flen - 1), channel))[-(flen - 1) :]
            row = np.hstack(([0.0], last[::-1]))
            blocks.append(scipy.linalg.toeplitz(np.zeros(flen - 1), row))
        return np.hstack(blocks)

    @property
    def gram(self) -> np.ndarray:
        """
        Gram matrix of all delayed reference channels over the N signal samples.

        The full-support correlations give a block Toeplitz matrix; the products
        of the samples delayed past the end are then subtracted.
        """
        if self._gram is None:
            flen = self.flen
            size = self.num_refs * flen
            gram = np.zeros((size, size))
            for k in range(self.num_refs):
                for m in range(k + 1):
                    # corr[d] = sum_n r_k[n + d] r_m[n], negative d wrapped
                    corr = self._lags(self.spectra[k] * np.conj(self.spectra[m]))
                    block = scipy.linalg.toeplitz(
                        np.hstack((corr[0], corr[-1:-flen:-1])), r=corr[:flen]
                    )
                    gram[k * flen : (k + 1) * flen, m * flen : (m + 1) * flen] = block
                    gram[m * flen : (m + 1) * flen, k * flen : (k + 1) * flen] = block.T
            if flen > 1:
                tail = self._tail()
                gram -= tail.T @ tail
            self._gram = gram
        return self._gram

    def _scope(self, target: int | None) -> slice:
        if target is None:
            return slice(0, self.num_refs * self.flen)
        width = self.num_channels * self.flen
        return slice(target * width, (target + 1) * width)

    def correlate(self, estimate: np.ndarray) -> np.ndarray:
        """Inner products of each estimate channel with every delayed reference."""
        est_spectra = scipy.fft.rfft(estimate.T, n=self.n_fft, axis=-1)
        rhs = np.zeros((self.num_refs * self.flen, estimate.shape[1]))
        for k in range(self.num_refs):
            corr = self._lags(est_spectra * np.conj(self.spectra[k]))
            rhs[k * self.flen : (k + 1) * self.flen] = corr[:, : self.flen].T
        return rhs

    def solve(self, rhs: np.ndarray, target: int | None = None) -> tuple[np.ndarray, bool]:
        """Solve the normal equations over one target's channels or all of them."""
        scope = self._scope(target)
        if target not in self._factors:
            gram = self.gram[scope, scope]
            load = gram_loading * np.trace(gram) / gram.shape[0]
            try:
                if load <= 0:
                    raise np.linalg.LinAlgError("zero Gram matrix")
                factor = scipy.linalg.cho_factor(gram + load * np.eye(gram.shape[0]))
            except np.linalg.LinAlgError:
                factor = None
                logger.warning(
                    "Singular Gram matrix for %s, using the minimum-norm solution.",
                    "all references" if target is None else f"reference {target}",
                )
            self._factors[target] = factor

        factor = self._factors[target]
        if factor is None:
            solution, *_ = scipy.linalg.lstsq(self.gram[scope, scope], rhs[scope])
            return solution, True
        return scipy.linalg.cho_solve(factor, rhs[scope]), False

    def filters(self, estimate: np.ndarray) -> tuple[np.ndarray, np.ndarray, bool]:
        """Return joint taps (J, I, I_est, L), per-target taps and the singular flag."""
        rhs = self.correlate(estimate)
        num_est = estimate.shape[1]
        shape = (self.num_sources, self.num_channels, self.flen, num_est)

        solution, singular = self.solve(rhs)
        taps = np.transpose(solution.reshape(shape), (0, 1, 3, 2))

        target_taps = np.zeros_like(taps)
        for j in range(self.num_sources):
            solution, flag = self.solve(rhs, j)
            target_taps[j] = np.transpose(solution.reshape(shape[1:]), (0, 2, 1))
            singular = singular or flag
        return taps, target_taps, singular

    def project(self, taps: np.ndarray, target: int | None = None) -> np.ndarray:
        """
        Filter the references and sum, over the full support N + L - 1.

        taps has shape (J, I, I_est, L) for all references or (I, I_est, L)
        for the target alone.
        """
        if target is None:
            taps = taps.reshape(self.num_refs, taps.shape[-2], self.flen)
            channels = range(self.num_refs)
        else:
            channels = range(target * self.num_channels, (target + 1) * self.num_channels)
        tap_spectra = scipy.fft.rfft(taps, n=self.n_fft, axis=-1)

        total = np.zeros((taps.shape[-2], self.spectra.shape[-1]), dtype=np.complex128)
        for row, k in enumerate(channels):
            total += tap_spectra[row] * self.spectra[k]
        full = self._lags(total)[:, : self.num_samples + self.flen - 1]
        return full.T


def _stack(signals: Sequence[AudioSignal], name: str, shape: tuple | None = None) -> np.ndarray:
    stacked = []
    for signal in signals:
        if shape is not None and signal.samples.shape != shape:
            raise LengthMismatch(name, shape, signal.samples.shape)
        shape = signal.samples.shape
        stacked.append(signal.samples)
    return np.stack(stacked)


def compute_projection(
    references: Sequence[AudioSignal],
    estimate: AudioSignal,
    filter_len: int = filter_len,
    mode: EvalMode = EvalMode.v4_global,
    window: int | None = None,
    hop: int | None = None,
) -> ProjectionFilters:
    """
    Least-squares distortion filters from every reference channel to every estimate channel.

    In windowed mode one filter set is fitted per evaluation window.
    """
    if not references:
        raise NoReferences
    refs = _stack(references, "reference")
    est = _stack([estimate], "estimate", refs.shape[1:])[0]
    num_samples = refs.shape[1]
    if filter_len < 1 or filter_len > num_samples:
        raise FilterMismatch(f"filter length {filter_len} for {num_samples} samples")

    if mode is EvalMode.v4_global:
        spans = [(0, num_samples)]
    else:
        rate = estimate.sample_rate
        window = window if window is not None else int(eval_window_seconds * rate)
        hop = hop if hop is not None else int(eval_hop_seconds * rate)
        spans = frame_spans(num_samples, window, hop)

    taps, target_taps, singular = [], [], False
    for start, length in spans:
        segment = slice(start, start + length)
        fitted = _References(refs[:, segment], filter_len).filters(est[segment])
        taps.append(fitted[0])
        target_taps.append(fitted[1])
        singular = singular or fitted[2]
    return ProjectionFilters(np.stack(taps), np.stack(target_taps), mode, spans, singular)


def _decompose(refs: _References, estimate: np.ndarray, target: int, taps, target_taps):
    num_samples = estimate.shape[0]
    s_target = refs.signals[target]
    p_target = refs.project(target_taps[target], target)[:num_samples]
    p_all = refs.project(taps)[:num_samples]
    return s_target, p_target - s_target, p_all - p_target, estimate - p_all


def decompose(
    estimate: AudioSignal,
    references: Sequence[AudioSignal],
    target_index: int,
    filters: ProjectionFilters,
) -> Decomposition:
    """Split an estimate into target, spatial, interference and artifact components."""
    if not references:
        raise NoReferences
    refs = _stack(references, "reference")
    est = _stack([estimate], "estimate", refs.shape[1:])[0]
    if len(filters.spans) != 1 or filters.spans[0][1] != est.shape[0]:
        raise FilterMismatch(
            f"{len(filters.spans)} filter windows for one signal of {est.shape[0]} samples"
        )
    if filters.taps.shape[1:3] != (refs.shape[0], refs.shape[2]):
        raise FilterMismatch(f"taps {filters.taps.shape} for references {refs.shape}")
    if not 0 <= target_index < refs.shape[0]:
        raise FilterMismatch(f"target {target_index} out of {refs.shape[0]} references")

    components = _decompose(
        _References(refs, filters.filter_len),
        est,
        target_index,
        filters.taps[0],
        filters.target_taps[0],
    )
    return Decomposition(*components, estimate.sample_rate)


def _safe_db(num: float, den: float) -> float:
    if den == 0:
        return np.inf if num > 0 else np.nan
    if num == 0:
        return -np.inf
    return float(10 * np.log10(num / den))


def _frame_scores(components, start: int, length: int) -> FrameScores:
    s_target, e_spatial, e_interf, e_artif = (c[start : start + length] for c in components)
    s_filt = s_target + e_spatial
    estimate = s_filt + e_interf + e_artif

    floor = zero_energy_rtol * (np.sum(estimate**2) + np.sum(s_target**2))

    def energy(x: np.ndarray) -> float:
        value = float(np.sum(x**2))
        return value if value > floor else 0.0

    return FrameScores(
        sdr=_safe_db(energy(s_target), energy(e_spatial + e_interf + e_artif)),
        isr=_safe_db(energy(s_target), energy(e_spatial)),
        sir=_safe_db(energy(s_filt), energy(e_interf)),
        sar=_safe_db(energy(s_filt + e_interf), energy(e_artif)),
        window_start=start,
        window_len=length,
    )


def metrics_from_decomposition(d: Decomposition, window: int, hop: int) -> list[FrameScores]:
    """
    Framewise SDR, ISR, SIR and SAR in dB.

    Energies are summed over channels within each window. Zero denominators give
    +inf, zero numerators -inf, and zero over zero is undefined (nan).
    """
    components = (d.s_target, d.e_spatial, d.e_interf, d.e_artif)
    return [
        _frame_scores(components, start, length)
        for start, length in frame_spans(d.s_target.shape[0], window, hop)
    ]


def bss_eval(
    references: Sequence[AudioSignal],
    estimates: Sequence[AudioSignal],
    filter_len: int = filter_len,
    window: int | None = None,
    hop: int | None = None,
    mode: EvalMode = EvalMode.v4_global,
    targets: Sequence[int] | None = None,
) -> list[list[FrameScores]]:
    """
    Evaluate each estimate against its target reference.

    targets[e] is the reference index estimate e is paired with, by default
    the estimate's own position. window and hop are in samples and default
    to one second. Returns one list of FrameScores per estimate.
    """
    if not references:
        raise NoReferences
    refs = _stack(references, "reference")
    ests = _stack(estimates, "estimate", refs.shape[1:])
    num_samples = refs.shape[1]
    targets = list(targets) if targets is not None else list(range(len(estimates)))
    if len(targets) != len(estimates) or any(not 0 <= t < refs.shape[0] for t in targets):
        raise FilterMismatch(f"targets {targets} for {refs.shape[0]} references")
    if filter_len < 1 or filter_len > num_samples:
        raise FilterMismatch(f"filter length {filter_len} for {num_samples} samples")

    rate = references[0].sample_rate
    window = window if window is not None else int(eval_window_seconds * rate)
    hop = hop if hop is not None else int(eval_hop_seconds * rate)
    spans = frame_spans(num_samples, window, hop)

    if mode is EvalMode.v4_global:
        shared = _References(refs, filter_len)
        scores = []
        for est, target in zip(ests, targets):
            taps, target_taps, _ = shared.filters(est)
            components = _decompose(shared, est, target, taps, target_taps)
            scores.append([_frame_scores(components, start, n) for start, n in spans])
        return scores

    scores = [[] for _ in ests]
    for start, length in spans:
        segment = slice(start, start + length)
        local = _References(refs[:, segment], filter_len)
        for row, (est, target) in zip(scores, zip(ests, targets)):
            taps, target_taps, _ = local.filters(est[segment])
            components = _decompose(local, est[segment], target, taps, target_taps)
            frame = _frame_scores(components, 0, length)
            frame.window_start = start
            row.append(frame)
    return scores

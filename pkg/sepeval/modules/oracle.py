"""Oracle separation: masks computed from the true sources, applied to the mixture."""

import logging
from enum import Enum
from typing import Sequence

import numpy as np

from sepeval._constants import irm_alpha, mwf_iterations, mwf_regularization
from sepeval._exceptions import MaskShapeMismatch, UnknownMethod
from sepeval.modules.audio import AudioSignal
from sepeval.modules.masks import SourceImages, apply_mask, ibm_mask, irm_mask
from sepeval.modules.mwf import estimate_mwf_model, mwf_mask
from sepeval.modules.stft import StftConfig, istft, stft

logger = logging.getLogger(__name__)


class OracleMethod(Enum):
    """
    Oracle filtering methods.

    IRM takes its exponent from the configuration; IRM1 and IRM2 fix it.
    MIX is the negative anchor returning the mixture for every source.
    """

    IBM1 = "IBM1"
    IBM2 = "IBM2"
    IRM1 = "IRM1"
    IRM2 = "IRM2"
    IRM = "IRM"
    MWF = "MWF"
    MIX = "MIX"

    @classmethod
    def parse(cls, name: str) -> "OracleMethod":
        """Look a method up by case-insensitive name."""
        try:
            return cls(name.upper())
        except ValueError as e:
            raise UnknownMethod(name) from e


class OracleConfig:
    """Transform and method parameters for oracle separation."""

    def __init__(
        self,
        stft_config: StftConfig | None = None,
        alpha: float = irm_alpha,
        iterations: int = mwf_iterations,
        regularization: float = mwf_regularization,
        block_frames: int = 512,
    ) -> None:
        self.stft_config = stft_config if stft_config is not None else StftConfig()
        self.alpha = alpha
        self.iterations = iterations
        self.regularization = regularization
        self.block_frames = block_frames

    def __repr__(self) -> str:
        return (
            f"OracleConfig({self.stft_config}, alpha={self.alpha}, "
            f"iterations={self.iterations}, regularization={self.regularization})"
        )


def oracle_separate(
    mixture: AudioSignal,
    true_sources: Sequence[AudioSignal],
    method: OracleMethod | str,
    config: OracleConfig | None = None,
    labels: Sequence[str] | None = None,
) -> list[AudioSignal]:
    """
    Separate the mixture with the oracle of the given method.

    Returns one estimate per true source, trimmed to the mixture length.
    """
    config = config if config is not None else OracleConfig()
    if isinstance(method, str):
        method = OracleMethod.parse(method)

    expected = mixture.samples.shape
    for source in true_sources:
        if source.samples.shape != expected or source.sample_rate != mixture.sample_rate:
            raise MaskShapeMismatch(expected, source.samples.shape)

    if method is OracleMethod.MIX:
        return [AudioSignal(mixture.samples.copy(), mixture.sample_rate) for _ in true_sources]

    mix_spec = stft(mixture, config.stft_config)
    sources = SourceImages([stft(s, config.stft_config) for s in true_sources], labels)
    logger.debug("%s oracle on %s for %s", method.value, mix_spec, sources.labels)

    model = None
    if method is OracleMethod.MWF:
        # R_j pools every frame, so the model is fitted before blocking
        model = estimate_mwf_model(sources, config.iterations)

    estimates = np.zeros((len(sources),) + mix_spec.shape, dtype=np.complex128)
    num_frames = mix_spec.shape[1]
    for start in range(0, num_frames, config.block_frames):
        block = slice(start, min(start + config.block_frames, num_frames))
        block_mix = mix_spec.with_bins(mix_spec.bins[:, block])

        if method is OracleMethod.MWF:
            mask = mwf_mask(model.frames(block), config.regularization)
        elif method in (OracleMethod.IBM1, OracleMethod.IBM2):
            mask = ibm_mask(sources.frames(block), 1 if method is OracleMethod.IBM1 else 2)
        else:
            alpha = {OracleMethod.IRM1: 1.0, OracleMethod.IRM2: 2.0}.get(method, config.alpha)
            mask = irm_mask(sources.frames(block), alpha)

        for j in range(len(sources)):
            estimates[j, :, block] = apply_mask(mask, block_mix, j).bins

    return [istft(mix_spec.with_bins(bins), mixture.num_samples) for bins in estimates]

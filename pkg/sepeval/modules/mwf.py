"""
Local Gaussian model and multichannel Wiener filter.

Each source image is modelled per bin as y_j(f, t) ~ N(0, C_j(f, t)) with
C_j(f, t) = v_j(f, t) R_j(f). Given the true images the parameters are fitted
by alternating updates

    R_j(f)    = sum_t y_j y_j^H / sum_t v_j(f, t)
    v_j(f, t) = tr(R_j(f)^-1 y_j y_j^H) / I

starting from v_j = |y_j|^2 / I, and the Wiener gain of source j is
M_j = C_j (C_x + eps I)^-1 with C_x = sum_j C_j.
"""

import logging
from typing import Sequence

import numpy as np

from sepeval._constants import mwf_iterations, mwf_regularization
from sepeval.modules.masks import MatrixMask, SourceImages

logger = logging.getLogger(__name__)


class SpatialModel:
    """
    PSDs v_j of shape (J, F, T) and spatial covariances R_j of shape (J, F, I, I).

    Spatial covariances are trace-normalized to I, the scale living in v_j.
    Sources listed in degenerate were all-zero and carry R_j = identity, v_j = 0.
    """

    def __init__(
        self,
        psd: np.ndarray,
        spatial_cov: np.ndarray,
        labels: Sequence[str],
        degenerate: Sequence[str] = (),
        no_verify: bool = False,
    ) -> None:
        self.psd = psd
        self.spatial_cov = spatial_cov
        self.labels = list(labels)
        self.degenerate = list(degenerate)

        if not no_verify:
            self.verify()

    def __repr__(self) -> str:
        return f"SpatialModel({self.labels}, psd {self.psd.shape}, R {self.spatial_cov.shape})"

    @property
    def num_channels(self) -> int:
        """Number of channels of the mixture."""
        return self.spatial_cov.shape[-1]

    def verify(self) -> None:
        """Check non-negativity and Hermitian symmetry."""
        if np.any(self.psd < 0):
            raise ValueError("Power spectral densities must be non-negative.")
        asymmetry = np.abs(self.spatial_cov - np.conj(np.swapaxes(self.spatial_cov, -1, -2)))
        if asymmetry.size and asymmetry.max() > 1e-10:
            raise ValueError("Spatial covariance matrices must be Hermitian.")

    def frames(self, frame_slice: slice) -> "SpatialModel":
        """Restrict the PSDs to a range of frames."""
        return SpatialModel(
            self.psd[:, :, frame_slice],
            self.spatial_cov,
            self.labels,
            self.degenerate,
            no_verify=True,
        )

    def source_covariances(self) -> np.ndarray:
        """Return C_j(f, t) of shape (J, F, T, I, I)."""
        return self.psd[..., np.newaxis, np.newaxis] * self.spatial_cov[:, :, np.newaxis]


def estimate_mwf_model(sources: SourceImages, iterations: int = mwf_iterations) -> SpatialModel:
    """Fit v_j and R_j to the true source images."""
    y = sources.stacked()
    num_channels = y.shape[-1]
    identity = np.eye(num_channels)

    psd = np.sum(np.abs(y) ** 2, axis=-1) / num_channels
    # sum over frames of y y^H, fixed across iterations
    outer = np.einsum("jfti,jftk->jfik", y, np.conj(y))
    spatial_cov = np.broadcast_to(identity, outer.shape).astype(np.complex128)

    for _ in range(max(int(iterations), 1)):
        weight = psd.sum(axis=2)
        active = weight > 0
        spatial_cov = np.broadcast_to(identity, outer.shape).astype(np.complex128)
        spatial_cov[active] = outer[active] / weight[active][:, np.newaxis, np.newaxis]

        inverse = np.linalg.pinv(spatial_cov, hermitian=True)
        psd = np.einsum("jfti,jfik,jftk->jft", np.conj(y), inverse, y).real / num_channels
        # clear rounding noise below zero
        np.maximum(psd, 0.0, out=psd)

    # move the scale of R_j into v_j
    scale = np.trace(spatial_cov, axis1=-2, axis2=-1).real / num_channels
    spatial_cov = spatial_cov / scale[..., np.newaxis, np.newaxis]
    psd = psd * scale[..., np.newaxis]
    # restore exact Hermitian symmetry lost to rounding
    spatial_cov = 0.5 * (spatial_cov + np.conj(np.swapaxes(spatial_cov, -1, -2)))

    degenerate = [label for label, y_j in zip(sources.labels, y) if not np.any(y_j)]
    for label in degenerate:
        logger.warning("Source %s is silent, its spatial covariance is set to identity.", label)

    return SpatialModel(psd, spatial_cov, sources.labels, degenerate)


def mwf_mask(model: SpatialModel, regularization: float = mwf_regularization) -> MatrixMask:
    """
    Multichannel Wiener gains M_j = C_j (C_x + eps I)^-1.

    eps = regularization * max(1, tr(C_x) / I) per bin. With regularization 0
    the mixture covariance must be invertible at every bin.
    """
    num_channels = model.num_channels
    identity = np.eye(num_channels)

    cov = model.source_covariances()
    mix_cov = cov.sum(axis=0)
    load = regularization * np.maximum(
        1.0, np.trace(mix_cov, axis1=-2, axis2=-1).real / num_channels
    )
    inverse = np.linalg.inv(mix_cov + load[..., np.newaxis, np.newaxis] * identity)
    return MatrixMask(cov @ inverse[np.newaxis], model.labels)

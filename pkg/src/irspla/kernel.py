"""The isotropic RBF kernel over fingerprint vectors."""

from __future__ import annotations

import math

import attrs
import numpy as np
import numpy.typing as npt
from scipy.spatial.distance import cdist

from .errors import DimensionMismatch


def _check_positive(_instance: object, attribute: attrs.Attribute, value: float) -> None:
    if not (math.isfinite(value) and value > 0.0):
        msg = f"Kernel {attribute.name} must be finite and positive, got {value}"
        raise ValueError(msg)


def as_points(x: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Coerce fingerprints to a 2-D ``(m, d)`` float array; a 1-D input is one point."""
    arr = np.asarray(x, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr[np.newaxis, :]
    if arr.ndim != 2:
        msg = f"fingerprints must be a vector or an (m, d) matrix, got ndim={arr.ndim}"
        raise ValueError(msg)
    return arr


@attrs.frozen
class Kernel:
    """``k(a, b) = signal_variance * exp(-|a - b|^2 / (2 lengthscale^2))``.

    Args:
        signal_variance: Prior variance of the latent function, > 0.
        lengthscale: Isotropic lengthscale, > 0.
    """

    signal_variance: float = attrs.field(converter=float, validator=_check_positive)
    lengthscale: float = attrs.field(converter=float, validator=_check_positive)

    def __call__(self, a: npt.ArrayLike, b: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Cross-covariance matrix ``k(a_i, b_j)`` of shape ``(len(a), len(b))``.

        Raises:
            DimensionMismatch: If ``a`` and ``b`` have different feature lengths.
        """
        a = as_points(a)
        b = as_points(b)
        if a.shape[1] != b.shape[1]:
            msg = f"fingerprint lengths differ: {a.shape[1]} vs {b.shape[1]}"
            raise DimensionMismatch(msg)
        if a.shape[0] == 0 or b.shape[0] == 0:
            return np.zeros((a.shape[0], b.shape[0]))
        sq = cdist(a, b, metric="sqeuclidean")
        return self.signal_variance * np.exp(-0.5 * sq / self.lengthscale**2)

    def gram(self, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Symmetric Gram matrix ``K`` of a point set (no jitter)."""
        k = self(x, x)
        # cdist is not bit-symmetric for every input
        return 0.5 * (k + k.T)

    def diag(self, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """``k(x_i, x_i)``, which is ``signal_variance`` for every point."""
        return np.full(as_points(x).shape[0], self.signal_variance)

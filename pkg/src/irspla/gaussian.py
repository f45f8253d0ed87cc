"""Exact Gaussian algebra and probit-Gaussian moments.

These are the building blocks of expectation propagation: products and
quotients of univariate Gaussians (site updates and cavities), conditioning of
a bivariate Gaussian, and the moments of a Gaussian tilted by a probit factor.

Improper Gaussians (negative variance) are ordinary return values here. EP
cavity computations produce them legitimately, so the caller decides what to
do with one; they are only refused where a density is evaluated.
Normalisers are carried in log space.
"""

from __future__ import annotations

import math

import attrs
import numpy as np
import numpy.typing as npt
from scipy.special import log_ndtr, ndtr

from .errors import DegenerateProduct, NumericalUnderflow, SingularConditioning

_LOG_2PI = math.log(2.0 * math.pi)

# Below this the exp-log evaluation of N(z)/Phi(z) loses digits; switch to the
# continued fraction of the Mills ratio.
_ASYMPTOTIC_Z = -6.0
_CF_TERMS = 60


def _to_float(value: object) -> float:
    return float(value)  # type: ignore[arg-type]


@attrs.frozen
class Gaussian1D:
    """A univariate Gaussian N(mean, variance).

    ``variance`` may be negative (an improper cavity intermediate) or ``+inf``
    (a flat, zero-precision factor such as an uninitialised EP site).

    Args:
        mean: Location.
        variance: Variance; any real or ``+inf``.
    """

    mean: float = attrs.field(converter=_to_float)
    variance: float = attrs.field(converter=_to_float)

    @property
    def precision(self) -> float:
        """Inverse variance; zero for a flat factor."""
        return 1.0 / self.variance

    @property
    def proper(self) -> bool:
        """True for a normalisable Gaussian (finite positive variance)."""
        return 0.0 < self.variance < math.inf and math.isfinite(self.mean)

    @property
    def flat(self) -> bool:
        """True for the zero-precision limit (variance ``+inf``)."""
        return self.variance == math.inf

    def log_pdf(self, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Log density at ``x``.

        Raises:
            ValueError: If the Gaussian is not proper.
        """
        if not self.proper:
            msg = f"log_pdf needs a proper Gaussian, got variance {self.variance}"
            raise ValueError(msg)
        x = np.asarray(x, dtype=np.float64)
        return -0.5 * (_LOG_2PI + math.log(self.variance) + (x - self.mean) ** 2 / self.variance)


def _check_square_symmetric(instance: GaussianND, _attribute: attrs.Attribute, value: np.ndarray) -> None:
    n = instance.mean.shape[0]
    if value.shape != (n, n):
        msg = f"covariance must be {n}x{n} to match the mean, got shape {value.shape}"
        raise ValueError(msg)
    scale = max(float(np.max(np.abs(value))), 1e-300)
    if np.max(np.abs(value - value.T)) > 1e-10 * scale:
        msg = "covariance must be symmetric"
        raise ValueError(msg)


def _as_vector(value: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.atleast_1d(np.asarray(value, dtype=np.float64))


def _as_matrix(value: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.atleast_2d(np.asarray(value, dtype=np.float64))


@attrs.frozen(eq=False)
class GaussianND:
    """A multivariate Gaussian N(mean, covariance).

    Args:
        mean: Length-n mean vector.
        covariance: Symmetric n x n covariance (relative tolerance 1e-10).

    Raises:
        ValueError: If the shapes disagree or the covariance is not symmetric.
    """

    mean: npt.NDArray[np.float64] = attrs.field(converter=_as_vector)
    covariance: npt.NDArray[np.float64] = attrs.field(converter=_as_matrix, validator=_check_square_symmetric)

    @property
    def dim(self) -> int:
        """Dimension n."""
        return int(self.mean.shape[0])

    @property
    def proper(self) -> bool:
        """True when the covariance is positive semi-definite."""
        eig = np.linalg.eigvalsh(self.covariance)
        return bool(np.all(np.isfinite(self.mean)) and eig.min() >= -1e-12 * max(1.0, abs(eig.max())))

    def marginal(self, index: int) -> Gaussian1D:
        """Univariate marginal of coordinate ``index``."""
        return Gaussian1D(self.mean[index], self.covariance[index, index])


@attrs.frozen
class ProbitMoments:
    """Moments of ``Phi(label*(x-m)/v) N(x | mu, s2)``.

    Attributes:
        z: Standardised argument.
        Z: Zeroth moment, exactly ``Phi(z)``.
        log_Z: ``log Phi(z)``, evaluated without underflow.
        mean: Mean of the normalised tilted density.
        variance: Variance of the normalised tilted density.
    """

    z: float
    Z: float  # noqa: N815
    log_Z: float  # noqa: N815
    mean: float
    variance: float

    def as_gaussian(self) -> Gaussian1D:
        """The moment-matched Gaussian."""
        return Gaussian1D(self.mean, self.variance)


def gaussian_product(a: Gaussian1D, b: Gaussian1D) -> tuple[Gaussian1D, float]:
    """Multiply two Gaussian densities.

    ``N(x|a) N(x|b) = Z^-1 N(x|c)`` with ``C = (1/A + 1/B)^-1`` and
    ``c = C (a/A + b/B)``. Either factor may be improper or flat as long as the
    product has positive precision.

    Args:
        a: First factor.
        b: Second factor.

    Returns:
        ``(c, log_norm)`` where ``log_norm = log |Z^-1|``. It is ``-inf``
        when a factor is flat.

    Raises:
        DegenerateProduct: If ``1/A + 1/B <= 0``.
    """
    precision = a.precision + b.precision
    if not precision > 0.0:
        msg = f"product precision {precision} is not positive"
        raise DegenerateProduct(msg)
    variance = 1.0 / precision
    mean = variance * (a.mean * a.precision + b.mean * b.precision)
    spread = a.variance + b.variance
    if math.isinf(spread):
        log_norm = -math.inf
    else:
        log_norm = -0.5 * (_LOG_2PI + math.log(abs(spread))) - (a.mean - b.mean) ** 2 / (2.0 * spread)
    return Gaussian1D(mean, variance), log_norm


def gaussian_divide(num: Gaussian1D, den: Gaussian1D) -> Gaussian1D:
    """Divide two Gaussian densities (the EP cavity operation).

    The result has precision ``1/num.var - 1/den.var``. It may be improper
    (negative variance) or flat (variance ``+inf`` with mean 0).

    Args:
        num: Proper numerator.
        den: Denominator; may be flat.

    Raises:
        ValueError: If ``num`` is not proper.
    """
    if not num.proper:
        msg = f"numerator must be a proper Gaussian, got variance {num.variance}"
        raise ValueError(msg)
    precision = num.precision - den.precision
    if precision == 0.0:
        return Gaussian1D(0.0, math.inf)
    variance = 1.0 / precision
    return Gaussian1D(variance * (num.mean * num.precision - den.mean * den.precision), variance)


def _check_bivariate(joint: GaussianND, observed_index: int) -> int:
    if joint.dim != 2:
        msg = f"conditioning is implemented for 2-D Gaussians, got dimension {joint.dim}"
        raise ValueError(msg)
    if observed_index not in (0, 1):
        msg = f"observed_index must be 0 or 1, got {observed_index}"
        raise ValueError(msg)
    if joint.covariance[observed_index, observed_index] <= 1e-300:
        msg = "observed coordinate has no variance to condition on"
        raise SingularConditioning(msg)
    return 1 - observed_index


def conditional_moments(
    mean_free: npt.ArrayLike,
    var_free: npt.ArrayLike,
    cov: npt.ArrayLike,
    mean_observed: npt.ArrayLike,
    var_observed: npt.ArrayLike,
    observed_value: npt.ArrayLike,
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Covariance-form conditioning, elementwise over broadcast arrays.

    ``mean = mu_x + C/B (y - mu_y)`` and ``var = A - C^2/B`` with ``A``
    the free variance, ``B`` the observed variance and ``C`` their covariance.
    ``B`` must be positive.
    """
    gain = np.asarray(cov, dtype=np.float64) / np.asarray(var_observed, dtype=np.float64)
    mean = mean_free + gain * (np.asarray(observed_value, dtype=np.float64) - mean_observed)
    return mean, var_free - gain * cov


def condition_gaussian(joint: GaussianND, observed_index: int, observed_value: float) -> Gaussian1D:
    """Condition a bivariate Gaussian on one coordinate (covariance form).

    Returns ``N(mu_x + C B^-1 (y - mu_y), A - C B^-1 C)`` for the free
    coordinate.

    Raises:
        SingularConditioning: If the observed variance is <= 1e-300.
        ValueError: If ``joint`` is not 2-D.
    """
    free = _check_bivariate(joint, observed_index)
    mean, variance = conditional_moments(
        joint.mean[free],
        joint.covariance[free, free],
        joint.covariance[free, observed_index],
        joint.mean[observed_index],
        joint.covariance[observed_index, observed_index],
        observed_value,
    )
    return Gaussian1D(mean, variance)


def condition_gaussian_precision(joint: GaussianND, observed_index: int, observed_value: float) -> Gaussian1D:
    """Condition a bivariate Gaussian on one coordinate (precision form).

    Uses ``Lambda = Sigma^-1``: mean ``mu_x - Lxx^-1 Lxy (y - mu_y)``,
    variance ``Lxx^-1``. Agrees with :func:`condition_gaussian`.

    Raises:
        SingularConditioning: If the observed variance vanishes or the joint
            covariance is singular.
    """
    free = _check_bivariate(joint, observed_index)
    try:
        lam = np.linalg.inv(joint.covariance)
    except np.linalg.LinAlgError as err:
        msg = "joint covariance is singular"
        raise SingularConditioning(msg) from err
    lxx = lam[free, free]
    lxy = lam[free, observed_index]
    return Gaussian1D(
        joint.mean[free] - lxy / lxx * (observed_value - joint.mean[observed_index]),
        1.0 / lxx,
    )


def _continued_fraction_tail(x: npt.NDArray[np.float64]) -> npt.NDArray[np.float64]:
    """Return ``t`` with ``N(-x)/Phi(-x) = x + t`` for large positive ``x``."""
    tail = x.copy()
    for k in range(_CF_TERMS, 1, -1):
        tail = x + k / tail
    return 1.0 / tail


def _mills(z: npt.NDArray[np.float64]) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Return ``(N(z)/Phi(z), z + N(z)/Phi(z))`` without cancellation."""
    x = np.maximum(-z, -_ASYMPTOTIC_Z)
    tail = _continued_fraction_tail(x)
    direct = np.exp(-0.5 * z * z - 0.5 * _LOG_2PI - log_ndtr(z))
    far = z < _ASYMPTOTIC_Z
    ratio = np.where(far, x + tail, direct)
    gap = np.where(far, tail, z + direct)
    return ratio, gap


def inverse_mills_ratio(z: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Evaluate ``N(z)/Phi(z)`` stably for any real ``z``.

    For ``z >= -6`` this is ``exp(log N(z) - log Phi(z))``; below that a
    continued fraction of the Mills ratio is used.
    """
    ratio, _ = _mills(np.asarray(z, dtype=np.float64))
    return ratio


def probit_gaussian_moments(
    cavity: Gaussian1D, label: int = 1, bias_m: float = 0.0, scale_v: float = 1.0
) -> ProbitMoments:
    """Moments of a Gaussian tilted by a probit factor.

    Computes ``Z = int Phi(label*(x-m)/v) N(x|mu, s2) dx = Phi(z)`` with
    ``z = label*(mu-m) / (v*sqrt(1 + s2/v^2))``, plus the mean and variance
    of the normalised product. With ``m=0, v=1`` and ``label=y`` this is the
    EP site update for the probit likelihood ``Phi(y f)``.

    Args:
        cavity: Proper Gaussian being tilted.
        label: +1 or -1.
        bias_m: Probit offset ``m``.
        scale_v: Probit scale ``v``; any non-zero real.

    Returns:
        The tilted moments.

    Raises:
        ValueError: On an improper cavity, ``scale_v == 0`` or a bad label.
        NumericalUnderflow: If ``log Phi(z)`` or the moments are not finite.
    """
    if not cavity.proper:
        msg = f"cavity must be proper, got variance {cavity.variance}"
        raise ValueError(msg)
    if scale_v == 0.0 or not math.isfinite(scale_v):
        msg = f"scale_v must be a finite non-zero real, got {scale_v}"
        raise ValueError(msg)
    if label not in (-1, 1):
        msg = f"label must be +1 or -1, got {label}"
        raise ValueError(msg)

    sign = label * math.copysign(1.0, scale_v)
    spread = scale_v * scale_v + cavity.variance
    root = math.sqrt(spread)
    z = sign * (cavity.mean - bias_m) / root
    log_z = float(log_ndtr(z))
    if not math.isfinite(log_z):
        msg = f"log Phi({z}) is not finite"
        raise NumericalUnderflow(msg)
    ratio, gap = (float(v) for v in _mills(np.asarray(z)))
    mean = cavity.mean + sign * cavity.variance * ratio / root
    variance = cavity.variance - cavity.variance**2 * ratio * gap / spread
    if not (math.isfinite(mean) and math.isfinite(variance)):
        msg = f"tilted moments overflowed at z={z}"
        raise NumericalUnderflow(msg)
    return ProbitMoments(z=z, Z=float(ndtr(z)), log_Z=log_z, mean=mean, variance=variance)

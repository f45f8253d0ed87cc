"""Binary Gaussian process classification with a probit likelihood, fitted by EP.

The latent prior is a zero-mean GP with an RBF :class:`~irspla.kernel.Kernel`.
Each likelihood term ``Phi(y_i f_i)`` is replaced by an unnormalised Gaussian
site; sites are refined one at a time in random order until the site
parameters stop moving. Within a sweep the posterior follows each site update
through a rank-one correction; after the sweep it is rebuilt from the sites
through the Cholesky factor of ``B = I + S^1/2 K S^1/2``, which keeps
round-off from accumulating across sweeps.

Labels are ``+1``/``-1`` internally. At the public boundary identity class 1
maps to ``+1`` and class 0 maps to ``-1`` (see :func:`to_sign`).
"""

from __future__ import annotations

import logging
import math

import attrs
import numpy as np
import numpy.typing as npt
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.special import log_ndtr, ndtr

from .errors import EmptyInput, GramNotPD, LengthMismatch, NegativePredictiveVariance, NumericalUnderflow
from .gaussian import Gaussian1D, gaussian_divide, gaussian_product, probit_gaussian_moments
from .kernel import Kernel, as_points

logger = logging.getLogger(__name__)

_JITTER = 1e-10
_JITTER_STEP = 100.0
_JITTER_ESCALATIONS = 2


def to_sign(labels: npt.ArrayLike) -> npt.NDArray[np.int8]:
    """Map identity classes ``{0, 1}`` to probit signs ``{-1, +1}``.

    Raises:
        ValueError: If any label is not 0 or 1.
    """
    arr = np.asarray(labels)
    if arr.size and not np.all(np.isin(arr, (0, 1))):
        msg = "identity labels must be 0 or 1"
        raise ValueError(msg)
    return np.where(arr == 1, 1, -1).astype(np.int8)


def to_class(signs: npt.ArrayLike) -> npt.NDArray[np.int8]:
    """Inverse of :func:`to_sign`."""
    return (np.asarray(signs) > 0).astype(np.int8)


def _as_array(value: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.asarray(value, dtype=np.float64)


@attrs.frozen(eq=False)
class SiteParams:
    """Per-point Gaussian site approximations ``Z~_i N(f_i | mu~_i, s~_i^2)``.

    ``variance`` is ``+inf`` for an uninitialised (zero-precision) site, whose
    ``mean`` and ``log_z`` are then 0.
    """

    mean: npt.NDArray[np.float64] = attrs.field(converter=_as_array)
    variance: npt.NDArray[np.float64] = attrs.field(converter=_as_array)
    log_z: npt.NDArray[np.float64] = attrs.field(converter=_as_array)

    def __attrs_post_init__(self) -> None:
        """Check that the three arrays share one length."""
        if not (self.mean.shape == self.variance.shape == self.log_z.shape) or self.mean.ndim != 1:
            msg = "site arrays must be 1-D and share one length"
            raise LengthMismatch(msg)

    @classmethod
    def flat(cls, n: int) -> SiteParams:
        """``n`` uninitialised sites."""
        return cls(np.zeros(n), np.full(n, np.inf), np.zeros(n))

    @classmethod
    def from_natural(
        cls, precision: npt.NDArray[np.float64], shift: npt.NDArray[np.float64], log_z: npt.NDArray[np.float64]
    ) -> SiteParams:
        """Build from natural parameters ``tau~ = 1/s~^2`` and ``nu~ = mu~/s~^2``."""
        live = precision > 0.0
        safe = np.where(live, precision, 1.0)
        return cls(np.where(live, shift / safe, 0.0), np.where(live, 1.0 / safe, np.inf), log_z)

    @property
    def precision(self) -> npt.NDArray[np.float64]:
        """``tau~``; zero for flat sites."""
        return 1.0 / self.variance

    @property
    def shift(self) -> npt.NDArray[np.float64]:
        """``nu~ = tau~ mu~``."""
        return self.mean * self.precision

    def __len__(self) -> int:
        """Number of sites."""
        return int(self.mean.shape[0])


def _posterior(
    gram: npt.NDArray[np.float64], precision: npt.NDArray[np.float64], shift: npt.NDArray[np.float64]
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Return ``(mu, Sigma, L)`` with ``L = chol(I + sW K sW)``."""
    n = gram.shape[0]
    sw = np.sqrt(precision)
    lower = cholesky(np.eye(n) + sw[:, None] * gram * sw[None, :], lower=True)
    v = solve_triangular(lower, sw[:, None] * gram, lower=True)
    cov = gram - v.T @ v
    return cov @ shift, cov, lower


def posterior_from_sites(
    gram: npt.ArrayLike, sites: SiteParams
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Posterior ``(mu, Sigma)`` with ``Sigma = (K^-1 + S~^-1)^-1`` and ``mu = Sigma S~^-1 mu~``."""
    mean, cov, _ = _posterior(np.asarray(gram, dtype=np.float64), sites.precision, sites.shift)
    return mean, cov


def _jittered_gram(kernel: Kernel, x: npt.NDArray[np.float64]) -> tuple[npt.NDArray[np.float64], float]:
    gram = kernel.gram(x)
    n = gram.shape[0]
    jitter = _JITTER * kernel.signal_variance
    for attempt in range(_JITTER_ESCALATIONS + 1):
        candidate = gram + jitter * np.eye(n)
        try:
            cholesky(candidate, lower=True)
        except LinAlgError:
            if attempt == _JITTER_ESCALATIONS:
                break
            jitter *= _JITTER_STEP
            logger.info("Gram matrix not positive definite, raising jitter to %.1e", jitter)
            continue
        return candidate, jitter
    msg = f"Gram matrix is not positive definite even with jitter {jitter:.1e}"
    raise GramNotPD(msg)


def _log_marginal(
    mean: npt.NDArray[np.float64],
    cov: npt.NDArray[np.float64],
    lower: npt.NDArray[np.float64],
    precision: npt.NDArray[np.float64],
    shift: npt.NDArray[np.float64],
    y: npt.NDArray[np.int8],
) -> float:
    """``log Z_EP`` from the cavities of the final posterior, in log space."""
    diag = np.diag(cov)
    tau_n = 1.0 / diag - precision
    if np.any(tau_n <= 0.0):
        return -math.inf
    nu_n = mean / diag - shift
    log_hat = log_ndtr(y * nu_n / tau_n / np.sqrt(1.0 + 1.0 / tau_n))
    value = (
        np.sum(np.log(np.diag(lower)))
        - np.sum(log_hat)
        - 0.5 * shift @ cov @ shift
        - 0.5 * nu_n @ ((precision / tau_n * nu_n - 2.0 * shift) / (precision + tau_n))
        + 0.5 * np.sum(shift**2 / (tau_n + precision))
        - 0.5 * np.sum(np.log1p(precision / tau_n))
    )
    return float(-value)


def _site_log_z(log_hat: float, cavity: Gaussian1D, site: Gaussian1D) -> float:
    if site.flat:
        return 0.0
    _, log_norm = gaussian_product(cavity, site)
    return log_hat - log_norm


@attrs.frozen(eq=False)
class GpcModel:
    """A fitted (or empty) EP classifier.

    Immutable once built. Prediction helpers are cached at construction:
    the Cholesky factor of ``B`` and the weight vector ``alpha`` such that
    the latent predictive mean is ``k_*^T alpha``.

    Attributes:
        kernel: Covariance function.
        train_x: ``(n, d)`` training fingerprints.
        train_y: Training signs in ``{-1, +1}``.
        sites: Site parameters.
        posterior_mean: ``mu``.
        posterior_cov: ``Sigma``.
        log_marginal: ``log Z_EP`` (``-inf`` when a final cavity is improper).
        converged: Whether the site change fell below ``tol``.
        sweeps: Number of sweeps run.
        skipped: Site updates skipped because their cavity was improper.
        jitter: Diagonal jitter added to the Gram matrix.
    """

    kernel: Kernel
    train_x: npt.NDArray[np.float64]
    train_y: npt.NDArray[np.int8]
    sites: SiteParams
    posterior_mean: npt.NDArray[np.float64]
    posterior_cov: npt.NDArray[np.float64]
    log_marginal: float = 0.0
    converged: bool = True
    sweeps: int = 0
    skipped: int = 0
    jitter: float = 0.0
    _lower: npt.NDArray[np.float64] = attrs.field(init=False, repr=False)
    _alpha: npt.NDArray[np.float64] = attrs.field(init=False, repr=False)
    _sqrt_precision: npt.NDArray[np.float64] = attrs.field(init=False, repr=False)

    def __attrs_post_init__(self) -> None:
        """Cache the factors that prediction needs."""
        n = self.n
        if not (self.train_x.shape[0] == self.train_y.shape[0] == len(self.sites) == n):
            msg = "training inputs, labels and sites must share one length"
            raise LengthMismatch(msg)
        sw = np.sqrt(self.sites.precision)
        if n == 0:
            lower = np.zeros((0, 0))
            alpha = np.zeros(0)
        else:
            gram = self.kernel.gram(self.train_x) + self.jitter * np.eye(n)
            lower = cholesky(np.eye(n) + sw[:, None] * gram * sw[None, :], lower=True)
            shift = self.sites.shift
            alpha = shift - sw * cho_solve((lower, True), sw * (gram @ shift))
        object.__setattr__(self, "_lower", lower)
        object.__setattr__(self, "_alpha", alpha)
        object.__setattr__(self, "_sqrt_precision", sw)

    @classmethod
    def empty(cls, kernel: Kernel, dim: int) -> GpcModel:
        """A model with no training data; it predicts the prior."""
        return cls(
            kernel=kernel,
            train_x=np.zeros((0, dim)),
            train_y=np.zeros(0, dtype=np.int8),
            sites=SiteParams.flat(0),
            posterior_mean=np.zeros(0),
            posterior_cov=np.zeros((0, 0)),
        )

    @property
    def n(self) -> int:
        """Number of training points."""
        return int(self.train_x.shape[0])

    @property
    def dim(self) -> int:
        """Fingerprint length."""
        return int(self.train_x.shape[1])

    def _projection(self, x: npt.NDArray[np.float64]) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """Return ``(k(X_train, x), L^-1 sW k(X_train, x))``."""
        ks = self.kernel(self.train_x, x)
        v = solve_triangular(self._lower, self._sqrt_precision[:, None] * ks, lower=True)
        return ks, v

    def latent(self, x: npt.ArrayLike) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """Latent predictive means and variances at the rows of ``x``."""
        x = as_points(x)
        prior = self.kernel.diag(x)
        if self.n == 0:
            return np.zeros(x.shape[0]), prior
        ks, v = self._projection(x)
        return ks.T @ self._alpha, prior - np.sum(v * v, axis=0)

    def latent_pairs(self, xs: npt.ArrayLike, x_star: npt.ArrayLike) -> tuple[npt.NDArray[np.float64], ...]:
        """Joint latent moments of each ``xs[j]`` with one point ``x_star``.

        Returns:
            ``(mean_s, var_s, mean_star, var_star, cov)`` where ``mean_s``,
            ``var_s`` and ``cov`` have one entry per row of ``xs`` and the
            star moments are 0-d arrays.
        """
        xs = as_points(xs)
        xstar = as_points(x_star)
        both = np.vstack([xs, xstar])
        prior = self.kernel(xs, xstar)[:, 0]
        diag = self.kernel.diag(both)
        if self.n == 0:
            mean = np.zeros(both.shape[0])
            var = diag
            cov = prior
        else:
            ks, v = self._projection(both)
            mean = ks.T @ self._alpha
            var = diag - np.sum(v * v, axis=0)
            cov = prior - v[:, :-1].T @ v[:, -1]
        return mean[:-1], var[:-1], mean[-1], var[-1], cov


def ep_fit(
    train_x: npt.ArrayLike,
    train_y: npt.ArrayLike,
    kernel: Kernel,
    tol: float = 1e-6,
    max_sweeps: int = 100,
    *,
    damping: float = 1.0,
    seed: int | np.random.SeedSequence | None = 0,
) -> GpcModel:
    """Fit the EP approximation to the probit GP posterior.

    Args:
        train_x: ``(n, d)`` fingerprints.
        train_y: Signs in ``{-1, +1}``.
        kernel: Covariance function.
        tol: Convergence threshold on the largest change of any site mean or
            variance over one sweep.
        max_sweeps: Sweep budget. Running out only clears ``converged``.
        damping: Weight of the new site in natural parameters, in ``(0, 1]``.
        seed: Seed of the per-sweep permutation.

    Returns:
        The fitted model.

    Raises:
        EmptyInput: If there are no training points.
        LengthMismatch: If inputs and labels differ in length.
        ValueError: On labels outside ``{-1, +1}`` or a bad option.
        GramNotPD: If the Gram matrix stays indefinite after jitter escalation.
    """
    x = as_points(train_x)
    y = np.asarray(train_y).astype(np.int8).ravel()
    n = y.shape[0]
    if n == 0:
        msg = "ep_fit needs at least one training point"
        raise EmptyInput(msg)
    if x.shape[0] != n:
        msg = f"{x.shape[0]} fingerprints but {n} labels"
        raise LengthMismatch(msg)
    if not np.all(np.isin(y, (-1, 1))):
        msg = "training labels must be -1 or +1"
        raise ValueError(msg)
    if not 0.0 < damping <= 1.0:
        msg = f"damping must lie in (0, 1], got {damping}"
        raise ValueError(msg)
    if tol <= 0.0 or max_sweeps < 1:
        msg = f"need tol > 0 and max_sweeps >= 1, got {tol} and {max_sweeps}"
        raise ValueError(msg)

    gram, jitter = _jittered_gram(kernel, x)
    rng = np.random.default_rng(seed)
    precision = np.zeros(n)
    shift = np.zeros(n)
    log_z = np.zeros(n)
    cov = gram.copy()
    mean = np.zeros(n)
    lower = np.eye(n)
    skipped = 0
    converged = False
    sweep = 0
    while sweep < max_sweeps and not converged:
        sweep += 1
        old = SiteParams.from_natural(precision.copy(), shift.copy(), log_z.copy())
        skipped_now = 0
        for i in rng.permutation(n):
            site = Gaussian1D(*_site_moments(precision[i], shift[i]))
            cavity = gaussian_divide(Gaussian1D(mean[i], cov[i, i]), site)
            if not cavity.proper:
                skipped_now += 1
                continue
            try:
                tilted = probit_gaussian_moments(cavity, int(y[i]))
            except NumericalUnderflow:
                skipped_now += 1
                continue
            fresh = gaussian_divide(tilted.as_gaussian(), cavity)
            new_precision = fresh.precision if fresh.variance > 0.0 else 0.0
            new_shift = fresh.mean * new_precision
            new_precision = damping * new_precision + (1.0 - damping) * precision[i]
            new_shift = damping * new_shift + (1.0 - damping) * shift[i]
            delta = new_precision - precision[i]
            denom = 1.0 + delta * cov[i, i]
            if denom <= 0.0:
                skipped_now += 1
                continue
            precision[i] = new_precision
            shift[i] = new_shift
            log_z[i] = _site_log_z(tilted.log_Z, cavity, Gaussian1D(*_site_moments(new_precision, new_shift)))
            column = cov[:, i].copy()
            cov -= (delta / denom) * np.outer(column, column)
            mean = cov @ shift
        if skipped_now:
            logger.debug("sweep %d skipped %d improper cavities", sweep, skipped_now)
        skipped += skipped_now
        mean, cov, lower = _posterior(gram, precision, shift)
        new = SiteParams.from_natural(precision, shift, log_z)
        converged = _site_change(old, new) < tol

    if not converged:
        logger.warning("EP did not converge in %d sweeps (n=%d, %s)", max_sweeps, n, kernel)
    log_marginal = _log_marginal(mean, cov, lower, precision, shift, y)
    return GpcModel(
        kernel=kernel,
        train_x=x,
        train_y=y,
        sites=SiteParams.from_natural(precision, shift, log_z.copy()),
        posterior_mean=mean,
        posterior_cov=cov,
        log_marginal=log_marginal,
        converged=converged,
        sweeps=sweep,
        skipped=skipped,
        jitter=jitter,
    )


def _site_moments(precision: float, shift: float) -> tuple[float, float]:
    if precision > 0.0:
        return shift / precision, 1.0 / precision
    return 0.0, math.inf


def _site_change(old: SiteParams, new: SiteParams) -> float:
    both_flat = np.isinf(old.variance) & np.isinf(new.variance)
    one_flat = np.isinf(old.variance) ^ np.isinf(new.variance)
    if np.any(one_flat):
        return math.inf
    dv = np.abs(np.where(both_flat, 0.0, new.variance) - np.where(both_flat, 0.0, old.variance))
    dm = np.abs(new.mean - old.mean)
    return float(max(dv.max(initial=0.0), dm.max(initial=0.0)))


def latent_predict(model: GpcModel, x: npt.ArrayLike) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
    """Latent predictive ``(means, variances)`` at the rows of ``x``."""
    return model.latent(x)


def probit_of_latent(mean: npt.ArrayLike, variance: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """``Phi(mean / sqrt(1 + variance))``.

    Raises:
        NegativePredictiveVariance: If some ``1 + variance <= 0``.
    """
    radicand = 1.0 + np.asarray(variance, dtype=np.float64)
    if np.any(radicand <= 0.0):
        msg = f"predictive radicand {radicand.min()} is not positive"
        raise NegativePredictiveVariance(msg)
    return ndtr(np.asarray(mean, dtype=np.float64) / np.sqrt(radicand))


def predict_proba(model: GpcModel, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """``p(y = +1 | x)`` for each row of ``x``."""
    return probit_of_latent(*model.latent(x))


def predict(model: GpcModel, x_star: npt.ArrayLike) -> float:
    """``p(y_* = +1 | X, y, x_*)`` for one fingerprint; 0.5 for an empty model."""
    return float(predict_proba(model, x_star)[0])


def predict_label(model: GpcModel, x_star: npt.ArrayLike) -> int:
    """The Bayes-optimal class in ``{0, 1}``; a tie at 0.5 goes to class 1."""
    return int(predict(model, x_star) >= 0.5)


def predict_labels(model: GpcModel, x: npt.ArrayLike) -> npt.NDArray[np.int8]:
    """Vectorised :func:`predict_label`."""
    return (predict_proba(model, x) >= 0.5).astype(np.int8)

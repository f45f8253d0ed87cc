"""Two-point joint predictive probabilities of a fitted classifier.

For test points ``x_s`` and ``x_*`` the latent pair ``(f_s, f_*)`` is
bivariate Gaussian under the EP posterior. Given ``f_s`` the label ``y_s``
is conditionally independent of ``y_*``, so

    p(y_s=1, y_*=1) = int Phi(f_s) Phi(m_*(f_s) / sqrt(1 + v_*)) N(f_s | mu_s, s_ss) df_s

with ``m_*``/``v_*`` the moments of ``f_* | f_s``. That one entry is found by
adaptive quadrature; the other three follow from the single-point marginals.
"""

from __future__ import annotations

import logging

import attrs
import numpy as np
import numpy.typing as npt
from scipy.integrate import quad_vec
from scipy.special import ndtr

from .errors import DegenerateConditioning, QuadratureFailure
from .gaussian import GaussianND, conditional_moments
from .gpc import GpcModel, probit_of_latent

logger = logging.getLogger(__name__)

QUAD_TOL = 1e-8
_HALF_WIDTH = 12.0
_DRIFT = 1e-6
_DEGENERATE_VAR = 1e-12
_MIN_MARGINAL = 1e-12


def _as_table(value: npt.ArrayLike) -> npt.NDArray[np.float64]:
    table = np.asarray(value, dtype=np.float64)
    if table.shape != (2, 2):
        msg = f"joint table must be 2x2, got shape {table.shape}"
        raise ValueError(msg)
    return table


@attrs.frozen(eq=False)
class JointPredictive:
    """``table[a, b] = p(y_s = a, y_* = b)`` with classes ``0 <-> -1`` and ``1 <-> +1``.

    Attributes:
        table: The 2x2 probability table.
        renormalized: Set when clamping moved the total by more than 1e-6 and
            the table was rescaled.
    """

    table: npt.NDArray[np.float64] = attrs.field(converter=_as_table)
    renormalized: bool = False

    def prob(self, y_s: int, y_star: int) -> float:
        """Entry for signs ``y_s, y_star`` in ``{-1, +1}``."""
        return float(self.table[int(y_s > 0), int(y_star > 0)])

    @property
    def marginal_s(self) -> float:
        """``p(y_s = +1)``."""
        return float(self.table[1].sum())

    @property
    def marginal_star(self) -> float:
        """``p(y_* = +1)``."""
        return float(self.table[:, 1].sum())


def joint_positive(
    mean_s: npt.ArrayLike,
    var_s: npt.ArrayLike,
    mean_star: float,
    var_star: float,
    cov: npt.ArrayLike,
) -> npt.NDArray[np.float64]:
    """``p(y_s=+1, y_*=+1)`` for a batch of ``s`` points against one ``*`` point.

    Args:
        mean_s: Latent means at the ``s`` points.
        var_s: Latent variances at the ``s`` points.
        mean_star: Latent mean at ``x_*``.
        var_star: Latent variance at ``x_*``.
        cov: Latent covariances ``cov(f_s, f_*)``.

    Raises:
        QuadratureFailure: If the error estimate exceeds :data:`QUAD_TOL`.
    """
    mean_s = np.atleast_1d(np.asarray(mean_s, dtype=np.float64))
    var_s = np.atleast_1d(np.asarray(var_s, dtype=np.float64))
    cov = np.atleast_1d(np.asarray(cov, dtype=np.float64))
    out = np.empty_like(mean_s)

    # f_s is (numerically) a point mass: y_s and y_* decouple
    flat = var_s <= _DEGENERATE_VAR
    if np.any(flat):
        out[flat] = ndtr(mean_s[flat]) * probit_of_latent(mean_star, var_star)
    live = ~flat
    if not np.any(live):
        return out

    sd = np.sqrt(var_s[live])
    mu = mean_s[live]
    c, v = cov[live], var_s[live]
    _, cond_var = conditional_moments(mean_star, var_star, c, mu, v, mu)
    cond_scale = np.sqrt(1.0 + np.maximum(cond_var, 0.0))

    def integrand(t: float) -> npt.NDArray[np.float64]:
        f_s = mu + sd * t
        cond_mean, _ = conditional_moments(mean_star, var_star, c, mu, v, f_s)
        weight = np.exp(-0.5 * t * t) / np.sqrt(2.0 * np.pi)
        return ndtr(f_s) * ndtr(cond_mean / cond_scale) * weight

    value, err = quad_vec(integrand, -_HALF_WIDTH, _HALF_WIDTH, epsabs=QUAD_TOL / 10, epsrel=0.0, norm="max", limit=500)
    if not err <= QUAD_TOL:
        msg = f"quadrature error {err:.2e} exceeds {QUAD_TOL:.0e}"
        raise QuadratureFailure(msg)
    out[live] = value
    return out


def joint_tables(
    p11: npt.NDArray[np.float64], p_s: npt.NDArray[np.float64], p_star: float
) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.bool_]]:
    """Complete ``(m, 2, 2)`` tables from the ``(+1, +1)`` entries and the marginals.

    Entries are clamped to ``[0, 1]``; a table whose total then drifts from 1
    by more than 1e-6 is rescaled and flagged.
    """
    tables = np.empty((p11.shape[0], 2, 2))
    tables[:, 1, 1] = p11
    tables[:, 1, 0] = p_s - p11
    tables[:, 0, 1] = p_star - p11
    tables[:, 0, 0] = 1.0 - p_s - p_star + p11
    np.clip(tables, 0.0, 1.0, out=tables)
    total = tables.sum(axis=(1, 2))
    drift = np.abs(total - 1.0) > _DRIFT
    if np.any(drift):
        logger.debug("renormalising %d joint tables", int(drift.sum()))
        tables[drift] /= total[drift, None, None]
    return tables, drift


def latent_pair(model: GpcModel, x_s: npt.ArrayLike, x_star: npt.ArrayLike) -> GaussianND:
    """The bivariate latent posterior of ``(f_s, f_*)``."""
    mean_s, var_s, mean_star, var_star, cov = model.latent_pairs(x_s, x_star)
    c = float(cov[0])
    return GaussianND(
        [mean_s[0], mean_star],
        [[var_s[0], c], [c, var_star]],
    )


def joint_predict(model: GpcModel, x_s: npt.ArrayLike, x_star: npt.ArrayLike) -> JointPredictive:
    """``p(y_s, y_* | x_s, x_*)`` under the EP posterior.

    Equal inputs are allowed.

    Raises:
        QuadratureFailure: If the quadrature misses its tolerance.
    """
    pair = latent_pair(model, x_s, x_star)
    mean, cov = pair.mean, pair.covariance
    p11 = joint_positive(mean[0], cov[0, 0], mean[1], cov[1, 1], cov[0, 1])
    p_s = probit_of_latent(mean[:1], cov[0, 0])
    p_star = float(probit_of_latent(mean[1], cov[1, 1]))
    tables, drift = joint_tables(p11, p_s, p_star)
    return JointPredictive(tables[0], renormalized=bool(drift[0]))


@attrs.frozen(eq=False)
class ConditionalBatch:
    """Predictions at many ``x_s`` given a hypothetical label of one ``x_*``.

    Attributes:
        p_s: ``p(y_s = +1 | x_s)`` per ``s`` point.
        p_star: ``p(y_* = +1 | x_*)``.
        given_positive: ``p(y_s = +1 | x_s, x_*, y_* = +1)`` per ``s`` point.
        given_negative: ``p(y_s = +1 | x_s, x_*, y_* = -1)`` per ``s`` point.
    """

    p_s: npt.NDArray[np.float64]
    p_star: float
    given_positive: npt.NDArray[np.float64]
    given_negative: npt.NDArray[np.float64]


def conditional_batch(model: GpcModel, xs: npt.ArrayLike, x_star: npt.ArrayLike) -> ConditionalBatch:
    """Condition every ``xs`` prediction on both labels of ``x_*`` without retraining.

    Raises:
        DegenerateConditioning: If either ``p(y_* | x_*)`` is below 1e-12.
    """
    mean_s, var_s, mean_star, var_star, cov = model.latent_pairs(xs, x_star)
    p_s = probit_of_latent(mean_s, var_s)
    p_star = float(probit_of_latent(mean_star, var_star))
    if min(p_star, 1.0 - p_star) < _MIN_MARGINAL:
        msg = f"p(y_* | x_*) = {p_star} leaves nothing to condition on"
        raise DegenerateConditioning(msg)
    p11 = joint_positive(mean_s, var_s, float(mean_star), float(var_star), cov)
    tables, _ = joint_tables(p11, p_s, p_star)
    given_positive = np.clip(tables[:, 1, 1] / tables[:, :, 1].sum(axis=1), 0.0, 1.0)
    given_negative = np.clip(tables[:, 1, 0] / tables[:, :, 0].sum(axis=1), 0.0, 1.0)
    return ConditionalBatch(p_s, p_star, given_positive, given_negative)


def conditional_predict(model: GpcModel, x_s: npt.ArrayLike, x_star: npt.ArrayLike, y_star: int) -> float:
    """``p(y_s = +1 | x_s, x_*, y_*)`` as the joint over the ``x_*`` marginal.

    Raises:
        DegenerateConditioning: If ``p(y_* | x_*) < 1e-12``.
    """
    joint = joint_predict(model, x_s, x_star)
    column = 1 if y_star > 0 else 0
    denom = float(joint.table[:, column].sum())
    if denom < _MIN_MARGINAL:
        msg = f"p(y_*={y_star} | x_*) = {denom} leaves nothing to condition on"
        raise DegenerateConditioning(msg)
    return float(np.clip(joint.table[1, column] / denom, 0.0, 1.0))

"""Self-checks against independent oracles.

Most checks build small random instances (the probit-moment check walks a
fixed grid of cavities) and compare the library against something computed
another way: adaptive quadrature, likelihood-weighted Monte Carlo,
retraining, or plain arithmetic. ``full=True`` uses the large sample sizes;
the quick sizes run in seconds with looser tolerances.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable

import attrs
import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .acquisition import AcquisitionConfig, acquire_alu, expected_gain
from .channel import path_loss_db, stack_fingerprint, unstack_fingerprint
from .gaussian import Gaussian1D, probit_gaussian_moments
from .gpc import GpcModel, ep_fit, predict, predict_proba
from .joint import conditional_batch, conditional_predict, joint_predict
from .kernel import Kernel
from .pools import FingerprintPools

logger = logging.getLogger(__name__)


@attrs.frozen
class CheckResult:
    """Outcome of one check: worst observed error against its tolerance."""

    name: str
    passed: bool
    worst: float
    tolerance: float
    seconds: float = 0.0

    def __str__(self) -> str:
        """One report line."""
        mark = "ok  " if self.passed else "FAIL"
        return f"{mark} {self.name:<28} worst {self.worst:.3e} (tol {self.tolerance:.1e}, {self.seconds:.2f}s)"


def _instance(rng: np.random.Generator, n: int, d: int = 2) -> tuple[np.ndarray, np.ndarray]:
    x = rng.normal(size=(n, d))
    y = np.where(rng.random(n) < 0.5, -1, 1).astype(np.int8)
    y[0], y[-1] = 1, -1
    return x, y


_INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
MOMENT_TOL = 1e-8


def quadrature_moments(
    cavity: Gaussian1D, label: int = 1, m: float = 0.0, v: float = 1.0
) -> tuple[float, float, float]:
    """``Z``, mean and variance of ``Phi(label*(x-m)/v) N(x | cavity)`` by adaptive quadrature.

    Integrates over the standardised cavity variable with a breakpoint at the
    probit step. The variance is a second, central pass rather than
    ``E[x^2] - mean^2``.
    """
    mean, sd = cavity.mean, math.sqrt(cavity.variance)
    step = (m - mean) / sd
    options = {"epsabs": 0.0, "epsrel": 1e-12, "limit": 400, "points": [step] if abs(step) < 12.0 else None}

    def moment(center: float, power: int) -> float:
        def tilted(t: float) -> float:
            x = mean + sd * t
            return (x - center) ** power * float(ndtr(label * (x - m) / v)) * math.exp(-0.5 * t * t) * _INV_SQRT_2PI

        return integrate.quad(tilted, -12.0, 12.0, **options)[0]

    z = moment(0.0, 0)
    first = moment(0.0, 1) / z
    return z, first, moment(first, 2) / z


def probit_grid(points: int = 20) -> list[Gaussian1D]:
    """Cavities with means evenly spaced on ``[-6, 6]`` and variances log-spaced on ``[1e-3, 1e3]``."""
    return [Gaussian1D(mu, s2) for mu in np.linspace(-6.0, 6.0, points) for s2 in np.geomspace(1e-3, 1e3, points)]


def _moment_error(cavity: Gaussian1D, label: int = 1, m: float = 0.0, v: float = 1.0) -> float:
    mom = probit_gaussian_moments(cavity, label, m, v)
    z, mean, variance = quadrature_moments(cavity, label, m, v)
    return max(abs(mom.Z - z), abs(mom.mean - mean), abs(mom.variance - variance))


def check_probit_moments(points: int = 20) -> float:
    """Worst deviation of the closed-form tilted moments from quadrature on the cavity grid."""
    return max(_moment_error(cavity) for cavity in probit_grid(points))


def check_probit_factors(rng: np.random.Generator, cases: int) -> float:
    """As :func:`check_probit_moments` for random labels, offsets and (signed) scales."""
    worst = 0.0
    for _ in range(cases):
        cavity = Gaussian1D(rng.normal(scale=2.0), rng.uniform(0.05, 4.0))
        label = int(rng.choice([-1, 1]))
        m, v = rng.normal(), rng.choice([-1.0, 1.0]) * rng.uniform(0.3, 2.0)
        worst = max(worst, _moment_error(cavity, label, m, v))
    return worst


def mc_predict(model: GpcModel, x_star: np.ndarray, samples: int, rng: np.random.Generator) -> float:
    """Likelihood-weighted prior Monte Carlo estimate of ``p(y_* = +1)``."""
    points = np.vstack([model.train_x, x_star])
    cov = model.kernel.gram(points) + 1e-10 * np.eye(points.shape[0])
    f = rng.multivariate_normal(np.zeros(points.shape[0]), cov, size=samples, method="cholesky")
    log_w = np.sum(np.log(np.maximum(ndtr(model.train_y * f[:, :-1]), 1e-300)), axis=1)
    w = np.exp(log_w - log_w.max())
    return float(np.sum(w * ndtr(f[:, -1])) / np.sum(w))


def check_predict_mc(rng: np.random.Generator, cases: int, samples: int) -> float:
    """Worst gap between EP predictions and likelihood-weighted Monte Carlo."""
    worst = 0.0
    for _ in range(cases):
        x, y = _instance(rng, 3)
        model = ep_fit(x, y, Kernel(1.0, 1.0))
        x_star = rng.normal(size=2)
        worst = max(worst, abs(predict(model, x_star) - mc_predict(model, x_star, samples, rng)))
    return worst


def check_joint_marginals(rng: np.random.Generator, cases: int) -> float:
    """Worst gap between joint-table margins and single-point predictions."""
    worst = 0.0
    for _ in range(cases):
        x, y = _instance(rng, int(rng.integers(2, 11)))
        model = ep_fit(x, y, Kernel(rng.uniform(0.5, 3.0), rng.uniform(0.5, 2.0)))
        xs, xt = rng.normal(size=2), rng.normal(size=2)
        joint = joint_predict(model, xs, xt)
        worst = max(worst, abs(joint.marginal_s - predict(model, xs)), abs(joint.marginal_star - predict(model, xt)))
        worst = max(worst, abs(joint.table.sum() - 1.0))
    return worst


def check_joint_mc(rng: np.random.Generator, cases: int, samples: int) -> float:
    """Worst gap between the joint table and 2-D latent Monte Carlo."""
    worst = 0.0
    for _ in range(cases):
        x, y = _instance(rng, 2)
        model = ep_fit(x, y, Kernel(1.0, 1.0))
        xs, xt = rng.normal(size=2), rng.normal(size=2)
        mean_s, var_s, mean_t, var_t, cov = model.latent_pairs(xs, xt)
        sigma = np.array([[var_s[0], cov[0]], [cov[0], var_t]])
        f = rng.multivariate_normal([mean_s[0], mean_t], sigma, size=samples)
        ps, pt = ndtr(f[:, 0]), ndtr(f[:, 1])
        mc = np.array(
            [
                [np.mean((1 - ps) * (1 - pt)), np.mean((1 - ps) * pt)],
                [np.mean(ps * (1 - pt)), np.mean(ps * pt)],
            ]
        )
        worst = max(worst, float(np.abs(joint_predict(model, xs, xt).table - mc).max()))
    return worst


def check_conditional_retrain(rng: np.random.Generator, cases: int) -> float:
    """Worst gap between joint-based conditionals and retraining with ``(x_*, y_*)`` added."""
    worst = 0.0
    for _ in range(cases):
        x, y = _instance(rng, int(rng.integers(2, 7)))
        kernel = Kernel(1.0, 1.0)
        model = ep_fit(x, y, kernel)
        xs, xt = rng.normal(size=2), rng.normal(size=2)
        y_star = int(rng.choice([-1, 1]))
        refit = ep_fit(np.vstack([x, xt]), np.append(y, np.int8(y_star)), kernel)
        worst = max(worst, abs(conditional_predict(model, xs, xt, y_star) - predict(refit, xs)))
    return worst


def check_label_flip(rng: np.random.Generator, cases: int) -> float:
    """Worst violation of ``p(x | -y) = 1 - p(x | y)``."""
    worst = 0.0
    for _ in range(cases):
        x, y = _instance(rng, int(rng.integers(2, 9)))
        kernel = Kernel(1.0, 1.0)
        test = rng.normal(size=(5, 2))
        a = predict_proba(ep_fit(x, y, kernel, 1e-10), test)
        b = predict_proba(ep_fit(x, -y, kernel, 1e-10), test)
        worst = max(worst, float(np.abs(a + b - 1.0).max()))
    return worst


def check_importance_telescoping(rng: np.random.Generator, cases: int) -> float:
    """With every pool point evaluated, the weighted utility equals the plain pool average."""
    worst = 0.0
    for _ in range(cases):
        x, y = _instance(rng, 6)
        pool = rng.normal(size=(8, 2))
        model = ep_fit(x, y, Kernel(1.0, 1.0))
        pools = FingerprintPools(x, (y > 0).astype(np.int8), pool)
        report = acquire_alu(model, pools, AcquisitionConfig("alu", m1=8, m2=8, seed=int(rng.integers(1 << 31))))
        for index, utility in zip(report.candidates, report.utilities, strict=True):
            others = np.delete(pool, index, axis=0)
            cond = conditional_batch(model, others, pool[index])
            exact = float(np.mean(expected_gain(cond.p_s, cond.p_star, cond.given_positive, cond.given_negative)))
            worst = max(worst, abs(utility - exact))
    return worst


def check_channel_identities(rng: np.random.Generator, cases: int) -> float:
    """Stacking round trip and the path-loss reference values."""
    worst = abs(float(path_loss_db(1.0, 1.0)) - 32.4)
    worst = max(worst, abs(float(path_loss_db(10.0, 3.5)) - (53.4 + 20 * math.log10(3.5))))
    for _ in range(cases):
        m = rng.normal(size=(4, 2)) + 1j * rng.normal(size=(4, 2))
        worst = max(worst, float(np.abs(unstack_fingerprint(stack_fingerprint(m), 4, 2) - m).max()))
    return worst


def run_checks(*, full: bool = False, seed: int = 0) -> list[CheckResult]:
    """Run every check and return their results."""
    rng = np.random.default_rng(seed)
    cases = 50 if full else 5
    samples = 1_000_000 if full else 100_000
    mc_tol = 0.02 if full else 0.04
    plan: list[tuple[str, Callable[[], float], float]] = [
        ("probit moments / quadrature", check_probit_moments, MOMENT_TOL),
        ("probit factors / quadrature", lambda: check_probit_factors(rng, cases), MOMENT_TOL),
        ("predict / monte carlo", lambda: check_predict_mc(rng, max(2, cases // 5), samples), mc_tol),
        ("joint margins", lambda: check_joint_marginals(rng, cases), 1e-4),
        ("joint / monte carlo", lambda: check_joint_mc(rng, max(2, cases // 5), samples), mc_tol / 2),
        ("conditional / retraining", lambda: check_conditional_retrain(rng, cases), 0.05),
        ("label flip", lambda: check_label_flip(rng, cases), 1e-9),
        ("importance telescoping", lambda: check_importance_telescoping(rng, max(1, cases // 5)), 1e-9),
        ("channel identities", lambda: check_channel_identities(rng, cases), 1e-9),
    ]
    results = []
    for name, check, tol in plan:
        start = time.perf_counter()
        worst = check()
        result = CheckResult(name, bool(worst <= tol), worst, tol, time.perf_counter() - start)
        logger.info("%s", result)
        results.append(result)
    return results

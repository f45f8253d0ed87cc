"""Acquisition functions: which unlabeled fingerprint to send to the oracle next.

Every strategy draws up to ``m1`` candidates uniformly without replacement
from the unlabeled pool, scores them and returns the argmax (first index on
ties). The expected-error-reduction strategies score a candidate ``x_*`` as

    U(x_*) = mean over x_s of  E_{y_*}[ max_{y_s} p(y_s | x_s, x_*, y_*) ] - max_{y_s} p(y_s | x_s)

where ``x_s`` ranges over the rest of the pool.

* ``ro`` retrains the classifier for each hypothetical label.
* ``alu`` conditions the two-point joint predictive instead, with ``x_s``
  drawn in proportion to ``k(x_s, x_*)``.
* ``salu`` is ``alu`` with each max replaced by ``logsumexp(k p) / k``.

``random``, ``mes`` (predictive entropy) and ``bald`` (mutual information)
are the baselines.

Each call is a pure function of ``(model, pools, config.seed)``.
"""

from __future__ import annotations

import logging
import math
import time
from collections.abc import Callable

import attrs
import numpy as np
import numpy.typing as npt
from scipy.special import logsumexp

from .errors import DegenerateConditioning, IrsplaError, PoolExhausted, ZeroKernelMass
from .gpc import GpcModel, ep_fit, predict, predict_proba, probit_of_latent, to_sign
from .joint import conditional_batch
from .pools import FingerprintPools

logger = logging.getLogger(__name__)

STRATEGY_NAMES: tuple[str, ...] = ("random", "mes", "bald", "ro", "alu", "salu")

# C = sqrt(pi ln 2 / 2) in the Gaussian approximation of the expected probit entropy
_BALD_C2 = math.pi * math.log(2.0) / 2.0
_EER_SLACK = 1e-6
_MIN_MASS = 1e-300


def _check_strategy(_instance: object, _attribute: attrs.Attribute, value: str) -> None:
    if value not in STRATEGY_NAMES:
        msg = f"unknown strategy {value!r}; expected one of {', '.join(STRATEGY_NAMES)}"
        raise ValueError(msg)


def _check_count(_instance: object, attribute: attrs.Attribute, value: int) -> None:
    if isinstance(value, bool) or not isinstance(value, int):
        msg = f"{attribute.name} must be an integer, got {type(value).__name__}"
        raise TypeError(msg)
    if value < 1:
        msg = f"{attribute.name} must be at least 1, got {value}"
        raise ValueError(msg)


def _check_softmax_k(_instance: object, _attribute: attrs.Attribute, value: float) -> None:
    if not (math.isfinite(value) and value > 0.0):
        msg = f"softmax_k must be finite and positive, got {value}"
        raise ValueError(msg)


@attrs.frozen
class AcquisitionConfig:
    """Settings shared by all strategies.

    Args:
        strategy: One of :data:`STRATEGY_NAMES`.
        m1: Candidates ``x_*`` drawn per call.
        m2: Evaluation points ``x_s`` per candidate (capped at the pool).
        softmax_k: Sharpness of the smooth max in ``salu``.
        seed: Seed of this call's draws.
        ro_gain: ``"alu"`` (hard max) or ``"salu"`` (smooth max) gain in ``ro``.
        ep_tol: EP tolerance for the ``ro`` retrains.
        ep_max_sweeps: EP sweep budget for the ``ro`` retrains.
        ep_damping: EP damping for the ``ro`` retrains.
    """

    strategy: str = attrs.field(default="salu", validator=_check_strategy)
    m1: int = attrs.field(default=50, validator=_check_count)
    m2: int = attrs.field(default=100, validator=_check_count)
    softmax_k: float = attrs.field(default=10.0, converter=float, validator=_check_softmax_k)
    seed: int = 0
    ro_gain: str = attrs.field(default="alu", validator=attrs.validators.in_(("alu", "salu")))
    ep_tol: float = 1e-6
    ep_max_sweeps: int = 100
    ep_damping: float = 1.0


@attrs.frozen(eq=False)
class UtilityReport:
    """Scores of one acquisition call.

    Attributes:
        strategy: Strategy name.
        candidates: Unlabeled-pool indices of the scored candidates, in draw order.
        utilities: One score per candidate; ``-inf`` marks a failed candidate.
        chosen: Pool index of the selected candidate.
        seconds: Wall time of the call.
        zero_mass: Candidates scored 0 because nothing in the pool correlates with them.
    """

    strategy: str
    candidates: npt.NDArray[np.int64]
    utilities: npt.NDArray[np.float64]
    chosen: int
    seconds: float
    zero_mass: int = 0

    def to_record(self) -> dict[str, object]:
        """A JSON-ready dict for debugging dumps."""
        return {
            "strategy": self.strategy,
            "candidates": self.candidates.tolist(),
            "utilities": [u if math.isfinite(u) else None for u in self.utilities.tolist()],
            "chosen": self.chosen,
            "seconds": self.seconds,
            "zero_mass": self.zero_mass,
        }


def soft_max(p: npt.ArrayLike, k: float) -> npt.NDArray[np.float64]:
    """``logsumexp(k [p, 1-p]) / k``, the smooth ``max(p, 1-p)``."""
    p = np.asarray(p, dtype=np.float64)
    return logsumexp(k * np.stack([p, 1.0 - p]), axis=0) / k


def hard_max(p: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """``max(p, 1-p)``."""
    p = np.asarray(p, dtype=np.float64)
    return np.maximum(p, 1.0 - p)


def expected_gain(
    p_s: npt.ArrayLike,
    p_star: float,
    given_positive: npt.ArrayLike,
    given_negative: npt.ArrayLike,
    softmax_k: float | None = None,
) -> npt.NDArray[np.float64]:
    """Pointwise reduction in expected Bayes error from labeling ``x_*``.

    With ``softmax_k`` set, both maxima are replaced by the smooth max.
    """
    best = hard_max if softmax_k is None else (lambda q: soft_max(q, softmax_k))
    after = p_star * best(given_positive) + (1.0 - p_star) * best(given_negative)
    return after - best(p_s)


def bernoulli_entropy(p: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Entropy of a Bernoulli(p) in nats; 0 at ``p`` in ``{0, 1}``."""
    p = np.clip(np.asarray(p, dtype=np.float64), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log(p) + (1.0 - p) * np.log1p(-p))
    return np.nan_to_num(h, nan=0.0)


def bald_score(mean: npt.ArrayLike, variance: npt.ArrayLike) -> npt.NDArray[np.float64]:
    """Mutual information between the label and the latent, in nats.

    ``H[Phi(mu / sqrt(1 + s2))] - ln2 * C / sqrt(s2 + C^2) * exp(-mu^2 / (2 (s2 + C^2)))``
    """
    mean = np.asarray(mean, dtype=np.float64)
    variance = np.maximum(np.asarray(variance, dtype=np.float64), 0.0)
    spread = variance + _BALD_C2
    expected = math.log(2.0) * np.sqrt(_BALD_C2 / spread) * np.exp(-(mean**2) / (2.0 * spread))
    return bernoulli_entropy(probit_of_latent(mean, variance)) - expected


def priority_sample(
    weights: npt.ArrayLike, size: int, rng: np.random.Generator
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.float64]]:
    """Draw ``size`` indices without replacement with probability rising in ``weights``.

    Each item gets priority ``w / u`` with ``u ~ U(0, 1]``; the ``size``
    largest are kept. The returned multipliers ``max(w, tau) / w`` (``tau`` is
    the next largest priority, 0 when everything is kept) make
    ``sum(f[idx] * mult)`` an unbiased estimate of ``sum(f)``.

    This is the Horvitz-Thompson estimator of priority sampling: each kept
    item is weighted by the inverse of its conditional inclusion probability
    ``min(1, w / tau)``. It is not the fixed importance weight
    ``(1/n) / (w / sum(w))`` of a with-replacement draw, which would be
    biased for a sample drawn without replacement.

    Raises:
        ZeroKernelMass: If the total weight is below 1e-300.
    """
    w = np.asarray(weights, dtype=np.float64)
    if w.sum() < _MIN_MASS:
        msg = "no weight mass to sample from"
        raise ZeroKernelMass(msg)
    u = 1.0 - rng.random(w.shape[0])
    priority = w / u
    order = np.argsort(-priority, kind="stable")
    if size >= w.shape[0]:
        return np.sort(order), np.ones(w.shape[0])
    kept = order[:size]
    tau = priority[order[size]]
    mult = np.where(w[kept] > 0.0, np.maximum(w[kept], tau) / np.where(w[kept] > 0.0, w[kept], 1.0), 0.0)
    return kept, mult


def _draw_candidates(pools: FingerprintPools, config: AcquisitionConfig) -> tuple[npt.NDArray[np.int64], list]:
    if pools.n_unlabeled == 0:
        msg = "the unlabeled pool is empty"
        raise PoolExhausted(msg)
    root = np.random.SeedSequence(config.seed)
    draw, *streams = root.spawn(1 + min(config.m1, pools.n_unlabeled))
    candidates = np.random.default_rng(draw).choice(pools.n_unlabeled, size=len(streams), replace=False)
    return candidates.astype(np.int64), [np.random.default_rng(s) for s in streams]


def _report(
    config: AcquisitionConfig,
    candidates: npt.NDArray[np.int64],
    utilities: npt.NDArray[np.float64],
    start: float,
    zero_mass: int = 0,
) -> UtilityReport:
    chosen = int(candidates[int(np.argmax(utilities))])
    return UtilityReport(config.strategy, candidates, utilities, chosen, time.perf_counter() - start, zero_mass)


def _others(pools: FingerprintPools, index: int) -> npt.NDArray[np.int64]:
    return np.delete(np.arange(pools.n_unlabeled), index)


def acquire_random(model: GpcModel, pools: FingerprintPools, config: AcquisitionConfig) -> UtilityReport:  # noqa: ARG001
    """One uniformly drawn pool index, scored 0."""
    start = time.perf_counter()
    if pools.n_unlabeled == 0:
        msg = "the unlabeled pool is empty"
        raise PoolExhausted(msg)
    index = int(np.random.default_rng(config.seed).integers(pools.n_unlabeled))
    return _report(config, np.array([index]), np.zeros(1), start)


def acquire_mes(model: GpcModel, pools: FingerprintPools, config: AcquisitionConfig) -> UtilityReport:
    """Maximum predictive entropy."""
    start = time.perf_counter()
    candidates, _ = _draw_candidates(pools, config)
    utilities = bernoulli_entropy(predict_proba(model, pools.unlabeled_x[candidates]))
    return _report(config, candidates, utilities, start)


def acquire_bald(model: GpcModel, pools: FingerprintPools, config: AcquisitionConfig) -> UtilityReport:
    """Maximum mutual information between label and latent function."""
    start = time.perf_counter()
    candidates, _ = _draw_candidates(pools, config)
    utilities = bald_score(*model.latent(pools.unlabeled_x[candidates]))
    return _report(config, candidates, utilities, start)


def _joint_utility(
    model: GpcModel, pools: FingerprintPools, config: AcquisitionConfig, softmax_k: float | None
) -> UtilityReport:
    start = time.perf_counter()
    candidates, streams = _draw_candidates(pools, config)
    utilities = np.zeros(candidates.shape[0])
    zero_mass = 0
    for j, (index, rng) in enumerate(zip(candidates, streams, strict=True)):
        others = _others(pools, int(index))
        if others.size == 0:
            continue
        x_star = pools.unlabeled_x[index]
        weights = model.kernel(pools.unlabeled_x[others], x_star)[:, 0]
        try:
            picked, mult = priority_sample(weights, min(config.m2, others.size), rng)
            cond = conditional_batch(model, pools.unlabeled_x[others[picked]], x_star)
        except ZeroKernelMass:
            zero_mass += 1
            logger.debug("candidate %d has no kernel mass over the pool; utility 0", index)
            continue
        except DegenerateConditioning:
            logger.debug("candidate %d is predicted with certainty; utility 0", index)
            continue
        gain = expected_gain(cond.p_s, cond.p_star, cond.given_positive, cond.given_negative, softmax_k)
        utilities[j] = float(np.sum(gain * mult)) / others.size
    return _report(config, candidates, utilities, start, zero_mass)


def acquire_alu(model: GpcModel, pools: FingerprintPools, config: AcquisitionConfig) -> UtilityReport:
    """Expected error reduction through the joint predictive, hard max."""
    return _joint_utility(model, pools, config, None)


def acquire_salu(model: GpcModel, pools: FingerprintPools, config: AcquisitionConfig) -> UtilityReport:
    """Expected error reduction through the joint predictive, smooth max."""
    return _joint_utility(model, pools, config, config.softmax_k)


def acquire_ro(model: GpcModel, pools: FingerprintPools, config: AcquisitionConfig) -> UtilityReport:
    """Expected error reduction by retraining on both hypothetical labels.

    A candidate whose retrain fails is scored ``-inf`` and logged.
    """
    start = time.perf_counter()
    candidates, streams = _draw_candidates(pools, config)
    softmax_k = config.softmax_k if config.ro_gain == "salu" else None
    signs = to_sign(pools.labeled_y)
    utilities = np.zeros(candidates.shape[0])
    for j, (index, rng) in enumerate(zip(candidates, streams, strict=True)):
        others = _others(pools, int(index))
        if others.size == 0:
            continue
        xs = pools.unlabeled_x[rng.choice(others, size=min(config.m2, others.size), replace=False)]
        x_star = pools.unlabeled_x[index]
        train_x = np.vstack([pools.labeled_x, x_star])
        hypothetical = []
        try:
            for sign in (1, -1):
                refit = ep_fit(
                    train_x,
                    np.append(signs, np.int8(sign)),
                    model.kernel,
                    config.ep_tol,
                    config.ep_max_sweeps,
                    damping=config.ep_damping,
                    seed=config.seed,
                )
                hypothetical.append(predict_proba(refit, xs))
        except IrsplaError as err:
            logger.warning("retrain for candidate %d failed (%s); skipping it", index, err)
            utilities[j] = -math.inf
            continue
        p_s = predict_proba(model, xs)
        gain = expected_gain(p_s, predict(model, x_star), hypothetical[0], hypothetical[1], softmax_k)
        if softmax_k is None and gain.min() < -_EER_SLACK:
            logger.warning("candidate %d: expected error reduction %.2e below zero", index, gain.min())
        utilities[j] = float(gain.mean())
    return _report(config, candidates, utilities, start)


Strategy = Callable[[GpcModel, FingerprintPools, AcquisitionConfig], UtilityReport]

STRATEGIES: dict[str, Strategy] = {
    "random": acquire_random,
    "mes": acquire_mes,
    "bald": acquire_bald,
    "ro": acquire_ro,
    "alu": acquire_alu,
    "salu": acquire_salu,
}


def acquire(model: GpcModel, pools: FingerprintPools, config: AcquisitionConfig) -> UtilityReport:
    """Dispatch to the strategy named in ``config``."""
    return STRATEGIES[config.strategy](model, pools, config)

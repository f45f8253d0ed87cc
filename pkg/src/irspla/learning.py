"""The active-learning loop: fit, evaluate, acquire, query, repeat."""

from __future__ import annotations

import logging
import time
from collections.abc import Callable

import attrs
import numpy as np
import numpy.typing as npt
import pandas as pd

from .acquisition import AcquisitionConfig, UtilityReport, acquire
from .errors import IrsplaError, LoopAborted, PoolExhausted
from .gpc import GpcModel, ep_fit, predict_labels, to_sign
from .hyper import SearchSpace, fit_hyperparameters
from .metrics import compute_error_rate
from .kernel import Kernel, as_points
from .pools import FingerprintPools, SimulatedOracle, Standardizer

logger = logging.getLogger(__name__)

KERNEL_MODES = ("fixed", "fit_once", "refit")


@attrs.frozen
class KernelPolicy:
    """How the loop obtains kernel hyperparameters.

    Args:
        mode: ``"fixed"`` uses ``kernel`` throughout; ``"fit_once"`` grid-fits
            on the initial labeled set; ``"refit"`` grid-fits every iteration.
        kernel: The kernel for ``"fixed"`` mode.
        search_space: Grid for the fitting modes.
    """

    mode: str = attrs.field(default="fit_once", validator=attrs.validators.in_(KERNEL_MODES))
    kernel: Kernel | None = None
    search_space: SearchSpace = attrs.field(factory=SearchSpace)

    def __attrs_post_init__(self) -> None:
        """A fixed policy needs a kernel."""
        if self.mode == "fixed" and self.kernel is None:
            msg = "fixed kernel policy needs a kernel"
            raise ValueError(msg)


@attrs.frozen
class IterationRecord:
    """One point of a learning curve.

    ``chosen`` is -1 on the final record, which has no acquisition.
    """

    iteration: int
    labeled: int
    error_rate: float
    fit_seconds: float
    acquire_seconds: float = 0.0
    chosen: int = -1
    label: int = -1


@attrs.frozen
class LearningCurve:
    """Test error after each iteration, starting from the initial model."""

    records: tuple[IterationRecord, ...] = ()

    def __len__(self) -> int:
        """Number of recorded points."""
        return len(self.records)

    def append(self, record: IterationRecord) -> LearningCurve:
        """A new curve with ``record`` added."""
        return LearningCurve((*self.records, record))

    @property
    def error_rates(self) -> npt.NDArray[np.float64]:
        """Error rate per record."""
        return np.array([r.error_rate for r in self.records])

    def to_frame(self) -> pd.DataFrame:
        """One row per record."""
        columns = [f.name for f in attrs.fields(IterationRecord)]
        return pd.DataFrame([attrs.astuple(r) for r in self.records], columns=columns)


def error_rate(model: GpcModel, x: npt.ArrayLike, y: npt.ArrayLike) -> float:
    """Fraction of ``x`` whose predicted class differs from ``y``."""
    y = np.asarray(y).ravel()
    if y.size == 0:
        return float("nan")
    return compute_error_rate(y, predict_labels(model, x))


def iteration_seed(seed: int, iteration: int) -> int:
    """Seed of one iteration's acquisition, derived from the run seed."""
    return int(np.random.SeedSequence(seed, spawn_key=(iteration,)).generate_state(1)[0])


def egpc_loop(
    pools: FingerprintPools,
    oracle: SimulatedOracle,
    config: AcquisitionConfig,
    kernel_policy: KernelPolicy,
    iterations: int,
    test_x: npt.ArrayLike,
    test_y: npt.ArrayLike,
    *,
    stop_error: float | None = None,
    report_sink: Callable[[int, UtilityReport], None] | None = None,
) -> tuple[GpcModel, LearningCurve]:
    """Run the EGPC active-learning loop.

    Each iteration standardises fingerprints on the labeled pool, fits the
    classifier, records its test error, picks a fingerprint with the
    configured strategy, queries the oracle for its identity and moves it to
    the labeled pool. The record after the last move closes the curve, so a
    run of ``iterations`` produces ``iterations + 1`` records.

    Args:
        pools: Initial labeled and unlabeled pools.
        oracle: Label source; its query counter grows by one per move.
        config: Acquisition settings; ``config.seed`` is the run seed.
        kernel_policy: Kernel hyperparameter policy.
        iterations: Number of queries.
        test_x: Held-out fingerprints.
        test_y: Held-out identity classes.
        stop_error: Stop early once the test error is at or below this.
        report_sink: Called with ``(iteration, report)`` after each acquisition.

    Returns:
        The last fitted model and the learning curve.

    Raises:
        ValueError: If the labeled pool misses a class.
        PoolExhausted: If ``iterations`` exceeds the unlabeled pool.
        LoopAborted: If fitting or acquisition fails; carries the partial curve.
    """
    if np.unique(pools.labeled_y).shape[0] < 2:
        msg = "the labeled pool needs at least one sample of each class"
        raise ValueError(msg)
    if iterations > pools.n_unlabeled:
        msg = f"{iterations} iterations requested but only {pools.n_unlabeled} unlabeled samples"
        raise PoolExhausted(msg)
    test_x = as_points(test_x)
    kernel = kernel_policy.kernel
    curve = LearningCurve()
    model: GpcModel | None = None

    for iteration in range(iterations + 1):
        try:
            t0 = time.perf_counter()
            standardizer = Standardizer.fit(pools.labeled_x)
            scaled = pools.scaled(standardizer)
            signs = to_sign(scaled.labeled_y)
            if kernel_policy.mode == "refit" or kernel is None:
                kernel = fit_hyperparameters(
                    scaled.labeled_x,
                    signs,
                    kernel_policy.search_space,
                    tol=config.ep_tol,
                    max_sweeps=config.ep_max_sweeps,
                    seed=config.seed,
                )
            model = ep_fit(
                scaled.labeled_x,
                signs,
                kernel,
                config.ep_tol,
                config.ep_max_sweeps,
                damping=config.ep_damping,
                seed=config.seed,
            )
            fit_seconds = time.perf_counter() - t0
            err = error_rate(model, standardizer.transform(test_x), test_y)
            record = IterationRecord(iteration, pools.n_labeled, err, fit_seconds)
            if iteration == iterations or (stop_error is not None and err <= stop_error):
                curve = curve.append(record)
                break
            step = attrs.evolve(config, seed=iteration_seed(config.seed, iteration))
            report = acquire(model, scaled, step)
        except IrsplaError as err_:
            logger.error("run aborted at iteration %d: %s", iteration, err_)
            msg = f"iteration {iteration}: {err_}"
            raise LoopAborted(msg, curve) from err_
        if report_sink is not None:
            report_sink(iteration, report)
        label = oracle.query(pools.unlabeled_x[report.chosen])
        curve = curve.append(attrs.evolve(record, acquire_seconds=report.seconds, chosen=report.chosen, label=label))
        pools = pools.move(report.chosen, label)
        logger.debug(
            "iteration %d: error %.4f, queried pool index %d (label %d)", iteration, err, report.chosen, label
        )

    assert model is not None  # noqa: S101
    return model, curve

"""Kernel hyperparameter selection by grid search on the EP evidence."""

from __future__ import annotations

import logging
import math

import attrs
import numpy as np
import numpy.typing as npt
from scipy.spatial.distance import pdist, squareform

from .errors import AllFitsFailed, GramNotPD
from .gpc import ep_fit
from .kernel import Kernel, as_points

logger = logging.getLogger(__name__)

TIE_TOL = 1e-6
ISOLATION = 1e-3


def _check_bounds(_instance: object, attribute: attrs.Attribute, value: tuple[float, float]) -> None:
    low, high = value
    if not (0.0 < low <= high < math.inf):
        msg = f"{attribute.name} must satisfy 0 < low <= high < inf, got {value}"
        raise ValueError(msg)


def _check_points(_instance: object, _attribute: attrs.Attribute, value: int) -> None:
    if value < 1:
        msg = f"points must be at least 1, got {value}"
        raise ValueError(msg)


def _as_pair(value: object) -> tuple[float, float]:
    low, high = value  # type: ignore[misc]
    return float(low), float(high)


@attrs.frozen
class SearchSpace:
    """A log-spaced grid over ``(signal_variance, lengthscale)``.

    Args:
        signal_variance: ``(low, high)`` bounds.
        lengthscale: ``(low, high)`` bounds.
        points: Grid points per axis.
    """

    signal_variance: tuple[float, float] = attrs.field(default=(0.1, 100.0), converter=_as_pair, validator=_check_bounds)
    lengthscale: tuple[float, float] = attrs.field(default=(0.1, 100.0), converter=_as_pair, validator=_check_bounds)
    points: int = attrs.field(default=7, validator=_check_points)

    def axes(self) -> tuple[npt.NDArray[np.float64], npt.NDArray[np.float64]]:
        """The two grid axes."""
        return (
            np.geomspace(*self.signal_variance, self.points),
            np.geomspace(*self.lengthscale, self.points),
        )


def neighbour_distance(x: npt.NDArray[np.float64]) -> float:
    """Median distance from a point to its nearest other point."""
    dist = squareform(pdist(x))
    np.fill_diagonal(dist, np.inf)
    return float(np.median(dist.min(axis=1)))


def isolates_points(kernel: Kernel, spacing: float) -> bool:
    """True when the kernel correlates a typical point with its nearest neighbour below 1e-3.

    Such a kernel fits every training label on its own: the evidence is flat
    at ``n log 1/2`` and every new point predicts 0.5.
    """
    return bool(np.exp(-0.5 * (spacing / kernel.lengthscale) ** 2) < ISOLATION)


def fit_hyperparameters(
    train_x: npt.ArrayLike,
    train_y: npt.ArrayLike,
    search_space: SearchSpace | None = None,
    *,
    tol: float = 1e-6,
    max_sweeps: int = 100,
    seed: int = 0,
) -> Kernel:
    """Pick the grid kernel with the largest ``log Z_EP``.

    Kernels that isolate the training points (see :func:`isolates_points`)
    are only considered when nothing else fits. Evidence within
    :data:`TIE_TOL` of the best counts as a tie, and ties go to the larger
    lengthscale, then to the first signal variance visited.

    Raises:
        ValueError: With fewer than two points or a single class.
        AllFitsFailed: If every grid point fails or has no finite evidence.
    """
    space = search_space or SearchSpace()
    x = as_points(train_x)
    y = np.asarray(train_y).ravel()
    if y.shape[0] < 2 or np.unique(y).shape[0] < 2:
        msg = "hyperparameter fitting needs at least two points from both classes"
        raise ValueError(msg)

    spacing = neighbour_distance(x)
    usable: list[tuple[float, Kernel]] = []
    isolated: list[tuple[float, Kernel]] = []
    failures = 0
    sv_axis, ls_axis = space.axes()
    for sv in sv_axis:
        for ls in ls_axis:
            kernel = Kernel(sv, ls)
            try:
                model = ep_fit(x, y, kernel, tol, max_sweeps, seed=seed)
            except GramNotPD:
                failures += 1
                continue
            if math.isfinite(model.log_marginal):
                (isolated if isolates_points(kernel, spacing) else usable).append((model.log_marginal, kernel))
    if not usable and not isolated:
        msg = f"no usable fit on the {space.points}x{space.points} grid ({failures} Gram failures)"
        raise AllFitsFailed(msg)
    if not usable:
        logger.warning("every grid kernel isolates the training points (spacing %.3g)", spacing)
    candidates = usable or isolated
    best_evidence = max(evidence for evidence, _ in candidates)
    tied = [kernel for evidence, kernel in candidates if evidence >= best_evidence - TIE_TOL]
    best = max(tied, key=lambda k: k.lengthscale)
    logger.info("selected %s with log Z_EP %.4f", best, best_evidence)
    return best

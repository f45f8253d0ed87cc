"""Labeled/unlabeled fingerprint pools, the simulated label oracle, and feature scaling.

Pools are immutable: :meth:`FingerprintPools.move` returns a new pair with
one sample taken out of the unlabeled pool and appended to the labeled pool,
so a move either happens completely or not at all.
"""

from __future__ import annotations

import attrs
import numpy as np
import numpy.typing as npt

from .errors import LengthMismatch, PoolExhausted
from .kernel import as_points


def _row_keys(x: npt.NDArray[np.float64]) -> list[bytes]:
    return [np.ascontiguousarray(row).tobytes() for row in x]


def _as_classes(value: npt.ArrayLike) -> npt.NDArray[np.int8]:
    arr = np.asarray(value).astype(np.int8).ravel()
    if arr.size and not np.all(np.isin(arr, (0, 1))):
        msg = "identity labels must be 0 or 1"
        raise ValueError(msg)
    return arr


@attrs.frozen(eq=False)
class FingerprintPools:
    """The labeled set ``(labeled_x, labeled_y)`` and the unlabeled pool ``unlabeled_x``.

    Args:
        labeled_x: ``(n, d)`` labeled fingerprints.
        labeled_y: Identity classes in ``{0, 1}``.
        unlabeled_x: ``(m, d)`` unlabeled fingerprints.

    Raises:
        LengthMismatch: If labeled inputs and labels differ in length.
        ValueError: If a fingerprint sits in both pools or the widths differ.
    """

    labeled_x: npt.NDArray[np.float64] = attrs.field(converter=as_points)
    labeled_y: npt.NDArray[np.int8] = attrs.field(converter=_as_classes)
    unlabeled_x: npt.NDArray[np.float64] = attrs.field(converter=as_points)

    def __attrs_post_init__(self) -> None:
        """Check shapes and pool disjointness."""
        if self.labeled_x.shape[0] != self.labeled_y.shape[0]:
            msg = f"{self.labeled_x.shape[0]} labeled fingerprints but {self.labeled_y.shape[0]} labels"
            raise LengthMismatch(msg)
        if self.labeled_x.shape[1] != self.unlabeled_x.shape[1] and self.unlabeled_x.shape[0]:
            msg = "labeled and unlabeled fingerprints differ in length"
            raise ValueError(msg)
        if set(_row_keys(self.labeled_x)) & set(_row_keys(self.unlabeled_x)):
            msg = "a fingerprint appears in both the labeled and the unlabeled pool"
            raise ValueError(msg)

    @property
    def n_labeled(self) -> int:
        """Labeled pool size."""
        return int(self.labeled_x.shape[0])

    @property
    def n_unlabeled(self) -> int:
        """Unlabeled pool size."""
        return int(self.unlabeled_x.shape[0])

    @property
    def dim(self) -> int:
        """Fingerprint length."""
        return int(self.labeled_x.shape[1])

    def move(self, index: int, label: int) -> FingerprintPools:
        """Label ``unlabeled_x[index]`` with ``label`` and return the new pools.

        Raises:
            PoolExhausted: If the unlabeled pool is empty.
            IndexError: If ``index`` is out of range.
        """
        if self.n_unlabeled == 0:
            msg = "the unlabeled pool is empty"
            raise PoolExhausted(msg)
        if not 0 <= index < self.n_unlabeled:
            msg = f"pool index {index} out of range for {self.n_unlabeled} samples"
            raise IndexError(msg)
        return FingerprintPools(
            np.vstack([self.labeled_x, self.unlabeled_x[index]]),
            np.append(self.labeled_y, np.int8(label)),
            np.delete(self.unlabeled_x, index, axis=0),
        )

    def scaled(self, standardizer: Standardizer) -> FingerprintPools:
        """Both pools passed through ``standardizer`` (row order kept)."""
        return FingerprintPools(
            standardizer.transform(self.labeled_x),
            self.labeled_y,
            standardizer.transform(self.unlabeled_x) if self.n_unlabeled else self.unlabeled_x,
        )


@attrs.define
class SimulatedOracle:
    """Answers identity queries from held ground truth and counts them.

    Stands in for the upper-layer authentication that labels a queried
    fingerprint at a cost.
    """

    _truth: dict[bytes, int] = attrs.field(repr=False)
    queries: int = 0

    @classmethod
    def from_arrays(cls, x: npt.ArrayLike, labels: npt.ArrayLike) -> SimulatedOracle:
        """Index ground truth by fingerprint bytes.

        Raises:
            LengthMismatch: If ``x`` and ``labels`` differ in length.
        """
        points = as_points(x)
        classes = _as_classes(labels)
        if points.shape[0] != classes.shape[0]:
            msg = f"{points.shape[0]} fingerprints but {classes.shape[0]} labels"
            raise LengthMismatch(msg)
        return cls(dict(zip(_row_keys(points), (int(c) for c in classes), strict=True)))

    def query(self, fingerprint: npt.ArrayLike) -> int:
        """The true identity of ``fingerprint``.

        Raises:
            KeyError: If the oracle holds no label for it.
        """
        key = np.ascontiguousarray(np.asarray(fingerprint, dtype=np.float64).ravel()).tobytes()
        label = self._truth[key]
        self.queries += 1
        return label


def _as_row(value: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.asarray(value, dtype=np.float64).ravel()


@attrs.frozen(eq=False)
class Standardizer:
    """Per-dimension z-scoring ``(x - center) / scale``."""

    center: npt.NDArray[np.float64] = attrs.field(converter=_as_row)
    scale: npt.NDArray[np.float64] = attrs.field(converter=_as_row)

    @classmethod
    def fit(cls, x: npt.ArrayLike) -> Standardizer:
        """Fit to the rows of ``x``; constant dimensions get unit scale."""
        points = as_points(x)
        std = points.std(axis=0)
        return cls(points.mean(axis=0), np.where(std > 1e-12 * np.maximum(1.0, np.abs(points).max(axis=0)), std, 1.0))

    def transform(self, x: npt.ArrayLike) -> npt.NDArray[np.float64]:
        """Scale the rows of ``x``."""
        return (as_points(x) - self.center) / self.scale

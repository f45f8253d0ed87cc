"""Authentication error metrics and their aggregation across runs."""

from __future__ import annotations

import attrs
import numpy as np
import numpy.typing as npt
import pandas as pd

from .errors import EmptyInput, LengthMismatch

CURVE_KEYS = ["condition", "strategy", "iteration"]


def compute_error_rate(true_labels: npt.ArrayLike, predicted: npt.ArrayLike) -> float:
    """Fraction of mismatched identities.

    Raises:
        LengthMismatch: If the sequences differ in length.
        EmptyInput: If they are empty.
    """
    truth = np.asarray(true_labels).ravel()
    guess = np.asarray(predicted).ravel()
    if truth.shape != guess.shape:
        msg = f"{truth.shape[0]} true labels but {guess.shape[0]} predictions"
        raise LengthMismatch(msg)
    if truth.size == 0:
        msg = "error rate of an empty label set"
        raise EmptyInput(msg)
    return float(np.mean(truth != guess))


def compute_error_difference(
    r_imperfect: npt.ArrayLike, r_perfect: npt.ArrayLike
) -> float | npt.NDArray[np.float64]:
    """``D_e``: error under imperfect CSI minus error under perfect CSI.

    Works elementwise on arrays of paired rates. Scalars give a float, and
    a NaN rate (no test points) gives a NaN difference.

    Raises:
        ValueError: If a rate is outside ``[0, 1]``.
    """
    rates = {
        "r_imperfect": np.asarray(r_imperfect, dtype=np.float64),
        "r_perfect": np.asarray(r_perfect, dtype=np.float64),
    }
    for name, rate in rates.items():
        bad = (rate < 0.0) | (rate > 1.0)
        if np.any(bad):
            msg = f"{name} must lie in [0, 1], got {rate[bad].ravel()[0]}"
            raise ValueError(msg)
    diff = rates["r_imperfect"] - rates["r_perfect"]
    return float(diff) if diff.ndim == 0 else diff


def summarize_curves(curves: pd.DataFrame) -> pd.DataFrame:
    """Mean and (population) standard deviation of the error per condition, strategy and iteration."""
    grouped = curves.groupby(CURVE_KEYS, sort=False)["error_rate"]
    summary = grouped.agg(mean_error="mean", runs="count").reset_index()
    summary["std_error"] = grouped.std(ddof=0).to_numpy()
    return summary[[*CURVE_KEYS, "runs", "mean_error", "std_error"]]


def final_errors(curves: pd.DataFrame) -> pd.DataFrame:
    """The last recorded iteration of every (condition, strategy, run)."""
    last = curves.groupby(["condition", "strategy", "run"], sort=False)["iteration"].transform("max")
    return curves.loc[curves["iteration"] == last].reset_index(drop=True)


def error_differences(curves: pd.DataFrame, baseline: str) -> pd.DataFrame:
    """Pair every condition with ``baseline`` on run, strategy and iteration and take ``D_e``.

    Rows without a partner (a run that stopped early on one side) are dropped.
    """
    perfect = curves.loc[curves["condition"] == baseline, ["run", "strategy", "iteration", "error_rate"]]
    merged = curves.merge(perfect, on=["run", "strategy", "iteration"], suffixes=("_imperfect", "_perfect"))
    merged["d_e"] = compute_error_difference(
        merged["error_rate_imperfect"].to_numpy(), merged["error_rate_perfect"].to_numpy()
    )
    columns = ["condition", "value", "run", "strategy", "iteration", "error_rate_imperfect", "error_rate_perfect", "d_e"]
    return merged[columns].reset_index(drop=True)


@attrs.frozen(eq=False)
class MetricSummary:
    """Aggregates of one experiment.

    Attributes:
        per_iteration: Output of :func:`summarize_curves`.
        final: Output of :func:`final_errors`.
        error_difference: ``D_e`` rows for a CSI sweep, else ``None``.
    """

    per_iteration: pd.DataFrame
    final: pd.DataFrame
    error_difference: pd.DataFrame | None = None

    @classmethod
    def from_curves(cls, curves: pd.DataFrame, baseline: str | None = None) -> MetricSummary:
        """Aggregate long-form curves; pass ``baseline`` for a CSI sweep."""
        return cls(
            summarize_curves(curves),
            final_errors(curves),
            error_differences(curves, baseline) if baseline is not None else None,
        )

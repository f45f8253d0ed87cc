"""Unit tests for error metrics and aggregation."""

import numpy as np
import pandas as pd
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irspla.errors import EmptyInput, LengthMismatch
from irspla.metrics import (
    MetricSummary,
    compute_error_difference,
    compute_error_rate,
    error_differences,
    final_errors,
    summarize_curves,
)

_rates = st.floats(min_value=0.0, max_value=1.0, allow_nan=False)


@pytest.fixture
def curves():
    """Two runs of one strategy under a perfect and an imperfect CSI condition."""
    rows = []
    for condition, value, offset in (("csi=0.0", 0.0, 0.0), ("csi=0.1", 0.1, 0.05)):
        for run, base in ((0, 0.4), (1, 0.2)):
            for iteration in range(3):
                rows.append([condition, value, run, "salu", iteration, 4 + iteration, base - 0.1 * iteration + offset])
    return pd.DataFrame(rows, columns=["condition", "value", "run", "strategy", "iteration", "labeled", "error_rate"])


def test_error_rate():
    """Fraction of mismatches."""
    assert compute_error_rate([0, 1, 1, 0], [0, 1, 0, 0]) == pytest.approx(0.25)


def test_error_rate_length_mismatch():
    """Lengths must agree."""
    with pytest.raises(LengthMismatch):
        compute_error_rate([0, 1], [0])


def test_error_rate_empty():
    """No labels, no rate."""
    with pytest.raises(EmptyInput):
        compute_error_rate([], [])


@given(_rates, _rates)
def test_error_difference(imperfect, perfect):
    """``D_e`` is a plain difference of rates."""
    assert compute_error_difference(imperfect, perfect) == pytest.approx(imperfect - perfect)


def test_error_difference_range():
    """Rates live in [0, 1]."""
    with pytest.raises(ValueError, match=r"\[0, 1\]"):
        compute_error_difference(1.2, 0.1)


def test_error_difference_elementwise():
    """Arrays of paired rates give an array of differences; NaN passes through."""
    out = compute_error_difference(np.array([0.3, 0.2, np.nan]), np.array([0.1, 0.25, 0.1]))
    np.testing.assert_allclose(out[:2], [0.2, -0.05])
    assert np.isnan(out[2])
    assert isinstance(compute_error_difference(0.5, 0.25), float)


def test_error_difference_range_elementwise():
    """One rate out of range is enough to refuse."""
    with pytest.raises(ValueError, match="r_perfect"):
        compute_error_difference(np.array([0.1, 0.2]), np.array([0.1, -0.2]))


def test_summarize(curves):
    """Mean and population std over runs."""
    summary = summarize_curves(curves)
    first = summary.iloc[0]
    assert (first["condition"], first["strategy"], first["iteration"]) == ("csi=0.0", "salu", 0)
    assert first["runs"] == 2
    assert first["mean_error"] == pytest.approx(0.3)
    assert first["std_error"] == pytest.approx(0.1)


def test_final_errors(curves):
    """One row per run and condition, at the last iteration."""
    final = final_errors(curves)
    assert len(final) == 4
    assert set(final["iteration"]) == {2}


def test_error_differences(curves):
    """Every condition is paired with the baseline."""
    diff = error_differences(curves, "csi=0.0")
    assert len(diff) == 12
    imperfect = diff.loc[diff["condition"] == "csi=0.1", "d_e"]
    assert imperfect.to_numpy() == pytest.approx([0.05] * 6)
    assert diff.loc[diff["condition"] == "csi=0.0", "d_e"].abs().max() == 0.0


def test_metric_summary(curves):
    """The difference table only exists with a baseline."""
    assert MetricSummary.from_curves(curves).error_difference is None
    assert MetricSummary.from_curves(curves, "csi=0.0").error_difference is not None

"""Unit tests for result tables and figure data."""

import numpy as np
import pandas as pd
import pytest

from irspla.errors import MissingSweep
from irspla.report import (
    TIMINGS_TABLE,
    emit_plot_data,
    load_results,
    plot_data,
    read_table,
    render_summary,
    write_table,
)


def _curves(conditions):
    rows = []
    for condition, value in conditions:
        for run in range(2):
            for strategy in ("random", "salu"):
                for iteration in range(3):
                    error = 0.5 - 0.1 * iteration - (0.05 if strategy == "salu" else 0.0) + 0.02 * run
                    rows.append([condition, value, run, strategy, iteration, 4 + iteration, error])
    return pd.DataFrame(rows, columns=["condition", "value", "run", "strategy", "iteration", "labeled", "error_rate"])


def _timings(curves):
    timings = curves[["condition", "run", "strategy", "iteration"]].copy()
    timings["fit_seconds"] = 0.5
    timings["acquire_seconds"] = 0.25
    return timings


@pytest.fixture
def base_curves():
    """One condition, two strategies, two runs, three records each."""
    return _curves([("base", None)])


class TestTables:
    """CSV with a commented header."""

    def test_round_trip_exact(self, tmp_path):
        """Floats and the header survive unchanged."""
        frame = pd.DataFrame({"a": [0.1, 1 / 3, 1e-17], "b": ["x", "y", "z"]})
        write_table(tmp_path / "t.csv", frame, {"experiment": "demo", "config_hash": "abc"})
        header, back = read_table(tmp_path / "t.csv")
        assert header == {"experiment": "demo", "config_hash": "abc"}
        np.testing.assert_array_equal(back["a"].to_numpy(), frame["a"].to_numpy())
        assert list(back["b"]) == ["x", "y", "z"]

    def test_unix_newlines(self, tmp_path):
        """Lines end in ``\\n`` only."""
        path = write_table(tmp_path / "t.csv", pd.DataFrame({"a": [1]}), {"k": "v"})
        assert b"\r" not in path.read_bytes()
        assert path.read_text().startswith("# k: v\na\n")

    def test_load_results(self, tmp_path, base_curves):
        """Curves and timings are read back from an output folder."""
        write_table(tmp_path / "curves.csv", base_curves, {"sweep": "none"})
        header, curves, timings = load_results(tmp_path)
        assert header["sweep"] == "none"
        assert len(curves) == len(base_curves)
        assert timings is None

    def test_load_results_with_timings(self, tmp_path, base_curves):
        """Timings are read from their own subfolder."""
        write_table(tmp_path / "curves.csv", base_curves, {"sweep": "none"})
        write_table(tmp_path / TIMINGS_TABLE, _timings(base_curves), {"sweep": "none"})
        _, _, timings = load_results(tmp_path)
        assert len(timings) == len(base_curves)


class TestPlotData:
    """Per-figure tables."""

    def test_learning_curve(self, base_curves):
        """Mean and std of the error per iteration and strategy."""
        frame = plot_data(base_curves, None, "fig4", "none")
        assert list(frame.columns) == ["iteration", "mean_Re_random", "std_Re_random", "mean_Re_salu", "std_Re_salu"]
        assert frame["mean_Re_random"].tolist() == pytest.approx([0.51, 0.41, 0.31])
        assert frame["std_Re_salu"].tolist() == pytest.approx([0.01] * 3)

    def test_irs_against_direct(self):
        """IRS and direct columns side by side."""
        frame = plot_data(_curves([("irs", "irs"), ("direct", "direct")]), None, "fig5", "irs")
        assert "mean_Re_salu_irs" in frame.columns
        assert "mean_Re_salu_direct" in frame.columns
        assert len(frame) == 3

    def test_missing_sweep(self, base_curves):
        """Sweep figures need their sweep."""
        with pytest.raises(MissingSweep, match="fig6"):
            plot_data(base_curves, None, "fig6", "none")

    def test_unknown_figure(self, base_curves):
        """Only the six figures exist."""
        with pytest.raises(ValueError, match="unknown figure"):
            plot_data(base_curves, None, "fig10", "none")

    def test_phase_sweep(self):
        """Final error per phase."""
        curves = _curves([("phase=0.0", 0.0), ("phase=1.5", 1.5)])
        frame = plot_data(curves, None, "fig6", "phase")
        assert frame["theta"].tolist() == [0.0, 1.5]
        assert frame["mean_Re_random"].tolist() == pytest.approx([0.31, 0.31])

    def test_error_difference(self):
        """``D_e`` against the perfect-CSI condition."""
        curves = _curves([("csi=0.0", 0.0), ("csi=0.1", 0.1)])
        curves.loc[curves["condition"] == "csi=0.1", "error_rate"] += 0.04
        frame = plot_data(curves, None, "fig8", "csi")
        assert frame["sigma2"].tolist() == [0.0, 0.1]
        assert frame["mean_De_salu"].tolist() == pytest.approx([0.0, 0.04])

    def test_cumulative_time(self, base_curves):
        """Time accumulates over iterations."""
        frame = plot_data(base_curves, _timings(base_curves), "fig9", "none")
        assert frame["mean_time_salu"].tolist() == pytest.approx([0.75, 1.5, 2.25])

    def test_time_needs_timings(self, base_curves):
        """Without timings there is no time figure."""
        with pytest.raises(MissingSweep, match="timings"):
            plot_data(base_curves, None, "fig9", "none")

    def test_empty_curves(self, base_curves):
        """A figure of the first condition needs at least one row."""
        with pytest.raises(MissingSweep, match="curves table"):
            plot_data(base_curves.iloc[0:0], None, "fig4", "none")

    def test_empty_timings(self, base_curves):
        """An empty timings table is reported, not indexed."""
        with pytest.raises(MissingSweep, match="timings table"):
            plot_data(base_curves, _timings(base_curves).iloc[0:0], "fig9", "none")

    def test_final_error_of_stopped_run(self):
        """A run that stopped early contributes its last recorded iteration."""
        curves = _curves([("phase=0.0", 0.0), ("phase=1.5", 1.5)])
        stopped = (curves["run"] == 1) & (curves["strategy"] == "salu") & (curves["iteration"] == 2)
        frame = plot_data(curves.loc[~stopped], None, "fig6", "phase")
        assert frame["mean_Re_salu"].tolist() == pytest.approx([0.31, 0.31])
        assert frame["mean_Re_random"].tolist() == pytest.approx([0.31, 0.31])

    def test_emit(self, tmp_path, base_curves):
        """Figure tables carry the figure name in their header."""
        path = emit_plot_data(base_curves, None, "fig4", "none", tmp_path, {"config_hash": "h"})
        header, _ = read_table(path)
        assert path.name == "fig4.csv"
        assert header == {"figure": "fig4", "config_hash": "h"}


def test_render_summary(base_curves):
    """The text summary lists every strategy."""
    text = render_summary(base_curves)
    assert "salu" in text
    assert "random" in text
    assert "0.3100" in text

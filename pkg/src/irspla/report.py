"""Result tables and the per-figure plot data.

Tables are UTF-8 CSV preceded by ``# key: value`` comment lines. Floats are
written with their shortest round-trip repr and read back with
``float_precision="round_trip"``, so a table parses back to the exact values.
"""

from __future__ import annotations

import io
import logging
import os
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .errors import MissingSweep
from .metrics import compute_error_difference, final_errors
from .storage import atomic_write_text

logger = logging.getLogger(__name__)

FIGURES = ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9")
FIGURE_SWEEPS = {"fig5": "irs", "fig6": "phase", "fig7": "columns", "fig8": "csi"}
_FIGURE_AXES = {"fig6": "theta", "fig7": "n_z", "fig8": "sigma2"}
TIMINGS_TABLE = Path("timing") / "timings.csv"


def write_table(path: str | os.PathLike[str], frame: pd.DataFrame, header: dict[str, Any] | None = None) -> Path:
    """Write ``frame`` as CSV with a commented header."""
    buffer = io.StringIO()
    for key, value in (header or {}).items():
        buffer.write(f"# {key}: {value}\n")
    frame.to_csv(buffer, index=False, lineterminator="\n")
    target = atomic_write_text(path, buffer.getvalue())
    logger.info("wrote %s (%d rows)", target, len(frame))
    return target


def read_table(path: str | os.PathLike[str]) -> tuple[dict[str, str], pd.DataFrame]:
    """Parse a table written by :func:`write_table`."""
    text = Path(path).read_text(encoding="utf-8")
    header: dict[str, str] = {}
    lines = text.splitlines(keepends=True)
    skip = 0
    for line in lines:
        if not line.startswith("# "):
            break
        key, _, value = line[2:].rstrip("\n").partition(": ")
        header[key] = value
        skip += 1
    frame = pd.read_csv(
        io.StringIO("".join(lines[skip:])), float_precision="round_trip", keep_default_na=False, na_values=[""]
    )
    return header, frame


def _strategies(frame: pd.DataFrame) -> list[str]:
    return list(dict.fromkeys(frame["strategy"]))


def _require(which: str, sweep: str) -> None:
    needed = FIGURE_SWEEPS.get(which)
    if needed is not None and sweep != needed:
        msg = f"{which} needs a {needed!r} sweep, but the results come from a {sweep!r} sweep"
        raise MissingSweep(msg)


def _wide(
    frame: pd.DataFrame, index: str, column: str, prefix: str, strategies: list[str]
) -> pd.DataFrame:
    """Mean and std of ``column`` per ``index`` value and strategy, one column pair per strategy."""
    grouped = frame.groupby([index, "strategy"], sort=True)[column]
    stats = pd.DataFrame({"mean": grouped.mean(), "std": grouped.std(ddof=0)}).reset_index()
    out = pd.DataFrame({index: sorted(frame[index].unique())})
    for strategy in strategies:
        part = stats.loc[stats["strategy"] == strategy, [index, "mean", "std"]]
        part = part.rename(columns={"mean": f"mean_{prefix}_{strategy}", "std": f"std_{prefix}_{strategy}"})
        out = out.merge(part, on=index, how="left")
    return out


def _first_condition(frame: pd.DataFrame, which: str, table: str) -> pd.DataFrame:
    if frame.empty:
        msg = f"{which} needs at least one row in the {table} table"
        raise MissingSweep(msg)
    return frame.loc[frame["condition"] == frame["condition"].iloc[0]]


def plot_data(curves: pd.DataFrame, timings: pd.DataFrame | None, which: str, sweep: str) -> pd.DataFrame:
    """The table behind one figure.

    * ``fig4``: error against iteration (first condition).
    * ``fig5``: error against iteration, IRS and direct side by side.
    * ``fig6``/``fig7``: final error against IRS phase / column count.
    * ``fig8``: final ``D_e`` against CSI-error variance.
    * ``fig9``: cumulative fit plus acquisition time against iteration.

    Raises:
        MissingSweep: If the results lack the figure's sweep dimension or
            the table it reads is empty.
        ValueError: For an unknown figure.
    """
    if which not in FIGURES:
        msg = f"unknown figure {which!r}; expected one of {', '.join(FIGURES)}"
        raise ValueError(msg)
    _require(which, sweep)
    strategies = _strategies(curves)
    if which == "fig4":
        first = _first_condition(curves, which, "curves")
        return _wide(first, "iteration", "error_rate", "Re", strategies)
    if which == "fig5":
        parts = []
        for mode in ("irs", "direct"):
            part = _wide(curves.loc[curves["condition"] == mode], "iteration", "error_rate", "Re", strategies)
            parts.append(part.rename(columns={c: f"{c}_{mode}" for c in part.columns if c != "iteration"}))
        return parts[0].merge(parts[1], on="iteration", how="outer")
    if which in ("fig6", "fig7"):
        final = final_errors(curves).rename(columns={"value": _FIGURE_AXES[which]})
        return _wide(final, _FIGURE_AXES[which], "error_rate", "Re", strategies)
    if which == "fig8":
        final = final_errors(curves)
        base = final.loc[final["value"] == 0.0, ["run", "strategy", "error_rate"]]
        paired = final.merge(base, on=["run", "strategy"], suffixes=("", "_perfect"))
        paired["d_e"] = compute_error_difference(
            paired["error_rate"].to_numpy(), paired["error_rate_perfect"].to_numpy()
        )
        return _wide(paired.rename(columns={"value": "sigma2"}), "sigma2", "d_e", "De", strategies)
    if timings is None:
        msg = "fig9 needs the timings table"
        raise MissingSweep(msg)
    first = _first_condition(timings, which, "timings").sort_values(
        ["strategy", "run", "iteration"], kind="stable"
    )
    first = first.assign(
        seconds=(first["fit_seconds"] + first["acquire_seconds"]).groupby([first["strategy"], first["run"]]).cumsum()
    )
    return _wide(first, "iteration", "seconds", "time", strategies)


def emit_plot_data(
    curves: pd.DataFrame,
    timings: pd.DataFrame | None,
    which: str,
    sweep: str,
    out_dir: str | os.PathLike[str],
    header: dict[str, Any] | None = None,
) -> Path:
    """Write ``<out_dir>/<which>.csv``."""
    frame = plot_data(curves, timings, which, sweep)
    return write_table(Path(out_dir) / f"{which}.csv", frame, {"figure": which, **(header or {})})


def load_results(out_dir: str | os.PathLike[str]) -> tuple[dict[str, str], pd.DataFrame, pd.DataFrame | None]:
    """Header, curves and (if present) timings of an experiment output directory."""
    out = Path(out_dir)
    header, curves = read_table(out / "curves.csv")
    timings_path = out / TIMINGS_TABLE
    timings = read_table(timings_path)[1] if timings_path.exists() else None
    return header, curves, timings


def render_summary(curves: pd.DataFrame) -> str:
    """A short text table of final mean error per condition and strategy."""
    final = final_errors(curves)
    table = final.groupby(["condition", "strategy"], sort=False)["error_rate"].agg(["mean", "std", "count"])
    return table.to_string(float_format=lambda v: f"{v:.4f}" if np.isfinite(v) else "nan")

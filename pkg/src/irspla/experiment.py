"""End-to-end experiments: datasets, repeated runs, aggregation and artifacts.

Every (condition, run) pair is an independent task. Its random streams derive
from the master seed through ``SeedSequence(master, spawn_key=...)``:

* ``(run, 0)`` draws the dataset, so all strategies share it and CSI-sweep
  conditions share their underlying channels;
* ``(run, 1)`` picks the initial labeled set;
* ``(run, 2, s)`` drives the loop of strategy ``s`` (index in
  :data:`~irspla.acquisition.STRATEGY_NAMES`).

Tasks may run in a process pool; results are sorted back into task order
before anything is written, so the artifacts do not depend on scheduling.
"""

from __future__ import annotations

import logging
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Any

import attrs
import numpy as np
import numpy.typing as npt
import pandas as pd

from . import __version__
from .acquisition import STRATEGY_NAMES
from .channel import ChannelScenario, scenario_hash
from .config import ExperimentConfig
from .dataset import FingerprintDataset, generate_dataset
from .errors import IrsplaError, LoopAborted
from .learning import LearningCurve, egpc_loop
from .metrics import MetricSummary
from .pools import FingerprintPools, SimulatedOracle
from .report import TIMINGS_TABLE, write_table
from .storage import load_dataset, save_dataset, write_json

logger = logging.getLogger(__name__)

CURVE_COLUMNS = ["condition", "value", "run", "strategy", "iteration", "labeled", "error_rate"]
TIMING_COLUMNS = ["condition", "run", "strategy", "iteration", "fit_seconds", "acquire_seconds"]


def stream_seed(master: int, *key: int) -> int:
    """A 32-bit seed for the substream ``key`` of ``master``."""
    return int(np.random.SeedSequence(master, spawn_key=key).generate_state(1)[0])


@attrs.frozen
class Condition:
    """One sweep point: a label, its raw value and the scenario."""

    label: str
    value: Any
    scenario: ChannelScenario


def conditions(config: ExperimentConfig) -> list[Condition]:
    """The experiment's conditions in sweep order."""
    sweep = config.sweep
    out = []
    for value in sweep.resolved():
        label = "base" if sweep.kind == "none" else str(value) if sweep.kind == "irs" else f"{sweep.kind}={value!r}"
        out.append(Condition(label, value, config.scenario(sweep.kind, value)))
    return out


def load_or_generate(
    scenario: ChannelScenario,
    per_class_train: int,
    per_class_test: int,
    seed: int,
    cache_dir: Path | None,
    condition: str = "",
) -> FingerprintDataset:
    """The dataset for ``(scenario, seed)``, read from ``cache_dir`` when present there.

    Records are labelled with ``condition``; a cached file written under
    another label is relabelled on load.
    """
    if cache_dir is None:
        return generate_dataset(scenario, per_class_train, per_class_test, seed, condition=condition)
    path = cache_dir / f"{scenario_hash(scenario)[:16]}-{per_class_train}-{per_class_test}-{seed}.npz"
    if path.exists():
        logger.debug("dataset cache hit %s", path.name)
        cached = load_dataset(path)
        return cached if cached.condition == condition else attrs.evolve(cached, condition=condition)
    dataset = generate_dataset(scenario, per_class_train, per_class_test, seed, condition=condition)
    save_dataset(dataset, path)
    return dataset


def initial_split(
    labels: npt.NDArray[np.int8], per_class: int, rng: np.random.Generator
) -> tuple[npt.NDArray[np.int64], npt.NDArray[np.int64]]:
    """Indices of the initial labeled set (``per_class`` of each identity) and of the rest.

    Raises:
        ValueError: If a class has too few samples.
    """
    chosen = []
    for identity in (0, 1):
        members = np.flatnonzero(labels == identity)
        if members.size < per_class:
            msg = f"class {identity} has {members.size} samples, fewer than {per_class}"
            raise ValueError(msg)
        chosen.append(rng.choice(members, size=per_class, replace=False))
    labeled = np.sort(np.concatenate(chosen))
    return labeled, np.setdiff1d(np.arange(labels.shape[0]), labeled)


def _curve_rows(condition: Condition, run: int, strategy: str, curve: LearningCurve) -> tuple[list, list]:
    curves, timings = [], []
    for r in curve.records:
        curves.append([condition.label, condition.value, run, strategy, r.iteration, r.labeled, r.error_rate])
        timings.append([condition.label, run, strategy, r.iteration, r.fit_seconds, r.acquire_seconds])
    return curves, timings


def run_task(config: ExperimentConfig, index: int, condition: Condition, run: int) -> dict[str, Any]:
    """Every strategy on one (condition, run); failures are reported, not raised."""
    exp = config["experiment"]
    cache = config.out / "cache"
    result: dict[str, Any] = {"index": (index, run), "curves": [], "timings": [], "failures": []}
    try:
        dataset = load_or_generate(
            condition.scenario,
            exp["per_class_train"],
            exp["per_class_test"],
            stream_seed(config.seed, run, 0),
            cache,
            condition.label,
        )
        labeled, rest = initial_split(
            dataset.train_y, exp["initial_per_class"], np.random.default_rng(stream_seed(config.seed, run, 1))
        )
    except (IrsplaError, ValueError) as err:
        logger.error("condition %s run %d: dataset failed: %s", condition.label, run, err)
        result["failures"].append({"condition": condition.label, "run": run, "strategy": None, "error": str(err)})
        return result

    for strategy in config.strategies:
        pools = FingerprintPools(dataset.train_x[labeled], dataset.train_y[labeled], dataset.train_x[rest])
        oracle = SimulatedOracle.from_arrays(dataset.train_x, dataset.train_y)
        seed = stream_seed(config.seed, run, 2, STRATEGY_NAMES.index(strategy))
        try:
            _, curve = egpc_loop(
                pools,
                oracle,
                config.acquisition(strategy, seed),
                config.kernel_policy(),
                config.iterations,
                dataset.test_x,
                dataset.test_y,
            )
        except LoopAborted as err:
            curve = err.curve
            result["failures"].append(
                {"condition": condition.label, "run": run, "strategy": strategy, "error": str(err)}
            )
        except (IrsplaError, ValueError) as err:
            logger.error("condition %s run %d strategy %s failed: %s", condition.label, run, strategy, err)
            result["failures"].append(
                {"condition": condition.label, "run": run, "strategy": strategy, "error": str(err)}
            )
            continue
        rows, times = _curve_rows(condition, run, strategy, curve)
        result["curves"].extend(rows)
        result["timings"].extend(times)
    logger.info("condition %s run %d done", condition.label, run)
    return result


@attrs.frozen(eq=False)
class ExperimentResult:
    """Everything an experiment produced.

    Attributes:
        curves: Long-form learning curves (:data:`CURVE_COLUMNS`).
        timings: Wall-clock seconds per record (:data:`TIMING_COLUMNS`).
        summary: Aggregates.
        failures: One dict per failed (condition, run, strategy).
        header: Metadata written above every table.
    """

    curves: pd.DataFrame
    timings: pd.DataFrame
    summary: MetricSummary
    failures: list[dict[str, Any]]
    header: dict[str, Any]


def run_experiment(config: ExperimentConfig, *, write: bool = True) -> ExperimentResult:
    """Run every condition, run and strategy, aggregate, and write the artifacts.

    Artifacts in ``config.out``: ``curves.csv``, ``summary.csv``,
    ``final.csv``, ``error_difference.csv`` (CSI sweeps), ``failures.json``,
    ``manifest.json`` and the ``cache/`` datasets, all byte-identical across
    reruns of the same config. Wall-clock timings go to ``timing/timings.csv``
    so the top level can be compared file by file.
    """
    start = time.perf_counter()
    conds = conditions(config)
    tasks = [(i, cond, run) for i, cond in enumerate(conds) for run in range(config.runs)]
    logger.info("%d conditions x %d runs x %d strategies", len(conds), config.runs, len(config.strategies))
    if config.workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            futures = [pool.submit(run_task, config, i, cond, run) for i, cond, run in tasks]
            results = [f.result() for f in futures]
    else:
        results = [run_task(config, i, cond, run) for i, cond, run in tasks]
    results.sort(key=lambda r: r["index"])

    curves = pd.DataFrame([row for r in results for row in r["curves"]], columns=CURVE_COLUMNS)
    timings = pd.DataFrame([row for r in results for row in r["timings"]], columns=TIMING_COLUMNS)
    failures = [f for r in results for f in r["failures"]]
    sweep = config.sweep
    baseline = conds[0].label if sweep.kind == "csi" else None
    summary = MetricSummary.from_curves(curves, baseline)
    header = {
        "experiment": config.name,
        "config_hash": config.config_hash,
        "sweep": sweep.kind,
        "irspla": __version__,
    }
    result = ExperimentResult(curves, timings, summary, failures, header)
    if write:
        write_artifacts(config, result)
    elapsed = time.perf_counter() - start
    logger.info("experiment %s finished in %.1fs with %d failures", config.name, elapsed, len(failures))
    return result


def write_artifacts(config: ExperimentConfig, result: ExperimentResult) -> Path:
    """Write every table and manifest of ``result`` into ``config.out``."""
    out = config.out
    header = result.header
    write_table(out / "curves.csv", result.curves, header)
    write_table(out / TIMINGS_TABLE, result.timings, header)
    write_table(out / "summary.csv", result.summary.per_iteration, header)
    write_table(out / "final.csv", result.summary.final, header)
    if result.summary.error_difference is not None:
        write_table(out / "error_difference.csv", result.summary.error_difference, header)
    write_json(out / "failures.json", result.failures)
    write_json(out / "manifest.json", {**header, "config": config.portable_sections})
    return out

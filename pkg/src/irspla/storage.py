"""Reproducible on-disk formats.

Models and datasets are ``.npz`` archives with a JSON ``header`` entry
(``format``, ``version`` and parameters). Zip members carry a fixed timestamp
so equal content always produces byte-identical files. All writes go through a
temporary file and :func:`os.replace`.
"""

from __future__ import annotations

import io
import json
import logging
import os
import tempfile
import zipfile
from pathlib import Path
from typing import Any

import numpy as np
import numpy.typing as npt

from .channel import scenario_from_dict
from .dataset import FingerprintDataset
from .gpc import GpcModel, SiteParams
from .kernel import Kernel

logger = logging.getLogger(__name__)

MODEL_FORMAT = "irspla.model"
DATASET_FORMAT = "irspla.dataset"
FORMAT_VERSION = 2
_EPOCH = (1980, 1, 1, 0, 0, 0)


def atomic_write_bytes(path: str | os.PathLike[str], data: bytes) -> Path:
    """Write ``data`` to ``path`` through a sibling temporary file."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        Path(tmp).replace(target)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return target


def atomic_write_text(path: str | os.PathLike[str], text: str) -> Path:
    """UTF-8 text variant of :func:`atomic_write_bytes` with ``\\n`` line endings."""
    return atomic_write_bytes(path, text.encode("utf-8"))


def write_json(path: str | os.PathLike[str], payload: Any) -> Path:
    """Canonical JSON (sorted keys, indent 2, trailing newline)."""
    return atomic_write_text(path, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def write_npz(path: str | os.PathLike[str], header: dict[str, Any], arrays: dict[str, npt.ArrayLike]) -> Path:
    """Write a deterministic ``.npz`` with ``header`` stored as a 0-d string array."""
    buffer = io.BytesIO()
    members = {"header": np.array(json.dumps(header, sort_keys=True)), **arrays}
    with zipfile.ZipFile(buffer, "w", compression=zipfile.ZIP_DEFLATED) as archive:
        for name in sorted(members):
            info = zipfile.ZipInfo(f"{name}.npy", date_time=_EPOCH)
            info.compress_type = zipfile.ZIP_DEFLATED
            info.external_attr = 0o644 << 16
            member = io.BytesIO()
            np.lib.format.write_array(member, np.asarray(members[name]), allow_pickle=False)
            archive.writestr(info, member.getvalue())
    target = atomic_write_bytes(path, buffer.getvalue())
    logger.info("wrote %s", target)
    return target


def read_npz(
    path: str | os.PathLike[str], expected_format: str
) -> tuple[dict[str, Any], dict[str, npt.NDArray[Any]]]:
    """Read an archive written by :func:`write_npz` and check its format tag.

    Raises:
        ValueError: On a different format or a newer version.
    """
    with np.load(path, allow_pickle=False) as archive:
        arrays = {name: archive[name] for name in archive.files}
    header = json.loads(str(arrays.pop("header")))
    if header.get("format") != expected_format:
        msg = f"{path}: expected format {expected_format!r}, found {header.get('format')!r}"
        raise ValueError(msg)
    if int(header.get("version", 0)) > FORMAT_VERSION:
        msg = f"{path}: format version {header['version']} is newer than supported {FORMAT_VERSION}"
        raise ValueError(msg)
    return header, arrays


def save_model(model: GpcModel, path: str | os.PathLike[str]) -> Path:
    """Persist a fitted model; :func:`load_model` restores it bit-exactly."""
    header = {
        "format": MODEL_FORMAT,
        "version": FORMAT_VERSION,
        "signal_variance": model.kernel.signal_variance,
        "lengthscale": model.kernel.lengthscale,
        "log_marginal": model.log_marginal,
        "converged": model.converged,
        "sweeps": model.sweeps,
        "skipped": model.skipped,
        "jitter": model.jitter,
    }
    arrays = {
        "train_x": model.train_x,
        "train_y": model.train_y,
        "site_mean": model.sites.mean,
        "site_variance": model.sites.variance,
        "site_log_z": model.sites.log_z,
        "posterior_mean": model.posterior_mean,
        "posterior_cov": model.posterior_cov,
    }
    return write_npz(path, header, arrays)


def load_model(path: str | os.PathLike[str]) -> GpcModel:
    """Inverse of :func:`save_model`."""
    header, arrays = read_npz(path, MODEL_FORMAT)
    return GpcModel(
        kernel=Kernel(header["signal_variance"], header["lengthscale"]),
        train_x=arrays["train_x"],
        train_y=arrays["train_y"],
        sites=SiteParams(arrays["site_mean"], arrays["site_variance"], arrays["site_log_z"]),
        posterior_mean=arrays["posterior_mean"],
        posterior_cov=arrays["posterior_cov"],
        log_marginal=float(header["log_marginal"]),
        converged=bool(header["converged"]),
        sweeps=int(header["sweeps"]),
        skipped=int(header["skipped"]),
        jitter=float(header["jitter"]),
    )


def fingerprint_records(
    x: npt.NDArray[np.float64], y: npt.NDArray[np.int8], condition: str
) -> npt.NDArray[np.void]:
    """A flat structured array of ``(vector, identity, condition)`` records."""
    dtype = np.dtype(
        [("vector", "<f8", (x.shape[1],)), ("identity", "i1"), ("condition", f"<U{max(len(condition), 1)}")]
    )
    records = np.empty(x.shape[0], dtype=dtype)
    records["vector"] = x
    records["identity"] = y
    records["condition"] = condition
    return records


def _record_condition(*records: npt.NDArray[np.void]) -> str:
    values = {str(v) for r in records for v in r["condition"]}
    if len(values) > 1:
        msg = f"dataset records mix conditions {sorted(values)}"
        raise ValueError(msg)
    return values.pop() if values else ""


def save_dataset(dataset: FingerprintDataset, path: str | os.PathLike[str]) -> Path:
    """Persist a dataset and write ``<stem>.scenario.json`` beside it."""
    header = {
        "format": DATASET_FORMAT,
        "version": FORMAT_VERSION,
        "scenario": dataset.scenario.to_dict(),
        "scenario_hash": dataset.scenario_hash,
        "seed": dataset.seed,
        "stacking": "real row-major, then imaginary row-major",
        "standardization": "none",
        "records": "vector, identity, condition",
        "condition": dataset.condition,
    }
    arrays = {
        "train": fingerprint_records(dataset.train_x, dataset.train_y, dataset.condition),
        "test": fingerprint_records(dataset.test_x, dataset.test_y, dataset.condition),
    }
    target = write_npz(path, header, arrays)
    manifest = {key: header[key] for key in ("scenario", "scenario_hash", "seed", "stacking", "condition")}
    manifest["counts"] = {"train": int(dataset.train_y.shape[0]), "test": int(dataset.test_y.shape[0])}
    write_json(target.with_name(f"{target.stem}.scenario.json"), manifest)
    return target


def load_dataset(path: str | os.PathLike[str]) -> FingerprintDataset:
    """Inverse of :func:`save_dataset`; also reads version-1 files (separate arrays, no condition).

    Raises:
        ValueError: If the records carry more than one condition.
    """
    header, arrays = read_npz(path, DATASET_FORMAT)
    scenario = scenario_from_dict(header["scenario"])
    seed = int(header["seed"])
    if "train" not in arrays:
        legacy = (arrays["train_x"], arrays["train_y"], arrays["test_x"], arrays["test_y"])
        return FingerprintDataset(scenario, seed, *legacy)
    train, test = arrays["train"], arrays["test"]
    return FingerprintDataset(
        scenario=scenario,
        seed=seed,
        train_x=train["vector"],
        train_y=train["identity"],
        test_x=test["vector"],
        test_y=test["identity"],
        condition=_record_condition(train, test),
    )

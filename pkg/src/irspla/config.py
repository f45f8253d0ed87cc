"""Experiment configuration: a YAML file with line-precise validation.

The file has up to five sections, each optional::

    experiment:   {name, seed, runs, iterations, per_class_train, per_class_test,
                   initial_per_class, strategies, workers, out}
    acquisition:  {m1, m2, softmax_k, ro_gain}
    model:        {kernel, signal_variance, lengthscale, grid_low, grid_high,
                   grid_points, tol, max_sweeps, damping}
    scenario:     {mode, bob, irs, alice, eve, n_t, n_r, n_y, n_z, carrier_hz,
                   irs_axis, theta, a_min, omega, v, kappa_h, kappa_g, noise_var,
                   csi_var, bandwidth_hz, pilot_power}
    sweep:        {kind, values}

Every key has a default (see ``docs/configuration.md``). Unknown keys, wrong
types and out-of-range values raise :class:`~irspla.errors.ConfigError`
carrying the line of the offending key.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from collections.abc import Callable, Sequence
from pathlib import Path
from typing import Any

import attrs
import yaml

from .acquisition import STRATEGY_NAMES, AcquisitionConfig
from .channel import ChannelScenario, FadingParams, Geometry, IrsConfig
from .errors import ConfigError
from .hyper import SearchSpace
from .kernel import Kernel
from .learning import KernelPolicy

SWEEP_KINDS = ("none", "irs", "phase", "columns", "csi")
DEFAULT_PHASE_POINTS = 32

Check = Callable[[Any], str | None]


def _integer(minimum: int) -> Check:
    def check(value: Any) -> str | None:
        if isinstance(value, bool) or not isinstance(value, int):
            return f"expected an integer, got {type(value).__name__}"
        if value < minimum:
            return f"must be at least {minimum}, got {value}"
        return None

    return check


def _real(minimum: float = -math.inf, *, strict: bool = False, maximum: float = math.inf) -> Check:
    def check(value: Any) -> str | None:
        if isinstance(value, bool) or not isinstance(value, int | float):
            return f"expected a number, got {type(value).__name__}"
        if not math.isfinite(value):
            return f"must be finite, got {value}"
        if value < minimum or (strict and value == minimum) or value > maximum:
            bound = ">" if strict else ">="
            return f"must be {bound} {minimum}" + (f" and <= {maximum}" if maximum < math.inf else "") + f", got {value}"
        return None

    return check


def _choice(options: Sequence[str]) -> Check:
    def check(value: Any) -> str | None:
        if value not in options:
            return f"must be one of {', '.join(options)}, got {value!r}"
        return None

    return check


def _text(value: Any) -> str | None:
    return None if isinstance(value, str) and value else "expected a non-empty string"


def _point(value: Any) -> str | None:
    if not (isinstance(value, list) and len(value) == 3 and all(_real()(v) is None for v in value)):
        return "expected a list of three coordinates"
    return None


def _strategies(value: Any) -> str | None:
    if not (isinstance(value, list) and value):
        return "expected a non-empty list of strategy names"
    for name in value:
        if name not in STRATEGY_NAMES:
            return f"unknown strategy {name!r}; expected one of {', '.join(STRATEGY_NAMES)}"
    if len(set(value)) != len(value):
        return "strategies must not repeat"
    return None


def _values(value: Any) -> str | None:
    if not isinstance(value, list):
        return "expected a list"
    if any(_real()(v) is not None for v in value):
        return "sweep values must be numbers"
    return None


SCHEMA: dict[str, dict[str, tuple[Any, Check]]] = {
    "experiment": {
        "name": ("irspla", _text),
        "seed": (0, _integer(0)),
        "runs": (100, _integer(1)),
        "iterations": (50, _integer(0)),
        "per_class_train": (800, _integer(1)),
        "per_class_test": (200, _integer(1)),
        "initial_per_class": (2, _integer(1)),
        "strategies": (list(STRATEGY_NAMES), _strategies),
        "workers": (1, _integer(1)),
        "out": ("results", _text),
    },
    "acquisition": {
        "m1": (50, _integer(1)),
        "m2": (100, _integer(1)),
        "softmax_k": (10.0, _real(0.0, strict=True)),
        "ro_gain": ("alu", _choice(("alu", "salu"))),
    },
    "model": {
        "kernel": ("fit_once", _choice(("fixed", "fit_once", "refit"))),
        "signal_variance": (1.0, _real(0.0, strict=True)),
        "lengthscale": (1.0, _real(0.0, strict=True)),
        "grid_low": (0.1, _real(0.0, strict=True)),
        "grid_high": (100.0, _real(0.0, strict=True)),
        "grid_points": (7, _integer(1)),
        "tol": (1e-6, _real(0.0, strict=True)),
        "max_sweeps": (100, _integer(1)),
        "damping": (1.0, _real(0.0, strict=True, maximum=1.0)),
    },
    "scenario": {
        "mode": ("irs", _choice(("irs", "direct"))),
        "bob": ([0.0, 0.0, 0.0], _point),
        "irs": ([10.0, 10.0, 3.0], _point),
        "alice": ([20.0, 5.0, 1.5], _point),
        "eve": ([20.0, 8.0, 1.5], _point),
        "n_t": (2, _integer(1)),
        "n_r": (4, _integer(1)),
        "n_y": (8, _integer(1)),
        "n_z": (32, _integer(1)),
        "carrier_hz": (3.5e9, _real(0.0, strict=True)),
        "irs_axis": ("x", _choice(("x", "y"))),
        "theta": (0.0, _real()),
        "a_min": (0.2, _real(0.0, maximum=1.0)),
        "omega": (0.0, _real()),
        "v": (1.6, _real(0.0, strict=True)),
        "kappa_h": (3.0, _real(0.0)),
        "kappa_g": (4.0, _real(0.0)),
        "noise_var": (1e-20, _real(0.0)),
        "csi_var": (0.0, _real(0.0)),
        "bandwidth_hz": (1e6, _real(0.0, strict=True)),
        "pilot_power": (1.0, _real(0.0, strict=True)),
    },
    "sweep": {
        "kind": ("none", _choice(SWEEP_KINDS)),
        "values": ([], _values),
    },
}


@attrs.frozen
class SweepSpec:
    """One experiment dimension; each value becomes a condition."""

    kind: str = attrs.field(default="none", validator=attrs.validators.in_(SWEEP_KINDS))
    values: tuple[float, ...] = attrs.field(default=(), converter=tuple)

    def resolved(self) -> tuple[Any, ...]:
        """The sweep points, with defaults filled in.

        ``irs`` compares the IRS channel with the direct link; ``phase``
        defaults to 32 phases over ``[0, 2 pi)``; ``csi`` always leads with the
        perfect-CSI baseline 0.
        """
        if self.kind == "none":
            return (None,)
        if self.kind == "irs":
            return ("irs", "direct")
        if self.kind == "phase" and not self.values:
            return tuple(2.0 * math.pi * k / DEFAULT_PHASE_POINTS for k in range(DEFAULT_PHASE_POINTS))
        if self.kind == "csi":
            return (0.0, *sorted({float(v) for v in self.values} - {0.0}))
        if self.kind == "columns":
            return tuple(int(v) for v in self.values)
        return tuple(float(v) for v in self.values)


@attrs.frozen
class ExperimentConfig:
    """A validated experiment description.

    ``sections`` keeps every resolved key (defaults filled in) and is the
    source of :attr:`config_hash`.
    """

    sections: dict[str, dict[str, Any]] = attrs.field(eq=False)
    source: str | None = None

    def __getitem__(self, key: str) -> dict[str, Any]:
        """A resolved section."""
        return self.sections[key]

    @property
    def name(self) -> str:
        """Experiment name."""
        return self.sections["experiment"]["name"]

    @property
    def seed(self) -> int:
        """Master seed."""
        return self.sections["experiment"]["seed"]

    @property
    def runs(self) -> int:
        """Independent runs per condition."""
        return self.sections["experiment"]["runs"]

    @property
    def iterations(self) -> int:
        """Queries per run."""
        return self.sections["experiment"]["iterations"]

    @property
    def strategies(self) -> tuple[str, ...]:
        """Strategies to compare, in canonical order."""
        chosen = set(self.sections["experiment"]["strategies"])
        return tuple(s for s in STRATEGY_NAMES if s in chosen)

    @property
    def out(self) -> Path:
        """Output directory."""
        return Path(self.sections["experiment"]["out"])

    @property
    def workers(self) -> int:
        """Worker processes."""
        return self.sections["experiment"]["workers"]

    @property
    def sweep(self) -> SweepSpec:
        """The sweep dimension."""
        return SweepSpec(self.sections["sweep"]["kind"], self.sections["sweep"]["values"])

    @property
    def portable_sections(self) -> dict[str, dict[str, Any]]:
        """The sections without where results go and how many workers run."""
        portable = {k: dict(v) for k, v in self.sections.items()}
        for key in ("out", "workers"):
            portable["experiment"].pop(key)
        return portable

    @property
    def config_hash(self) -> str:
        """sha256 of :attr:`portable_sections`."""
        return hashlib.sha256(json.dumps(self.portable_sections, sort_keys=True).encode("utf-8")).hexdigest()

    def acquisition(self, strategy: str, seed: int) -> AcquisitionConfig:
        """Acquisition settings for one strategy and run seed."""
        acq, model = self.sections["acquisition"], self.sections["model"]
        return AcquisitionConfig(
            strategy=strategy,
            m1=acq["m1"],
            m2=acq["m2"],
            softmax_k=acq["softmax_k"],
            seed=seed,
            ro_gain=acq["ro_gain"],
            ep_tol=model["tol"],
            ep_max_sweeps=model["max_sweeps"],
            ep_damping=model["damping"],
        )

    def kernel_policy(self) -> KernelPolicy:
        """Kernel hyperparameter policy."""
        model = self.sections["model"]
        kernel = Kernel(model["signal_variance"], model["lengthscale"]) if model["kernel"] == "fixed" else None
        space = SearchSpace(
            (model["grid_low"], model["grid_high"]), (model["grid_low"], model["grid_high"]), model["grid_points"]
        )
        return KernelPolicy(model["kernel"], kernel, space)

    def scenario(self, kind: str = "none", value: Any = None) -> ChannelScenario:
        """The channel scenario at one sweep point."""
        sc = dict(self.sections["scenario"])
        if kind == "irs":
            sc["mode"] = value
        elif kind == "phase":
            sc["theta"] = value
        elif kind == "columns":
            sc["n_z"] = value
        elif kind == "csi":
            sc["csi_var"] = value
        geometry = Geometry(
            bob=sc["bob"],
            irs=sc["irs"],
            alice=sc["alice"],
            eve=sc["eve"],
            n_t=sc["n_t"],
            n_r=sc["n_r"],
            n_y=sc["n_y"],
            n_z=sc["n_z"],
            carrier_hz=sc["carrier_hz"],
            irs_axis=sc["irs_axis"],
        )
        return ChannelScenario(
            geometry=geometry,
            irs=IrsConfig.uniform(sc["theta"], geometry.n_elements, a_min=sc["a_min"], omega=sc["omega"], v=sc["v"]),
            fading=FadingParams(
                kappa_h=sc["kappa_h"],
                kappa_g=sc["kappa_g"],
                noise_var=sc["noise_var"],
                csi_var_h=sc["csi_var"],
                csi_var_g=sc["csi_var"],
                bandwidth_hz=sc["bandwidth_hz"],
            ),
            mode=sc["mode"],
            pilot_power=sc["pilot_power"],
        )


def _key_lines(root: yaml.Node | None) -> dict[tuple[str, ...], int]:
    lines: dict[tuple[str, ...], int] = {}
    if not isinstance(root, yaml.MappingNode):
        return lines
    for key, value in root.value:
        section = str(key.value)
        lines[(section,)] = key.start_mark.line + 1
        if isinstance(value, yaml.MappingNode):
            for sub_key, _ in value.value:
                lines[(section, str(sub_key.value))] = sub_key.start_mark.line + 1
    return lines


def _defaults() -> dict[str, dict[str, Any]]:
    return {section: {key: default for key, (default, _) in fields.items()} for section, fields in SCHEMA.items()}


def _check_semantics(sections: dict[str, dict[str, Any]], lines: dict[tuple[str, ...], int], path: str | None) -> None:
    """Cross-field rules, then a trial build of every domain object."""
    model, sweep = sections["model"], sections["sweep"]
    if model["grid_low"] > model["grid_high"]:
        raise ConfigError("grid_low must not exceed grid_high", lines.get(("model", "grid_low")), path)
    kind, values = sweep["kind"], sweep["values"]
    if kind in ("columns", "csi") and not values:
        raise ConfigError(f"a {kind} sweep needs values", lines.get(("sweep", "kind")), path)
    if kind == "columns" and any(not float(v).is_integer() or v < 1 for v in values):
        raise ConfigError("column counts must be positive integers", lines.get(("sweep", "values")), path)
    if kind == "csi" and any(v < 0 for v in values):
        raise ConfigError("CSI-error variances must be non-negative", lines.get(("sweep", "values")), path)
    if kind == "csi" and sections["scenario"]["mode"] == "direct":
        raise ConfigError("a csi sweep needs the irs mode", lines.get(("scenario", "mode")), path)
    config = ExperimentConfig(sections, path)
    try:
        for value in config.sweep.resolved():
            config.scenario(kind, value)
        config.kernel_policy()
    except ValueError as err:
        raise ConfigError(str(err), lines.get(("scenario",)), path) from err


def parse_config(text: str, path: str | None = None) -> ExperimentConfig:
    """Validate YAML ``text`` into an :class:`ExperimentConfig`.

    Raises:
        ConfigError: On syntax errors, unknown keys, bad types or bad values.
    """
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
        data = yaml.safe_load(text)
    except yaml.MarkedYAMLError as err:
        line = err.problem_mark.line + 1 if err.problem_mark is not None else None
        raise ConfigError(f"invalid YAML: {err.problem}", line, path) from err
    except yaml.YAMLError as err:
        raise ConfigError(f"invalid YAML: {err}", None, path) from err
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("the configuration must be a mapping of sections", 1, path)
    lines = _key_lines(root)
    sections = _defaults()
    for section, body in data.items():
        where = lines.get((str(section),))
        if section not in SCHEMA:
            raise ConfigError(f"unknown section {section!r}", where, path)
        if body is None:
            continue
        if not isinstance(body, dict):
            raise ConfigError(f"section {section!r} must be a mapping", where, path)
        for key, value in body.items():
            line = lines.get((section, str(key)))
            if key not in SCHEMA[section]:
                raise ConfigError(f"unknown key {section}.{key}", line, path)
            problem = SCHEMA[section][key][1](value)
            if problem is not None:
                raise ConfigError(f"{section}.{key} {problem}", line, path)
            sections[section][key] = value
    _check_semantics(sections, lines, path)
    return ExperimentConfig(sections, path)


def load_config(path: str | os.PathLike[str]) -> ExperimentConfig:
    """Read and validate a configuration file."""
    return parse_config(Path(path).read_text(encoding="utf-8"), str(path))


def apply_overrides(
    config: ExperimentConfig,
    *,
    seed: int | None = None,
    runs: int | None = None,
    strategies: Sequence[str] | None = None,
    out: str | os.PathLike[str] | None = None,
    sweep: SweepSpec | None = None,
) -> ExperimentConfig:
    """Replace experiment fields from the command line and validate again.

    Raises:
        ConfigError: If an override is invalid (no line number).
    """
    sections = {k: dict(v) for k, v in config.sections.items()}
    updates = {"seed": seed, "runs": runs, "strategies": list(strategies) if strategies else None}
    updates["out"] = str(out) if out is not None else None
    for key, value in updates.items():
        if value is None:
            continue
        problem = SCHEMA["experiment"][key][1](value)
        if problem is not None:
            raise ConfigError(f"--{key} {problem}", None, config.source)
        sections["experiment"][key] = value
    if sweep is not None:
        sections["sweep"] = {"kind": sweep.kind, "values": list(sweep.values)}
    _check_semantics(sections, {}, config.source)
    return ExperimentConfig(sections, config.source)


def default_config() -> ExperimentConfig:
    """All defaults."""
    return parse_config("")


def dump_config(config: ExperimentConfig) -> str:
    """The resolved configuration as YAML."""
    return yaml.safe_dump(config.sections, sort_keys=False, default_flow_style=None)

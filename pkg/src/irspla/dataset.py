"""Labelled fingerprint datasets drawn from a channel scenario."""

from __future__ import annotations

import logging

import attrs
import numpy as np
import numpy.typing as npt

from .channel import (
    ChannelScenario,
    CsiError,
    FingerprintSample,
    cascade_channel,
    estimate_fingerprint,
    irs_response,
    sample_channel,
    scenario_hash,
)

logger = logging.getLogger(__name__)

IDENTITIES = {0: "alice", 1: "eve"}


def _as_float_matrix(value: npt.ArrayLike) -> npt.NDArray[np.float64]:
    return np.atleast_2d(np.asarray(value, dtype=np.float64))


def _as_labels(value: npt.ArrayLike) -> npt.NDArray[np.int8]:
    return np.asarray(value).astype(np.int8).ravel()


@attrs.frozen(eq=False)
class FingerprintDataset:
    """Train and test fingerprints with identities 0 (Alice) and 1 (Eve).

    Rows are grouped by class, Alice first, in generation order. ``condition``
    is the experiment condition every record was drawn under.
    """

    scenario: ChannelScenario
    seed: int
    train_x: npt.NDArray[np.float64] = attrs.field(converter=_as_float_matrix)
    train_y: npt.NDArray[np.int8] = attrs.field(converter=_as_labels)
    test_x: npt.NDArray[np.float64] = attrs.field(converter=_as_float_matrix)
    test_y: npt.NDArray[np.int8] = attrs.field(converter=_as_labels)
    condition: str = attrs.field(default="", converter=str)

    @property
    def scenario_hash(self) -> str:
        """Digest of the generating scenario."""
        return scenario_hash(self.scenario)

    @property
    def dim(self) -> int:
        """Fingerprint length."""
        return int(self.train_x.shape[1])


def sample_rng(seed: int, identity: int, index: int) -> np.random.Generator:
    """The private stream of one sample; independent of generation order."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(identity, index)))


def draw_fingerprint(
    scenario: ChannelScenario, identity: int, rng: np.random.Generator, digest: str = ""
) -> FingerprintSample:
    """One fingerprint of ``identity`` in ``scenario``.

    The channel is drawn before the estimation noise and the CSI errors, so
    scenarios that differ only in CSI-error variance see the same channels.
    """
    geometry, fading = scenario.geometry, scenario.fading
    transmitter = IDENTITIES[identity]
    if scenario.mode == "direct":
        q = sample_channel(geometry, fading, "D", rng, transmitter)
        return estimate_fingerprint(q, scenario.pilot(), fading.noise_var, rng, identity=identity, digest=digest)
    g = sample_channel(geometry, fading, "G", rng, transmitter)
    h = sample_channel(geometry, fading, "H", rng)
    psi = irs_response(scenario.irs)
    error = None if fading.perfect_csi else CsiError(fading.csi_var_h, fading.csi_var_g, h, psi, g)
    return estimate_fingerprint(
        cascade_channel(h, psi, g), scenario.pilot(), fading.noise_var, rng, error, identity=identity, digest=digest
    )


def generate_dataset(
    scenario: ChannelScenario, per_class_train: int, per_class_test: int, seed: int, *, condition: str = ""
) -> FingerprintDataset:
    """Draw a balanced dataset; the first ``per_class_train`` samples of each class train.

    ``condition`` labels every record with the experiment condition it was
    drawn for.

    Raises:
        ValueError: If a count is below 1, or CSI errors are set for the
            direct (no-IRS) mode.
    """
    if per_class_train < 1 or per_class_test < 1:
        msg = f"per-class counts must be at least 1, got {per_class_train} and {per_class_test}"
        raise ValueError(msg)
    if scenario.mode == "direct" and not scenario.fading.perfect_csi:
        msg = "CSI errors apply to the cascaded IRS channel only"
        raise ValueError(msg)
    digest = scenario_hash(scenario)
    total = per_class_train + per_class_test
    train_x, train_y, test_x, test_y = [], [], [], []
    for identity in IDENTITIES:
        for index in range(total):
            sample = draw_fingerprint(scenario, identity, sample_rng(seed, identity, index), digest)
            if index < per_class_train:
                train_x.append(sample.vector)
                train_y.append(identity)
            else:
                test_x.append(sample.vector)
                test_y.append(identity)
    logger.info("generated %d fingerprints for scenario %s (seed %d)", 2 * total, digest[:12], seed)
    return FingerprintDataset(scenario, seed, np.vstack(train_x), train_y, np.vstack(test_x), test_y, condition)

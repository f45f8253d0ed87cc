"""Unit tests for the fingerprint pools, the oracle and the standardizer."""

import numpy as np
import pytest

from irspla.errors import LengthMismatch, PoolExhausted
from irspla.pools import FingerprintPools, SimulatedOracle, Standardizer


@pytest.fixture
def pools():
    """Two labelled and three unlabelled 2-D fingerprints."""
    return FingerprintPools(
        [[0.0, 0.0], [1.0, 1.0]],
        [0, 1],
        [[2.0, 2.0], [3.0, 3.0], [4.0, 4.0]],
    )


class TestFingerprintPools:
    """Pool bookkeeping."""

    def test_sizes(self, pools):
        """Sizes and width."""
        assert pools.n_labeled == 2
        assert pools.n_unlabeled == 3
        assert pools.dim == 2

    def test_move(self, pools):
        """A move transfers exactly one sample and keeps the rest in order."""
        moved = pools.move(1, 1)
        assert moved.n_labeled == 3
        assert moved.n_unlabeled == 2
        np.testing.assert_array_equal(moved.labeled_x[-1], [3.0, 3.0])
        np.testing.assert_array_equal(moved.labeled_y, [0, 1, 1])
        np.testing.assert_array_equal(moved.unlabeled_x, [[2.0, 2.0], [4.0, 4.0]])
        assert pools.n_unlabeled == 3

    def test_move_out_of_range(self, pools):
        """Indices are checked."""
        with pytest.raises(IndexError):
            pools.move(3, 0)

    def test_exhausted(self):
        """Nothing left to move."""
        empty = FingerprintPools([[0.0]], [0], np.zeros((0, 1)))
        with pytest.raises(PoolExhausted):
            empty.move(0, 1)

    def test_disjoint(self):
        """A fingerprint cannot be in both pools."""
        with pytest.raises(ValueError, match="both"):
            FingerprintPools([[1.0, 2.0]], [1], [[1.0, 2.0]])

    def test_label_length(self):
        """Labels pair with labelled fingerprints."""
        with pytest.raises(LengthMismatch):
            FingerprintPools([[1.0], [2.0]], [1], [[3.0]])

    def test_labels_are_classes(self):
        """Identity classes are 0 and 1."""
        with pytest.raises(ValueError, match="0 or 1"):
            FingerprintPools([[1.0]], [-1], [[3.0]])

    def test_scaled(self, pools):
        """Scaling transforms both pools."""
        scaler = Standardizer.fit(pools.labeled_x)
        scaled = pools.scaled(scaler)
        np.testing.assert_allclose(scaled.labeled_x, [[-1.0, -1.0], [1.0, 1.0]])
        np.testing.assert_allclose(scaled.unlabeled_x[0], [3.0, 3.0])


class TestSimulatedOracle:
    """The label oracle."""

    def test_query_counts(self):
        """Answers come from the truth table and are counted."""
        oracle = SimulatedOracle.from_arrays([[0.5, 1.0], [2.0, 3.0]], [1, 0])
        assert oracle.query(np.array([2.0, 3.0])) == 0
        assert oracle.query([0.5, 1.0]) == 1
        assert oracle.queries == 2

    def test_unknown(self):
        """Unknown fingerprints raise ``KeyError``."""
        oracle = SimulatedOracle.from_arrays([[0.0]], [1])
        with pytest.raises(KeyError):
            oracle.query([1.0])

    def test_length_mismatch(self):
        """Fingerprints and labels pair up."""
        with pytest.raises(LengthMismatch):
            SimulatedOracle.from_arrays([[0.0], [1.0]], [1])


class TestStandardizer:
    """Per-dimension scaling."""

    def test_zero_mean_unit_variance(self):
        """Fitted data comes out standardised."""
        x = np.random.default_rng(0).normal(3.0, 2.0, size=(50, 4))
        z = Standardizer.fit(x).transform(x)
        np.testing.assert_allclose(z.mean(axis=0), 0.0, atol=1e-12)
        np.testing.assert_allclose(z.std(axis=0), 1.0)

    def test_constant_dimension(self):
        """A constant dimension gets unit scale and maps to 0."""
        x = np.array([[1.0, 5.0], [2.0, 5.0]])
        scaler = Standardizer.fit(x)
        assert scaler.scale[1] == 1.0
        np.testing.assert_allclose(scaler.transform(x)[:, 1], 0.0)

    def test_tiny_fingerprints(self):
        """Channel-sized magnitudes are scaled up, not treated as constant."""
        x = np.array([[1e-8, 2e-8], [3e-8, -1e-8]])
        z = Standardizer.fit(x).transform(x)
        np.testing.assert_allclose(np.abs(z), 1.0)

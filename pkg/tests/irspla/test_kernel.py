"""Unit tests for the RBF kernel."""

import math

import attrs
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from irspla.errors import DimensionMismatch
from irspla.kernel import Kernel, as_points


@pytest.fixture
def unit_kernel():
    """Unit signal variance and lengthscale."""
    return Kernel(1.0, 1.0)


@pytest.fixture
def points():
    """Five random 3-D points."""
    return np.random.default_rng(3).normal(size=(5, 3))


class TestKernel:
    """Test cases for the Kernel class."""

    def test_closed_form(self):
        """A single pair matches the formula."""
        k = Kernel(2.0, 0.5)
        expected = 2.0 * math.exp(-(1.0 + 4.0) / (2 * 0.25))
        assert k([0.0, 0.0], [1.0, 2.0])[0, 0] == pytest.approx(expected)

    def test_shape(self, unit_kernel, points):
        """Cross covariance has shape ``(len(a), len(b))``."""
        assert unit_kernel(points, points[:2]).shape == (5, 2)

    def test_gram_symmetric_with_signal_diagonal(self, points):
        """The Gram matrix is exactly symmetric with the signal variance on the diagonal."""
        gram = Kernel(3.0, 0.7).gram(points)
        np.testing.assert_array_equal(gram, gram.T)
        np.testing.assert_allclose(np.diag(gram), 3.0)

    def test_diag(self, points):
        """``diag`` is the constant signal variance."""
        np.testing.assert_array_equal(Kernel(1.5, 2.0).diag(points), np.full(5, 1.5))

    def test_empty_sets(self, unit_kernel):
        """Empty point sets give empty matrices."""
        assert unit_kernel(np.empty((0, 2)), np.ones((3, 2))).shape == (0, 3)

    def test_dimension_mismatch(self, unit_kernel):
        """Feature lengths must agree."""
        with pytest.raises(DimensionMismatch):
            unit_kernel(np.ones((2, 3)), np.ones((2, 4)))

    @pytest.mark.parametrize(("sv", "ls"), [(0.0, 1.0), (1.0, -1.0), (math.inf, 1.0), (1.0, math.nan)])
    def test_rejects_bad_hyperparameters(self, sv, ls):
        """Both hyperparameters must be finite and positive."""
        with pytest.raises(ValueError, match="finite and positive"):
            Kernel(sv, ls)

    def test_frozen(self, unit_kernel):
        """Kernels are immutable."""
        with pytest.raises(attrs.exceptions.FrozenInstanceError):
            unit_kernel.lengthscale = 2.0  # type: ignore[misc]

    @pytest.mark.property
    @given(st.floats(0.1, 10.0), st.floats(0.1, 10.0), st.integers(0, 1000))
    def test_gram_positive_semidefinite(self, sv, ls, seed):
        """Gram matrices are PSD up to rounding."""
        x = np.random.default_rng(seed).normal(size=(6, 2))
        eig = np.linalg.eigvalsh(Kernel(sv, ls).gram(x))
        assert eig.min() > -1e-10 * sv


def test_as_points_promotes_vector():
    """A vector is one point."""
    assert as_points([1.0, 2.0]).shape == (1, 2)


def test_as_points_rejects_3d():
    """Tensors are refused."""
    with pytest.raises(ValueError, match="ndim=3"):
        as_points(np.zeros((2, 2, 2)))

"""Tests for the oracle self-checks at small sizes."""

import numpy as np
import pytest

from irspla import verify
from irspla.gaussian import Gaussian1D
from irspla.gpc import ep_fit
from irspla.kernel import Kernel
from irspla.verify import CheckResult, run_checks


@pytest.fixture
def rng():
    """A fixed generator."""
    return np.random.default_rng(11)


def test_probit_grid():
    """400 cavities spanning means -6..6 and variances 1e-3..1e3."""
    grid = verify.probit_grid()
    assert len(grid) == 400
    means = sorted({c.mean for c in grid})
    variances = sorted({c.variance for c in grid})
    assert (means[0], means[-1]) == (-6.0, 6.0)
    assert variances[0] == pytest.approx(1e-3)
    assert variances[-1] == pytest.approx(1e3)


def test_probit_moments():
    """Closed-form moments agree with quadrature to 1e-8 over the whole grid."""
    assert verify.check_probit_moments() < 1e-8


def test_probit_factors(rng):
    """Shifted, scaled and sign-flipped probit factors also agree with quadrature."""
    assert verify.check_probit_factors(rng, 5) < 1e-8


def test_quadrature_standard_case():
    """Unit cavity, label +1: ``Z = 1/2``, mean ``1/sqrt(pi)``, variance ``1 - 1/pi``."""
    z, mean, variance = verify.quadrature_moments(Gaussian1D(0.0, 1.0))
    assert z == pytest.approx(0.5, abs=1e-12)
    assert mean == pytest.approx(1.0 / np.sqrt(np.pi), abs=1e-12)
    assert variance == pytest.approx(1.0 - 1.0 / np.pi, abs=1e-12)


def test_joint_marginals(rng):
    """Margins of the joint table match single-point predictions."""
    assert verify.check_joint_marginals(rng, 3) < 1e-4


def test_label_flip(rng):
    """Flipping every label mirrors the predictions."""
    assert verify.check_label_flip(rng, 3) < 1e-9


def test_importance_telescoping(rng):
    """Evaluating the whole pool makes the weighted utility exact."""
    assert verify.check_importance_telescoping(rng, 1) < 1e-9


def test_channel_identities(rng):
    """Stacking round trips and path loss hits its reference values."""
    assert verify.check_channel_identities(rng, 3) < 1e-9


def test_mc_predict_without_data_is_half(rng):
    """A single symmetric pair of points leaves a far-away point at 0.5."""
    model = ep_fit(np.array([[-1.0, 0.0], [1.0, 0.0]]), np.array([-1, 1], dtype=np.int8), Kernel(1.0, 1.0))
    assert verify.mc_predict(model, np.array([0.0, 50.0]), 20_000, rng) == pytest.approx(0.5, abs=0.02)


class TestCheckResult:
    """Report lines."""

    def test_pass(self):
        """Passed checks read ``ok``."""
        line = str(CheckResult("label flip", True, 1e-12, 1e-9, 0.5))
        assert line.startswith("ok")
        assert "label flip" in line
        assert "1.0e-09" in line

    def test_fail(self):
        """Failed checks read ``FAIL``."""
        assert str(CheckResult("joint margins", False, 0.1, 1e-4)).startswith("FAIL")


@pytest.mark.stress
def test_run_checks():
    """Every quick check passes."""
    results = run_checks(seed=3)
    assert len(results) == 9
    assert all(r.passed for r in results), [str(r) for r in results if not r.passed]

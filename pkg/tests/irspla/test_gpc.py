"""Unit tests for EP Gaussian process classification.

Fixture Organization:
--------------------
- kernel: unit RBF kernel
- separable: a small two-cluster problem with signs in {-1, +1}
- fitted: the EP fit on ``separable``
"""

import math

import numpy as np
import pytest
from scipy import linalg

from irspla import gpc
from irspla.errors import EmptyInput, GramNotPD, LengthMismatch, NegativePredictiveVariance
from irspla.gaussian import Gaussian1D, probit_gaussian_moments
from irspla.gpc import (
    GpcModel,
    SiteParams,
    ep_fit,
    posterior_from_sites,
    predict,
    predict_label,
    predict_labels,
    predict_proba,
    probit_of_latent,
    to_class,
    to_sign,
)
from irspla.kernel import Kernel


@pytest.fixture
def kernel():
    """Unit RBF kernel."""
    return Kernel(1.0, 1.0)


@pytest.fixture
def separable():
    """Two clusters around (-1, -1) and (1, 1), four points each."""
    rng = np.random.default_rng(7)
    x = np.vstack([rng.normal(-1.0, 0.3, size=(4, 2)), rng.normal(1.0, 0.3, size=(4, 2))])
    y = np.array([-1] * 4 + [1] * 4, dtype=np.int8)
    return x, y


@pytest.fixture
def fitted(separable, kernel):
    """EP fit on the two clusters."""
    return ep_fit(*separable, kernel)


class TestSiteParams:
    """Site containers."""

    def test_flat(self):
        """Uninitialised sites have zero precision."""
        sites = SiteParams.flat(3)
        assert len(sites) == 3
        np.testing.assert_array_equal(sites.precision, 0.0)
        np.testing.assert_array_equal(sites.shift, 0.0)

    def test_from_natural_round_trip(self):
        """Natural parameters come back out."""
        sites = SiteParams.from_natural(np.array([2.0, 0.0]), np.array([1.0, 0.0]), np.zeros(2))
        assert sites.mean[0] == pytest.approx(0.5)
        assert sites.variance[0] == pytest.approx(0.5)
        assert math.isinf(sites.variance[1])
        np.testing.assert_allclose(sites.precision, [2.0, 0.0])

    def test_length_mismatch(self):
        """The three arrays share one length."""
        with pytest.raises(LengthMismatch):
            SiteParams(np.zeros(2), np.ones(3), np.zeros(2))


class TestEpFit:
    """Fitting behaviour of ``ep_fit``."""

    def test_converges(self, fitted):
        """The clustered problem converges without skipped sites."""
        assert fitted.converged
        assert 1 <= fitted.sweeps < 100
        assert fitted.skipped == 0
        assert math.isfinite(fitted.log_marginal)

    def test_single_point_is_exact(self, kernel):
        """With one site EP is exact: mean, variance and evidence match the tilted moments."""
        model = ep_fit([[0.0, 0.0]], [1], kernel)
        exact = probit_gaussian_moments(Gaussian1D(0.0, 1.0), 1)
        assert model.posterior_mean[0] == pytest.approx(exact.mean, abs=1e-8)
        assert model.posterior_cov[0, 0] == pytest.approx(exact.variance, abs=1e-8)
        assert model.log_marginal == pytest.approx(math.log(0.5), abs=1e-8)

    def test_posterior_from_sites_matches_inverse_form(self, fitted):
        """``Sigma = (K^-1 + S~)^-1`` and ``mu = Sigma nu~``."""
        gram = fitted.kernel.gram(fitted.train_x) + fitted.jitter * np.eye(fitted.n)
        mean, cov = posterior_from_sites(gram, fitted.sites)
        direct = np.linalg.inv(np.linalg.inv(gram) + np.diag(fitted.sites.precision))
        np.testing.assert_allclose(cov, direct, atol=1e-8)
        np.testing.assert_allclose(mean, direct @ fitted.sites.shift, atol=1e-8)
        np.testing.assert_allclose(fitted.posterior_mean, mean, atol=1e-10)

    def test_sites_positive_precision(self, fitted):
        """Probit sites always have positive precision after an update."""
        assert np.all(fitted.sites.precision > 0.0)

    def test_deterministic(self, separable, kernel):
        """The same seed gives the same fit bit for bit."""
        a = ep_fit(*separable, kernel, seed=3)
        b = ep_fit(*separable, kernel, seed=3)
        np.testing.assert_array_equal(a.posterior_mean, b.posterior_mean)

    def test_seed_only_changes_the_path(self, separable, kernel):
        """Different permutations reach the same fixed point."""
        a = ep_fit(*separable, kernel, 1e-10, seed=1)
        b = ep_fit(*separable, kernel, 1e-10, seed=2)
        np.testing.assert_allclose(a.posterior_mean, b.posterior_mean, atol=1e-7)

    def test_damping_reaches_same_fixed_point(self, separable, kernel):
        """Damped updates converge to the undamped posterior."""
        a = ep_fit(*separable, kernel, 1e-9)
        b = ep_fit(*separable, kernel, 1e-9, max_sweeps=500, damping=0.5)
        assert b.converged
        np.testing.assert_allclose(a.posterior_mean, b.posterior_mean, atol=1e-6)

    def test_sweep_budget(self, separable, kernel, caplog):
        """Running out of sweeps clears ``converged`` and logs a warning."""
        model = ep_fit(*separable, kernel, 1e-12, max_sweeps=1)
        assert not model.converged
        assert model.sweeps == 1
        assert "did not converge" in caplog.text

    def test_duplicate_inputs_get_jitter(self, kernel):
        """Repeated fingerprints are handled by the diagonal jitter."""
        model = ep_fit([[0.0], [0.0], [1.0]], [1, 1, -1], kernel)
        assert model.jitter >= 1e-10
        assert model.converged

    def test_gram_not_pd(self, separable, kernel, monkeypatch):
        """Jitter escalation gives up after two rounds."""

        def refuse(*_args, **_kwargs):
            raise linalg.LinAlgError("not positive definite")

        monkeypatch.setattr(gpc, "cholesky", refuse)
        with pytest.raises(GramNotPD, match="jitter"):
            ep_fit(*separable, kernel)

    def test_empty(self, kernel):
        """At least one point is needed."""
        with pytest.raises(EmptyInput):
            ep_fit(np.zeros((0, 2)), [], kernel)

    def test_length_mismatch(self, kernel):
        """Inputs and labels pair up."""
        with pytest.raises(LengthMismatch):
            ep_fit(np.zeros((3, 2)), [1, -1], kernel)

    def test_labels_are_signs(self, kernel):
        """Classes must be converted to signs first."""
        with pytest.raises(ValueError, match="-1 or \\+1"):
            ep_fit(np.zeros((2, 1)), [0, 1], kernel)

    def test_site_normaliser_with_negative_site_precision(self):
        """A site with negative precision has a finite normaliser, ``log_hat`` minus the product's."""
        log_z = gpc._site_log_z(-0.3, Gaussian1D(0.2, 1.0), Gaussian1D(1.0, -4.0))
        assert log_z == pytest.approx(-0.3 + 0.5 * math.log(6.0 * math.pi) - 0.64 / 6.0)

    def test_flat_site_normaliser(self):
        """An untouched site contributes nothing."""
        assert gpc._site_log_z(-0.3, Gaussian1D(0.2, 1.0), Gaussian1D(0.0, math.inf)) == 0.0

    @pytest.mark.parametrize("damping", [0.0, 1.5])
    def test_bad_damping(self, separable, kernel, damping):
        """Damping lies in (0, 1]."""
        with pytest.raises(ValueError, match="damping"):
            ep_fit(*separable, kernel, damping=damping)


class TestPrediction:
    """Predictive probabilities and labels."""

    def test_cluster_centres(self, fitted):
        """Each cluster centre is classified as its cluster."""
        assert predict(fitted, [1.0, 1.0]) > 0.7
        assert predict(fitted, [-1.0, -1.0]) < 0.3
        np.testing.assert_array_equal(predict_labels(fitted, [[1.0, 1.0], [-1.0, -1.0]]), [1, 0])

    def test_far_point_reverts_to_prior(self, fitted):
        """Far from the data the latent moments return to the prior."""
        mean, var = fitted.latent([[50.0, 50.0]])
        assert mean[0] == pytest.approx(0.0, abs=1e-12)
        assert var[0] == pytest.approx(1.0)
        assert predict(fitted, [50.0, 50.0]) == pytest.approx(0.5)

    def test_label_flip_symmetry(self, separable, kernel):
        """Flipping every label mirrors the probabilities."""
        x, y = separable
        test = np.random.default_rng(0).normal(size=(6, 2))
        a = predict_proba(ep_fit(x, y, kernel, 1e-10), test)
        b = predict_proba(ep_fit(x, -y, kernel, 1e-10), test)
        np.testing.assert_allclose(a + b, 1.0, atol=1e-9)

    def test_empty_model_predicts_half(self, kernel):
        """An empty model predicts the prior, and a tie goes to class 1."""
        model = GpcModel.empty(kernel, 3)
        assert model.n == 0
        assert predict(model, np.zeros(3)) == pytest.approx(0.5)
        assert predict_label(model, np.zeros(3)) == 1

    def test_latent_pairs_match_marginals(self, fitted):
        """Pair moments agree with single-point moments."""
        xs = np.array([[0.2, 0.1], [1.0, -0.5]])
        mean_s, var_s, mean_star, var_star, cov = fitted.latent_pairs(xs, [0.5, 0.5])
        m, v = fitted.latent(xs)
        np.testing.assert_allclose(mean_s, m)
        np.testing.assert_allclose(var_s, v)
        m_star, v_star = fitted.latent([[0.5, 0.5]])
        assert float(mean_star) == pytest.approx(m_star[0])
        assert float(var_star) == pytest.approx(v_star[0])
        assert cov.shape == (2,)

    def test_latent_pairs_same_point(self, fitted):
        """The covariance of a point with itself is its variance."""
        _, var_s, _, _, cov = fitted.latent_pairs([[0.3, 0.3]], [0.3, 0.3])
        assert cov[0] == pytest.approx(var_s[0])

    def test_negative_predictive_variance(self):
        """The radicand ``1 + var`` must be positive."""
        with pytest.raises(NegativePredictiveVariance):
            probit_of_latent(0.0, -1.5)


def test_sign_and_class_mapping():
    """Class 1 is +1 and class 0 is -1."""
    np.testing.assert_array_equal(to_sign([0, 1, 1]), [-1, 1, 1])
    np.testing.assert_array_equal(to_class([-1, 1]), [0, 1])


def test_to_sign_rejects_other_labels():
    """Only 0 and 1 are identity classes."""
    with pytest.raises(ValueError, match="0 or 1"):
        to_sign([2])

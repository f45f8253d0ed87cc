"""Unit tests for grid-search hyperparameter selection."""

import numpy as np
import pytest

from irspla import hyper
from irspla.errors import AllFitsFailed, GramNotPD
from irspla.gpc import ep_fit, predict_proba
from irspla.hyper import SearchSpace, fit_hyperparameters, isolates_points, neighbour_distance
from irspla.kernel import Kernel


@pytest.fixture
def data():
    """Ten points, two classes split along the first axis."""
    rng = np.random.default_rng(4)
    x = rng.normal(size=(10, 2))
    y = np.where(x[:, 0] > 0, 1, -1).astype(np.int8)
    y[0], y[1] = 1, -1
    return x, y


@pytest.fixture
def small_space():
    """A 3x3 grid."""
    return SearchSpace((0.5, 2.0), (0.5, 2.0), 3)


class TestSearchSpace:
    """Grid construction."""

    def test_defaults(self):
        """Seven log-spaced points from 0.1 to 100 on each axis."""
        sv, ls = SearchSpace().axes()
        assert sv.shape == ls.shape == (7,)
        assert sv[0] == pytest.approx(0.1)
        assert sv[-1] == pytest.approx(100.0)
        np.testing.assert_allclose(np.diff(np.log(sv)), np.log(1000.0) / 6)

    def test_single_point(self):
        """One point per axis is the lower bound."""
        sv, _ = SearchSpace((1.0, 1.0), (2.0, 2.0), 1).axes()
        np.testing.assert_allclose(sv, [1.0])

    @pytest.mark.parametrize("bounds", [(0.0, 1.0), (2.0, 1.0), (1.0, float("inf"))])
    def test_bad_bounds(self, bounds):
        """Bounds need ``0 < low <= high < inf``."""
        with pytest.raises(ValueError, match="low <= high"):
            SearchSpace(signal_variance=bounds)

    def test_bad_points(self):
        """At least one point per axis."""
        with pytest.raises(ValueError, match="at least 1"):
            SearchSpace(points=0)


class TestFitHyperparameters:
    """Evidence maximisation over the grid."""

    def test_picks_grid_maximiser(self, data, small_space):
        """The returned kernel has the largest evidence on the grid."""
        x, y = data
        best = fit_hyperparameters(x, y, small_space)
        sv_axis, ls_axis = small_space.axes()
        evidence = {(sv, ls): ep_fit(x, y, Kernel(sv, ls)).log_marginal for sv in sv_axis for ls in ls_axis}
        top = max(evidence.values())
        assert evidence[(best.signal_variance, best.lengthscale)] == pytest.approx(top, abs=1e-6)

    def test_deterministic(self, data, small_space):
        """Same inputs, same kernel."""
        assert fit_hyperparameters(*data, small_space) == fit_hyperparameters(*data, small_space)

    def test_ties_prefer_longer_lengthscale(self, data, monkeypatch):
        """Flat evidence goes to the largest lengthscale, then the first signal variance."""

        class Flat:
            log_marginal = 0.0

        monkeypatch.setattr(hyper, "ep_fit", lambda *a, **k: Flat())
        best = fit_hyperparameters(*data, SearchSpace((1.0, 4.0), (1.0, 4.0), 2))
        assert best == Kernel(1.0, 4.0)

    def test_skips_failed_fits(self, data, monkeypatch):
        """Gram failures are skipped."""
        real = hyper.ep_fit

        def flaky(x, y, kernel, *args, **kwargs):
            if kernel.lengthscale < 1.5:
                raise GramNotPD("singular")
            return real(x, y, kernel, *args, **kwargs)

        monkeypatch.setattr(hyper, "ep_fit", flaky)
        assert fit_hyperparameters(*data, SearchSpace((1.0, 1.0), (1.0, 2.0), 2)).lengthscale == pytest.approx(2.0)

    def test_all_fail(self, data, monkeypatch):
        """If every fit fails the search raises."""

        def broken(*_args, **_kwargs):
            raise GramNotPD("singular")

        monkeypatch.setattr(hyper, "ep_fit", broken)
        with pytest.raises(AllFitsFailed):
            fit_hyperparameters(*data, SearchSpace((1.0, 1.0), (1.0, 1.0), 1))

    def test_needs_both_classes(self):
        """A single class has no evidence to compare."""
        with pytest.raises(ValueError, match="both classes"):
            fit_hyperparameters(np.zeros((3, 2)), np.ones(3, dtype=np.int8))

    def test_all_isolating_falls_back(self, data, caplog):
        """With only isolating kernels on the grid the search still answers, with a warning."""
        best = fit_hyperparameters(*data, SearchSpace((1.0, 2.0), (1e-3, 1e-2), 2))
        assert best.lengthscale == pytest.approx(1e-2)
        assert "isolates the training points" in caplog.text


@pytest.fixture
def far_pairs():
    """Four points in 16-D: two per class, classes far apart."""
    rng = np.random.default_rng(11)
    centre = rng.normal(size=16)
    x = np.vstack([centre, centre, -centre, -centre]) + 0.5 * rng.normal(size=(4, 16))
    y = np.array([1, 1, -1, -1], dtype=np.int8)
    nearby = x + 0.2 * rng.normal(size=x.shape)
    return x, y, nearby


class TestIsolation:
    """Kernels too narrow to link neighbouring points."""

    def test_neighbour_distance(self):
        """Median of the nearest-neighbour distances."""
        x = np.array([[0.0], [1.0], [3.0], [7.0]])
        assert neighbour_distance(x) == pytest.approx(1.5)

    def test_isolates_points(self):
        """The cutoff sits at a neighbour correlation of 1e-3."""
        assert isolates_points(Kernel(1.0, 0.1), 1.0)
        assert not isolates_points(Kernel(1.0, 1.0), 1.0)

    def test_corner_kernel_is_flat(self, far_pairs):
        """The smallest-lengthscale corner fits every label alone: evidence 4 log 1/2, predictions 0.5."""
        x, y, nearby = far_pairs
        model = ep_fit(x, y, Kernel(100.0, 0.1))
        assert model.log_marginal == pytest.approx(4 * np.log(0.5), abs=1e-6)
        np.testing.assert_allclose(predict_proba(model, nearby), 0.5, atol=1e-9)

    def test_selected_kernel_predicts(self, far_pairs):
        """On four initial points the search returns a kernel whose predictions vary."""
        x, y, nearby = far_pairs
        best = fit_hyperparameters(x, y)
        assert not isolates_points(best, neighbour_distance(x))
        proba = predict_proba(ep_fit(x, y, best), nearby)
        assert np.ptp(proba) > 0.01
        assert (proba[:2] > 0.5).all()
        assert (proba[2:] < 0.5).all()

    def test_isolating_evidence_ignored(self, far_pairs, monkeypatch):
        """An isolating kernel is passed over even when its evidence is the best on the grid."""
        x, y, nearby = far_pairs
        spacing = neighbour_distance(x)
        real = hyper.ep_fit

        class Scored:
            def __init__(self, log_marginal):
                self.log_marginal = log_marginal

        def inflated(xs, ys, kernel, *args, **kwargs):
            evidence = real(xs, ys, kernel, *args, **kwargs).log_marginal
            return Scored(evidence + 10.0 if isolates_points(kernel, spacing) else evidence)

        monkeypatch.setattr(hyper, "ep_fit", inflated)
        best = fit_hyperparameters(x, y)
        assert not isolates_points(best, spacing)
        assert np.ptp(predict_proba(ep_fit(x, y, best), nearby)) > 0.01

"""Classifier contracts: index bank, mixtures, logistic model, persistence."""

from __future__ import annotations

import math

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

import oracles
from helpers import make_image
from satbayes.classifiers import (
    GaussianMixture,
    IndexClassifier,
    LogisticClassifier,
    MixtureClassifier,
    SpectralIndexKind,
    fit_logistic_classifier,
    fit_mixture_classifier,
    load_model,
    logistic_loss_grad,
    pseudo_labels,
    save_model,
    spectral_index,
)
from satbayes.errors import (
    ConfigError,
    DataError,
    InsufficientDataError,
    InvalidThresholdError,
    LoadError,
    ShapeError,
)

WATER_TAU = (-1.0, 0.13, 1.0)
DEFOREST_TAU = (-1.0, 0.65, 1.0)
LANDCOVER_TAU = (-1.0, -0.05, 0.35, 1.0)


# ------------------------------------------------------------------
# spectral indices and pseudo-labels
# ------------------------------------------------------------------


class TestSpectralIndex:
    def test_water_index_example(self):
        img = make_image(("green", "swir1"), [[[0.2]], [[0.1]]])
        values, flags = spectral_index(img, SpectralIndexKind.MNDWI)
        assert values[0, 0] == pytest.approx(0.3333, abs=1e-4)
        assert not flags.any()

    def test_vegetation_index_example(self):
        img = make_image(("nir", "red"), [[[0.4]], [[0.1]]])
        values, _ = spectral_index(img, SpectralIndexKind.NDVI)
        assert values[0, 0] == pytest.approx(0.6, abs=1e-12)

    def test_band_pairs(self):
        assert SpectralIndexKind.MNDWI.band_pair == ("green", "swir1")
        assert SpectralIndexKind.NDWI.band_pair == ("green", "nir")
        assert SpectralIndexKind.NDVI.band_pair == ("nir", "red")

    def test_zero_denominator_flagged(self):
        img = make_image(("green", "swir1"), [[[0.0, 0.2]], [[0.0, 0.1]]])
        values, flags = spectral_index(img, SpectralIndexKind.MNDWI)
        assert flags[0, 0] and not flags[0, 1]
        assert values[0, 0] == 0.0

    def test_range_for_nonnegative_reflectance(self):
        rng = np.random.default_rng(3)
        g = rng.uniform(0.0, 1.0, size=(16, 16)) + 1e-9
        s = rng.uniform(0.0, 1.0, size=(16, 16)) + 1e-9
        values, _ = spectral_index(
            make_image(("green", "swir1"), [g, s]), SpectralIndexKind.MNDWI
        )
        assert values.min() >= -1.0 and values.max() <= 1.0

    def test_missing_band(self):
        img = make_image(("green", "red"), [[[0.2]], [[0.1]]])
        with pytest.raises(ConfigError):
            spectral_index(img, SpectralIndexKind.MNDWI)


class TestPseudoLabels:
    def test_interval_partition(self):
        img = make_image(
            ("green", "swir1"),
            [[[0.1, 0.3, 0.5]], [[0.3, 0.1, 0.1]]],  # indices -0.5, 0.5, 2/3
        )
        raster = pseudo_labels(img, SpectralIndexKind.MNDWI, WATER_TAU)
        assert_array_equal(raster.labels, [[0, 1, 1]])

    def test_lower_endpoint_is_class_zero(self):
        # index exactly -1 (green 0, positive swir)
        img = make_image(("green", "swir1"), [[[0.0]], [[0.4]]])
        raster = pseudo_labels(img, SpectralIndexKind.MNDWI, WATER_TAU)
        assert raster.labels[0, 0] == 0

    def test_threshold_value_joins_lower_class(self):
        classifier = IndexClassifier.from_thresholds(LANDCOVER_TAU, SpectralIndexKind.NDVI)
        # -0.05 sits at the boundary: (tau_0, tau_1] owns it
        tau = np.asarray(LANDCOVER_TAU)
        idx = np.searchsorted(tau, -0.05, side="left") - 1
        assert idx == 0
        assert classifier.num_classes == 3

    def test_out_of_range_clamps(self):
        # bias correction can push reflectance negative: index outside [-1, 1]
        img = make_image(("green", "swir1"), [[[0.3, -0.05]], [[-0.1, 0.3]]])
        values, _ = spectral_index(img, SpectralIndexKind.MNDWI)
        assert values[0, 0] > 1.0 and values[0, 1] < -1.0
        raster = pseudo_labels(img, SpectralIndexKind.MNDWI, WATER_TAU)
        assert_array_equal(raster.labels, [[1, 0]])


# ------------------------------------------------------------------
# index classifier
# ------------------------------------------------------------------


class TestIndexClassifier:
    @pytest.mark.parametrize(
        "tau,mu,sigma",
        [
            (WATER_TAU, [-0.435, 0.565], [0.565, 0.435]),
            (DEFOREST_TAU, [-0.175, 0.825], [0.825, 0.175]),
            (LANDCOVER_TAU, [-0.525, 0.149, 0.675], [0.475, 0.19, 0.325]),
        ],
    )
    def test_published_parameter_tables(self, tau, mu, sigma):
        classifier = IndexClassifier.from_thresholds(tau, SpectralIndexKind.MNDWI)
        assert_allclose(classifier.means, mu, atol=2e-2)
        assert_allclose(classifier.sigmas, sigma, atol=2e-2)

    @pytest.mark.parametrize("tau", [WATER_TAU, DEFOREST_TAU, LANDCOVER_TAU])
    def test_interval_formula_exact(self, tau):
        classifier = IndexClassifier.from_thresholds(tau, SpectralIndexKind.MNDWI)
        arr = np.asarray(tau)
        widths = np.diff(arr)
        assert_allclose(classifier.means, arr[:-1] + widths / 2.0, atol=1e-12)
        assert_allclose(classifier.sigmas, widths / 2.0, atol=1e-12)

    def test_posterior_at_class_center(self):
        classifier = IndexClassifier.from_thresholds(WATER_TAU, SpectralIndexKind.MNDWI)
        post = classifier.posterior_from_index(0.565)
        assert post[1] == pytest.approx(0.8615, abs=1e-3)

    def test_posterior_at_threshold(self):
        classifier = IndexClassifier.from_thresholds(WATER_TAU, SpectralIndexKind.MNDWI)
        post = classifier.posterior_from_index(0.13)
        assert post[1] == pytest.approx(0.565, abs=1e-3)

    def test_symmetric_thresholds_give_even_split(self):
        classifier = IndexClassifier.from_thresholds((-1.0, 0.0, 1.0), SpectralIndexKind.NDWI)
        assert_allclose(classifier.posterior_from_index(0.0), [0.5, 0.5], atol=1e-12)

    def test_posterior_matches_density_ratio(self):
        # independent route: explicit normal densities
        classifier = IndexClassifier.from_thresholds(WATER_TAU, SpectralIndexKind.MNDWI)
        y = 0.565
        dens = [
            oracles.gaussian_density(
                np.array([y]), np.array([m]), np.array([[s * s]])
            )
            for m, s in zip(classifier.means, classifier.sigmas)
        ]
        assert_allclose(
            classifier.posterior_from_index(y), np.array(dens) / sum(dens), atol=1e-12
        )

    def test_posterior_normalized_for_many_values(self):
        rng = np.random.default_rng(8)
        classifier = IndexClassifier.from_thresholds(LANDCOVER_TAU, SpectralIndexKind.NDVI)
        post = classifier.posterior_from_index(rng.uniform(-1.0, 1.0, size=1000))
        assert_allclose(post.sum(axis=1), 1.0, atol=1e-9)
        assert post.min() >= 0.0

    @pytest.mark.parametrize(
        "tau",
        [
            (-1.0, 1.0),                 # too short
            (0.0, 0.5, 1.0),             # does not start at -1
            (-1.0, 0.5, 0.9),            # does not end at 1
            (-1.0, 0.5, 0.5, 1.0),       # not strictly increasing
            (-1.0, 0.7, 0.3, 1.0),       # decreasing interior
        ],
    )
    def test_bad_thresholds_rejected(self, tau):
        with pytest.raises(InvalidThresholdError):
            IndexClassifier.from_thresholds(tau, SpectralIndexKind.MNDWI)

    def test_frame_posterior_layout(self):
        img = make_image(("green", "swir1"), [[[0.3, 0.1]], [[0.05, 0.3]]])
        classifier = IndexClassifier.from_thresholds(WATER_TAU, SpectralIndexKind.MNDWI)
        values, _ = spectral_index(img, SpectralIndexKind.MNDWI)
        from satbayes.core import Frame
        import datetime as dt

        frame = Frame(date=dt.date(2021, 1, 1), image=img)
        assert_allclose(
            classifier.frame_posterior(frame),
            classifier.posterior_from_index(values.ravel()),
            atol=1e-15,
        )


# ------------------------------------------------------------------
# Gaussian mixtures
# ------------------------------------------------------------------


class TestGaussianMixture:
    def test_density_at_mean_identity_cov(self):
        for dim in (1, 2, 3):
            mix = GaussianMixture(
                weights=np.array([1.0]),
                means=np.zeros((1, dim)),
                covariances=np.eye(dim)[np.newaxis],
            )
            expect = (2.0 * math.pi) ** (-dim / 2.0)
            assert_allclose(mix.density(np.zeros((1, dim)))[0], expect, atol=1e-12)

    def test_density_matches_direct_sum(self):
        rng = np.random.default_rng(12)
        weights = np.array([0.3, 0.7])
        means = rng.normal(size=(2, 2))
        covs = np.stack([np.eye(2) * 0.5, np.array([[1.0, 0.3], [0.3, 0.8]])])
        mix = GaussianMixture(weights=weights, means=means, covariances=covs)
        points = rng.normal(size=(25, 2))
        direct = [
            oracles.mixture_density(p, weights, means, covs) for p in points
        ]
        assert_allclose(mix.density(points), direct, atol=1e-12)

    def test_dimension_mismatch(self):
        mix = GaussianMixture(
            weights=np.array([1.0]),
            means=np.zeros((1, 2)),
            covariances=np.eye(2)[np.newaxis],
        )
        with pytest.raises(ShapeError):
            mix.density(np.zeros((4, 3)))


class TestMixtureFit:
    def test_recovers_separated_means(self):
        rng = np.random.default_rng(21)
        a = rng.normal(0.0, 0.1, size=(400, 1))
        b = rng.normal(1.0, 0.1, size=(400, 1))
        model = fit_mixture_classifier([a, b], ("gray",), components=1, seed=5)
        assert abs(model.mixtures[0].means[0, 0] - 0.0) < 0.05
        assert abs(model.mixtures[1].means[0, 0] - 1.0) < 0.05

    def test_recovers_bimodal_class(self):
        rng = np.random.default_rng(22)
        lo = rng.normal(-1.0, 0.1, size=(300, 1))
        hi = rng.normal(1.0, 0.1, size=(300, 1))
        mixed = np.concatenate([lo, hi])
        rng.shuffle(mixed)
        other = rng.normal(5.0, 0.1, size=(600, 1))
        model = fit_mixture_classifier([mixed, other], ("gray",), components=[2, 1], seed=9)
        found = np.sort(model.mixtures[0].means[:, 0])
        assert_allclose(found, [-1.0, 1.0], atol=0.1)

    def test_single_component_closed_form(self):
        rng = np.random.default_rng(23)
        x = rng.normal(0.3, 0.2, size=(200, 2))
        other = rng.normal(2.0, 0.2, size=(200, 2))
        model = fit_mixture_classifier([x, other], ("a", "b"), components=1, seed=1)
        mix = model.mixtures[0]
        assert_allclose(mix.means[0], x.mean(axis=0), atol=1e-9)
        centered = x - x.mean(axis=0)
        biased_cov = centered.T @ centered / x.shape[0]
        assert_allclose(mix.covariances[0], biased_cov + 1e-6 * np.eye(2), atol=1e-9)

    def test_loglik_trace_monotone(self):
        rng = np.random.default_rng(24)
        a = np.concatenate(
            [rng.normal(-1.0, 0.3, size=(150, 1)), rng.normal(1.0, 0.3, size=(150, 1))]
        )
        b = rng.normal(4.0, 0.3, size=(300, 1))
        model = fit_mixture_classifier([a, b], ("gray",), components=2, seed=2)
        for trace in model.ll_traces:
            diffs = np.diff(np.asarray(trace))
            assert np.all(diffs >= -1e-9)

    def test_deterministic_given_seed(self):
        rng = np.random.default_rng(25)
        data = [rng.normal(0, 1, size=(100, 1)), rng.normal(3, 1, size=(100, 1))]
        m1 = fit_mixture_classifier(data, ("gray",), components=2, seed=7)
        m2 = fit_mixture_classifier(data, ("gray",), components=2, seed=7)
        for a, b in zip(m1.mixtures, m2.mixtures):
            assert_array_equal(a.means, b.means)
            assert_array_equal(a.covariances, b.covariances)
            assert_array_equal(a.weights, b.weights)

    def test_min_samples_enforced(self):
        rng = np.random.default_rng(26)
        # 2 components x 2 bands needs 40 samples; 39 must fail
        thin = rng.normal(size=(39, 2))
        fat = rng.normal(size=(100, 2))
        with pytest.raises(InsufficientDataError):
            fit_mixture_classifier([thin, fat], ("a", "b"), components=2)

    def test_per_class_counts_validated(self):
        rng = np.random.default_rng(27)
        data = [rng.normal(size=(100, 1)), rng.normal(size=(100, 1))]
        with pytest.raises(Exception):
            fit_mixture_classifier(data, ("gray",), components=[1, 2, 3])

    def test_empty_class_rejected(self):
        rng = np.random.default_rng(28)
        with pytest.raises(InsufficientDataError):
            fit_mixture_classifier(
                [np.empty((0, 1)), rng.normal(size=(50, 1))], ("gray",), components=1
            )

    def test_likelihood_vs_posterior_normalization(self):
        rng = np.random.default_rng(29)
        data = [rng.normal(0, 0.4, size=(120, 1)), rng.normal(2, 0.4, size=(120, 1))]
        model = fit_mixture_classifier(data, ("gray",), components=1, seed=0)
        pixels = rng.normal(1.0, 1.0, size=(30, 1))
        lik = model.likelihood(pixels)
        assert lik.min() >= 0.0
        norm = lik / lik.sum(axis=1, keepdims=True)
        import datetime as dt

        from satbayes.core import Frame

        frame = Frame(
            date=dt.date(2021, 1, 1),
            image=make_image(("gray",), [pixels.reshape(5, 6)]),
        )
        assert_allclose(model.frame_posterior(frame), norm, atol=1e-12)


# ------------------------------------------------------------------
# logistic classifier
# ------------------------------------------------------------------


def _blobs(rng, centers, count, spread=0.3):
    xs, ys = [], []
    for label, center in enumerate(centers):
        xs.append(rng.normal(center, spread, size=(count, len(center))))
        ys.append(np.full(count, label))
    return np.concatenate(xs), np.concatenate(ys).astype(np.intp)


class TestLogisticFit:
    def test_separable_blobs_high_accuracy(self):
        rng = np.random.default_rng(31)
        x, y = _blobs(rng, [(0.0, 0.0), (4.0, 0.0), (0.0, 4.0)], 100)
        model = fit_logistic_classifier(x, y, 3, ("a", "b"))
        pred = np.argmax(model.posterior(x), axis=1)
        assert np.mean(pred == y) >= 0.99

    def test_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(32)
        x, y = _blobs(rng, [(0.0, 0.0), (1.5, 1.0)], 40)
        aug = np.hstack([x, np.ones((x.shape[0], 1))])
        onehot = np.zeros((x.shape[0], 2))
        onehot[np.arange(x.shape[0]), y] = 1.0
        point = rng.normal(scale=0.5, size=2 * 3)

        def loss_only(w):
            return logistic_loss_grad(w, aug, onehot, 1e-4)[0]

        _, grad = logistic_loss_grad(point, aug, onehot, 1e-4)
        numeric = oracles.central_difference_gradient(loss_only, point)
        assert_allclose(grad, numeric, rtol=1e-5, atol=1e-10)

    def test_loss_value_matches_by_hand(self):
        rng = np.random.default_rng(33)
        x, y = _blobs(rng, [(0.0, 0.0), (2.0, 1.0)], 20)
        aug = np.hstack([x, np.ones((x.shape[0], 1))])
        onehot = np.zeros((x.shape[0], 2))
        onehot[np.arange(x.shape[0]), y] = 1.0
        w = rng.normal(scale=0.3, size=(2, 3))
        loss, _ = logistic_loss_grad(w.ravel(), aug, onehot, 1e-4)
        assert loss == pytest.approx(
            oracles.softmax_loss_by_hand(w, aug, y, 1e-4), abs=1e-12
        )

    def test_permutation_invariance(self):
        rng = np.random.default_rng(34)
        x, y = _blobs(rng, [(0.0, 0.0), (3.0, 1.0)], 80)
        probe = rng.normal(1.5, 1.0, size=(20, 2))
        base = fit_logistic_classifier(x, y, 2, ("a", "b"))
        perm = rng.permutation(x.shape[0])
        shuffled = fit_logistic_classifier(x[perm], y[perm], 2, ("a", "b"))
        assert_allclose(base.posterior(probe), shuffled.posterior(probe), atol=1e-8)

    def test_feature_shift_invariance(self):
        rng = np.random.default_rng(35)
        x, y = _blobs(rng, [(0.0, 0.0), (2.5, 2.5)], 60)
        probe = rng.normal(1.0, 1.0, size=(15, 2))
        base = fit_logistic_classifier(x, y, 2, ("a", "b"))
        shifted = fit_logistic_classifier(x + 5.0, y, 2, ("a", "b"))
        assert_allclose(base.posterior(probe), shifted.posterior(probe + 5.0), atol=1e-12)

    def test_zero_weights_give_uniform(self):
        model = LogisticClassifier(
            bands=("a", "b"),
            weights=np.zeros((3, 3)),
            feature_mean=np.zeros(2),
            feature_std=np.ones(2),
        )
        post = model.posterior(np.random.default_rng(0).normal(size=(10, 2)))
        assert_allclose(post, 1.0 / 3.0, atol=1e-15)

    def test_posterior_matches_direct_softmax(self):
        rng = np.random.default_rng(36)
        x, y = _blobs(rng, [(0.0, 0.0), (3.0, 0.5)], 50)
        model = fit_logistic_classifier(x, y, 2, ("a", "b"))
        probe = rng.normal(1.0, 1.5, size=(12, 2))
        std = (probe - model.feature_mean) / model.feature_std
        scores = std @ model.weights[:, :-1].T + model.weights[:, -1]
        expect = np.exp(scores - scores.max(axis=1, keepdims=True))
        expect /= expect.sum(axis=1, keepdims=True)
        assert_allclose(model.posterior(probe), expect, atol=1e-12)

    def test_single_class_labels_rejected(self):
        rng = np.random.default_rng(37)
        with pytest.raises(InsufficientDataError):
            fit_logistic_classifier(rng.normal(size=(30, 2)), np.ones(30, dtype=int), 2, ("a", "b"))

    def test_out_of_range_labels_rejected(self):
        rng = np.random.default_rng(38)
        labels = np.array([0, 1, 2] * 10)
        with pytest.raises(DataError):
            fit_logistic_classifier(rng.normal(size=(30, 2)), labels, 2, ("a", "b"))


# ------------------------------------------------------------------
# model persistence
# ------------------------------------------------------------------


class TestModelRoundTrip:
    def test_index_classifier(self, tmp_path):
        model = IndexClassifier.from_thresholds(LANDCOVER_TAU, SpectralIndexKind.NDVI)
        path = save_model(tmp_path / "sic.model", model)
        loaded = load_model(path)
        assert isinstance(loaded, IndexClassifier)
        assert loaded.kind == model.kind
        assert loaded.thresholds == model.thresholds
        assert_array_equal(loaded.means, model.means)
        assert_array_equal(loaded.sigmas, model.sigmas)

    def test_mixture_classifier(self, tmp_path):
        rng = np.random.default_rng(41)
        data = [rng.normal(0, 1, size=(80, 2)), rng.normal(4, 1, size=(80, 2))]
        model = fit_mixture_classifier(data, ("a", "b"), components=2, seed=3)
        loaded = load_model(save_model(tmp_path / "gmm.model", model))
        assert isinstance(loaded, MixtureClassifier)
        assert loaded.bands == model.bands
        probe = rng.normal(2, 2, size=(40, 2))
        assert_array_equal(loaded.likelihood(probe), model.likelihood(probe))
        for a, b in zip(loaded.mixtures, model.mixtures):
            assert_array_equal(a.weights, b.weights)
            assert_array_equal(a.means, b.means)
            assert_array_equal(a.covariances, b.covariances)

    def test_logistic_classifier(self, tmp_path):
        rng = np.random.default_rng(42)
        x, y = _blobs(rng, [(0.0, 0.0), (3.0, 3.0)], 50)
        model = fit_logistic_classifier(x, y, 2, ("a", "b"))
        loaded = load_model(save_model(tmp_path / "lr.model", model))
        assert isinstance(loaded, LogisticClassifier)
        assert_array_equal(loaded.weights, model.weights)
        assert_array_equal(loaded.feature_mean, model.feature_mean)
        assert_array_equal(loaded.feature_std, model.feature_std)
        probe = rng.normal(1.5, 1.0, size=(10, 2))
        assert_array_equal(loaded.posterior(probe), model.posterior(probe))

    def test_truncated_file_rejected(self, tmp_path):
        model = IndexClassifier.from_thresholds(WATER_TAU, SpectralIndexKind.MNDWI)
        path = save_model(tmp_path / "sic.model", model)
        blob = path.read_bytes()
        path.write_bytes(blob[: len(blob) - 4])
        with pytest.raises(LoadError):
            load_model(path)

    def test_bad_magic_rejected(self, tmp_path):
        path = tmp_path / "junk.model"
        path.write_bytes(b"NOPE" + bytes(64))
        with pytest.raises(LoadError):
            load_model(path)

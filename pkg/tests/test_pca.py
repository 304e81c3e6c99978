import numpy as np
import pytest

from dimest.pca import fit_pca, project, reconstruct, reconstruction_error_curve, scree
from dimest.spectral import svd
from dimest.data import synth_factor_panel
from dimest.dimension import dim_gte, dim_cumulative
from dimest.exception import ArgumentError, DegenerateSpectrumError


class TestFitPca:
    def test_uncentered_diagonal(self):
        model = fit_pca([[3.0, 0.0], [0.0, 4.0]], center=False)
        np.testing.assert_allclose(model.spectrum.values, [4.0, 3.0], atol=1e-12)
        np.testing.assert_array_equal(model.mean, [0.0, 0.0])
        assert model.spectrum.source == "pca"

    def test_centered_diagonal(self):
        model = fit_pca([[3.0, 0.0], [0.0, 4.0]])
        np.testing.assert_allclose(model.mean, [1.5, 2.0])
        # the centered matrix [[1.5, -2], [-1.5, 2]] is rank one with norm sqrt(12.5)
        np.testing.assert_allclose(model.spectrum.values, [np.sqrt(12.5), 0.0], atol=1e-12)

    def test_repeated_row_has_zero_spectrum(self):
        model = fit_pca(np.tile([1.0, -2.0, 3.0], (4, 1)))
        np.testing.assert_allclose(model.spectrum.values, 0.0, atol=1e-12)

    def test_centered_data_has_zero_means(self, rng):
        x = rng.standard_normal((20, 5)) + 7.0
        model = fit_pca(x)
        centered = (model.svd.u * model.svd.singular_values) @ model.svd.vt
        assert np.all(np.abs(centered.mean(axis=0)) <= 1e-10)

    def test_rank_bound(self, rng):
        assert fit_pca(rng.standard_normal((60, 784))).rank_bound == 60


class TestScree:
    def test_shares(self):
        model = fit_pca([[3.0, 0.0], [0.0, 4.0]], center=False)
        np.testing.assert_allclose(scree(model).normalized_variance, [16 / 25, 9 / 25])

    def test_single_component(self):
        model = fit_pca([[1.0, 0.0], [0.0, 0.0]], center=False)
        np.testing.assert_allclose(scree(model).normalized_variance, [1.0, 0.0])

    def test_equal_values(self):
        model = fit_pca([[2.0, 0.0], [0.0, 2.0]], center=False)
        np.testing.assert_allclose(scree(model).normalized_variance, [0.5, 0.5])

    def test_sums_to_one(self, rng):
        shares = scree(fit_pca(rng.standard_normal((60, 30)))).normalized_variance
        assert len(shares) == 30
        assert shares[0] == shares.max()
        assert abs(shares.sum() - 1.0) <= 1e-9

    def test_zero_spectrum(self):
        with pytest.raises(DegenerateSpectrumError):
            scree(fit_pca(np.ones((3, 2))))


class TestProjection:
    def test_full_rank_reconstruction(self, rng):
        x = rng.standard_normal((10, 4))
        model = fit_pca(x)
        np.testing.assert_allclose(reconstruct(model, x, 4), x, atol=1e-10)

    def test_projection_shape(self, rng):
        x = rng.standard_normal((10, 4))
        assert project(fit_pca(x), x, 2).shape == (10, 2)

    def test_projection_variance_matches_singular_values(self, rng):
        x = rng.standard_normal((30, 5))
        model = fit_pca(x)
        z = project(model, x, 3)
        np.testing.assert_allclose(np.linalg.norm(z, axis=0), model.spectrum.values[:3])

    def test_feature_mismatch(self, rng):
        model = fit_pca(rng.standard_normal((5, 3)))
        with pytest.raises(ArgumentError):
            project(model, np.zeros((2, 4)), 1)


class TestReconstructionErrorCurve:
    def test_full_rank_is_zero(self, rng):
        x = rng.standard_normal((6, 4))
        model = fit_pca(x, center=False)
        [(k, err)] = reconstruction_error_curve(model, x, [4])
        assert k == 4
        assert err <= 1e-8

    def test_rank_two(self):
        a = np.array([1.0, 0.0, 0.0, 0.0])
        b = np.array([0.0, 1.0, 0.0, 0.0])
        x = np.outer([1.0, 2.0, -1.0, 0.5, 3.0], a) + np.outer([0.3, -1.0, 2.0, 1.0, 0.0], b)
        curve = dict(reconstruction_error_curve(fit_pca(x, center=False), x, [1, 2]))
        assert curve[2] <= 1e-8
        assert curve[1] > 0

    def test_non_increasing(self, rng):
        x = rng.standard_normal((15, 8))
        errors = [e for _, e in reconstruction_error_curve(fit_pca(x), x, range(1, 9))]
        assert all(a >= b - 1e-12 for a, b in zip(errors, errors[1:]))

    def test_rank_five_synthetic(self):
        x = synth_factor_panel(50, 30, 5, 0.0, seed=1)
        curve = dict(reconstruction_error_curve(fit_pca(x), x, [4, 5]))
        assert curve[5] <= 1e-6
        assert curve[4] > 1e-3

    def test_zero_data(self):
        x = np.zeros((3, 2))
        assert reconstruction_error_curve(fit_pca(x), x, [1]) == [(1, 0.0)]

    def test_k_out_of_range(self, rng):
        x = rng.standard_normal((4, 3))
        with pytest.raises(ArgumentError):
            reconstruction_error_curve(fit_pca(x), x, [0])
        with pytest.raises(ArgumentError):
            reconstruction_error_curve(fit_pca(x), x, [4])


class TestFactorRecovery:
    def test_five_latent_factors(self):
        clean = synth_factor_panel(200, 100, 5, 0.0, seed=0)
        x = synth_factor_panel(200, 100, 5, 1e-3 * clean.std(), seed=0)
        spectrum = fit_pca(x).spectrum

        assert dim_gte(spectrum).p == 5
        assert 5 <= dim_cumulative(spectrum).p <= 7

    def test_noise_free_rank(self):
        s = fit_pca(synth_factor_panel(40, 20, 3, 0.0, seed=2), center=False).spectrum.values
        assert np.all(s[:3] > 1e-6)
        assert np.all(s[3:] <= 1e-8 * s[0] + 1e-8)


def test_matches_centered_svd(rng):
    x = rng.standard_normal((9, 4))
    np.testing.assert_allclose(
        fit_pca(x).spectrum.values, svd(x - x.mean(axis=0)).singular_values, rtol=1e-12
    )

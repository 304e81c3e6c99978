import numpy as np
import pytest

from dimest.spectral import as_data_matrix, column_means, fix_signs, svd, truncated_reconstruct
from dimest.exception import ArgumentError, InputValidationError


class TestAsDataMatrix:
    def test_converts_to_float64(self):
        x = as_data_matrix([[1, 2], [3, 4]])
        assert x.dtype == np.float64
        assert x.shape == (2, 2)

    @pytest.mark.parametrize(
        "bad",
        [
            [1.0, 2.0],
            [[]],
            np.zeros((0, 3)),
            [[1.0, np.nan]],
            [[np.inf, 0.0]],
            np.zeros((2, 2, 2)),
        ],
    )
    def test_rejects_invalid(self, bad):
        with pytest.raises(InputValidationError):
            as_data_matrix(bad)

    def test_input_errors_map_to_exit_code_2(self):
        with pytest.raises(InputValidationError) as e:
            as_data_matrix([[np.nan]])
        assert e.value.exit_code == 2


class TestSvd:
    def test_diagonal(self):
        s = svd([[3.0, 0.0], [0.0, 4.0]])
        np.testing.assert_allclose(s.singular_values, [4.0, 3.0], atol=1e-12)

    def test_zero_matrix(self):
        s = svd(np.zeros((2, 2)))
        np.testing.assert_array_equal(s.singular_values, [0.0, 0.0])

    def test_rank_one(self):
        s = svd([[1.0, 2.0], [2.0, 4.0]])
        np.testing.assert_allclose(s.singular_values, [5.0, 0.0], atol=1e-12)

    @pytest.mark.parametrize("shape", [(7, 3), (3, 7), (5, 5), (1, 4), (4, 1)])
    def test_invariants(self, rng, shape):
        x = rng.standard_normal(shape)
        s = svd(x)
        r = min(shape)

        assert s.u.shape == (shape[0], r)
        assert s.vt.shape == (r, shape[1])
        assert s.rank_bound == r
        assert np.all(np.diff(s.singular_values) <= 0)
        assert np.all(s.singular_values >= 0)

        np.testing.assert_allclose(s.u.T @ s.u, np.eye(r), atol=1e-8)
        np.testing.assert_allclose(s.vt @ s.vt.T, np.eye(r), atol=1e-8)

        rebuilt = (s.u * s.singular_values) @ s.vt
        assert np.linalg.norm(rebuilt - x) <= 1e-8 * np.linalg.norm(x)

    def test_matches_numpy(self, rng):
        x = rng.standard_normal((12, 8))
        np.testing.assert_allclose(
            svd(x).singular_values, np.linalg.svd(x, compute_uv=False), rtol=1e-10
        )

    @pytest.mark.parametrize("shape", [(6, 6), (6, 3), (3, 6), (1, 5), (5, 1)])
    def test_matches_gram_eigenvalues(self, rng, shape):
        x = rng.standard_normal(shape)
        r = min(shape)

        eigenvalues = np.clip(np.linalg.eigvalsh(x.T @ x), 0.0, None)
        expected = np.sqrt(eigenvalues)[::-1][:r]

        np.testing.assert_allclose(svd(x).singular_values, expected, rtol=1e-8, atol=1e-8)

    def test_deterministic_signs(self, rng):
        x = rng.standard_normal((6, 4))
        a, b = svd(x), svd(x.copy())
        np.testing.assert_array_equal(a.u, b.u)
        np.testing.assert_array_equal(a.vt, b.vt)

        # the largest entry of every left singular vector is positive
        idx = np.argmax(np.abs(a.u), axis=0)
        assert np.all(a.u[idx, np.arange(a.u.shape[1])] > 0)

    def test_rejects_non_finite(self):
        with pytest.raises(InputValidationError):
            svd([[1.0, np.inf]])

    def test_does_not_modify_input(self, rng):
        x = rng.standard_normal((4, 3))
        before = x.copy()
        svd(x)
        np.testing.assert_array_equal(x, before)


class TestFixSigns:
    def test_flips_columns_and_rows_together(self):
        u = np.array([[-0.6, 0.8], [-0.8, -0.6]])
        vt = np.array([[1.0, 0.0], [0.0, 1.0]])
        u2, vt2 = fix_signs(u, vt)

        np.testing.assert_allclose(u2[:, 0], [0.6, 0.8])
        np.testing.assert_allclose(vt2[0], [-1.0, 0.0])
        np.testing.assert_allclose(u2 @ vt2, u @ vt)


class TestTruncatedReconstruct:
    def test_full_rank_is_exact(self, rng):
        x = rng.standard_normal((5, 4))
        np.testing.assert_allclose(truncated_reconstruct(svd(x), 4), x, atol=1e-10)

    def test_keeps_largest_component(self):
        out = truncated_reconstruct(svd([[3.0, 0.0], [0.0, 4.0]]), 1)
        np.testing.assert_allclose(out, [[0.0, 0.0], [0.0, 4.0]], atol=1e-12)

    def test_rank_one_is_exact(self):
        x = np.outer([1.0, 2.0, 3.0], [1.0, -1.0])
        np.testing.assert_allclose(truncated_reconstruct(svd(x), 1), x, atol=1e-12)

    def test_error_is_discarded_energy(self, rng):
        x = rng.standard_normal((8, 6))
        s = svd(x)
        for k in range(1, 6):
            err = np.linalg.norm(x - truncated_reconstruct(s, k))
            expected = np.sqrt(np.sum(s.singular_values[k:] ** 2))
            assert abs(err - expected) <= 1e-8

    @pytest.mark.parametrize("k", [0, 3, -1])
    def test_k_out_of_range(self, k):
        with pytest.raises(ArgumentError):
            truncated_reconstruct(svd(np.eye(2)), k)


class TestColumnMeans:
    @pytest.mark.parametrize(
        "x, expected",
        [
            ([[1.0, 2.0], [3.0, 4.0]], [2.0, 3.0]),
            ([[5.0, -1.0, 2.0]], [5.0, -1.0, 2.0]),
            ([[-1.0, 0.0], [1.0, 0.0]], [0.0, 0.0]),
        ],
    )
    def test_means(self, x, expected):
        np.testing.assert_allclose(column_means(x), expected)

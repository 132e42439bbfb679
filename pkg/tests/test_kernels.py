import numpy as np
import pytest

from fdcausal.errors import DegenerateDataError, InvalidArgumentError
from fdcausal.funcdata import FunctionalDataset, Mesh, basis_matrix
from fdcausal.kernels import (
    GramMatrix,
    center,
    gram,
    l2_distance_sq,
    median_heuristic,
    pairwise_l2_sq,
    pooled_sigma2,
)


@pytest.fixture
def mesh():
    return Mesh.regular(100)


def random_dataset(n, mesh, seed, name="x"):
    rng = np.random.default_rng(seed)
    return FunctionalDataset(name, mesh, rng.standard_normal((n, mesh.size)))


class TestL2Distance:
    def test_zero_for_identical(self, mesh):
        x = np.random.default_rng(0).standard_normal(mesh.size)
        assert l2_distance_sq(x, x, mesh) == 0.0

    def test_unit_for_unit_gap(self, mesh):
        assert l2_distance_sq(np.ones(100), np.zeros(100), mesh) == pytest.approx(1.0)

    def test_matches_closed_form_integral(self, mesh):
        # integral of s^2 over [0, 1] = 1/3
        val = l2_distance_sq(mesh.points, np.zeros(100), mesh)
        assert val == pytest.approx(1.0 / 3.0, abs=1e-4)

    def test_pairwise_agrees_with_scalar(self, mesh):
        ds = random_dataset(8, mesh, 1)
        d2 = pairwise_l2_sq(ds.values, mesh)
        for i in range(8):
            for j in range(8):
                assert d2[i, j] == pytest.approx(
                    l2_distance_sq(ds.values[i], ds.values[j], mesh), abs=1e-10
                )

    def test_mesh_mismatch(self, mesh):
        with pytest.raises(InvalidArgumentError):
            l2_distance_sq(np.ones(50), np.ones(50), mesh)


class TestMedianHeuristic:
    def test_two_constant_functions(self, mesh):
        ds = FunctionalDataset("x", mesh, np.vstack([np.zeros(100), np.ones(100)]))
        assert pooled_sigma2([ds]) == pytest.approx(1.0)

    def test_odd_count_median(self):
        assert median_heuristic([1.0, 4.0, 9.0]) == 4.0

    def test_brute_force_oracle_on_pooled_samples(self, mesh):
        # definition-level oracle over all pairs of 200 pooled samples
        rng = np.random.default_rng(2)
        design = basis_matrix("fourier", 3, mesh.points, 0.1)
        a = FunctionalDataset("a", mesh, rng.standard_normal((100, 3)) @ design.T)
        b = FunctionalDataset("b", mesh, rng.standard_normal((100, 3)) @ design.T)
        pooled = np.vstack([a.values, b.values])
        dists = [
            l2_distance_sq(pooled[i], pooled[j], mesh)
            for i in range(200)
            for j in range(i + 1, 200)
        ]
        assert len(dists) == 19900
        brute = np.median(dists)
        assert pooled_sigma2([a, b]) == pytest.approx(brute, rel=0.2)

    def test_degenerate_pool(self, mesh):
        ds = FunctionalDataset("x", mesh, np.zeros((4, 100)))
        with pytest.raises(DegenerateDataError):
            pooled_sigma2([ds])


class TestGram:
    def test_unit_diagonal(self, mesh):
        g = gram(random_dataset(15, mesh, 3), sigma2=0.7)
        np.testing.assert_allclose(np.diag(g.matrix), 1.0)

    def test_known_off_diagonal(self, mesh):
        sigma2 = 0.5
        values = np.vstack([np.zeros(100), np.full(100, 1.0)])  # distance^2 = 1 = 2 sigma2
        g = gram(FunctionalDataset("x", mesh, values), sigma2=sigma2)
        assert g.matrix[0, 1] == pytest.approx(np.exp(-1.0))

    def test_positive_semidefinite(self, mesh):
        for seed in range(10):
            g = gram(random_dataset(20, mesh, seed))
            eigs = np.linalg.eigvalsh(g.matrix)
            assert eigs.min() >= -1e-8

    def test_cross_gram_shape(self, mesh):
        a = random_dataset(6, mesh, 4)
        b = random_dataset(9, mesh, 5, name="y")
        g = gram(a, b, sigma2=1.0)
        assert g.matrix.shape == (6, 9)

    def test_invalid_sigma(self, mesh):
        with pytest.raises(InvalidArgumentError):
            gram(random_dataset(5, mesh, 6), sigma2=0.0)

    def test_reorder_invariance(self, mesh):
        ds = random_dataset(12, mesh, 7)
        idx = np.random.default_rng(8).permutation(12)
        g = gram(ds, sigma2=1.0).matrix
        g_perm = gram(ds.permuted(idx), sigma2=1.0).matrix
        np.testing.assert_allclose(g_perm, g[np.ix_(idx, idx)], atol=1e-12)

    def test_scale_invariance_with_matched_sigma(self, mesh):
        ds = random_dataset(10, mesh, 9)
        c = 3.7
        scaled = FunctionalDataset("x", mesh, c * ds.values)
        g1 = gram(ds, sigma2=0.9).matrix
        g2 = gram(scaled, sigma2=0.9 * c**2).matrix
        np.testing.assert_allclose(g1, g2, atol=1e-12)


class TestCenter:
    def test_all_ones_goes_to_zero(self):
        g = GramMatrix(np.ones((6, 6)), 1.0)
        np.testing.assert_allclose(center(g).matrix, 0.0, atol=1e-12)

    def test_single_sample(self):
        g = GramMatrix(np.ones((1, 1)), 1.0)
        np.testing.assert_allclose(center(g).matrix, 0.0, atol=1e-12)

    def test_row_and_column_sums_vanish(self, mesh):
        g = center(gram(random_dataset(25, mesh, 10)))
        np.testing.assert_allclose(g.matrix.sum(axis=0), 0.0, atol=1e-9)
        np.testing.assert_allclose(g.matrix.sum(axis=1), 0.0, atol=1e-9)

    def test_preserves_psd(self, mesh):
        g = center(gram(random_dataset(20, mesh, 11)))
        assert np.linalg.eigvalsh(g.matrix).min() >= -1e-8

    def test_idempotent(self, mesh):
        g = center(gram(random_dataset(15, mesh, 12)))
        np.testing.assert_allclose(center(g).matrix, g.matrix, atol=1e-9)

    def test_rejects_rectangular(self, mesh):
        a = random_dataset(4, mesh, 13)
        b = random_dataset(6, mesh, 14, name="y")
        with pytest.raises(InvalidArgumentError):
            center(gram(a, b, sigma2=1.0))

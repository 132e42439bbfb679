import numpy as np
import pytest

from fdcausal.conditional import (
    _FastConditionalStatistic,
    conditional_test,
    cpt_bins,
    cpt_draw,
    cpt_permute,
    cpt_walk_draw,
    default_lambda_grid,
    hscic_statistic,
    hscic_values,
    lambda_search,
    product_kernel_distance,
    ridge_weights,
)
from fdcausal.errors import InvalidArgumentError
from fdcausal.funcdata import FunctionalDataset, Mesh
from fdcausal.kernels import GramMatrix, gram, variable_sigma2
from fdcausal.synth import GeneratorConfig, gen_cond_data


@pytest.fixture
def mesh():
    return Mesh.regular(50)


def random_dataset(n, mesh, seed, name="x"):
    rng = np.random.default_rng(seed)
    return FunctionalDataset(name, mesh, rng.standard_normal((n, mesh.size)))


def random_gram(n, seed):
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((n, 6))
    d2 = ((v[:, None, :] - v[None, :, :]) ** 2).sum(-1)
    return GramMatrix(np.exp(-d2 / (2 * np.median(d2[d2 > 0]))), 1.0)


def hscic_loops(Kx, Ky, Kz, lam):
    """Independent elementwise-loop evaluation of the three-term formula."""
    n = Kx.shape[0]
    W = np.linalg.solve(Kz + n * lam * np.eye(n), Kz)
    out = np.zeros(n)
    for j in range(n):
        w = W[:, j]
        t1 = sum(w[i] * Kx[i, k] * Ky[i, k] * w[k] for i in range(n) for k in range(n))
        t2 = sum(w[i] * (Kx[i, :] @ w) * (Ky[i, :] @ w) for i in range(n))
        t3 = (w @ Kx @ w) * (w @ Ky @ w)
        out[j] = max(t1 - 2.0 * t2 + t3, 0.0)
    return out


class TestRidgeWeights:
    def test_dominant_regularizer_limit(self):
        Kz = random_gram(12, 0)
        lam = 1e6
        W = ridge_weights(Kz, lam).W
        np.testing.assert_allclose(W, Kz.matrix / (12 * lam), rtol=0.01)

    def test_identity_gram_scalar_algebra(self):
        Kz = GramMatrix(np.eye(2), 1.0)
        W = ridge_weights(Kz, 1.0).W
        np.testing.assert_allclose(W, np.eye(2) / 3.0, atol=1e-12)

    def test_solve_and_verify_residual(self):
        Kz = random_gram(10, 1)
        lam = 1e-3
        W = ridge_weights(Kz, lam).W
        lhs = (Kz.matrix + 10 * lam * np.eye(10)) @ W
        rel = np.linalg.norm(lhs - Kz.matrix) / np.linalg.norm(Kz.matrix)
        assert rel <= 1e-8

    def test_lambda_must_be_positive(self):
        with pytest.raises(InvalidArgumentError):
            ridge_weights(random_gram(5, 2), 0.0)


class TestHscicValues:
    def test_loop_oracle_n3(self):
        Kx, Ky, Kz = random_gram(3, 3), random_gram(3, 4), random_gram(3, 5)
        vals = hscic_values(Kx, Ky, Kz, 0.01)
        oracle = hscic_loops(Kx.matrix, Ky.matrix, Kz.matrix, 0.01)
        np.testing.assert_allclose(vals, oracle, atol=1e-12)

    def test_constant_x_collapses_to_weight_defect(self):
        # with Kx = ones every value reduces to (1 - sum w)^2 * w' Ky w,
        # which is tiny for small lambda and zero only in the limit
        n = 6
        ones = GramMatrix(np.ones((n, n)), 1.0)
        Ky, Kz = random_gram(n, 6), random_gram(n, 7)
        lam = 1e-3
        W = ridge_weights(Kz, lam).W
        vals = hscic_values(ones, Ky, Kz, lam)
        expected = (1.0 - W.sum(axis=0)) ** 2 * np.einsum(
            "ij,ik,kj->j", W, Ky.matrix, W
        )
        np.testing.assert_allclose(vals, expected, atol=1e-10)
        assert vals.max() < 1e-3

    def test_statistic_is_sum_of_values(self):
        Kx, Ky, Kz = random_gram(9, 8), random_gram(9, 9), random_gram(9, 10)
        assert hscic_statistic(Kx, Ky, Kz, 0.02) == pytest.approx(
            hscic_values(Kx, Ky, Kz, 0.02).sum()
        )

    def test_values_nonnegative(self):
        for seed in range(5):
            Kx, Ky, Kz = (
                random_gram(25, 20 + seed),
                random_gram(25, 40 + seed),
                random_gram(25, 60 + seed),
            )
            assert hscic_values(Kx, Ky, Kz, 1e-4).min() >= 0.0

    def test_vanishes_at_both_lambda_extremes(self):
        # interpolation limit (tiny lambda) and infinite-shrinkage limit both
        # drive the statistic to zero; it peaks in between
        X, Y, Z = gen_cond_data(GeneratorConfig(n=50, a=1.0, seed=3, n_z=1))
        Kx = gram(X, sigma2=variable_sigma2(X))
        Ky = gram(Y, sigma2=variable_sigma2(Y))
        Kz = gram(Z[0], sigma2=variable_sigma2(Z[0]))
        tiny = hscic_statistic(Kx, Ky, Kz, 1e-10)
        mid = hscic_statistic(Kx, Ky, Kz, 1e-2)
        huge = hscic_statistic(Kx, Ky, Kz, 1e8)
        assert tiny < mid and huge < mid

    def test_fast_linear_form_matches_explicit_sum(self):
        for n, seed in ((10, 0), (40, 1)):
            Kx, Ky, Kz = (
                random_gram(n, 100 + seed),
                random_gram(n, 200 + seed),
                random_gram(n, 300 + seed),
            )
            for lam in (1e-4, 1e-2, 1.0):
                fast = _FastConditionalStatistic(Kx, Ky, Kz, lam)
                slow = hscic_statistic(Kx, Ky, Kz, lam)
                assert fast() == pytest.approx(slow, abs=1e-10)
                idx = np.random.default_rng(seed).permutation(n)
                Kxp = GramMatrix(Kx.matrix[np.ix_(idx, idx)], 1.0)
                assert fast(idx) == pytest.approx(
                    hscic_statistic(Kxp, Ky, Kz, lam), abs=1e-10
                )


class TestCpt:
    def test_bin_size_n_is_uniform_permutation(self, mesh):
        X = random_dataset(12, mesh, 0)
        Z = [random_dataset(12, mesh, 1, name="z")]
        out = cpt_permute(X, Z, bin_size=12, rng=np.random.default_rng(0))
        assert sorted(map(tuple, out.values)) == sorted(map(tuple, X.values))

    def test_bin_size_one_rejected(self, mesh):
        X = random_dataset(10, mesh, 2)
        with pytest.raises(InvalidArgumentError):
            cpt_permute(X, [random_dataset(10, mesh, 3)], 1, np.random.default_rng(0))

    def test_identical_z_multiset_preserved(self, mesh):
        rng = np.random.default_rng(4)
        X = random_dataset(100, mesh, 5)
        Z = [FunctionalDataset("z", mesh, np.tile(rng.standard_normal(mesh.size), (100, 1)))]
        out = cpt_permute(X, Z, bin_size=10, rng=np.random.default_rng(1))
        assert sorted(map(tuple, out.values)) == sorted(map(tuple, X.values))

    def test_small_n_falls_back_to_single_bin(self, mesh):
        X = random_dataset(4, mesh, 6)
        Z = [random_dataset(4, mesh, 7, name="z")]
        out = cpt_permute(X, Z, bin_size=10, rng=np.random.default_rng(2))
        assert sorted(map(tuple, out.values)) == sorted(map(tuple, X.values))

    def test_draws_stay_within_bins(self):
        rng = np.random.default_rng(8)
        dist = rng.random((30, 30))
        dist = (dist + dist.T) / 2.0
        np.fill_diagonal(dist, 0.0)
        bins = cpt_bins(dist, 5)
        assert sorted(np.concatenate(bins).tolist()) == list(range(30))
        position_bin = {}
        for b, members in enumerate(bins):
            for m in members:
                position_bin[m] = b
        for draw_fn in (
            lambda r: cpt_draw(bins, r, 30),
            lambda r: cpt_walk_draw(bins, r, 30, moves=15),
        ):
            idx = draw_fn(np.random.default_rng(9))
            assert sorted(idx.tolist()) == list(range(30))
            for pos, src in enumerate(idx):
                assert position_bin[pos] == position_bin[src]

    def test_product_metric_formula(self):
        g1, g2 = random_gram(7, 10), random_gram(7, 11)
        dist = product_kernel_distance([g1, g2])
        expected = np.sqrt(
            np.maximum((2 - 2 * g1.matrix) + (2 - 2 * g2.matrix), 0.0)
        )
        np.testing.assert_allclose(dist, expected, atol=1e-12)


class TestLambdaSearch:
    def test_single_value_grid(self):
        X, Y, Z = gen_cond_data(GeneratorConfig(n=40, a=0.5, seed=1, n_z=1))
        rep = lambda_search(X, Y, Z, grid=[0.02], P=30, B=10, seed=0)
        assert rep.lambda_star == 0.02

    def test_report_invariants(self):
        X, Y, Z = gen_cond_data(GeneratorConfig(n=50, a=0.5, seed=2, n_z=1))
        grid = default_lambda_grid(6)
        rep = lambda_search(X, Y, Z, grid=grid, P=40, B=20, seed=1)
        assert rep.lambda_star in rep.grid
        rates = np.asarray(rep.evaluation_rejection_rate)
        assert np.all((rates >= 0) & (rates <= 1))
        # selected value attains the minimal distance to alpha
        dist = np.abs(rates - rep.alpha)
        i = list(rep.grid).index(rep.lambda_star)
        assert dist[i] == pytest.approx(dist.min())

    def test_bit_reproducible(self):
        X, Y, Z = gen_cond_data(GeneratorConfig(n=40, a=0.5, seed=3, n_z=1))
        r1 = lambda_search(X, Y, Z, grid=[1e-3, 1e-2], P=25, B=10, seed=5)
        r2 = lambda_search(X, Y, Z, grid=[1e-3, 1e-2], P=25, B=10, seed=5)
        np.testing.assert_array_equal(
            r1.evaluation_rejection_rate, r2.evaluation_rejection_rate
        )
        assert r1.lambda_star == r2.lambda_star

    def test_empty_grid_rejected(self):
        X, Y, Z = gen_cond_data(GeneratorConfig(n=30, a=0.5, seed=4, n_z=1))
        with pytest.raises(InvalidArgumentError):
            lambda_search(X, Y, Z, grid=[], P=20, B=10)


class TestConditionalTest:
    def test_deterministic_coupling_rejected(self, mesh):
        # X an exact copy of Y, Z independent noise: conditional dependence
        # is maximal and the test must reject decisively
        rng = np.random.default_rng(5)
        Y = random_dataset(100, mesh, 6, name="y")
        X = FunctionalDataset("x", mesh, Y.values.copy())
        Z = [random_dataset(100, mesh, 7, name="z")]
        res = conditional_test(X, Y, Z, 1e-2, P=150, alpha=0.05, seed=0)
        assert res.p_value <= 0.01
        assert res.reject

    def test_reproducible(self):
        X, Y, Z = gen_cond_data(GeneratorConfig(n=60, a=1.0, seed=8, n_z=1))
        r1 = conditional_test(X, Y, Z, 5e-3, P=100, seed=2)
        r2 = conditional_test(X, Y, Z, 5e-3, P=100, seed=2)
        assert r1.p_value == r2.p_value
        np.testing.assert_array_equal(r1.null_statistics, r2.null_statistics)

    def test_statistic_matches_public_formula(self):
        X, Y, Z = gen_cond_data(GeneratorConfig(n=40, a=1.0, seed=9, n_z=1))
        res = conditional_test(X, Y, Z, 1e-2, P=100, seed=3)
        Kx = gram(X, sigma2=variable_sigma2(X))
        Ky = gram(Y, sigma2=variable_sigma2(Y))
        Kz = gram(Z[0], sigma2=variable_sigma2(Z[0]))
        assert res.statistic == pytest.approx(
            hscic_statistic(Kx, Ky, Kz, 1e-2), abs=1e-9
        )

    def test_lambda_must_be_positive(self):
        X, Y, Z = gen_cond_data(GeneratorConfig(n=30, a=1.0, seed=10, n_z=1))
        with pytest.raises(InvalidArgumentError):
            conditional_test(X, Y, Z, 0.0, P=100)

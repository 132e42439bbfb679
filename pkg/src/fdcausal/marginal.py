"""HSIC and d-variable joint HSIC statistics with permutation tests.

Both statistics are the biased V-statistic estimators, which keep the two
formulations identical at d = 2.  Null distributions come from uniform random
permutations of sample indices: the second variable for the bivariate test,
every variable but the first for the joint test.
"""
from __future__ import annotations

import numpy as np

from .errors import InsufficientDataError, InvalidArgumentError
from .funcdata import FunctionalDataset
from .kernels import GramMatrix, center_matrix, gram, pooled_sigma2, variable_sigma2
from .result import TestResult

MIN_PERMUTATIONS = 100


def _check_raw_square(grams: list[GramMatrix]) -> int:
    n = grams[0].n
    for g in grams:
        if g.kind != "raw" or not g.is_square:
            raise InvalidArgumentError("expected raw square gram matrices")
        if g.n != n:
            raise InvalidArgumentError("gram matrices disagree on sample count")
    return n


def hsic_statistic(Kx: GramMatrix, Ky: GramMatrix) -> float:
    """Biased HSIC estimate (1/n^2) tr(Kx H Ky H)."""
    n = _check_raw_square([Kx, Ky])
    return float(np.vdot(Kx.matrix, center_matrix(Ky.matrix)) / n**2)


def dhsic_statistic(grams: list[GramMatrix]) -> float:
    """Biased joint-independence statistic over d gram matrices."""
    if len(grams) < 2:
        raise InvalidArgumentError("joint statistic needs at least two variables")
    n = _check_raw_square(grams)
    prod = np.ones((n, n))
    term2 = 1.0
    rowprod = np.ones(n)
    for g in grams:
        prod *= g.matrix
        term2 *= g.matrix.mean()
        rowprod *= g.matrix.mean(axis=1)
    return float(prod.mean() + term2 - 2.0 * rowprod.mean())


def _spawn_rngs(seed: int, count: int) -> list[np.random.Generator]:
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(count)]


def hsic_test(
    X: FunctionalDataset,
    Y: FunctionalDataset,
    P: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
) -> TestResult:
    """Bivariate independence test: observed pairing against permuted pairings.

    The bandwidth is the median heuristic over the pooled samples of both
    variables and is shared by the two kernels.
    """
    if X.n != Y.n:
        raise InvalidArgumentError("X and Y must have the same number of samples")
    if X.n < 2:
        raise InsufficientDataError("independence tests need at least two samples")
    if P < MIN_PERMUTATIONS:
        raise InvalidArgumentError(f"P must be at least {MIN_PERMUTATIONS}")
    sigma2 = pooled_sigma2([X, Y])
    Kx = gram(X, sigma2=sigma2)
    Ky = gram(Y, sigma2=sigma2)

    n = X.n
    Kxc = center_matrix(Kx.matrix)
    statistic = float(np.vdot(Kxc, Ky.matrix) / n**2)
    nulls = np.empty(P)
    for p, rng in enumerate(_spawn_rngs(seed, P)):
        idx = rng.permutation(n)
        nulls[p] = np.vdot(Kxc, Ky.matrix[np.ix_(idx, idx)]) / n**2
    meta = {
        "test": "hsic",
        "variables": [X.name, Y.name],
        "n": n,
        "sigma2": {X.name: sigma2, Y.name: sigma2},
        "permutation": "uniform",
    }
    return TestResult.from_null(statistic, nulls, alpha, seed, meta)


def dhsic_test(
    datasets: list[FunctionalDataset],
    P: int = 1000,
    alpha: float = 0.05,
    seed: int = 0,
) -> TestResult:
    """Joint independence test over d variables.

    Each permutation replicate independently shuffles the sample indices of
    variables 2..d while the first stays fixed, breaking every cross-variable
    pairing under the null.
    """
    d = len(datasets)
    if d < 2:
        raise InvalidArgumentError("joint test needs at least two variables")
    n = datasets[0].n
    for ds in datasets:
        if ds.n != n:
            raise InvalidArgumentError("datasets disagree on sample count")
    if n < 2:
        raise InsufficientDataError("independence tests need at least two samples")
    if P < MIN_PERMUTATIONS:
        raise InvalidArgumentError(f"P must be at least {MIN_PERMUTATIONS}")

    sigma2s = [variable_sigma2(ds) for ds in datasets]
    grams = [gram(ds, sigma2=s2) for ds, s2 in zip(datasets, sigma2s)]
    statistic = dhsic_statistic(grams)

    mats = [g.matrix for g in grams]
    means = [m.mean() for m in mats]
    rowmeans = [m.mean(axis=1) for m in mats]
    term2 = float(np.prod(means))

    nulls = np.empty(P)
    for p, rng in enumerate(_spawn_rngs(seed, P)):
        prod = mats[0].copy()
        rowprod = rowmeans[0].copy()
        for k in range(1, d):
            idx = rng.permutation(n)
            prod *= mats[k][np.ix_(idx, idx)]
            rowprod *= rowmeans[k][idx]
        nulls[p] = prod.mean() + term2 - 2.0 * rowprod.mean()

    meta = {
        "test": "dhsic",
        "variables": [ds.name for ds in datasets],
        "n": n,
        "sigma2": {ds.name: s2 for ds, s2 in zip(datasets, sigma2s)},
        "permutation": "per-variable uniform, first variable fixed",
    }
    return TestResult.from_null(statistic, nulls, alpha, seed, meta)

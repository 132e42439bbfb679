"""Squared-exponential kernels on function values, Gram construction, centering.

Kernels act on the L2 distance between mesh-evaluated functions, approximated
with the trapezoid rule.  One bandwidth sigma^2 is computed per test via the
median heuristic over pooled pairwise squared distances and reused across all
permutations.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DegenerateDataError, InvalidArgumentError
from .funcdata import FunctionalDataset, Mesh


@dataclass(frozen=True, eq=False)
class GramMatrix:
    """Kernel matrix together with the bandwidth used to build it."""

    matrix: np.ndarray
    sigma2: float
    kind: str = "raw"

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=float)
        if self.kind not in ("raw", "centered"):
            raise InvalidArgumentError(f"unknown gram kind {self.kind!r}")
        if self.sigma2 <= 0:
            raise InvalidArgumentError("sigma2 must be positive")
        if mat.ndim != 2:
            raise InvalidArgumentError("gram matrix must be 2-D")
        if mat.shape[0] == mat.shape[1]:
            asym = float(np.max(np.abs(mat - mat.T))) if mat.size else 0.0
            if asym > 1e-10:
                raise InvalidArgumentError(f"gram matrix asymmetric by {asym:g}")
            mat = (mat + mat.T) / 2.0
            if self.kind == "raw":
                if float(np.max(np.abs(np.diag(mat) - 1.0))) > 1e-10:
                    raise InvalidArgumentError("raw SE gram must have unit diagonal")
                if mat.min() < -1e-12 or mat.max() > 1.0 + 1e-12:
                    raise InvalidArgumentError("raw SE gram entries must lie in [0, 1]")
        mat = mat.copy()
        mat.setflags(write=False)
        object.__setattr__(self, "matrix", mat)

    @property
    def n(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def is_square(self) -> bool:
        return self.matrix.shape[0] == self.matrix.shape[1]


def l2_distance_sq(x: np.ndarray, y: np.ndarray, mesh: Mesh) -> float:
    """Trapezoid approximation of the integrated squared difference."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != (mesh.size,) or y.shape != (mesh.size,):
        raise InvalidArgumentError("x and y must be value vectors on the given mesh")
    diff = x - y
    return float(np.dot(mesh.trapz_weights, diff * diff))


def pairwise_l2_sq(
    values: np.ndarray, mesh: Mesh, values2: np.ndarray | None = None
) -> np.ndarray:
    """All pairwise trapezoid L2 squared distances between sample rows."""
    scale = np.sqrt(mesh.trapz_weights)
    a = values * scale
    b = a if values2 is None else values2 * scale
    d2 = cdist(a, b, metric="sqeuclidean")
    if values2 is None:
        d2 = (d2 + d2.T) / 2.0
        np.fill_diagonal(d2, 0.0)
    return np.maximum(d2, 0.0)


def median_heuristic(dsq) -> float:
    """Median of the supplied pairwise squared distances."""
    dsq = np.asarray(dsq, dtype=float).ravel()
    if dsq.size == 0:
        raise DegenerateDataError("no pairwise distances supplied")
    med = float(np.median(dsq))
    if med <= 0.0:
        raise DegenerateDataError("median pairwise distance is zero; samples are degenerate")
    return med


def pooled_sigma2(datasets: list[FunctionalDataset]) -> float:
    """Median heuristic over all distinct pairs of the pooled samples."""
    if not datasets:
        raise InvalidArgumentError("need at least one dataset")
    mesh = datasets[0].mesh
    for ds in datasets[1:]:
        if not mesh.matches(ds.mesh):
            raise InvalidArgumentError("pooled datasets must share one mesh")
    pooled = np.vstack([ds.values for ds in datasets])
    d2 = pairwise_l2_sq(pooled, mesh)
    iu = np.triu_indices(pooled.shape[0], k=1)
    return median_heuristic(d2[iu])


def variable_sigma2(ds: FunctionalDataset) -> float:
    """Median heuristic from one variable's own pairwise distances."""
    return pooled_sigma2([ds])


def gram(
    ds: FunctionalDataset,
    ds2: FunctionalDataset | None = None,
    sigma2: float | None = None,
) -> GramMatrix:
    """SE kernel matrix exp(-d2 / (2 sigma2)); cross-gram when ds2 is given."""
    if sigma2 is None:
        sigma2 = pooled_sigma2([ds] if ds2 is None else [ds, ds2])
    if sigma2 <= 0:
        raise InvalidArgumentError("sigma2 must be positive")
    if ds2 is not None and not ds.mesh.matches(ds2.mesh):
        raise InvalidArgumentError("datasets must share one mesh")
    d2 = pairwise_l2_sq(ds.values, ds.mesh, None if ds2 is None else ds2.values)
    return GramMatrix(np.exp(-d2 / (2.0 * sigma2)), sigma2)


def center(g: GramMatrix) -> GramMatrix:
    """Doubly centered gram H K H with H = I - (1/n) ones."""
    if not g.is_square:
        raise InvalidArgumentError("can only center a square gram matrix")
    return GramMatrix(center_matrix(g.matrix), g.sigma2, kind="centered")


def center_matrix(k: np.ndarray) -> np.ndarray:
    row = k.mean(axis=1, keepdims=True)
    col = k.mean(axis=0, keepdims=True)
    return k - row - col + k.mean()

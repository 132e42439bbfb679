"""Historical functional linear models: y(t) depends on x(s) only for s <= t.

The coefficient surface of each parent is expanded over a tensor basis
phi_a(s) * psi_b(t); the history constraint enters through cumulative
trapezoid integrals, so values of a parent beyond t can never influence the
prediction at t.  Fitting is (optionally ridge-penalized) least squares over
all samples and mesh points, with the intercept handled by centering.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import IllConditionedError, InvalidArgumentError
from .funcdata import FunctionalDataset, Mesh, basis_matrix


@dataclass(frozen=True, eq=False)
class BetaSurface:
    """Coefficient surface over the tensor basis, supported on s <= t."""

    theta: np.ndarray
    family: str
    A: int
    B: int
    period: float = 1.0

    def evaluate(self, s_points: np.ndarray, t_points: np.ndarray) -> np.ndarray:
        """Surface values on the grid s_points x t_points (no history mask)."""
        phi = basis_matrix(self.family, self.A, np.asarray(s_points, float), self.period)
        psi = basis_matrix(self.family, self.B, np.asarray(t_points, float), self.period)
        return phi @ self.theta @ psi.T


@dataclass(frozen=True, eq=False)
class HflmFit:
    """Fitted model: one surface per parent plus an intercept on the mesh."""

    surfaces: list[BetaSurface]
    intercept: np.ndarray
    mesh: Mesh
    ridge: float
    parent_names: list[str]
    residual_norm: float

    def to_json(self) -> dict:
        return {
            "parents": list(self.parent_names),
            "basis": [
                {"family": s.family, "A": s.A, "B": s.B, "period": s.period}
                for s in self.surfaces
            ],
            "theta": [s.theta.tolist() for s in self.surfaces],
            "intercept": self.intercept.tolist(),
            "ridge": self.ridge,
            "residual_norm": self.residual_norm,
        }


def _history_integrals(values: np.ndarray, mesh: Mesh, family: str, A: int, period: float):
    """J[a, i, k] = integral over [0, t_k] of x_i(s) phi_a(s) ds."""
    phi = basis_matrix(family, A, mesh.points, period)  # S x A
    integrands = values[None, :, :] * phi.T[:, None, :]  # A x n x S
    return cumulative_trapezoid(integrands, mesh.points, axis=2, initial=0.0)


def _design(parents: list[FunctionalDataset], mesh, family, A, B, period):
    """Stacked regression design, one row per (sample, mesh point)."""
    psi = basis_matrix(family, B, mesh.points, period)  # S x B
    blocks = []
    for parent in parents:
        J = _history_integrals(parent.values, mesh, family, A, period)
        # (n, S, A*B) block: J[a, i, k] * psi[k, b]
        block = np.einsum("aik,kb->ikab", J, psi)
        blocks.append(block.reshape(parent.n, mesh.size, A * B))
    return np.concatenate(blocks, axis=2)  # n x S x (P*A*B)


def fit_hflm(
    parents: list[FunctionalDataset],
    y: FunctionalDataset,
    family: str = "monomial",
    A: int = 5,
    B: int = 5,
    period: float = 1.0,
    ridge: float = 1e-6,
) -> HflmFit:
    """Least-squares fit of y on the histories of the given parents.

    With no parents the fit degenerates to the pointwise mean of y.  Rank
    deficiency at ridge = 0 raises with the condition estimate; any positive
    ridge regularizes the normal equations.
    """
    if ridge < 0:
        raise InvalidArgumentError("ridge must be nonnegative")
    mesh = y.mesh
    for parent in parents:
        if parent.n != y.n:
            raise InvalidArgumentError("parents and y must have the same number of samples")
        if not parent.mesh.matches(mesh):
            raise InvalidArgumentError("parents and y must share one mesh")
    n, S = y.values.shape
    ncoef = len(parents) * A * B
    if ncoef > n * S:
        raise InvalidArgumentError(
            f"{ncoef} coefficients cannot be identified from {n * S} observations"
        )
    y_mean = y.values.mean(axis=0)

    if not parents:
        resid = y.values - y_mean
        return HflmFit([], y_mean, mesh, ridge, [], float(np.linalg.norm(resid)))

    design = _design(parents, mesh, family, A, B, period)
    design_mean = design.mean(axis=0)
    Dc = (design - design_mean).reshape(n * S, ncoef)
    yc = (y.values - y_mean).reshape(n * S)

    if ridge == 0.0:
        theta, _, rank, _ = np.linalg.lstsq(Dc, yc, rcond=None)
        if rank < ncoef:
            raise IllConditionedError(
                f"design rank {rank} < {ncoef} coefficients; consider ridge > 0",
                condition=float(np.linalg.cond(Dc)),
            )
    else:
        gram_ = Dc.T @ Dc + ridge * np.eye(ncoef)
        theta = np.linalg.solve(gram_, Dc.T @ yc)

    surfaces = [
        BetaSurface(theta[p * A * B : (p + 1) * A * B].reshape(A, B), family, A, B, period)
        for p in range(len(parents))
    ]
    intercept = y_mean - design_mean @ theta
    fit = HflmFit(surfaces, intercept, mesh, ridge, [p.name for p in parents], 0.0)
    resid = y.values - predict(fit, parents).values
    return HflmFit(
        surfaces, intercept, mesh, ridge, [p.name for p in parents],
        float(np.linalg.norm(resid)),
    )


def predict(fit: HflmFit, parents: list[FunctionalDataset]) -> FunctionalDataset:
    """Intercept plus each parent's history integrated against its surface."""
    if len(parents) != len(fit.surfaces):
        raise InvalidArgumentError(
            f"fit has {len(fit.surfaces)} parents, got {len(parents)} datasets"
        )
    if parents:
        n = parents[0].n
        for parent in parents:
            if not parent.mesh.matches(fit.mesh):
                raise InvalidArgumentError("parents must be on the training mesh")
            if parent.n != n:
                raise InvalidArgumentError("parents disagree on sample count")
        out = np.tile(fit.intercept, (n, 1))
    else:
        out = fit.intercept[None, :].copy()
    for parent, surface in zip(parents, fit.surfaces):
        J = _history_integrals(
            parent.values, fit.mesh, surface.family, surface.A, surface.period
        )
        psi = basis_matrix(surface.family, surface.B, fit.mesh.points, surface.period)
        out += np.einsum("aik,ab,kb->ik", J, surface.theta, psi)
    return FunctionalDataset("prediction", fit.mesh, out)


def residuals(
    fit: HflmFit, parents: list[FunctionalDataset], y: FunctionalDataset
) -> FunctionalDataset:
    """y minus the model prediction; exact by construction."""
    pred = predict(fit, parents)
    if not y.mesh.matches(fit.mesh):
        raise InvalidArgumentError("y must be on the training mesh")
    return FunctionalDataset(f"r_{y.name}", y.mesh, y.values - pred.values)

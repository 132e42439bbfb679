"""Functional samples on a shared mesh, basis expansions, spline interpolation.

A functional sample is a real function on [0, 1] observed at discrete points.
Datasets hold n samples of one variable evaluated on a common mesh; irregular
observations are brought onto the mesh with cubic splines.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import (
    ExtrapolationError,
    IllConditionedError,
    InsufficientDataError,
    InvalidArgumentError,
)

DEFAULT_MESH_SIZE = 100

BASIS_FAMILIES = ("fourier", "monomial")


@dataclass(frozen=True, eq=False)
class Mesh:
    """Strictly increasing evaluation points inside [0, 1]."""

    points: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 1 or pts.size < 2:
            raise InvalidArgumentError("mesh needs at least two points")
        if pts[0] < 0.0 or pts[-1] > 1.0 or np.any(np.diff(pts) <= 0.0):
            raise InvalidArgumentError("mesh points must be strictly increasing within [0, 1]")
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)

    @classmethod
    def regular(cls, size: int = DEFAULT_MESH_SIZE) -> "Mesh":
        return cls(np.linspace(0.0, 1.0, size))

    @property
    def size(self) -> int:
        return int(self.points.size)

    @cached_property
    def trapz_weights(self) -> np.ndarray:
        """Trapezoid-rule quadrature weights for this mesh."""
        w = np.zeros(self.size)
        gaps = np.diff(self.points)
        w[:-1] += gaps / 2.0
        w[1:] += gaps / 2.0
        w.setflags(write=False)
        return w

    def matches(self, other: "Mesh") -> bool:
        return self.points.shape == other.points.shape and np.array_equal(
            self.points, other.points
        )


@dataclass(frozen=True, eq=False)
class FunctionalDataset:
    """n samples of one variable, each a row of values on a shared mesh."""

    name: str
    mesh: Mesh
    values: np.ndarray

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.ndim != 2:
            raise InvalidArgumentError("values must be an n-by-S matrix")
        if vals.shape[1] != self.mesh.size:
            raise InvalidArgumentError(
                f"values have {vals.shape[1]} columns but mesh has {self.mesh.size} points"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidArgumentError("values must be finite")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    def permuted(self, idx: np.ndarray, name: str | None = None) -> "FunctionalDataset":
        """Dataset with rows reordered so row i of the result is row idx[i]."""
        return FunctionalDataset(name or self.name, self.mesh, self.values[idx])

    def centered(self) -> "FunctionalDataset":
        """Subtract the pointwise sample mean."""
        return FunctionalDataset(self.name, self.mesh, self.values - self.values.mean(axis=0))


@dataclass(frozen=True, eq=False)
class BasisExpansion:
    """Per-sample coefficients over a named basis family."""

    family: str
    M: int
    coefficients: np.ndarray
    period: float = 1.0

    def __post_init__(self):
        if self.family not in BASIS_FAMILIES:
            raise InvalidArgumentError(f"unknown basis family {self.family!r}")
        if self.M < 1:
            raise InvalidArgumentError("M must be at least 1")
        coeffs = np.asarray(self.coefficients, dtype=float)
        if coeffs.ndim != 2 or coeffs.shape[1] != self.M:
            raise InvalidArgumentError("coefficients must be n-by-M")
        if not np.all(np.isfinite(coeffs)):
            raise InvalidArgumentError("coefficients must be finite")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coefficients", coeffs)

    def evaluate(self, mesh: Mesh) -> FunctionalDataset:
        design = basis_matrix(self.family, self.M, mesh.points, self.period)
        return FunctionalDataset("expansion", mesh, self.coefficients @ design.T)


def fourier_basis_eval(m: int, period: float, s) -> float:
    """Evaluate one of the three Fourier generator functions at s.

    The family is indexed 1..3: the constant, a sine and a cosine whose
    frequency equals the function's own index divided by the period.
    """
    if m not in (1, 2, 3):
        raise InvalidArgumentError(f"basis index m={m} out of range, expected 1, 2 or 3")
    if period <= 0:
        raise InvalidArgumentError("period must be positive")
    s = np.asarray(s, dtype=float)
    if m == 1:
        out = np.ones_like(s)
    elif m == 2:
        out = np.sqrt(2.0 / period) * np.sin(2.0 * np.pi * m * s / period)
    else:
        out = np.sqrt(2.0 / period) * np.cos(2.0 * np.pi * m * s / period)
    return float(out) if out.ndim == 0 else out


def basis_matrix(family: str, M: int, points: np.ndarray, period: float = 1.0) -> np.ndarray:
    """Design matrix with columns phi_1..phi_M evaluated at the given points.

    The fourier family matches :func:`fourier_basis_eval` on indices 1..3 and
    continues the same index-equals-frequency rule beyond (even index: sine,
    odd index: cosine).  The monomial family is 1, s, s^2, ...
    """
    points = np.asarray(points, dtype=float)
    if family == "monomial":
        return np.vander(points, M, increasing=True)
    if family != "fourier":
        raise InvalidArgumentError(f"unknown basis family {family!r}")
    if period <= 0:
        raise InvalidArgumentError("period must be positive")
    cols = [np.ones_like(points)]
    amp = np.sqrt(2.0 / period)
    for m in range(2, M + 1):
        arg = 2.0 * np.pi * m * points / period
        cols.append(amp * np.sin(arg) if m % 2 == 0 else amp * np.cos(arg))
    return np.column_stack(cols)


def fit_basis(
    obs: FunctionalDataset, family: str, M: int, period: float = 1.0
) -> BasisExpansion:
    """Least-squares basis coefficients per sample on the observation mesh."""
    if M > obs.mesh.size:
        raise InvalidArgumentError(f"M={M} exceeds the {obs.mesh.size}-point mesh")
    design = basis_matrix(family, M, obs.mesh.points, period)
    condition = float(np.linalg.cond(design))
    if not np.isfinite(condition) or condition > 1e10:
        raise IllConditionedError(
            f"{family} design matrix with M={M} is rank deficient", condition=condition
        )
    coeffs, *_ = np.linalg.lstsq(design, obs.values.T, rcond=None)
    return BasisExpansion(family, M, coeffs.T, period=period)


def interpolate_to_regular(
    obs_points: list[np.ndarray],
    obs_values: list[np.ndarray],
    target: Mesh,
    name: str = "x",
) -> FunctionalDataset:
    """Cubic-spline interpolation of per-sample irregular observations.

    Each sample needs at least four observation points whose span covers the
    target mesh; values at the observation points are reproduced exactly.
    """
    if len(obs_points) != len(obs_values):
        raise InvalidArgumentError("obs_points and obs_values must have equal length")
    rows = np.empty((len(obs_points), target.size))
    for i, (pts, vals) in enumerate(zip(obs_points, obs_values)):
        pts = np.asarray(pts, dtype=float)
        vals = np.asarray(vals, dtype=float)
        if pts.size < 4:
            raise InsufficientDataError(
                f"sample {i} has {pts.size} observation points, cubic splines need 4"
            )
        order = np.argsort(pts)
        pts, vals = pts[order], vals[order]
        if pts[0] > target.points[0] or pts[-1] < target.points[-1]:
            raise ExtrapolationError(
                f"sample {i} observed on [{pts[0]:g}, {pts[-1]:g}] does not cover the target mesh"
            )
        rows[i] = CubicSpline(pts, vals)(target.points)
    return FunctionalDataset(name, target, rows)


def rescale_domain(raw_points, lo: float, hi: float) -> np.ndarray:
    """Affine map of raw points from [lo, hi] onto [0, 1]."""
    if hi <= lo:
        raise InvalidArgumentError(f"degenerate interval [{lo}, {hi}]")
    raw = np.asarray(raw_points, dtype=float)
    if raw.size and (raw.min() < lo or raw.max() > hi):
        raise InvalidArgumentError("raw points fall outside [lo, hi]")
    return (raw - lo) / (hi - lo)

"""Seeded synthetic data generators for the test and learning benchmarks.

Root variables are sums of three Fourier basis functions with standard-normal
coefficients, observed on per-sample irregular meshes, spline-interpolated to
the shared regular mesh, then perturbed with independent Gaussian noise at
every mesh point.  Descendant variables integrate their parents' observed
values against random hyperbolic-paraboloid coupling surfaces over the
history s <= t.

Every generator is a deterministic function of (config, seed).  The seed is
split into three fixed substreams (root samples, coupling surfaces, response
noise) so that sweeping the dependence factor with the same seed keeps the
surfaces and noise draws fixed.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidArgumentError, NumericalError
from .funcdata import FunctionalDataset, Mesh, basis_matrix, interpolate_to_regular
from .graphs import MixedGraph


@dataclass(frozen=True)
class GeneratorConfig:
    """Knobs shared by the synthetic data generators."""

    n: int = 100
    mesh: Mesh = field(default_factory=Mesh.regular)
    M: int = 3
    period: float = 0.1
    a: float = 1.0  # dependence factor (a, a-prime or r depending on generator)
    noise_sd: float = 1.0
    seed: int = 0
    d: int = 3
    density: float = 0.5
    n_z: int = 1
    irregular_points: int = 100

    def __post_init__(self):
        if self.n < 2:
            raise InvalidArgumentError("n must be at least 2")
        if not 0.0 <= self.a <= 1.0:
            raise InvalidArgumentError("dependence factor must lie in [0, 1]")
        if not 0.0 <= self.density <= 1.0:
            raise InvalidArgumentError("density must lie in [0, 1]")
        if self.noise_sd < 0:
            raise InvalidArgumentError("noise_sd must be nonnegative")


def _substreams(seed: int):
    """(root samples, coupling surfaces, response noise) seed sequences."""
    return np.random.SeedSequence(seed).spawn(3)


def _fourier_root(
    cfg: GeneratorConfig, rng: np.random.Generator, name: str
) -> FunctionalDataset:
    """One root variable: random Fourier curves observed irregularly."""
    coeffs = rng.standard_normal((cfg.n, cfg.M))
    pts_list, vals_list = [], []
    for i in range(cfg.n):
        pts = np.sort(rng.uniform(0.0, 1.0, cfg.irregular_points))
        pts[0], pts[-1] = 0.0, 1.0  # guarantee the spline spans the mesh
        design = basis_matrix("fourier", cfg.M, pts, cfg.period)
        pts_list.append(pts)
        vals_list.append(design @ coeffs[i])
    ds = interpolate_to_regular(pts_list, vals_list, cfg.mesh, name=name)
    values = ds.values + cfg.noise_sd * rng.standard_normal(ds.values.shape)
    return FunctionalDataset(name, cfg.mesh, values)


def gen_fourier_samples(cfg: GeneratorConfig, name: str = "X") -> FunctionalDataset:
    """Standalone root variable drawn from the first seed substream."""
    samples_seq, _, _ = _substreams(cfg.seed)
    return _fourier_root(cfg, np.random.default_rng(samples_seq), name)


class ParaboloidSurface:
    """Hyperbolic paraboloid coupling surface 8(s - c1)^2 - 8(t - c2)^2."""

    def __init__(self, c1: float, c2: float):
        if not (0.25 <= c1 <= 0.75 and 0.25 <= c2 <= 0.75):
            raise InvalidArgumentError("surface centres must lie in [0.25, 0.75]")
        self.c1 = float(c1)
        self.c2 = float(c2)

    def __call__(self, s, t):
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        return 8.0 * (s - self.c1) ** 2 - 8.0 * (t - self.c2) ** 2


def beta_paraboloid(c1: float, c2: float) -> ParaboloidSurface:
    return ParaboloidSurface(c1, c2)


def _draw_surface(rng: np.random.Generator) -> ParaboloidSurface:
    c1, c2 = rng.uniform(0.25, 0.75, size=2)
    return ParaboloidSurface(c1, c2)


def _history_weights(mesh: Mesh) -> np.ndarray:
    """W[k, l]: trapezoid weight of mesh point l in the integral over [0, t_k]."""
    pts = mesh.points
    S = pts.size
    W = np.zeros((S, S))
    gaps = np.diff(pts)
    for k in range(1, S):
        W[k, : k + 1] = W[k - 1, : k + 1]
        W[k, k - 1] += gaps[k - 1] / 2.0
        W[k, k] += gaps[k - 1] / 2.0
    return W


def history_integral(values: np.ndarray, mesh: Mesh, surface) -> np.ndarray:
    """Rows of integral over [0, t] of x_i(s) beta(s, t) ds on the mesh."""
    pts = mesh.points
    B = surface(pts[None, :], pts[:, None])  # B[k, l] = beta(s_l, t_k)
    M = B * _history_weights(mesh)
    return values @ M.T


def gen_hflm_pair(cfg: GeneratorConfig):
    """(X, Y) with Y integrating X's history, weighted by the dependence factor."""
    samples_seq, beta_seq, noise_seq = _substreams(cfg.seed)
    X = _fourier_root(cfg, np.random.default_rng(samples_seq), "X")
    surface = _draw_surface(np.random.default_rng(beta_seq))
    signal = cfg.a * history_integral(X.values, cfg.mesh, surface)
    noise = cfg.noise_sd * np.random.default_rng(noise_seq).standard_normal(signal.shape)
    return X, FunctionalDataset("Y", cfg.mesh, signal + noise)


def gen_nonlinearity_sweep(r: float, cfg: GeneratorConfig):
    """(X, Y) blending a plain running integral with the paraboloid coupling.

    r = 0 is a purely linear functional dependence; r = 1 reproduces
    gen_hflm_pair with full dependence, bit for bit at equal seeds.
    """
    if not 0.0 <= r <= 1.0:
        raise InvalidArgumentError("r must lie in [0, 1]")
    samples_seq, beta_seq, noise_seq = _substreams(cfg.seed)
    X = _fourier_root(cfg, np.random.default_rng(samples_seq), "X")
    parab = _draw_surface(np.random.default_rng(beta_seq))

    def blended(s, t):
        return (1.0 - r) + r * parab(s, t)

    signal = history_integral(X.values, cfg.mesh, blended)
    noise = cfg.noise_sd * np.random.default_rng(noise_seq).standard_normal(signal.shape)
    return X, FunctionalDataset("Y", cfg.mesh, signal + noise)


def gen_random_dag(d: int, density: float, seed: int) -> MixedGraph:
    """Random DAG: random topological order, each forward pair kept with p = density."""
    if d < 1:
        raise InvalidArgumentError("d must be at least 1")
    if not 0.0 <= density <= 1.0:
        raise InvalidArgumentError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    order = rng.permutation(d)
    g = MixedGraph.empty(d)
    for i in range(d):
        for j in range(i + 1, d):
            if rng.random() < density:
                g.add_directed(int(order[i]), int(order[j]))
    return g


def gen_dag_data(dag: MixedGraph, cfg: GeneratorConfig) -> list[FunctionalDataset]:
    """Topological-order generation of one dataset per node of the DAG.

    Roots are Fourier variables; every descendant integrates the observed
    values of each parent against a coupling surface drawn independently per
    parent-child pair, scaled by the dependence factor, plus fresh noise.
    """
    order = dag.topological_order()
    if order is None or dag.undirected:
        raise InvalidArgumentError("gen_dag_data needs a DAG")
    samples_seq, beta_seq, noise_seq = _substreams(cfg.seed)
    sample_children = samples_seq.spawn(dag.d)
    noise_children = noise_seq.spawn(dag.d)
    beta_rng = np.random.default_rng(beta_seq)
    surfaces = {
        (p, j): _draw_surface(beta_rng)
        for j in range(dag.d)
        for p in dag.parents(j)
    }

    datasets: dict[int, FunctionalDataset] = {}
    for node in order:
        name = dag.labels[node]
        parents = dag.parents(node)
        if not parents:
            datasets[node] = _fourier_root(
                cfg, np.random.default_rng(sample_children[node]), name
            )
            continue
        signal = np.zeros((cfg.n, cfg.mesh.size))
        for p in parents:
            signal += history_integral(datasets[p].values, cfg.mesh, surfaces[(p, node)])
        signal *= cfg.a
        noise_rng = np.random.default_rng(noise_children[node])
        values = signal + cfg.noise_sd * noise_rng.standard_normal(signal.shape)
        datasets[node] = FunctionalDataset(name, cfg.mesh, values)
    return [datasets[i] for i in range(dag.d)]


def gen_cond_data(cfg: GeneratorConfig):
    """(X, Y, Z list) where X and Y share the Z parents and the dependence
    factor weighs a direct X-to-Y coupling on top.

    With factor 0 the construction gives X independent of Y given Z; all Z
    variables parent both X and Y.
    """
    samples_seq, beta_seq, noise_seq = _substreams(cfg.seed)
    z_children = samples_seq.spawn(max(cfg.n_z, 1))
    noise_x, noise_y = (np.random.default_rng(s) for s in noise_seq.spawn(2))
    beta_rng = np.random.default_rng(beta_seq)

    Z = [
        _fourier_root(cfg, np.random.default_rng(z_children[j]), f"Z{j + 1}")
        for j in range(cfg.n_z)
    ]
    surfaces_x = [_draw_surface(beta_rng) for _ in range(cfg.n_z)]
    surfaces_y = [_draw_surface(beta_rng) for _ in range(cfg.n_z)]
    surface_xy = _draw_surface(beta_rng)

    x_signal = np.zeros((cfg.n, cfg.mesh.size))
    for z, surf in zip(Z, surfaces_x):
        x_signal += history_integral(z.values, cfg.mesh, surf)
    X = FunctionalDataset(
        "X", cfg.mesh, x_signal + cfg.noise_sd * noise_x.standard_normal(x_signal.shape)
    )

    y_signal = np.zeros((cfg.n, cfg.mesh.size))
    for z, surf in zip(Z, surfaces_y):
        y_signal += history_integral(z.values, cfg.mesh, surf)
    y_signal += cfg.a * history_integral(X.values, cfg.mesh, surface_xy)
    Y = FunctionalDataset(
        "Y", cfg.mesh, y_signal + cfg.noise_sd * noise_y.standard_normal(y_signal.shape)
    )
    return X, Y, Z


def gen_logistic_map(r: float, n: int, steps: int = 100, seed: int = 0):
    """Coupled chaotic logistic-map trajectories with a tanh trend of weight r.

    The stationary dynamics are the classic asymmetric coupled map (X drives
    Y through the 0.1 term, Y feeds back only weakly through 0.02), which
    stays inside (0, 1).  Each trajectory starts from uniform initial
    conditions in [0.1, 0.4] and discards 20 burn-in iterations; the step
    index is mapped onto [0, 1] and the sigmoid trend tanh(c t - c/2),
    c ~ N(8, 1) per trajectory and variable, is added to the recorded series
    with weight r.  Adding the trend inside the recursion instead would blow
    up the quadratic map.  Diverging trajectories are redrawn, at most ten
    times.
    """
    if not 0.0 <= r <= 1.0:
        raise InvalidArgumentError("r must lie in [0, 1]")
    if steps < 50:
        raise InvalidArgumentError("steps must be at least 50")
    rng = np.random.default_rng(seed)
    t_grid = np.linspace(0.0, 1.0, steps)
    xs = np.empty((n, steps))
    ys = np.empty((n, steps))
    for i in range(n):
        for attempt in range(10):
            x, y = rng.uniform(0.1, 0.4, size=2)
            c_x, c_y = rng.normal(8.0, 1.0, size=2)
            ok = True
            for _ in range(20):  # burn-in reaches the attractor
                x, y = (
                    x * (3.8 - 3.8 * x - 0.02 * y),
                    y * (3.5 - 3.5 * y - 0.1 * x),
                )
                if not (abs(x) < 1e6 and abs(y) < 1e6):
                    ok = False
                    break
            for k in range(steps):
                if not ok:
                    break
                xs[i, k], ys[i, k] = x, y
                x, y = (
                    x * (3.8 - 3.8 * x - 0.02 * y),
                    y * (3.5 - 3.5 * y - 0.1 * x),
                )
                if not (abs(x) < 1e6 and abs(y) < 1e6):
                    ok = False
            if ok:
                break
        else:
            raise NumericalError("logistic-map trajectory diverged in all 10 attempts")
        xs[i] += r * np.tanh(c_x * t_grid - c_x / 2.0)
        ys[i] += r * np.tanh(c_y * t_grid - c_y / 2.0)
    mesh = Mesh(t_grid)
    return FunctionalDataset("X", mesh, xs), FunctionalDataset("Y", mesh, ys)

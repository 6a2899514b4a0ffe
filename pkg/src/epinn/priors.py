"""Data-driven priors for the unknown equation parameters and the residual weight.

After phase-1 (pure data fitting), the mean-squared deviation between the
parametric solver and the fitted mean curve is mapped to a density over the
discretized parameter domain. A diagonal Gaussian surrogate of that density
(mode + marginal variances) becomes the parameter prior; two KL-divergence
matches then pin the inverse-gamma hyperparameters that regularize the
learnable residual weight: its mean targets the surrogate prior, its mode
targets a minimal-resolution Gaussian whose standard deviations equal the
grid spacings.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .net import NumericalFailure

_DENSITY_FLOOR = 1e-300
_NORMALIZATION_TOL = 1e-9


class DegenerateInputError(ValueError):
    """Inputs admit no meaningful answer (constant surfaces, inverted scales...)."""


@dataclass
class OmegaGrid:
    """Uniform tensor-product discretization of the parameter domain."""

    bounds: list
    points_per_dim: int = 51

    def __post_init__(self):
        self.bounds = [(float(lo), float(hi)) for lo, hi in self.bounds]
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError(f"empty parameter interval ({lo}, {hi})")
        if self.points_per_dim < 2:
            raise ValueError("need at least 2 points per dimension")
        self.nodes = [np.linspace(lo, hi, self.points_per_dim) for lo, hi in self.bounds]
        self.spacings = np.array([(hi - lo) / (self.points_per_dim - 1) for lo, hi in self.bounds])
        self.cell_volume = float(np.prod(self.spacings))
        self._flat = None

    @property
    def n_params(self):
        return len(self.bounds)

    @property
    def shape(self):
        return (self.points_per_dim,) * self.n_params

    @property
    def n_nodes(self):
        return self.points_per_dim ** self.n_params

    def flat_nodes(self):
        """(n_nodes, n_params) coordinates in row-major node order."""
        if self._flat is None:
            mesh = np.meshgrid(*self.nodes, indexing="ij")
            self._flat = np.stack([m.ravel() for m in mesh], axis=1)
        return self._flat

    def same_as(self, other):
        return self.points_per_dim == other.points_per_dim and self.bounds == other.bounds


@dataclass
class GridDensity:
    """Nonnegative values over the grid nodes, Riemann-sum normalized."""

    grid: OmegaGrid
    values: np.ndarray

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.shape != (self.grid.n_nodes,):
            raise ValueError(f"expected {self.grid.n_nodes} values, got {self.values.shape}")
        if np.any(self.values < 0):
            raise ValueError("density values must be nonnegative")
        err = abs(float(self.values.sum()) * self.grid.cell_volume - 1.0)
        if err > _NORMALIZATION_TOL:
            raise ValueError(f"density not normalized (error {err:.3e})")


def normalize_density(grid, values):
    """Normalize nonnegative values into a GridDensity (Riemann sum = 1)."""
    values = np.asarray(values, dtype=np.float64)
    total = values.sum() * grid.cell_volume
    if not total > 0:
        raise DegenerateInputError("cannot normalize an all-zero density")
    return GridDensity(grid, values / total)


@dataclass
class OmegaPrior:
    """Diagonal Gaussian surrogate: per-parameter mode and marginal variance."""

    mu: np.ndarray
    sigma2: np.ndarray

    def __post_init__(self):
        self.mu = np.asarray(self.mu, dtype=np.float64)
        self.sigma2 = np.asarray(self.sigma2, dtype=np.float64)
        if np.any(self.sigma2 <= 0):
            raise ValueError("prior variances must be positive")


@dataclass
class ResidualWeightPrior:
    """Inverse-gamma hyperparameters for the learnable residual weight."""

    alpha_r: float
    beta_r: float

    def __post_init__(self):
        if not (self.alpha_r > 1 and self.beta_r > 0):
            raise ValueError(f"need alpha_r > 1 and beta_r > 0, got ({self.alpha_r}, {self.beta_r})")

    @property
    def sigma2_ini(self):
        return self.beta_r / (self.alpha_r - 1.0)

    @property
    def sigma2_asy(self):
        return self.beta_r / (self.alpha_r + 1.0)


# ---------------------------------------------------------------------------
# density construction
# ---------------------------------------------------------------------------

def msd_surface(model_mean, problem, grid, data_inputs):
    """Mean squared deviation between solver output and fitted mean, per node."""
    data_inputs = np.atleast_2d(np.asarray(data_inputs, dtype=np.float64))
    if data_inputs.shape[0] == 0:
        raise ValueError("data_inputs must be non-empty")
    gamma = np.asarray(model_mean(data_inputs), dtype=np.float64).reshape(-1)
    omegas = grid.flat_nodes()
    if problem.solver_batch is not None:
        curves = problem.solver_batch(omegas, data_inputs)
    else:
        curves = np.stack([problem.solver(om, data_inputs) for om in omegas])
    m = np.mean((curves - gamma) ** 2, axis=1)
    if not np.all(np.isfinite(m)):
        bad = int(np.flatnonzero(~np.isfinite(m))[0])
        raise NumericalFailure(f"solver produced non-finite deviation at node {omegas[bad]}")
    return m


def density_from_msd(m, grid):
    """exp(-M / (2 Mbar)) with Mbar the grid average, Riemann normalized."""
    m = np.asarray(m, dtype=np.float64)
    if np.any(~np.isfinite(m)) or np.any(m < 0):
        raise ValueError("msd values must be finite and nonnegative")
    m_bar = float(m.mean())
    if m_bar == 0.0:
        return normalize_density(grid, np.ones_like(m))
    return normalize_density(grid, np.exp(-m / (2.0 * m_bar)))


def marginal_1d(density, dim):
    """1D marginal of a GridDensity along one parameter (nodes, density)."""
    grid = density.grid
    axes = tuple(i for i in range(grid.n_params) if i != dim)
    vals = density.values.reshape(grid.shape).sum(axis=axes)
    h_other = grid.cell_volume / grid.spacings[dim]
    return grid.nodes[dim], vals * h_other


def prior_from_density(f):
    """Gaussian surrogate: mu at the density mode, per-dim marginal variances."""
    grid = f.grid
    idx = int(np.argmax(f.values))
    peak = f.values[idx]
    if int(np.sum(f.values == peak)) > 1:
        warnings.warn("density mode is tied; using the lowest-index node", stacklevel=2)
    mu = f.grid.flat_nodes()[idx].copy()
    sigma2 = np.empty(grid.n_params)
    for i in range(grid.n_params):
        xs, dens = marginal_1d(f, i)
        h = grid.spacings[i]
        mean = float(np.sum(xs * dens) * h)
        var = float(np.sum((xs - mean) ** 2 * dens) * h)
        sigma2[i] = max(var, h * h * np.finfo(float).eps)
    return OmegaPrior(mu=mu, sigma2=sigma2)


def induced_omega_density(residual_sums, sigma2, grid):
    """Density over the grid induced by residual sums at weight sigma2."""
    if not sigma2 > 0:
        raise ValueError(f"sigma2 must be positive, got {sigma2}")
    s = np.asarray(residual_sums, dtype=np.float64)
    logv = -s / (2.0 * sigma2)
    logv -= logv.max()
    return normalize_density(grid, np.exp(logv))


def gaussian_on_grid(grid, mu, sigma2):
    """Diagonal Gaussian evaluated on the nodes and normalized on the grid."""
    nodes = grid.flat_nodes()
    mu = np.asarray(mu, dtype=np.float64)
    sigma2 = np.asarray(sigma2, dtype=np.float64)
    logv = -np.sum((nodes - mu) ** 2 / (2.0 * sigma2), axis=1)
    logv -= logv.max()
    return normalize_density(grid, np.exp(logv))


# ---------------------------------------------------------------------------
# KL machinery
# ---------------------------------------------------------------------------

def kl_grid(p, q):
    """Riemann-sum Kullback-Leibler divergence KL(p || q) on a shared grid."""
    if not p.grid.same_as(q.grid):
        raise ValueError("densities live on different grids")
    mask = p.values > 0
    qv = np.maximum(q.values[mask], _DENSITY_FLOOR)
    pv = p.values[mask]
    # separate logs: the ratio itself can underflow when the two densities
    # sit many decades apart on fine grids
    total = float(np.sum(pv * (np.log(pv) - np.log(qv))) * p.grid.cell_volume)
    if total < -1e-9:
        raise NumericalFailure(f"KL evaluated to {total}; densities are inconsistent")
    return max(total, 0.0)


def fit_sigma2_by_kl(residual_sums, target, grid,
                     sigma2_range=(1e-8, 1e8), points_per_decade=5, rel_tol=1e-4):
    """argmin over sigma2 of KL(induced density || target).

    Coarse logarithmic scan over the range, then golden-section refinement
    of the bracketing interval to the requested relative tolerance.
    """
    s = np.asarray(residual_sums, dtype=np.float64)
    if np.ptp(s) == 0.0:
        raise DegenerateInputError("residual sums are constant; every sigma2 is a minimizer")

    def kl_at(log_s2):
        return kl_grid(induced_omega_density(s, float(np.exp(log_s2)), grid), target)

    lo, hi = np.log(sigma2_range[0]), np.log(sigma2_range[1])
    n_decades = (hi - lo) / np.log(10.0)
    coarse = np.linspace(lo, hi, int(np.ceil(n_decades * points_per_decade)) + 1)
    vals = np.array([kl_at(t) for t in coarse])
    best = int(np.argmin(vals))
    a = coarse[max(best - 1, 0)]
    b = coarse[min(best + 1, len(coarse) - 1)]
    # golden-section on log sigma2
    inv_phi = (np.sqrt(5.0) - 1.0) / 2.0
    c = b - inv_phi * (b - a)
    d = a + inv_phi * (b - a)
    fc, fd = kl_at(c), kl_at(d)
    while (b - a) > rel_tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - inv_phi * (b - a)
            fc = kl_at(c)
        else:
            a, c, fc = c, d, fd
            d = a + inv_phi * (b - a)
            fd = kl_at(d)
    return float(np.exp(0.5 * (a + b)))


def invgamma_from_mean_mode(m_mean, m_mode):
    """Hyperparameters whose inverse-gamma mean/mode equal the two inputs."""
    if not m_mean > m_mode > 0:
        raise ValueError(f"need mean > mode > 0, got mean={m_mean}, mode={m_mode}")
    alpha_r = (m_mean + m_mode) / (m_mean - m_mode)
    beta_r = m_mean * (alpha_r - 1.0)
    return ResidualWeightPrior(alpha_r=float(alpha_r), beta_r=float(beta_r))


# ---------------------------------------------------------------------------
# full pipeline
# ---------------------------------------------------------------------------

def residual_sum_surface(mlp, problem, omegas, collocation):
    """S(omega) = sum over collocation points of squared residuals, per row.

    The network jets are computed once; residual formulas broadcast the
    (M, 1)-shaped parameter columns against the per-point fields.
    """
    collocation = np.atleast_2d(np.asarray(collocation, dtype=np.float64))
    omegas = np.atleast_2d(np.asarray(omegas, dtype=np.float64))
    fields = problem.fields_from_mlp(mlp, collocation)
    parts = [omegas[:, j][:, None] for j in range(omegas.shape[1])]
    total = np.zeros(omegas.shape[0])
    for res in problem.residual(fields, parts):
        term = np.asarray(res, dtype=np.float64) ** 2
        if term.ndim == 1:
            total += term.sum()
        else:
            total += term.sum(axis=1)
    return total


def build_priors(phase1_model, problem, grid, data_inputs, collocation):
    """Construct (OmegaPrior, ResidualWeightPrior) from the phase-1 model."""
    m = msd_surface(lambda X: problem.mean_field(phase1_model, X), problem, grid, data_inputs)
    f = density_from_msd(m, grid)
    prior = prior_from_density(f)
    s = residual_sum_surface(phase1_model, problem, grid.flat_nodes(), collocation)
    target_ini = gaussian_on_grid(grid, prior.mu, prior.sigma2)
    target_asy = gaussian_on_grid(grid, prior.mu, grid.spacings ** 2)
    sigma2_ini = fit_sigma2_by_kl(s, target_ini, grid)
    sigma2_asy = fit_sigma2_by_kl(s, target_asy, grid)
    if sigma2_ini <= sigma2_asy:
        raise DegenerateInputError(
            f"KL fits are inconsistent: sigma2_ini={sigma2_ini:.4e} <= sigma2_asy={sigma2_asy:.4e} "
            f"(prior sigma2={prior.sigma2}, grid spacings={grid.spacings})")
    return prior, invgamma_from_mean_mode(sigma2_ini, sigma2_asy)

"""Post-training posterior over the equation parameters.

The unnormalized posterior at every grid node is the residual likelihood
exp(-S(omega) / (2 sigma2_R)) times the Gaussian parameter prior; the data
term cancels in the normalization. Everything is assembled in log space
with max subtraction, so arbitrarily peaked surfaces normalize cleanly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .net import NumericalFailure
from .priors import GridDensity, marginal_1d, normalize_density, residual_sum_surface


@dataclass
class PosteriorTable:
    """Normalized posterior on the grid plus the summaries reports use."""

    grid: object
    prob: np.ndarray
    mean: np.ndarray
    mode: np.ndarray
    ci68: list


@dataclass
class GofReport:
    p_value: float
    n_samples: int
    model_deviation: float
    sample_deviations: dict


def _marginal_quantile(xs, dens, h, q):
    """Invert the piecewise-constant marginal CDF (cells centered on nodes)."""
    masses = dens * h
    cdf = np.cumsum(masses)
    cdf /= cdf[-1]
    i = int(np.searchsorted(cdf, q))
    i = min(i, len(xs) - 1)
    prev = cdf[i - 1] if i > 0 else 0.0
    frac = (q - prev) / max(cdf[i] - prev, 1e-300)
    return xs[i] - h / 2.0 + h * frac


def credible_interval(density, dim, level=0.68):
    """Central interval of one marginal of a GridDensity."""
    xs, dens = marginal_1d(density, dim)
    h = density.grid.spacings[dim]
    lo = _marginal_quantile(xs, dens, h, (1.0 - level) / 2.0)
    hi = _marginal_quantile(xs, dens, h, (1.0 + level) / 2.0)
    return float(lo), float(hi)


def posterior_over_grid(mlp, problem, grid, sigma2_R, prior, collocation):
    """Grid posterior: exp(-S/(2 sigma2_R)) * Gaussian prior, normalized."""
    if not sigma2_R > 0:
        raise ValueError(f"sigma2_R must be positive, got {sigma2_R}")
    nodes = grid.flat_nodes()
    s = residual_sum_surface(mlp, problem, nodes, collocation)
    log_prior = -np.sum((nodes - prior.mu) ** 2 / (2.0 * prior.sigma2), axis=1)
    log_post = -s / (2.0 * sigma2_R) + log_prior
    log_post -= log_post.max()
    dens = normalize_density(grid, np.exp(log_post))
    mean = np.sum(nodes * (dens.values * grid.cell_volume)[:, None], axis=0)
    mode = nodes[int(np.argmax(dens.values))].copy()
    ci68 = [credible_interval(dens, i, 0.68) for i in range(grid.n_params)]
    return PosteriorTable(grid=grid, prob=dens.values, mean=mean, mode=mode, ci68=ci68)


def as_density(table):
    return GridDensity(table.grid, table.prob)


def sample_posterior(table, n, seed, jitter=True):
    """Categorical draw over nodes, with uniform within-cell jitter by default."""
    if n < 1:
        raise ValueError("need at least one sample")
    rng = np.random.default_rng(seed)
    grid = table.grid
    w = table.prob * grid.cell_volume
    w = w / w.sum()
    idx = rng.choice(grid.n_nodes, size=n, p=w)
    coords = grid.flat_nodes()[idx].copy()
    if jitter:
        half = grid.spacings / 2.0
        coords += rng.uniform(-half, half, size=coords.shape)
        lo = np.array([b[0] for b in grid.bounds])
        hi = np.array([b[1] for b in grid.bounds])
        coords = np.clip(coords, lo, hi)
    return coords


def gof_pvalue(table, model_mean, problem, eval_points, n_samples=1000, seed=0):
    """Monte Carlo goodness of fit.

    The reference curve is the solver at the posterior mean; the p-value is
    the fraction of posterior samples whose RMSE from that curve is at least
    the fitted model's own RMSE.
    """
    eval_points = np.atleast_2d(np.asarray(eval_points, dtype=np.float64))
    ref = np.asarray(problem.solver(table.mean, eval_points), dtype=np.float64)
    model_curve = np.asarray(model_mean(eval_points), dtype=np.float64).reshape(-1)
    model_dev = float(np.sqrt(np.mean((model_curve - ref) ** 2)))
    samples = sample_posterior(table, n_samples, seed)
    if problem.solver_batch is not None:
        curves = problem.solver_batch(samples, eval_points)
    else:
        curves = np.stack([problem.solver(om, eval_points) for om in samples])
    ok = np.all(np.isfinite(curves), axis=1)
    n_failed = int(np.sum(~ok))
    if n_failed > 0.01 * n_samples:
        raise NumericalFailure(f"{n_failed}/{n_samples} posterior-sample solves failed")
    devs = np.sqrt(np.mean((curves[ok] - ref) ** 2, axis=1))
    p = float(np.mean(devs >= model_dev))
    summary = {"mean": float(devs.mean()), "std": float(devs.std()),
               "min": float(devs.min()), "max": float(devs.max()),
               "median": float(np.median(devs))}
    return GofReport(p_value=p, n_samples=int(ok.sum()),
                     model_deviation=model_dev, sample_deviations=summary)

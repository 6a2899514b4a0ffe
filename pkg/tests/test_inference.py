from dataclasses import replace

import numpy as np
import pytest

from epinn.inference import (GofReport, PosteriorTable, as_density, credible_interval,
                             gof_pvalue, posterior_over_grid, sample_posterior)
from epinn.net import init_mlp
from epinn.priors import (OmegaGrid, OmegaPrior, gaussian_on_grid, kl_grid, marginal_1d,
                          normalize_density, residual_sum_surface)
from epinn.problems import poisson_problem


def trained_stand_in():
    """Untrained net is fine here: the posterior math only needs residual sums."""
    mlp = init_mlp([1, 16, 16, 4], seed=0, in_shift=[0.5], in_scale=[0.5])
    prob = poisson_problem()
    grid = OmegaGrid(prob.param_bounds, 21)
    X = np.linspace(0.05, 0.95, 40)[:, None]
    prior = OmegaPrior(np.array([0.5, 0.035]), np.array([0.02, 5e-4]))
    return mlp, prob, grid, X, prior


class TestPosteriorOverGrid:
    def test_large_sigma_recovers_prior(self):
        mlp, prob, grid, X, prior = trained_stand_in()
        table = posterior_over_grid(mlp, prob, grid, 1e12, prior, X)
        target = gaussian_on_grid(grid, prior.mu, prior.sigma2)
        assert kl_grid(as_density(table), target) <= 1e-6

    def test_zero_residual_stub_equals_prior(self):
        mlp, prob, grid, X, prior = trained_stand_in()
        stub = replace(prob, residual=lambda fields, om: [0.0 * fields.u[0] + 0.0 * om[0]])
        table = posterior_over_grid(mlp, stub, grid, 0.37, prior, X)
        target = gaussian_on_grid(grid, prior.mu, prior.sigma2)
        assert kl_grid(as_density(table), target) <= 1e-9

    def test_symmetric_surface_flat_prior(self):
        mlp, prob, grid, X, _ = trained_stand_in()
        grid1 = OmegaGrid([(0.0, 1.0)], points_per_dim=41)
        nodes = grid1.flat_nodes()[:, 0]
        s = (nodes - 0.5) ** 2 * 30.0
        flat_prior = OmegaPrior(np.array([0.5]), np.array([1e10]))
        stub = replace(poisson_problem(x0_bounds=(0.0, 1.0)), n_params=1, param_names=["x0"],
                       param_bounds=[(0.0, 1.0)],
                       residual=lambda fields, om: [(om[0] - 0.5) * np.sqrt(30.0 / len(fields.u[0]))])
        table = posterior_over_grid(mlp, stub, grid1, 1.0, flat_prior, X)
        assert table.mean[0] == pytest.approx(0.5, abs=1e-10)
        assert table.mode[0] == pytest.approx(0.5, abs=1e-10)

    def test_log_space_matches_naive(self):
        mlp, prob, grid, X, prior = trained_stand_in()
        sigma2 = 5.0
        table = posterior_over_grid(mlp, prob, grid, sigma2, prior, X)
        s = residual_sum_surface(mlp, prob, grid.flat_nodes(), X)
        nodes = grid.flat_nodes()
        naive = np.exp(-s / (2 * sigma2)) * np.exp(
            -np.sum((nodes - prior.mu) ** 2 / (2 * prior.sigma2), axis=1))
        naive /= naive.sum() * grid.cell_volume
        assert np.max(np.abs(naive - table.prob)) <= 1e-12 * table.prob.max()

    def test_ci68_marginal_coverage(self):
        mlp, prob, grid, X, prior = trained_stand_in()
        table = posterior_over_grid(mlp, prob, grid, 2.0, prior, X)
        dens = as_density(table)
        for dim in range(2):
            lo, hi = table.ci68[dim]
            xs, marg = marginal_1d(dens, dim)
            h = grid.spacings[dim]
            edges_lo, edges_hi = xs - h / 2, xs + h / 2
            mass = np.sum(np.clip((np.minimum(hi, edges_hi) - np.maximum(lo, edges_lo)) / h, 0, 1)
                          * marg * h)
            assert mass == pytest.approx(0.68, abs=0.01)

    def test_invalid_sigma(self):
        mlp, prob, grid, X, prior = trained_stand_in()
        with pytest.raises(ValueError):
            posterior_over_grid(mlp, prob, grid, 0.0, prior, X)


class TestSamplePosterior:
    def point_mass_table(self):
        grid = OmegaGrid([(0.0, 1.0)], points_per_dim=11)
        prob_vec = np.zeros(11)
        prob_vec[3] = 1.0 / grid.cell_volume
        return PosteriorTable(grid=grid, prob=prob_vec, mean=np.array([0.3]),
                              mode=np.array([0.3]), ci68=[(0.3, 0.3)])

    def test_point_mass_stays_in_cell(self):
        table = self.point_mass_table()
        draws = sample_posterior(table, 500, seed=0)
        h = table.grid.spacings[0]
        assert np.all(np.abs(draws[:, 0] - 0.3) <= h / 2 + 1e-12)

    def test_law_of_large_numbers(self):
        mlp, prob, grid, X, prior = trained_stand_in()
        table = posterior_over_grid(mlp, prob, grid, 2.0, prior, X)
        draws = sample_posterior(table, 10 ** 5, seed=1)
        for dim in range(2):
            xs, marg = marginal_1d(as_density(table), dim)
            h = grid.spacings[dim]
            var = np.sum((xs - table.mean[dim]) ** 2 * marg) * h
            se = np.sqrt(var / len(draws))
            assert abs(draws[:, dim].mean() - table.mean[dim]) <= 3 * se + h / 2 * 0.01

    def test_two_seeds_same_distribution(self):
        mlp, prob, grid, X, prior = trained_stand_in()
        table = posterior_over_grid(mlp, prob, grid, 2.0, prior, X)
        a = np.sort(sample_posterior(table, 10 ** 5, seed=2)[:, 0])
        b = np.sort(sample_posterior(table, 10 ** 5, seed=3)[:, 0])
        assert not np.array_equal(a, b)
        # two-sample KS distance
        allv = np.concatenate([a, b])
        cdf_a = np.searchsorted(a, allv, side="right") / len(a)
        cdf_b = np.searchsorted(b, allv, side="right") / len(b)
        assert np.max(np.abs(cdf_a - cdf_b)) < 0.02

    def test_deterministic_per_seed(self):
        table = self.point_mass_table()
        assert np.array_equal(sample_posterior(table, 50, seed=9),
                              sample_posterior(table, 50, seed=9))

    def test_needs_positive_n(self):
        with pytest.raises(ValueError):
            sample_posterior(self.point_mass_table(), 0, seed=0)


class TestGofPvalue:
    def test_perfect_model_p_is_one(self):
        mlp, prob, grid, X, prior = trained_stand_in()
        table = posterior_over_grid(mlp, prob, grid, 2.0, prior, X)
        pts = np.linspace(0.1, 0.9, 30)[:, None]
        ref_curve = prob.solver(table.mean, pts)
        rep = gof_pvalue(table, lambda P: ref_curve, prob, pts, n_samples=300, seed=0)
        assert rep.p_value == 1.0
        assert rep.model_deviation == 0.0

    def test_wild_model_p_is_zero(self):
        mlp, prob, grid, X, prior = trained_stand_in()
        table = posterior_over_grid(mlp, prob, grid, 2.0, prior, X)
        pts = np.linspace(0.1, 0.9, 30)[:, None]
        rep = gof_pvalue(table, lambda P: np.full(len(P), 1e6), prob, pts,
                         n_samples=300, seed=0)
        assert rep.p_value == 0.0

    def test_rank_invariance_of_p(self):
        # recompute the p-value from squared deviations (a monotone

        # transform of RMSE): identical by the rank-based definition
        mlp, prob, grid, X, prior = trained_stand_in()
        table = posterior_over_grid(mlp, prob, grid, 2.0, prior, X)
        pts = np.linspace(0.1, 0.9, 25)[:, None]
        model_mean = lambda P: prob.solver((0.45, 0.03), P)
        rep = gof_pvalue(table, model_mean, prob, pts, n_samples=400, seed=5)
        ref = prob.solver(table.mean, pts)
        samples = sample_posterior(table, 400, seed=5)
        curves = prob.solver_batch(samples, pts)
        mse_model = np.mean((model_mean(pts) - ref) ** 2)
        mse_samples = np.mean((curves - ref) ** 2, axis=1)
        assert np.mean(mse_samples >= mse_model) == pytest.approx(rep.p_value, abs=1e-12)

    def test_report_fields(self):
        mlp, prob, grid, X, prior = trained_stand_in()
        table = posterior_over_grid(mlp, prob, grid, 2.0, prior, X)
        pts = np.linspace(0.1, 0.9, 10)[:, None]
        rep = gof_pvalue(table, lambda P: prob.mean_field(mlp, P), prob, pts,
                         n_samples=100, seed=2)
        assert 0.0 <= rep.p_value <= 1.0
        assert rep.n_samples == 100
        assert set(rep.sample_deviations) == {"mean", "std", "min", "max", "median"}

import numpy as np
import pytest
from scipy.integrate import quad

from epinn.net import InputJet
from epinn.problems import (BergmanInputs, bergman_index, bergman_problem, estimate_basals,
                            fisher_problem, fisher_travelling_wave, get_problem, poisson_exact,
                            poisson_nodes, poisson_problem, residual_bergman, residual_fisher,
                            residual_poisson, solve_bergman, solve_fisher, solve_poisson)

TRUE_POISSON = (1.0 / 3.0, 0.02)


def quad_poisson_oracle(xs, omega):
    """Independent double-quadrature solution of u'' + g = 0, u(0)=u(1)=0."""
    x0, sf2 = omega

    def g(r):
        return np.exp(-(r - x0) ** 2 / (2 * sf2))

    def gint(s):
        return quad(g, 0.0, s, limit=200)[0]

    def dbl(x):
        return quad(gint, 0.0, x, limit=200)[0]

    c1 = dbl(1.0)
    return np.array([c1 * x - dbl(x) for x in np.atleast_1d(xs)])


class TestResidualPoisson:
    def test_parabola_at_center(self):
        # u = -x^2/2 so u'' = -1; at x = x0 the source is 1
        jet = InputJet(value=0.0, grad=np.array([0.0]), hess_diag=np.array([-1.0]))
        assert residual_poisson(jet, 1.0 / 3.0, TRUE_POISSON) == pytest.approx(0.0, abs=1e-15)

    def test_far_field_vanishes(self):
        jet = InputJet(value=0.0, grad=np.zeros(1), hess_diag=np.zeros(1))
        assert abs(residual_poisson(jet, 50.0, TRUE_POISSON)) < 1e-300

    def test_exact_solution_residual_small(self):
        # second derivative of the closed form via central differences
        h = 1e-4
        xs = np.linspace(0.05, 0.95, 19)
        for x in xs:
            u = poisson_exact(np.array([x - h, x, x + h]), TRUE_POISSON)
            u_xx = (u[0] - 2 * u[1] + u[2]) / h ** 2
            jet = InputJet(value=u[1], grad=np.zeros(1), hess_diag=np.array([u_xx]))
            assert abs(residual_poisson(jet, x, TRUE_POISSON)) < 1e-6

    def test_invalid_sigma(self):
        jet = InputJet(0.0, np.zeros(1), np.zeros(1))
        with pytest.raises(ValueError):
            residual_poisson(jet, 0.5, (0.3, -0.01))


class TestSolvePoisson:
    def test_source_far_outside_domain(self):
        u = solve_poisson((50.0, 1e-4), 101)
        assert np.max(np.abs(u)) < 1e-12

    def test_grid_refinement_consistency(self):
        u1 = solve_poisson(TRUE_POISSON, 201)
        u2 = solve_poisson(TRUE_POISSON, 401)
        common = poisson_nodes(201)
        u2_on_1 = np.interp(common, poisson_nodes(401), u2)
        assert np.max(np.abs(u1 - u2_on_1)) <= 1e-4

    def test_matches_quadrature_oracle(self):
        xs = np.linspace(0.1, 0.9, 9)
        ref = quad_poisson_oracle(xs, TRUE_POISSON)
        u = solve_poisson(TRUE_POISSON, 801)
        mine = np.interp(xs, poisson_nodes(801), u)
        assert np.max(np.abs(mine - ref)) <= 1e-5

    def test_second_order_convergence(self):
        xs = np.linspace(0.1, 0.9, 17)
        ref = quad_poisson_oracle(xs, TRUE_POISSON)
        errs, hs = [], []
        for n in (51, 101, 201, 401):
            u = np.interp(xs, poisson_nodes(n), solve_poisson(TRUE_POISSON, n))
            errs.append(np.max(np.abs(u - ref)))
            hs.append(1.0 / (n - 1))
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert slope == pytest.approx(2.0, abs=0.2)

    def test_closed_form_agrees_with_quadrature(self):
        xs = np.linspace(0.0, 1.0, 11)
        assert np.allclose(poisson_exact(xs, TRUE_POISSON), quad_poisson_oracle(xs, TRUE_POISSON),
                           atol=1e-10)

    def test_too_few_nodes(self):
        with pytest.raises(ValueError):
            solve_poisson(TRUE_POISSON, 2)


class TestFisher:
    def test_steady_states(self):
        for u in (0.0, 1.0):
            assert residual_fisher(0.0, 0.0, u, (1.6, 6.2)) == 0.0

    def test_wave_quarter_point(self):
        assert fisher_travelling_wave(0.0, 0.0, 1.6, 6.2) == pytest.approx(0.25)
        r, D = 0.9, 3.0
        x = 5.0 * np.sqrt(r * D) / np.sqrt(6.0) * 2.0  # argument of exp = 0 at t=2
        assert fisher_travelling_wave(x, 2.0, r, D) == pytest.approx(0.25)

    def test_wave_limits(self):
        assert fisher_travelling_wave(-200.0, 0.0, 1.6, 6.2) == pytest.approx(1.0)
        assert fisher_travelling_wave(200.0, 0.0, 1.6, 6.2) == pytest.approx(0.0, abs=1e-12)

    def test_exact_wave_residual_with_analytic_derivatives(self):
        # chain-rule derivatives of u = (1 + e^z)^-2 done independently here
        r, D = 1.6, 6.2
        a = np.sqrt(r / (6.0 * D))
        c = 5.0 * np.sqrt(r * D) / np.sqrt(6.0)
        rng = np.random.default_rng(12)
        xs = rng.uniform(-20, 20, 100)
        ts = rng.uniform(0, 10, 100)
        z = a * (xs - c * ts)
        E = np.exp(z)
        u = (1 + E) ** -2
        du_dz = -2 * E * (1 + E) ** -3
        d2u_dz2 = (-2 * E * (1 + E) ** -3) + 6 * E ** 2 * (1 + E) ** -4
        u_t = du_dz * (-a * c)
        u_x = du_dz * a
        u_xx = d2u_dz2 * a ** 2
        res = residual_fisher(u_t, u_xx, u, (r, D))
        assert np.max(np.abs(res)) <= 1e-6

    def test_solver_delegates_to_wave(self):
        pts = np.array([[0.0, 0.0], [3.0, 1.0], [-5.0, 2.0]])
        out = solve_fisher((1.6, 6.2), pts)
        ref = fisher_travelling_wave(pts[:, 0], pts[:, 1], 1.6, 6.2)
        assert np.array_equal(out, ref)

    def test_msd_zero_at_truth_positive_elsewhere(self):
        prob = fisher_problem()
        pts = np.column_stack([np.linspace(-15, 15, 50), np.linspace(0.5, 9.5, 50)])
        truth = prob.solver((1.6, 6.2), pts)
        assert np.mean((prob.solver((1.6, 6.2), pts) - truth) ** 2) == 0.0
        assert np.mean((prob.solver((2.2, 4.0), pts) - truth) ** 2) > 0.0

    def test_invalid_params(self):
        with pytest.raises(ValueError):
            fisher_travelling_wave(0.0, 0.0, -1.0, 6.2)
        with pytest.raises(ValueError):
            residual_fisher(0.0, 0.0, 0.5, (1.0, 0.0))


def ivgtt_inputs():
    t = np.array([0.0, 3.0, 6.0, 10.0, 16.0, 24.0, 40.0, 60.0, 90.0, 120.0])
    insulin = 8.0 + 80.0 * (t / 10.0) * np.exp(1.0 - t / 10.0)
    glucose = np.full_like(t, 85.0)
    glucose[0] = 290.0
    return BergmanInputs(times=t, glucose=glucose, insulin=insulin, G_b=85.0, I_b=8.0)


class TestBergman:
    def test_equilibrium_residuals(self):
        r1, r2 = residual_bergman(0.0, 0.0, 85.0, 0.0, 8.0, (0.03, 0.02, 1e-5), (85.0, 8.0))
        assert r1 == 0.0 and r2 == 0.0

    def test_second_residual_reduces(self):
        r1, r2 = residual_bergman(0.0, 0.7, 100.0, 0.0, 8.0, (0.03, 0.02, 1e-5), (85.0, 8.0))
        assert r2 == pytest.approx(0.7)

    def test_indices(self):
        assert bergman_index((0.03, 0.02, 1e-5)) == (pytest.approx(0.03), pytest.approx(5e-4))
        sg1, si1 = bergman_index((0.03, 0.02, 1e-5))
        sg2, si2 = bergman_index((0.03, 0.04, 2e-5))
        assert si1 == pytest.approx(si2)
        assert bergman_index((0.03, 0.02, 2e-5))[1] > si1
        with pytest.raises(ValueError):
            bergman_index((0.03, 0.0, 1e-5))

    def test_p3_zero_exponential_decay(self):
        inputs = ivgtt_inputs()
        t_eval = np.linspace(0, 120, 61)
        G, X = solve_bergman((0.03, 0.02, 0.0), inputs, t_eval)
        assert np.max(np.abs(X)) == 0.0
        expected = 85.0 + (290.0 - 85.0) * np.exp(-0.03 * t_eval)
        assert np.allclose(G, expected, rtol=1e-8)

    def test_equilibrium_initial_data(self):
        t = np.linspace(0, 60, 7)
        inputs = BergmanInputs(times=t, glucose=np.full(7, 85.0),
                               insulin=np.full(7, 8.0), G_b=85.0, I_b=8.0)
        G, X = solve_bergman((0.03, 0.02, 1e-5), inputs, t)
        assert np.allclose(G, 85.0, atol=1e-10) and np.allclose(X, 0.0, atol=1e-12)

    def test_step_refinement(self):
        inputs = ivgtt_inputs()
        t_eval = np.arange(0.0, 121.0, 1.0)
        G1, _ = solve_bergman((0.03, 0.02, 1e-5), inputs, t_eval, max_step=0.5)
        G2, _ = solve_bergman((0.03, 0.02, 1e-5), inputs, t_eval, max_step=0.25)
        assert np.max(np.abs(G1 - G2) / np.abs(G2)) <= 1e-5

    def test_fourth_order_convergence(self):
        inputs = ivgtt_inputs()
        # segment [0, 3] has smooth insulin (one linear piece), so RK4's
        # asymptotic order is visible
        t_eval = np.array([3.0])
        ref, _ = solve_bergman((0.05, 0.1, 9e-5), inputs, t_eval, max_step=3.0 / 256)
        errs, hs = [], []
        for n in (2, 4, 8, 16):
            G, _ = solve_bergman((0.05, 0.1, 9e-5), inputs, t_eval, max_step=3.0 / n)
            errs.append(abs(G[0] - ref[0]))
            hs.append(3.0 / n)
        slope = np.polyfit(np.log(hs), np.log(errs), 1)[0]
        assert slope == pytest.approx(4.0, abs=0.5)

    def test_trajectory_consistent_with_residual(self):
        inputs = ivgtt_inputs()
        omega = (0.03, 0.02, 1e-5)
        h = 0.05
        t_mid = np.arange(5.0, 100.0, 2.5)
        t_all = np.concatenate([t_mid - h, t_mid, t_mid + h])
        G, X = solve_bergman(omega, inputs, t_all, max_step=0.01)
        n = len(t_mid)
        dG = (G[2 * n:] - G[:n]) / (2 * h)
        dX = (X[2 * n:] - X[:n]) / (2 * h)
        I_t = np.interp(t_mid, inputs.times, inputs.insulin)
        r1, r2 = residual_bergman(dG, dX, G[n:2 * n], X[n:2 * n], I_t, omega, (85.0, 8.0))
        assert np.max(np.abs(r1)) <= 1e-5
        assert np.max(np.abs(r2)) <= 1e-5

    def test_t_eval_outside_range(self):
        inputs = ivgtt_inputs()
        with pytest.raises(ValueError):
            solve_bergman((0.03, 0.02, 1e-5), inputs, np.array([130.0]))

    def test_inputs_validation(self):
        t = np.array([0.0, 1.0, 2.0, 3.0])
        good = dict(times=t, glucose=np.full(4, 90.0), insulin=np.full(4, 9.0),
                    G_b=85.0, I_b=8.0)
        BergmanInputs(**good)
        with pytest.raises(ValueError):
            BergmanInputs(**{**good, "times": t[::-1]})
        with pytest.raises(ValueError):
            BergmanInputs(**{**good, "glucose": np.array([90, -1, 90, 90.0])})
        with pytest.raises(ValueError):
            BergmanInputs(**{**good, "insulin": np.full(3, 9.0)})

    def test_estimate_basals(self):
        g = np.array([280.0, 120.0, 90.0, 84.0, 86.0])
        i = np.array([60.0, 30.0, 10.0, 8.5, 7.5])
        assert estimate_basals(g, i) == (85.0, 8.0)


class TestProblemRegistry:
    def test_lookup_by_name(self):
        assert get_problem("poisson1d").name == "poisson1d"
        assert get_problem("fisher-kpp").n_params == 2
        with pytest.raises(ValueError):
            get_problem("heat3d")

    def test_solver_batch_matches_solver(self):
        prob = poisson_problem()
        pts = np.linspace(0.1, 0.9, 7)[:, None]
        omegas = np.array([[0.3, 0.02], [0.5, 0.04]])
        batch = prob.solver_batch(omegas, pts)
        for k, om in enumerate(omegas):
            assert np.allclose(batch[k], prob.solver(om, pts), atol=1e-14)

    def test_bergman_solver_batch(self):
        inputs = ivgtt_inputs()
        prob = bergman_problem(inputs)
        pts = np.array([[0.0], [10.0], [60.0]])
        omegas = np.array([[0.03, 0.02, 1e-5], [0.05, 0.1, 5e-5]])
        batch = prob.solver_batch(omegas, pts)
        for k, om in enumerate(omegas):
            assert np.allclose(batch[k], prob.solver(om, pts), rtol=1e-12)

    def test_solver_outputs_finite_in_bounds(self):
        for name in ("poisson1d", "fisher-kpp"):
            prob = get_problem(name)
            rng = np.random.default_rng(0)
            omegas = np.column_stack([rng.uniform(lo, hi, 25) for lo, hi in prob.param_bounds])
            pts = (np.linspace(0.05, 0.95, 11)[:, None] if prob.input_dim == 1
                   else np.column_stack([np.linspace(-18, 18, 11), np.linspace(0.5, 9.5, 11)]))
            assert np.all(np.isfinite(prob.solver_batch(omegas, pts)))

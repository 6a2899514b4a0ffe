import numpy as np
import pytest

from epinn.ensemble import gaussian_interval_fn, member_curves_at, run_ensemble, train_pinn_member
from epinn.problems import poisson_exact, poisson_problem
from epinn.training import TrainConfig


def poisson_data(noisy=True, n=60, seed=0):
    rng = np.random.default_rng(seed)
    X = np.sort(rng.uniform(0, 1, n))[:, None]
    truth = poisson_exact(X[:, 0], (1 / 3, 0.02))
    y = truth + (0.0005 * rng.uniform(-0.5, 0.5, n) if noisy else 0.0)
    return X, y


def scaled_problem(y):
    return poisson_problem(state_shift=[float(y.mean())], state_scale=[float(np.ptp(y))])


class TestTrainPinnMember:
    def test_noiseless_recovers_truth(self):
        X, y = poisson_data(noisy=False)
        prob = scaled_problem(y)
        cfg = TrainConfig(phase1_epochs=20000, phase1_lr=1e-3, log_every=10 ** 9)
        _, omega = train_pinn_member(prob, (X, y), 0.1, seed=3, cfg=cfg)
        assert abs(omega[0] - 1 / 3) <= 0.05
        assert abs(omega[1] - 0.02) <= 0.05

    def test_lambda_zero_isolated_regression(self):
        # residual off: omega receives no gradient and stays at its init
        X, y = poisson_data()
        prob = scaled_problem(y)
        cfg = TrainConfig(phase1_epochs=200, phase1_lr=1e-3, log_every=10 ** 9)
        _, omega = train_pinn_member(prob, (X, y), 0.0, seed=5, cfg=cfg)
        rng = np.random.default_rng(5)
        lo = np.array([b[0] for b in prob.param_bounds])
        hi = np.array([b[1] for b in prob.param_bounds])
        init_omega = rng.uniform(lo, hi)
        assert np.allclose(omega, init_omega, atol=1e-12)

    def test_same_seed_identical(self):
        X, y = poisson_data()
        prob = scaled_problem(y)
        cfg = TrainConfig(phase1_epochs=300, phase1_lr=1e-3, log_every=10 ** 9)
        m1, o1 = train_pinn_member(prob, (X, y), 0.1, seed=8, cfg=cfg)
        m2, o2 = train_pinn_member(prob, (X, y), 0.1, seed=8, cfg=cfg)
        assert np.array_equal(o1, o2)
        for a, b in zip(m1.weights, m2.weights):
            assert np.array_equal(a, b)


class TestRunEnsemble:
    def test_forced_same_seed_zero_std(self):
        X, y = poisson_data()
        prob = scaled_problem(y)
        cfg = TrainConfig(phase1_epochs=200, phase1_lr=1e-3, log_every=10 ** 9)
        res = run_ensemble(prob, (X, y), 3, cfg, lambda_res=0.1, seeds=[4, 4, 4])
        assert np.all(res.omega_std == 0.0)
        # identical curves; the mean can still round at the last bit
        assert np.all(res.predictive_std <= 1e-15)

    def test_aggregation_identities(self):
        X, y = poisson_data()
        prob = scaled_problem(y)
        cfg = TrainConfig(phase1_epochs=300, phase1_lr=1e-3, log_every=10 ** 9)
        res = run_ensemble(prob, (X, y), 3, cfg, lambda_res=0.1)
        assert np.allclose(res.predictive_mean, res.member_curves.mean(axis=0), atol=1e-15)
        assert np.allclose(res.predictive_std, res.member_curves.std(axis=0), atol=1e-15)
        assert np.allclose(res.omega_mean, res.member_omegas.mean(axis=0), atol=1e-15)

    def test_full_result_reproducible(self):
        X, y = poisson_data()
        prob = scaled_problem(y)
        cfg = TrainConfig(phase1_epochs=200, phase1_lr=1e-3, log_every=10 ** 9, seed=11)
        a = run_ensemble(prob, (X, y), 3, cfg, lambda_res=0.1)
        b = run_ensemble(prob, (X, y), 3, cfg, lambda_res=0.1)
        assert np.array_equal(a.member_omegas, b.member_omegas)
        assert np.array_equal(a.member_curves, b.member_curves)

    def test_needs_two_members(self):
        X, y = poisson_data()
        prob = scaled_problem(y)
        with pytest.raises(ValueError):
            run_ensemble(prob, (X, y), 1, TrainConfig(10, 0))

    def test_member_curves_at_new_points(self):
        X, y = poisson_data()
        prob = scaled_problem(y)
        cfg = TrainConfig(phase1_epochs=200, phase1_lr=1e-3, log_every=10 ** 9)
        res = run_ensemble(prob, (X, y), 2, cfg, lambda_res=0.1)
        pts = np.linspace(0.2, 0.8, 5)[:, None]
        curves = member_curves_at(res, prob, pts)
        assert curves.shape == (2, 5)
        assert np.allclose(curves[0], prob.mean_field(res.member_models[0], pts))

    def test_fisher_spread_uncorrelated_with_noise(self, tmp_path):
        # member spread does not localize the injected noise region
        # (the evidential model's sigma_p does; see the acceptance suite)
        from epinn.calibration import spearman
        from epinn.datasets import gen_fisher_dataset, load_dataset
        from epinn.problems import fisher_problem

        info = gen_fisher_dataset(tmp_path / "f", seed=0, n_train=500, n_test=50)
        train = load_dataset(info["train"])
        X, y, noise_mag = train["X"], train["y"], train["noise_mag"]
        prob = fisher_problem(state_shift=[float(y.mean())], state_scale=[float(np.ptp(y))])
        cfg = TrainConfig(phase1_epochs=8000, phase1_lr=1e-3, log_every=10 ** 9)
        res = run_ensemble(prob, (X, y), 3, cfg, lambda_res=1.0, eval_points=X)
        r_s, _ = spearman(res.predictive_std, noise_mag)
        assert abs(r_s) < 0.3

    def test_gaussian_interval_fn(self):
        X, y = poisson_data()
        prob = scaled_problem(y)
        cfg = TrainConfig(phase1_epochs=200, phase1_lr=1e-3, log_every=10 ** 9)
        res = run_ensemble(prob, (X, y), 3, cfg, lambda_res=0.1, eval_points=X)
        fn = gaussian_interval_fn(res, X)
        lo, hi = fn(X, 0.68)
        assert np.all(hi >= lo)
        with pytest.raises(ValueError):
            fn(X[:5], 0.68)

"""Inverse problem walkthrough on the 1D Poisson equation.

    u''(x) + exp(-(x - x0)^2 / (2 sf2)) = 0,  u(0) = u(1) = 0

Synthetic noisy data hides the true source parameters (x0, sf2) =
(1/3, 0.02). The pipeline: fit the evidential surrogate to data alone,
build the data-driven parameter prior plus the inverse-gamma prior for the
learnable residual weight, run the second joint phase, and read off the
parameter posterior, goodness of fit, and calibration.

This demo runs a reduced budget (~1 minute); configs/poisson_desk.ini is
the full desk-scale benchmark.

Run: python demos/02_poisson_inverse.py
"""

import time

import numpy as np

from epinn import calibration, datasets, inference, priors, problems, training
from epinn.net import init_mlp

t0 = time.time()
OUT = "runs/demo_poisson"

print("generating the dataset (240 train / 150 test, uniform noise) ...")
info = datasets.gen_poisson_dataset(f"{OUT}/data", seed=5)
train = datasets.load_dataset(info["train"])
test = datasets.load_dataset(info["test"])
X, y = train["X"], train["y"]
print(f"  true omega = {info['meta']['true_omega']},  noise amplitude = "
      f"{info['meta']['noise_amplitude']:.4f}\n")

shift, scale = float(y.mean()), float(np.ptp(y))
prob = problems.poisson_problem(state_shift=[shift], state_scale=[scale])
cfg = training.TrainConfig(phase1_epochs=15000, phase2_epochs=15000,
                           phase1_lr=1e-4, phase2_lr=5e-4, log_every=5000)

print("phase 1: evidential fit to data alone ...")
mlp = init_mlp([1, 16, 16, 4], seed=7, in_shift=[0.5], in_scale=[0.5])
mlp = training.phase1_train(mlp, (X, y), cfg, target_shift=shift, target_scale=scale)
gamma = prob.mean_field(mlp, X)
print(f"  fitted-mean rmse vs noiseless truth: "
      f"{np.sqrt(np.mean((gamma - train['truth']) ** 2)):.5f}\n")

print("building priors from the phase-1 model ...")
grid = priors.OmegaGrid(prob.param_bounds, 51)
prior, rw = priors.build_priors(mlp, prob, grid, X, X)
print(f"  parameter prior: mu = {np.round(prior.mu, 4)}, sigma = {np.round(np.sqrt(prior.sigma2), 4)}")
print(f"  residual weight: sigma2_ini = {rw.sigma2_ini:.3g} (mean), "
      f"sigma2_asy = {rw.sigma2_asy:.3g} (mode), alpha_r = {rw.alpha_r:.3f}\n")

print("phase 2: joint training of weights, residual weight, and omega ...")
state = training.init_phase2_state(mlp, prob, (prior, rw), cfg)
training.phase2_train(state, (X, y), prob, (prior, rw), cfg)
print(f"  final omega (MAP) = {np.round(state.omega, 4)}")
print(f"  sigma2_R: {rw.sigma2_ini:.3g} -> {state.sigma2_R:.3g} "
      f"(mode is {rw.sigma2_asy:.3g})\n")

print("posterior over the parameter grid ...")
table = inference.posterior_over_grid(state.mlp, prob, grid, state.sigma2_R, prior, X)
for i, name in enumerate(prob.param_names):
    lo, hi = table.ci68[i]
    print(f"  {name}: mean {table.mean[i]:.4f}, mode {table.mode[i]:.4f}, "
          f"68% CI [{lo:.4f}, {hi:.4f}]")

eval_pts = np.linspace(0, 1, 201)[:, None]
gof = inference.gof_pvalue(table, lambda P: prob.mean_field(state.mlp, P), prob,
                           eval_pts, n_samples=500, seed=8)
interval_fn = calibration.evidential_interval_fn(state.mlp, shift, scale)
report = calibration.ecp_curve(interval_fn, (test["X"], test["y"]))
print(f"\ngoodness-of-fit p-value: {gof.p_value:.3f}")
print(f"mean calibration error : {report.mce:.3f}")
print(f"\ndone in {time.time() - t0:.0f} s; artifacts under {OUT}/")

"""Evidential physics-informed networks for PDE/ODE inverse problems.

A numpy/scipy library implementing a two-phase evidential surrogate:
phase 1 fits calibrated predictive uncertainty to data, phase 2 adapts the
fit to a presumed differential-equation description with a learnable
residual weight, returning a grid posterior over the unknown equation
parameters alongside calibration and goodness-of-fit diagnostics.
"""

from .net import (AdamState, InputJet, Mlp, NumericalFailure, adam_init, adam_step,
                  forward, forward_jets, init_mlp, input_jet, loss_gradient,
                  value_and_gradient)
from .evidential import (EvidentialOutput, constrain_heads, nll,
                         predictive_interval, predictive_variance, predict_heads)
from .problems import (BergmanInputs, Fields, PdeProblem, bergman_index,
                       bergman_problem, estimate_basals, fisher_problem,
                       fisher_travelling_wave, get_problem, poisson_exact,
                       poisson_problem, residual_bergman, residual_fisher,
                       residual_poisson, solve_bergman, solve_fisher, solve_poisson)
from .priors import (DegenerateInputError, GridDensity, OmegaGrid, OmegaPrior,
                     ResidualWeightPrior, build_priors, density_from_msd,
                     fit_sigma2_by_kl, gaussian_on_grid, induced_omega_density,
                     invgamma_from_mean_mode, kl_grid, msd_surface,
                     prior_from_density, residual_sum_surface)
from .training import (TrainConfig, TrainState, init_phase2_state, phase1_train,
                       phase2_loss, phase2_train)
from .inference import (GofReport, PosteriorTable, gof_pvalue, posterior_over_grid,
                        sample_posterior)
from .calibration import CalibrationReport, ecp_curve, mce, spearman
from .ensemble import EnsembleResult, run_ensemble, train_pinn_member

__version__ = "0.1.0"

"""Deep Ensemble baseline: ordinary PINNs with random initializations.

Each member is a single-output network trained on mean squared error plus a
fixed-weight residual penalty, with the equation parameters as free
trainable variables. Uncertainty is read off the spread across members.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .net import (NumericalFailure, adam_init, adam_step, init_mlp,
                  pack_trainables, unpack_trainables, value_and_gradient)
from .net import _forward_core, _jet_core
from .training import resolve_collocation


@dataclass
class EnsembleResult:
    member_omegas: np.ndarray
    member_curves: np.ndarray
    omega_mean: np.ndarray
    omega_std: np.ndarray
    predictive_mean: np.ndarray
    predictive_std: np.ndarray
    seeds: list
    failed_seeds: list
    member_models: list = None


def member_curves_at(result, problem, pts):
    """Re-evaluate the stored member networks on a new point set."""
    if not result.member_models:
        raise ValueError("this result does not carry its member models")
    return np.stack([problem.mean_field(m, pts) for m in result.member_models])


def _member_loss_terms(mlp, data, problem, lambda_res, collocation):
    X, y = data
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_n = (y - problem.state_shift[0]) / problem.state_scale[0]
    x_normed = (X - mlp.in_shift) / mlp.in_scale
    colloc = np.atleast_2d(np.asarray(collocation, dtype=np.float64))
    colloc_normed = (colloc - mlp.in_shift) / mlp.in_scale
    inv_scale = 1.0 / mlp.in_scale
    n_data, n_col = float(len(y)), float(len(colloc))

    def terms(weights, biases, omega):
        pred = _forward_core(weights, biases, x_normed)
        mse = ad.vsum(ad.square(pred[:, 0] - y_n)) / n_data
        v, grads, hess = _jet_core(weights, biases, colloc_normed, inv_scale)
        fields = problem.fields(colloc, v, grads, hess)
        om_parts = [omega[j] for j in range(problem.n_params)]
        res_ms = None
        for res in problem.residual(fields, om_parts):
            part = ad.vsum(ad.square(res)) / n_col
            res_ms = part if res_ms is None else res_ms + part
        return mse + lambda_res * res_ms

    return terms


def train_pinn_member(problem, data, lambda_res, seed, cfg):
    """Train one ordinary PINN member; returns (Mlp, omega estimate).

    Uses cfg.phase1_epochs / cfg.phase1_lr as the member budget. Omega is
    initialized uniformly inside the parameter bounds (per seed) and kept
    clamped to them.
    """
    if not lambda_res >= 0:
        raise ValueError("lambda_res must be nonnegative")
    X = np.atleast_2d(np.asarray(data[0], dtype=np.float64))
    rng = np.random.default_rng(seed)
    lo = np.array([b[0] for b in problem.param_bounds])
    hi = np.array([b[1] for b in problem.param_bounds])
    in_shift = (X.min(axis=0) + X.max(axis=0)) / 2.0
    in_scale = np.maximum((X.max(axis=0) - X.min(axis=0)) / 2.0, 1e-12)
    mlp = init_mlp([problem.input_dim, 16, 16, 1], seed, in_shift=in_shift, in_scale=in_scale)
    omega = rng.uniform(lo, hi)
    colloc = resolve_collocation(cfg.collocation, X)
    terms_fn = _member_loss_terms(mlp, data, problem, lambda_res, colloc)

    def loss_fn(leaves):
        return terms_fn(leaves.weights, leaves.biases, leaves.omega)

    class _State:
        pass

    state = _State()
    state.mlp, state.omega, state.epoch = mlp, omega, 0
    k = problem.n_params
    params = pack_trainables(mlp, None, omega)
    adam = adam_init(len(params), cfg.phase1_lr)
    for epoch in range(cfg.phase1_epochs):
        _, grad = value_and_gradient(state, loss_fn)
        params, adam = adam_step(params, grad, adam)
        params[-k:] = np.clip(params[-k:], lo, hi)
        state.mlp, _, state.omega = unpack_trainables(params, mlp, has_sigma=False, n_omega=k)
        state.epoch = epoch + 1
    return state.mlp, state.omega.copy()


def run_ensemble(problem, data, n_members, cfg, lambda_res=1.0, eval_points=None, seeds=None):
    """Train n_members PINNs with distinct seeds and aggregate their spread.

    Members whose training diverges are excluded with a warning; more than
    10% failures (or all failures) is an error. predictive_mean/std are the
    per-point sample statistics (population convention) of member curves.
    """
    if n_members < 2:
        raise ValueError("an ensemble needs at least 2 members")
    X = np.atleast_2d(np.asarray(data[0], dtype=np.float64))
    if eval_points is None:
        eval_points = X
    eval_points = np.atleast_2d(np.asarray(eval_points, dtype=np.float64))
    if seeds is None:
        seeds = [cfg.seed + i for i in range(n_members)]
    omegas, curves, models, ok_seeds, failed = [], [], [], [], []
    for seed in seeds:
        try:
            mlp, omega = train_pinn_member(problem, data, lambda_res, seed, cfg)
        except NumericalFailure as err:
            warnings.warn(f"ensemble member seed={seed} diverged: {err}", stacklevel=2)
            failed.append(seed)
            continue
        omegas.append(omega)
        curves.append(problem.mean_field(mlp, eval_points))
        models.append(mlp)
        ok_seeds.append(seed)
    if not omegas:
        raise NumericalFailure("all ensemble members failed")
    if len(failed) > 0.1 * len(seeds):
        raise NumericalFailure(f"{len(failed)}/{len(seeds)} ensemble members failed")
    omegas = np.stack(omegas)
    curves = np.stack(curves)
    return EnsembleResult(member_omegas=omegas, member_curves=curves,
                          omega_mean=omegas.mean(axis=0), omega_std=omegas.std(axis=0),
                          predictive_mean=curves.mean(axis=0), predictive_std=curves.std(axis=0),
                          seeds=ok_seeds, failed_seeds=failed, member_models=models)


def gaussian_interval_fn(result, eval_points):
    """Interval callable for ECP: member mean +- z * member std at each level."""
    from scipy.special import ndtri

    eval_key = np.atleast_2d(np.asarray(eval_points, dtype=np.float64))

    def interval(X, level):
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        if X.shape != eval_key.shape or not np.allclose(X, eval_key):
            raise ValueError("ensemble intervals are defined on the stored evaluation points")
        z = ndtri(0.5 + level / 2.0)
        return (result.predictive_mean - z * result.predictive_std,
                result.predictive_mean + z * result.predictive_std)

    return interval

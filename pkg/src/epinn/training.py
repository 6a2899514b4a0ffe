"""Two-phase training.

Phase 1 fits the evidential heads to data alone (full-batch Adam on the
mean marginal negative log-likelihood). Phase 2 minimizes the full negative
log posterior: summed data NLL, the residual sum weighted by the learnable
1/(2 sigma2_R), the inverse-gamma penalty on sigma2_R, and the Gaussian
penalty anchoring the equation parameters to their prior.

sigma2_R is optimized through its logarithm (positive by construction) and
the equation parameters are clamped to their bounds after every step so the
grid-based posterior stays well defined.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from types import SimpleNamespace

import numpy as np

from . import autodiff as ad
from . import evidential
from .net import (AdamState, Mlp, adam_init, adam_step, pack_trainables,
                  unpack_trainables, value_and_gradient)
from .net import _forward_core, _jet_core


@dataclass
class TrainConfig:
    phase1_epochs: int = 50_000
    phase2_epochs: int = 50_000
    phase1_lr: float = 1e-4
    phase2_lr: float = 5e-4
    seed: int = 0
    collocation: object = "training-inputs"
    log_every: int = 1000
    convergence_window: int = 0  # 0 disables the plateau stop
    convergence_tol: float = 1e-6

    def __post_init__(self):
        if self.phase1_epochs < 0 or self.phase2_epochs < 0:
            raise ValueError("epoch counts must be nonnegative")
        if not (self.phase1_lr > 0 and self.phase2_lr > 0):
            raise ValueError("learning rates must be positive")


_HISTORY_CAP = 20_000


@dataclass
class TrainState:
    mlp: Mlp
    log_sigma2_R: float
    omega: np.ndarray
    adam: AdamState
    epoch: int = 0
    loss_history: deque = field(default_factory=lambda: deque(maxlen=_HISTORY_CAP))
    history: list = field(default_factory=list)

    @property
    def sigma2_R(self):
        return float(np.exp(self.log_sigma2_R))


def resolve_collocation(collocation, train_inputs):
    """Collocation points: the training inputs by default, or an explicit list."""
    if isinstance(collocation, str):
        if collocation == "training-inputs":
            return np.atleast_2d(np.asarray(train_inputs, dtype=np.float64))
        raise ValueError(f"unknown collocation spec {collocation!r}")
    return np.atleast_2d(np.asarray(collocation, dtype=np.float64))


def _plateaued(losses, window, tol):
    if window <= 0 or len(losses) < 2 * window:
        return False
    tail = list(losses)[-2 * window:]
    recent = float(np.mean(tail[window:]))
    prev = float(np.mean(tail[:window]))
    return abs(recent - prev) < tol * max(abs(prev), 1e-30)


def data_nll_sum(weights, biases, x_normed, y):
    """Summed evidential NLL of a batch; generic over arrays and tape nodes."""
    raw = _forward_core(weights, biases, x_normed)
    g, nu, alpha, beta = evidential.constrain_raw(raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3])
    return ad.vsum(evidential.nll_terms(g, nu, alpha, beta, y))


def phase1_train(mlp, data, cfg, *, target_shift=0.0, target_scale=1.0,
                 history=None, verbose=False):
    """Fit the evidential network to data alone; returns the trained Mlp.

    `data` is an (inputs, targets) pair in physical units; targets are
    standardized internally with the supplied affine (the same affine the
    problem's state map must carry for phase 2).
    """
    X, y = data
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(y) == 0:
        raise ValueError("training dataset is empty")
    y_n = (y - target_shift) / target_scale
    x_normed = (X - mlp.in_shift) / mlp.in_scale
    n = float(len(y))

    def loss_fn(leaves):
        return data_nll_sum(leaves.weights, leaves.biases, x_normed, y_n) / n

    params = pack_trainables(mlp)
    adam = adam_init(len(params), cfg.phase1_lr)
    holder = SimpleNamespace(mlp=mlp, epoch=0)
    losses = deque(maxlen=_HISTORY_CAP)
    for epoch in range(cfg.phase1_epochs):
        value, grad = value_and_gradient(holder, loss_fn)
        params, adam = adam_step(params, grad, adam)
        holder.mlp = unpack_trainables(params, mlp)[0]
        holder.epoch = epoch + 1
        losses.append(value)
        if history is not None and ((epoch + 1) % cfg.log_every == 0 or epoch == 0):
            tail = list(losses)[-1000:]
            history.append({"epoch": epoch + 1, "data_nll": value,
                            "nll_ma1000": float(np.mean(tail))})
        if verbose and (epoch + 1) % cfg.log_every == 0:
            print(f"[phase1] epoch {epoch + 1}  nll {value:.6f}")
        if _plateaued(losses, cfg.convergence_window, cfg.convergence_tol):
            break
    return holder.mlp


def make_phase2_terms(mlp, data, problem, priors, collocation):
    """Build the generic phase-2 loss-terms function (arrays or tape nodes).

    Constants (normalized inputs, prior hyperparameters) are captured once;
    the returned callable takes (weights, biases, log_sigma2_r, omega).
    """
    prior, rw = priors
    X, y = data
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    y_n = (y - problem.state_shift[0]) / problem.state_scale[0]
    x_normed = (X - mlp.in_shift) / mlp.in_scale
    colloc = np.atleast_2d(np.asarray(collocation, dtype=np.float64))
    colloc_normed = (colloc - mlp.in_shift) / mlp.in_scale
    inv_scale = 1.0 / mlp.in_scale
    mu, s2 = prior.mu, prior.sigma2

    def terms(weights, biases, log_s, omega):
        nll = data_nll_sum(weights, biases, x_normed, y_n)
        v, grads, hess = _jet_core(weights, biases, colloc_normed, inv_scale)
        fields = problem.fields(colloc, v, grads, hess)
        om_parts = [omega[j] for j in range(problem.n_params)]
        s_sum = None
        for res in problem.residual(fields, om_parts):
            part = ad.vsum(ad.square(res))
            s_sum = part if s_sum is None else s_sum + part
        inv_s2 = ad.exp(-log_s)
        residual_term = 0.5 * s_sum * inv_s2
        sigma_penalty = (rw.alpha_r + 1.0) * log_s + rw.beta_r * inv_s2
        omega_penalty = ad.vsum(ad.square(omega - mu) / (2.0 * s2))
        total = nll + residual_term + sigma_penalty + omega_penalty
        return {"total": total, "data_nll": nll, "residual_term": residual_term,
                "sigma2_penalty": sigma_penalty, "omega_penalty": omega_penalty,
                "residual_sq_sum": s_sum}

    return terms


def init_phase2_state(mlp, problem, priors, cfg):
    """Phase-2 starting point: omega at the prior mode, sigma2_R at its mean."""
    prior, rw = priors
    omega0 = prior.mu.copy()
    log_s0 = float(np.log(rw.sigma2_ini))
    params = pack_trainables(mlp, log_s0, omega0)
    return TrainState(mlp=mlp, log_sigma2_R=log_s0, omega=omega0,
                      adam=adam_init(len(params), cfg.phase2_lr))


def phase2_loss(state, data, problem, priors, collocation=None):
    """Full negative-log-posterior value at the current state (plain float)."""
    X = np.atleast_2d(np.asarray(data[0], dtype=np.float64))
    colloc = X if collocation is None else np.atleast_2d(np.asarray(collocation, dtype=np.float64))
    terms = make_phase2_terms(state.mlp, data, problem, priors, colloc)
    out = terms(state.mlp.weights, state.mlp.biases, state.log_sigma2_R, state.omega)
    return float(out["total"])


def phase2_train(state, data, problem, priors, cfg, verbose=False):
    """Adam over (weights, log sigma2_R, omega); mutates and returns `state`."""
    X = np.atleast_2d(np.asarray(data[0], dtype=np.float64))
    colloc = resolve_collocation(cfg.collocation, X)
    terms_fn = make_phase2_terms(state.mlp, data, problem, priors, colloc)

    def loss_fn(leaves):
        return terms_fn(leaves.weights, leaves.biases, leaves.log_sigma2_r, leaves.omega)["total"]

    k = problem.n_params
    lo = np.array([b[0] for b in problem.param_bounds])
    hi = np.array([b[1] for b in problem.param_bounds])
    params = pack_trainables(state.mlp, state.log_sigma2_R, state.omega)

    def record(epoch):
        out = terms_fn(state.mlp.weights, state.mlp.biases, state.log_sigma2_R, state.omega)
        row = {"epoch": epoch, "total": float(out["total"]),
               "data_nll": float(out["data_nll"]),
               "residual_term": float(out["residual_term"]),
               "sigma2_R": state.sigma2_R}
        for name, val in zip(problem.param_names, state.omega):
            row[name] = float(val)
        state.history.append(row)
        if verbose:
            print(f"[phase2] epoch {epoch}  loss {row['total']:.6f}  "
                  f"sigma2_R {row['sigma2_R']:.4e}  omega {np.round(state.omega, 5)}")

    for epoch in range(cfg.phase2_epochs):
        value, grad = value_and_gradient(state, loss_fn)
        params, state.adam = adam_step(params, grad, state.adam)
        params[-k:] = np.clip(params[-k:], lo, hi)
        state.mlp, state.log_sigma2_R, state.omega = unpack_trainables(
            params, state.mlp, has_sigma=True, n_omega=k)
        state.epoch += 1
        state.loss_history.append(value)
        if (epoch + 1) % cfg.log_every == 0 or epoch == 0:
            record(state.epoch)
        if _plateaued(state.loss_history, cfg.convergence_window, cfg.convergence_tol):
            break
    return state

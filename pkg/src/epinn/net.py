"""Feed-forward network with exact derivatives.

Two derivative paths, one implementation:

* derivatives of outputs with respect to inputs (value / gradient / diagonal
  Hessian "jets"), propagated layer by layer — needed to evaluate PDE
  residual terms;
* derivatives of scalar losses with respect to every trainable parameter,
  obtained by running the very same forward/jet code on tape nodes
  (:mod:`epinn.autodiff`).

All arithmetic is float64. Hidden layers use tanh (twice continuously
differentiable, which the second-order jets require); the output layer is
linear. An optional input affine (``in_shift``/``in_scale``) rescales raw
coordinates before the first layer; the jets apply the exact chain rule for
it, so reported derivatives are always with respect to the physical inputs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import autodiff as ad


class NumericalFailure(RuntimeError):
    """A loss or solver evaluation produced a non-finite value."""


_ACTIVATIONS = ("tanh",)


@dataclass
class Mlp:
    """Fully connected network: sizes, per-layer weights/biases, input affine."""

    layer_sizes: list
    weights: list
    biases: list
    activation: str = "tanh"
    in_shift: np.ndarray = None
    in_scale: np.ndarray = None

    def __post_init__(self):
        sizes = list(self.layer_sizes)
        if len(sizes) < 2 or any(int(s) <= 0 for s in sizes):
            raise ValueError(f"layer_sizes must have >=2 positive entries, got {sizes}")
        if self.activation not in _ACTIVATIONS:
            raise ValueError(f"unsupported activation {self.activation!r} (need a C^2 one of {_ACTIVATIONS})")
        if len(self.weights) != len(sizes) - 1 or len(self.biases) != len(sizes) - 1:
            raise ValueError("weights/biases must hold one entry per layer")
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.shape != (sizes[l], sizes[l + 1]) or b.shape != (sizes[l + 1],):
                raise ValueError(f"layer {l}: shapes {w.shape}/{b.shape} inconsistent with sizes {sizes}")
        d = sizes[0]
        if self.in_shift is None:
            self.in_shift = np.zeros(d)
        if self.in_scale is None:
            self.in_scale = np.ones(d)
        self.in_shift = np.asarray(self.in_shift, dtype=np.float64)
        self.in_scale = np.asarray(self.in_scale, dtype=np.float64)
        if self.in_shift.shape != (d,) or self.in_scale.shape != (d,):
            raise ValueError("input affine must have one entry per input coordinate")

    @property
    def input_dim(self):
        return self.layer_sizes[0]

    @property
    def output_dim(self):
        return self.layer_sizes[-1]


@dataclass(frozen=True)
class InputJet:
    """Value plus exact first and second (diagonal) input derivatives."""

    value: float
    grad: np.ndarray
    hess_diag: np.ndarray


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def init_mlp(layer_sizes, seed, *, in_shift=None, in_scale=None):
    """Fan-in-scaled uniform initialization, deterministic per seed."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s <= 0 for s in sizes):
        raise ValueError(f"layer_sizes must have >=2 positive entries, got {layer_sizes}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for n_in, n_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(n_in)
        weights.append(rng.uniform(-bound, bound, size=(n_in, n_out)))
        biases.append(rng.uniform(-bound, bound, size=n_out))
    return Mlp(sizes, weights, biases, in_shift=in_shift, in_scale=in_scale)


# ---------------------------------------------------------------------------
# forward / jet cores, generic over plain arrays and tape nodes
# ---------------------------------------------------------------------------

def _forward_core(weights, biases, Xn):
    a = ad.matmul(Xn, weights[0]) + biases[0]
    for W, b in zip(weights[1:], biases[1:]):
        a = ad.matmul(ad.tanh(a), W) + b
    return a


def _jet_core(weights, biases, Xn, inv_scale):
    """Propagate (value, d/dx_i, d^2/dx_i^2) through the layers.

    `Xn` is the already-rescaled (N, d) input; `inv_scale` carries 1/in_scale
    so the returned derivatives are with respect to the physical coordinates.
    Returns (value (N, out), grads list over i of (.., out), hessians ditto);
    an entry of None in the hessian list means identically zero.
    """
    d = Xn.shape[1]
    z = ad.matmul(Xn, weights[0]) + biases[0]
    grads = [weights[0][i] * inv_scale[i] for i in range(d)]
    hess = [None] * d
    for W, b in zip(weights[1:], biases[1:]):
        s = ad.tanh(z)
        sp = 1.0 - ad.square(s)
        spp = -2.0 * s * sp
        new_grads, new_hess = [], []
        for g, h in zip(grads, hess):
            curv = spp * ad.square(g) if h is None else spp * ad.square(g) + sp * h
            new_grads.append(ad.matmul(sp * g, W))
            new_hess.append(ad.matmul(curv, W))
        grads, hess = new_grads, new_hess
        z = ad.matmul(s, W) + b
    return z, grads, hess


def _normalize_input(mlp, X):
    return (X - mlp.in_shift) / mlp.in_scale


def forward(mlp, x):
    """Evaluate the network; accepts a single (d,) point or an (N, d) batch."""
    x = np.asarray(x, dtype=np.float64)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != mlp.input_dim:
        raise ValueError(f"input dimension {X.shape[1]} != network input dim {mlp.input_dim}")
    out = _forward_core(mlp.weights, mlp.biases, _normalize_input(mlp, X))
    return out[0] if single else out


def forward_jets(mlp, X):
    """Batched jets: values (N, out) and per-coordinate grad/hess (d, N, out)."""
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != mlp.input_dim:
        raise ValueError(f"expected (N, {mlp.input_dim}) inputs, got shape {X.shape}")
    n, out_dim = X.shape[0], mlp.output_dim
    v, grads, hess = _jet_core(mlp.weights, mlp.biases, _normalize_input(mlp, X),
                               1.0 / mlp.in_scale)
    G = np.empty((X.shape[1], n, out_dim))
    H = np.empty_like(G)
    for i, (g, h) in enumerate(zip(grads, hess)):
        G[i] = np.broadcast_to(g, (n, out_dim))
        H[i] = 0.0 if h is None else np.broadcast_to(h, (n, out_dim))
    return v, G, H


def input_jet(mlp, x, output_index=0):
    """Exact value/gradient/diagonal-Hessian of one output at one point."""
    if not 0 <= output_index < mlp.output_dim:
        raise ValueError(f"output_index {output_index} out of range for {mlp.output_dim} outputs")
    v, G, H = forward_jets(mlp, np.asarray(x, dtype=np.float64)[None, :])
    return InputJet(value=float(v[0, output_index]),
                    grad=G[:, 0, output_index].copy(),
                    hess_diag=H[:, 0, output_index].copy())


# ---------------------------------------------------------------------------
# trainable-parameter vector and loss gradients
# ---------------------------------------------------------------------------

@dataclass
class LeafParams:
    """Tape leaves handed to a loss functional by value_and_gradient."""

    weights: list
    biases: list
    log_sigma2_r: object = None
    omega: object = None


def pack_trainables(mlp, log_sigma2_r=None, omega=None):
    """Concatenate all trainable parameters into one float64 vector."""
    parts = []
    for w, b in zip(mlp.weights, mlp.biases):
        parts.append(w.ravel())
        parts.append(b)
    if log_sigma2_r is not None:
        parts.append(np.array([log_sigma2_r]))
    if omega is not None:
        parts.append(np.asarray(omega, dtype=np.float64))
    return np.concatenate(parts)


def unpack_trainables(vec, mlp, has_sigma=False, n_omega=0):
    """Inverse of pack_trainables; returns (Mlp, log_sigma2_r, omega)."""
    weights, biases, pos = [], [], 0
    for w, b in zip(mlp.weights, mlp.biases):
        weights.append(vec[pos:pos + w.size].reshape(w.shape).copy())
        pos += w.size
        biases.append(vec[pos:pos + b.size].copy())
        pos += b.size
    new = replace(mlp, weights=weights, biases=biases)
    log_s = None
    if has_sigma:
        log_s = float(vec[pos])
        pos += 1
    omega = vec[pos:pos + n_omega].copy() if n_omega else None
    return new, log_s, omega


def value_and_gradient(state, loss):
    """Evaluate `loss` on tape leaves built from `state` and return (value, grad).

    `state` must expose `.mlp` and may expose `.log_sigma2_R` / `.omega`;
    the gradient is laid out in pack_trainables order.
    """
    mlp = state.mlp
    leaves = LeafParams(weights=[ad.Var(w) for w in mlp.weights],
                        biases=[ad.Var(b) for b in mlp.biases])
    log_s = getattr(state, "log_sigma2_R", None)
    omega = getattr(state, "omega", None)
    if log_s is not None:
        leaves.log_sigma2_r = ad.Var(float(log_s))
    if omega is not None:
        leaves.omega = ad.Var(np.asarray(omega, dtype=np.float64))
    out = loss(leaves)
    value = float(out.data)
    if not np.isfinite(value):
        norms = [float(np.linalg.norm(w)) for w in mlp.weights]
        raise NumericalFailure(
            f"non-finite loss {value} at epoch {getattr(state, 'epoch', '?')}; "
            f"weight norms {norms}, log_sigma2_R={log_s}, omega={omega}")
    out.backward()
    parts = []
    for w, b in zip(leaves.weights, leaves.biases):
        parts.append((w.grad if w.grad is not None else np.zeros_like(w.data)).ravel())
        parts.append(b.grad if b.grad is not None else np.zeros_like(b.data))
    if leaves.log_sigma2_r is not None:
        g = leaves.log_sigma2_r.grad
        parts.append(np.atleast_1d(0.0 if g is None else g).astype(np.float64).ravel())
    if leaves.omega is not None:
        g = leaves.omega.grad
        parts.append(np.zeros_like(leaves.omega.data) if g is None else np.asarray(g))
    return value, np.concatenate(parts)


def loss_gradient(state, loss):
    """Gradient of a scalar loss functional over the trainable-parameter vector."""
    return value_and_gradient(state, loss)[1]


# ---------------------------------------------------------------------------
# Adam
# ---------------------------------------------------------------------------

def adam_init(n_params, lr, beta1=0.9, beta2=0.999, eps=1e-8):
    return AdamState(m=np.zeros(n_params), v=np.zeros(n_params), step=0,
                     lr=lr, beta1=beta1, beta2=beta2, eps=eps)


def adam_step(params, grads, st):
    """One bias-corrected Adam update; returns (new params, new state)."""
    params = np.asarray(params, dtype=np.float64)
    grads = np.asarray(grads, dtype=np.float64)
    if params.shape != grads.shape:
        raise ValueError(f"params/grads length mismatch: {params.shape} vs {grads.shape}")
    t = st.step + 1
    m = st.beta1 * st.m + (1.0 - st.beta1) * grads
    v = st.beta2 * st.v + (1.0 - st.beta2) * grads * grads
    m_hat = m / (1.0 - st.beta1 ** t)
    v_hat = v / (1.0 - st.beta2 ** t)
    new_params = params - st.lr * m_hat / (np.sqrt(v_hat) + st.eps)
    return new_params, replace(st, m=m, v=v, step=t)

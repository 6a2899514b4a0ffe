"""Problem definitions: residuals, parameter domains, and per-parameter solvers.

Three concrete inverse problems are provided:

* ``poisson1d`` — u'' + exp(-(x-x0)^2 / (2 sf2)) = 0 on [0,1], u(0)=u(1)=0;
  unknowns (x0, sf2). Solved by a second-order finite-difference scheme and
  a tridiagonal elimination.
* ``fisher-kpp`` — u_t = D u_xx + r u (1 - u) on (x, t); unknowns (r, D).
  The solution family is the exact traveling wave, so the solver is closed
  form for every (r, D).
* ``bergman`` — the glucose/remote-insulin minimal model; unknowns
  (p1, p2, p3), with insulin an externally known interpolated input.
  Solved by classical fixed-step RK4.

Residual formulas are written with the generic arithmetic helpers so the
same code serves three callers: scalar checks, vectorized sweeps over a
parameter grid (components arrive as (M,1) arrays and broadcast against
per-point fields), and tape-node training.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_banded

from . import autodiff as ad
from .net import forward, forward_jets


def _col(a, c):
    """Column c of a (N, out) array, or entry c of an (out,) row."""
    return a[:, c] if getattr(a, "ndim", 0) == 2 else a[c]


@dataclass
class Fields:
    """Per-collocation-point physical state handed to residual functions.

    u / du / d2u are lists over the problem's state variables; du and d2u
    are further indexed by input coordinate. Entries may be plain arrays or
    tape nodes.
    """

    x: np.ndarray
    u: list
    du: list
    d2u: list
    aux: dict


@dataclass
class PdeProblem:
    name: str
    input_dim: int
    n_params: int
    param_names: list
    param_bounds: list
    residual: object
    solver: object
    exact: object = None
    solver_batch: object = None
    state_channels: tuple = (0,)
    state_shift: np.ndarray = None
    state_scale: np.ndarray = None
    aux_builder: object = None

    def __post_init__(self):
        n_state = len(self.state_channels)
        if self.state_shift is None:
            self.state_shift = np.zeros(n_state)
        if self.state_scale is None:
            self.state_scale = np.ones(n_state)
        self.state_shift = np.asarray(self.state_shift, dtype=np.float64)
        self.state_scale = np.asarray(self.state_scale, dtype=np.float64)
        if len(self.param_bounds) != self.n_params or len(self.param_names) != self.n_params:
            raise ValueError("param_names/param_bounds must match n_params")
        for lo, hi in self.param_bounds:
            if not lo < hi:
                raise ValueError(f"empty parameter interval ({lo}, {hi})")

    def fields(self, X, v, grads, hess):
        """Assemble physical Fields from network jets (any value type)."""
        X = np.asarray(X, dtype=np.float64)
        u, du, d2u = [], [], []
        for k, c in enumerate(self.state_channels):
            sc, sh = self.state_scale[k], self.state_shift[k]
            u.append(sh + sc * _col(v, c))
            du.append([sc * _col(g, c) for g in grads])
            d2u.append([0.0 if h is None else sc * _col(h, c) for h in hess])
        aux = self.aux_builder(X) if self.aux_builder is not None else {}
        return Fields(x=X, u=u, du=du, d2u=d2u, aux=aux)

    def fields_from_mlp(self, mlp, X):
        """Plain-numpy Fields for a trained network at points X."""
        v, G, H = forward_jets(mlp, X)
        return self.fields(X, v, list(G), list(H))

    def mean_field(self, mlp, X):
        """Physical value of the primary state (the mean head) at points X."""
        out = np.atleast_2d(forward(mlp, np.asarray(X, dtype=np.float64)))
        return self.state_shift[0] + self.state_scale[0] * out[:, self.state_channels[0]]


# ---------------------------------------------------------------------------
# 1D Poisson with a Gaussian source
# ---------------------------------------------------------------------------

def _gaussian_source(x, x0, sf2):
    return ad.exp(-ad.square(x - x0) / (2.0 * sf2))


def residual_poisson(jet, x, omega):
    """u''(x) + exp(-(x-x0)^2/(2 sf2)) for a single jet at a single point."""
    x0, sf2 = omega
    if not sf2 > 0:
        raise ValueError(f"sigma_f^2 must be positive, got {sf2}")
    return float(jet.hess_diag[0] + _gaussian_source(float(x), x0, sf2))


def poisson_nodes(n_nodes):
    return np.linspace(0.0, 1.0, n_nodes)


def solve_poisson(omega, n_nodes):
    """Second-order finite differences on [0,1] with u(0)=u(1)=0.

    Returns the nodal values on the uniform grid, boundaries included.
    """
    x0, sf2 = omega
    if not sf2 > 0:
        raise ValueError(f"sigma_f^2 must be positive, got {sf2}")
    if n_nodes < 3:
        raise ValueError(f"need at least 3 nodes, got {n_nodes}")
    return _solve_poisson_many(np.atleast_2d([x0, sf2]), n_nodes)[0]


def _solve_poisson_many(omegas, n_nodes):
    """Solve for every row of omegas at once: one factorization, many RHS."""
    x = poisson_nodes(n_nodes)
    h = x[1] - x[0]
    xi = x[1:-1]
    # -u'' = g with the standard [-1, 2, -1]/h^2 stencil
    src = np.exp(-(xi[None, :] - omegas[:, 0:1]) ** 2 / (2.0 * omegas[:, 1:2]))
    m = n_nodes - 2
    ab = np.zeros((3, m))
    ab[0, 1:] = -1.0 / h ** 2
    ab[1, :] = 2.0 / h ** 2
    ab[2, :-1] = -1.0 / h ** 2
    interior = solve_banded((1, 1), ab, src.T)
    out = np.zeros((omegas.shape[0], n_nodes))
    out[:, 1:-1] = interior.T
    return out


def solve_poisson_at(omega, pts, n_nodes=401):
    """Finite-difference solution interpolated to arbitrary points in [0,1]."""
    nodal = solve_poisson(omega, n_nodes)
    return np.interp(np.asarray(pts, dtype=np.float64).reshape(-1), poisson_nodes(n_nodes), nodal)


def poisson_exact(x, omega):
    """Closed-form solution (double integral of the Gaussian via erf)."""
    from scipy.special import erf

    x0, sf2 = omega
    s = np.sqrt(sf2)
    c = np.sqrt(np.pi / 2.0) * s

    def first_integral_antideriv(t):
        # antiderivative of Gint(t) = c*(erf((t-x0)/(s*sqrt(2))) - erf(-x0/(s*sqrt(2))))
        a = (t - x0) / (s * np.sqrt(2.0))
        return c * ((t - x0) * erf(a) + s * np.sqrt(2.0 / np.pi) * np.exp(-a * a)
                    - t * erf(-x0 / (s * np.sqrt(2.0))))

    x = np.asarray(x, dtype=np.float64)
    dbl = first_integral_antideriv(x) - first_integral_antideriv(0.0)
    dbl1 = first_integral_antideriv(1.0) - first_integral_antideriv(0.0)
    return dbl1 * x - dbl


def poisson_problem(x0_bounds=(0.0, 1.0), sf2_bounds=(0.01, 0.06), true_omega=(1.0 / 3.0, 0.02),
                    n_nodes=401, state_shift=None, state_scale=None):
    def residual(fields, om):
        x0, sf2 = om
        return [fields.d2u[0][0] + _gaussian_source(fields.x[:, 0], x0, sf2)]

    def solver(omega, pts):
        return solve_poisson_at(omega, pts, n_nodes=n_nodes)

    def solver_batch(omegas, pts):
        nodal = _solve_poisson_many(np.asarray(omegas, dtype=np.float64), n_nodes)
        xg = poisson_nodes(n_nodes)
        q = np.asarray(pts, dtype=np.float64).reshape(-1)
        return np.stack([np.interp(q, xg, row) for row in nodal])

    exact = (lambda pts: poisson_exact(np.asarray(pts).reshape(-1), true_omega)) if true_omega else None
    return PdeProblem(name="poisson1d", input_dim=1, n_params=2,
                      param_names=["x0", "sigma_f2"],
                      param_bounds=[tuple(x0_bounds), tuple(sf2_bounds)],
                      residual=residual, solver=solver, solver_batch=solver_batch,
                      exact=exact, state_channels=(0,),
                      state_shift=state_shift, state_scale=state_scale)


# ---------------------------------------------------------------------------
# Fisher-KPP traveling wave
# ---------------------------------------------------------------------------

def fisher_travelling_wave(x, t, r, D):
    """Exact wave: [1 + exp(sqrt(r/6D) (x - 5 sqrt(rD) t / sqrt(6)))]^-2."""
    if not (r > 0 and D > 0):
        raise ValueError(f"r and D must be positive, got r={r}, D={D}")
    z = np.sqrt(r / (6.0 * D)) * (np.asarray(x, dtype=np.float64)
                                  - 5.0 * np.sqrt(r * D) / np.sqrt(6.0) * np.asarray(t, dtype=np.float64))
    return (1.0 + np.exp(z)) ** -2


def residual_fisher(jet_t, jet_xx, u, omega):
    """u_t - D u_xx - r u (1 - u); carrying capacity fixed at 1."""
    r, D = omega
    if not (r > 0 and D > 0):
        raise ValueError(f"r and D must be positive, got r={r}, D={D}")
    return jet_t - D * jet_xx - r * u * (1.0 - u)


def solve_fisher(omega, pts):
    """Evaluate the closed-form wave; exact for every (r, D)."""
    pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
    return fisher_travelling_wave(pts[:, 0], pts[:, 1], omega[0], omega[1])


def fisher_problem(r_bounds=(0.5, 3.0), D_bounds=(2.0, 12.0), true_omega=(1.6, 6.2),
                   state_shift=None, state_scale=None):
    def residual(fields, om):
        r, D = om
        u = fields.u[0]
        return [fields.du[0][1] - D * fields.d2u[0][0] - r * u * (1.0 - u)]

    def solver_batch(omegas, pts):
        pts = np.atleast_2d(np.asarray(pts, dtype=np.float64))
        omegas = np.asarray(omegas, dtype=np.float64)
        r, D = omegas[:, 0:1], omegas[:, 1:2]
        x, t = pts[:, 0], pts[:, 1]
        z = np.sqrt(r / (6.0 * D)) * (x[None, :] - 5.0 * np.sqrt(r * D) / np.sqrt(6.0) * t[None, :])
        return (1.0 + np.exp(z)) ** -2

    exact = (lambda pts: solve_fisher(true_omega, pts)) if true_omega else None
    return PdeProblem(name="fisher-kpp", input_dim=2, n_params=2,
                      param_names=["r", "D"],
                      param_bounds=[tuple(r_bounds), tuple(D_bounds)],
                      residual=residual, solver=solve_fisher, solver_batch=solver_batch,
                      exact=exact, state_channels=(0,),
                      state_shift=state_shift, state_scale=state_scale)


# ---------------------------------------------------------------------------
# Bergman minimal model
# ---------------------------------------------------------------------------

@dataclass
class BergmanInputs:
    """One IVGTT series: sampling times plus glucose/insulin measurements."""

    times: np.ndarray
    glucose: np.ndarray
    insulin: np.ndarray
    G_b: float
    I_b: float

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64)
        self.glucose = np.asarray(self.glucose, dtype=np.float64)
        self.insulin = np.asarray(self.insulin, dtype=np.float64)
        n = len(self.times)
        if n < 4 or len(self.glucose) != n or len(self.insulin) != n:
            raise ValueError("need >= 4 samples with equal-length time/glucose/insulin")
        if not np.all(np.diff(self.times) > 0):
            raise ValueError("times must be strictly increasing")
        if not (np.all(self.glucose > 0) and np.all(self.insulin > 0)):
            raise ValueError("concentrations must be positive")


def estimate_basals(glucose, insulin):
    """Basal levels as the mean of the final two samples of each series."""
    return float(np.mean(glucose[-2:])), float(np.mean(insulin[-2:]))


def residual_bergman(dG_dt, dX_dt, G, X, I_t, omega, basals):
    """Residual pair of the minimal model at one state/derivative sample."""
    p1, p2, p3 = omega
    if not (p1 > 0 and p2 > 0 and p3 > 0):
        raise ValueError(f"p1, p2, p3 must be positive, got {omega}")
    G_b, I_b = basals
    return (dG_dt + p1 * (G - G_b) + X * G,
            dX_dt + p2 * X - p3 * (I_t - I_b))


def bergman_index(omega):
    """Glucose effectiveness S_G = p1 and insulin sensitivity S_I = p3/p2."""
    p1, p2, p3 = omega
    if p2 == 0:
        raise ValueError("p2 must be nonzero for the sensitivity index")
    return float(p1), float(p3 / p2)


def _bergman_rhs(G, X, t, p1, p2, p3, inputs):
    I_t = np.interp(t, inputs.times, inputs.insulin)
    dG = -p1 * (G - inputs.G_b) - X * G
    dX = -p2 * X + p3 * (I_t - inputs.I_b)
    return dG, dX


def _bergman_march(p1, p2, p3, inputs, t_eval, max_step):
    """RK4 march hitting every t_eval point exactly; broadcasts over params."""
    t_eval = np.asarray(t_eval, dtype=np.float64)
    t0, t_end = inputs.times[0], inputs.times[-1]
    if t_eval.size and (t_eval.min() < t0 - 1e-12 or t_eval.max() > t_end + 1e-12):
        raise ValueError(f"t_eval must lie within [{t0}, {t_end}]")
    order = np.argsort(t_eval, kind="stable")
    targets = t_eval[order]
    shape = np.broadcast(np.asarray(p1), np.asarray(p2), np.asarray(p3)).shape
    G = np.full(shape, inputs.glucose[0], dtype=np.float64)
    X = np.zeros(shape)
    t = t0
    G_out = np.empty((len(targets),) + shape)
    X_out = np.empty_like(G_out)
    for j, tj in enumerate(targets):
        span = tj - t
        if span > 1e-14:
            n_sub = max(1, int(np.ceil(span / max_step - 1e-12)))
            h = span / n_sub
            for _ in range(n_sub):
                k1G, k1X = _bergman_rhs(G, X, t, p1, p2, p3, inputs)
                k2G, k2X = _bergman_rhs(G + 0.5 * h * k1G, X + 0.5 * h * k1X, t + 0.5 * h, p1, p2, p3, inputs)
                k3G, k3X = _bergman_rhs(G + 0.5 * h * k2G, X + 0.5 * h * k2X, t + 0.5 * h, p1, p2, p3, inputs)
                k4G, k4X = _bergman_rhs(G + h * k3G, X + h * k3X, t + h, p1, p2, p3, inputs)
                G = G + h / 6.0 * (k1G + 2.0 * k2G + 2.0 * k3G + k4G)
                X = X + h / 6.0 * (k1X + 2.0 * k2X + 2.0 * k3X + k4X)
                t = t + h
            t = tj
        G_out[j], X_out[j] = G, X
    inv = np.empty_like(order)
    inv[order] = np.arange(len(order))
    return G_out[inv], X_out[inv]


def solve_bergman(omega, inputs, t_eval, max_step=0.5):
    """Classical RK4 trajectory (G, X) from G(t0)=first sample, X(t0)=0.

    p3 = 0 is allowed here (X stays identically zero and glucose decays
    toward its basal level); the residual contract still demands p3 > 0.
    """
    p1, p2, p3 = omega
    if not (p1 > 0 and p2 > 0 and p3 >= 0):
        raise ValueError(f"p1, p2 must be positive and p3 nonnegative, got {omega}")
    G, X = _bergman_march(float(p1), float(p2), float(p3), inputs, t_eval, max_step)
    return G, X


def bergman_problem(inputs, bounds=None, state_shift=None, state_scale=None, max_step=0.5):
    """Inverse problem over (p1, p2, p3) for one measured IVGTT series.

    The network is expected to expose five outputs: four evidential heads
    for glucose (channel 0 is its mean) and one extra channel for the
    unobserved remote-insulin action X (channel 4).
    """
    if bounds is None:
        bounds = [(0.005, 0.1), (0.005, 0.2), (1e-7, 1e-4)]

    def aux_builder(X_pts):
        return {"insulin": np.interp(X_pts[:, 0], inputs.times, inputs.insulin)}

    def residual(fields, om):
        p1, p2, p3 = om
        G, Xs = fields.u[0], fields.u[1]
        I_t = fields.aux["insulin"]
        return [fields.du[0][0] + p1 * (G - inputs.G_b) + Xs * G,
                fields.du[1][0] + p2 * Xs - p3 * (I_t - inputs.I_b)]

    def solver(omega, pts):
        t = np.asarray(pts, dtype=np.float64).reshape(-1)
        return solve_bergman(omega, inputs, t, max_step=max_step)[0]

    def solver_batch(omegas, pts):
        omegas = np.asarray(omegas, dtype=np.float64)
        t = np.asarray(pts, dtype=np.float64).reshape(-1)
        G, _ = _bergman_march(omegas[:, 0], omegas[:, 1], omegas[:, 2], inputs, t, max_step)
        return G.T

    return PdeProblem(name="bergman", input_dim=1, n_params=3,
                      param_names=["p1", "p2", "p3"],
                      param_bounds=[tuple(b) for b in bounds],
                      residual=residual, solver=solver, solver_batch=solver_batch,
                      exact=None, state_channels=(0, 4),
                      state_shift=state_shift, state_scale=state_scale,
                      aux_builder=aux_builder)


_FACTORIES = {"poisson1d": poisson_problem, "fisher-kpp": fisher_problem, "bergman": bergman_problem}


def get_problem(name, **kwargs):
    """Problem lookup by the name strings used in experiment configs."""
    try:
        factory = _FACTORIES[name]
    except KeyError:
        raise ValueError(f"unknown problem {name!r}; choose from {sorted(_FACTORIES)}") from None
    return factory(**kwargs)

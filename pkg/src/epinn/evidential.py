"""Evidential regression head: constrained outputs, marginal likelihood,
predictive uncertainty and intervals.

The four network outputs parameterize a normal-inverse-gamma prior whose
marginal over the target is a Student-t with ``2*alpha`` degrees of freedom,
location ``gamma`` and scale ``sqrt(beta*(1+nu)/(nu*alpha))``. Everything
here is written against the dispatch helpers in :mod:`epinn.autodiff`, so
the same negative log-likelihood runs on plain arrays (evaluation) and on
tape nodes (training).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special as _special

from . import autodiff as ad


@dataclass(frozen=True)
class EvidentialOutput:
    """Constrained head values for a single prediction."""

    gamma: float
    nu: float
    alpha: float
    beta: float

    def __post_init__(self):
        if not (self.nu > 0 and self.alpha > 1 and self.beta > 0):
            raise ValueError(
                f"invalid evidential output: nu={self.nu}, alpha={self.alpha}, beta={self.beta}")


def constrain_raw(raw0, raw1, raw2, raw3):
    """Positivity map for raw head channels; generic over arrays and tape nodes.

    The 1e-15 added to alpha keeps `alpha > 1` strict even where
    1 + softplus(raw2) would round to 1.0 in float64; it is far below the
    resolution of any realized alpha value.
    """
    return (raw0, ad.softplus(raw1),
            (1.0 + 1e-15) + ad.softplus(raw2), ad.softplus(raw3))


def constrain_heads(raw):
    """Map a raw 4-vector of network outputs to a valid EvidentialOutput."""
    raw = np.asarray(raw, dtype=np.float64)
    if raw.shape != (4,):
        raise ValueError(f"expected a raw 4-vector, got shape {raw.shape}")
    g, nu, alpha, beta = constrain_raw(*raw)
    return EvidentialOutput(float(g), float(nu), float(alpha), float(beta))


def nll_terms(gamma, nu, alpha, beta, y):
    """Elementwise negative log of the marginal t-density at observations y."""
    two_b_lam = 2.0 * beta * (1.0 + nu)
    return (ad.lgamma(alpha) - ad.lgamma(alpha + 0.5)
            + 0.5 * ad.log(math.pi * two_b_lam / nu)
            + (alpha + 0.5) * ad.log(1.0 + nu * ad.square(y - gamma) / two_b_lam))


def nll(out, y):
    """Negative log-likelihood of one observation under the marginal density."""
    return float(nll_terms(out.gamma, out.nu, out.alpha, out.beta, float(y)))


def predictive_variance(out):
    """Total predictive variance beta/(alpha-1) * (1 + 1/nu)."""
    if not out.alpha > 1:
        raise ValueError(f"predictive variance needs alpha > 1, got {out.alpha}")
    return out.beta / (out.alpha - 1.0) * (1.0 + 1.0 / out.nu)


def _t_scale(nu, alpha, beta):
    return np.sqrt(beta * (1.0 + nu) / (nu * alpha))


def interval_bounds(gamma, nu, alpha, beta, level, method="student-t"):
    """Central predictive interval, vectorized over head arrays.

    "student-t" uses the exact quantiles of the marginal density (degrees of
    freedom 2*alpha); "gaussian" uses gamma +- z * sigma_p as a cruder
    alternative.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"interval level must lie in (0, 1), got {level}")
    p = 0.5 + level / 2.0
    if method == "student-t":
        half = _special.stdtrit(2.0 * np.asarray(alpha), p) * _t_scale(nu, alpha, beta)
    elif method == "gaussian":
        sigma_p = np.sqrt(beta / (alpha - 1.0) * (1.0 + 1.0 / nu))
        half = _special.ndtri(p) * sigma_p
    else:
        raise ValueError(f"unknown interval method {method!r}")
    return gamma - half, gamma + half


def predictive_interval(out, level, method="student-t"):
    """Central interval of the marginal density for one prediction."""
    lo, hi = interval_bounds(out.gamma, out.nu, out.alpha, out.beta, level, method)
    return float(lo), float(hi)


def predict_heads(mlp, X):
    """Constrained head arrays (gamma, nu, alpha, beta) for a batch of inputs."""
    from . import net

    raw = net.forward(mlp, np.asarray(X, dtype=np.float64))
    raw = np.atleast_2d(raw)
    return constrain_raw(raw[:, 0], raw[:, 1], raw[:, 2], raw[:, 3])


def sample_marginal(out, n, seed):
    """Draw n samples from the marginal t-density (testing / Monte Carlo)."""
    rng = np.random.default_rng(seed)
    df = 2.0 * out.alpha
    return out.gamma + _t_scale(out.nu, out.alpha, out.beta) * rng.standard_t(df, size=n)

"""Calibration and uncertainty-noise correlation metrics.

Empirical coverage probability (ECP) counts how often observed targets fall
inside the predicted central intervals at each nominal level (NCP); the
mean calibration error is the average absolute gap between the two curves.
Spearman rank correlation relates predictive spread to known injected noise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special as _special
from scipy.stats import rankdata

from . import evidential

DEFAULT_LEVELS = np.linspace(0.05, 0.95, 19)


@dataclass
class CalibrationReport:
    levels: np.ndarray
    ecp: np.ndarray
    mce: float

    def as_dict(self):
        return {"levels": [float(v) for v in self.levels],
                "ecp": [float(v) for v in self.ecp],
                "mce": float(self.mce)}


def evidential_interval_fn(mlp, target_shift=0.0, target_scale=1.0, method="student-t"):
    """Interval callable (X, level) -> (lo, hi) in physical target units."""

    def interval(X, level):
        g, nu, alpha, beta = evidential.predict_heads(mlp, X)
        lo, hi = evidential.interval_bounds(g, nu, alpha, beta, level, method)
        return target_shift + target_scale * lo, target_shift + target_scale * hi

    return interval


def ecp_curve(model, test_data, levels=None):
    """Empirical vs nominal coverage over a test set.

    `model` is either a callable ``(X, level) -> (lo, hi)`` or an evidential
    Mlp (then exact marginal t intervals in the network's own target space).
    """
    X, y = test_data
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    y = np.asarray(y, dtype=np.float64).reshape(-1)
    if len(y) == 0:
        raise ValueError("test data is empty")
    levels = DEFAULT_LEVELS if levels is None else np.asarray(levels, dtype=np.float64)
    if np.any(levels <= 0) or np.any(levels >= 1) or np.any(np.diff(levels) <= 0):
        raise ValueError("levels must be strictly increasing within (0, 1)")
    interval = model if callable(model) else evidential_interval_fn(model)
    ecp = np.empty(len(levels))
    for i, q in enumerate(levels):
        lo, hi = interval(X, float(q))
        ecp[i] = float(np.mean((y >= lo) & (y <= hi)))
    return CalibrationReport(levels=levels, ecp=ecp, mce=float(np.mean(np.abs(ecp - levels))))


def mce(report):
    """Mean absolute ECP-NCP gap."""
    return float(np.mean(np.abs(report.ecp - report.levels)))


def spearman(u, v):
    """Rank correlation with average ranks for ties; two-sided p-value
    from the large-sample t approximation."""
    u = np.asarray(u, dtype=np.float64).reshape(-1)
    v = np.asarray(v, dtype=np.float64).reshape(-1)
    if len(u) != len(v) or len(u) < 10:
        raise ValueError("need two equal-length vectors with at least 10 entries")
    if np.ptp(u) == 0 or np.ptp(v) == 0:
        raise ValueError("correlation undefined for a constant vector")
    ru, rv = rankdata(u), rankdata(v)
    ru = ru - ru.mean()
    rv = rv - rv.mean()
    r_s = float(np.sum(ru * rv) / np.sqrt(np.sum(ru ** 2) * np.sum(rv ** 2)))
    n = len(u)
    if abs(r_s) >= 1.0:
        return float(np.sign(r_s)), 0.0
    t = r_s * np.sqrt((n - 2) / (1.0 - r_s ** 2))
    p = float(2.0 * _special.stdtr(n - 2, -abs(t)))
    return r_s, p

"""Evidential regression heads in isolation.

The network's four raw outputs (gamma, nu, alpha, beta after the positivity
map) parameterize a normal-inverse-gamma prior whose marginal over a target
is a Student-t. This script walks through the head constraint, the marginal
negative log-likelihood, the total predictive variance, and exact-quantile
predictive intervals, checking each against Monte Carlo draws.

Run: python demos/01_evidential_uncertainty.py
"""

import numpy as np

from epinn.evidential import (constrain_heads, nll, predictive_interval,
                              predictive_variance, sample_marginal)

print("=" * 70)
print("1. Constraining raw network outputs")
print("=" * 70)
raw = np.array([0.8, -0.3, 1.2, -1.0])
out = constrain_heads(raw)
print(f"raw heads     : {raw}")
print(f"constrained   : gamma={out.gamma:.3f}  nu={out.nu:.3f}  "
      f"alpha={out.alpha:.3f}  beta={out.beta:.3f}")
print("invariants    : nu > 0, alpha > 1, beta > 0 hold for any raw vector\n")

print("=" * 70)
print("2. The marginal likelihood")
print("=" * 70)
ys = np.linspace(out.gamma - 3, out.gamma + 3, 7)
for y in ys:
    print(f"  nll(y={y:+.2f}) = {nll(out, y):.4f}")
print(f"minimized at y = gamma = {out.gamma:.2f} and symmetric about it\n")

print("=" * 70)
print("3. Predictive variance vs Monte Carlo")
print("=" * 70)
var = predictive_variance(out)
draws = sample_marginal(out, 10 ** 6, seed=0)
print(f"beta/(alpha-1) * (1 + 1/nu) = {var:.4f}")
print(f"variance of 1e6 draws       = {draws.var():.4f}\n")

print("=" * 70)
print("4. Central predictive intervals (exact t quantiles)")
print("=" * 70)
for level in (0.5, 0.68, 0.9, 0.95):
    lo, hi = predictive_interval(out, level)
    cover = np.mean((draws >= lo) & (draws <= hi))
    print(f"  level {level:.2f}: [{lo:+.3f}, {hi:+.3f}]  empirical coverage {cover:.3f}")
print("\nintervals are nested and their Monte Carlo coverage matches the level.")

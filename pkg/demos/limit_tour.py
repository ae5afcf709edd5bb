"""A short tour of the three limit processes for d = 5, 6, 7 with alpha = 2, beta = 1/2.

Run with ``python3 demos/limit_tour.py``; takes about half a minute.
"""
import numpy as np

from occfluct import analysis, limit_processes as lp, verification
from occfluct.fluctuations import RegimePlan
from occfluct.testfunctions import GaussianBump

rng = np.random.default_rng(2024)

# Intermediate dimension: eta is self-similar with H = (2 + beta - d beta/alpha)/(1 + beta).
eta = lp.LimitProcess(5, 2.0, 0.5, "eta")
print(f"d=5: H = {eta.H:.6f}")
times = [0.25, 0.5, 1.0]
paths = lp.eta_path(times, 5, 2.0, 0.5, "eta", rng, size=5000)
print("  analytic  E exp(i eta_1)   =", np.round(eta.charfn([1.0], [1.0]), 5))
print("  empirical E exp(i eta_1)   =", np.round(np.exp(1j * paths[:, -1]).mean(), 5))
print(f"  H from quantile ratios     = {analysis.estimate_selfsim_H(paths, times).estimate:.4f}")
print(f"  stability index of eta_1   = {analysis.estimate_stability_index(paths[:, -1]).estimate:.4f}")

# Long-range dependence: D_T decays like a power of T.
kappa, r2, D = verification.dependence_fit("eta")
print(f"  dependence decay exponent  = {kappa:.4f} (R^2 {r2:.5f}); d beta/alpha - 1 = {5 * 0.5 / 2 - 1}")

# Critical dimension: xi is a totally skewed stable Levy process, E exp(i z xi_t) = exp(-t z^q (1 + i)).
xi = lp.xi_sample([0.5, 1.0], 0.5, rng, size=20000)
print(f"d=6: K = {lp.theorem_constants('critical', 6, 2.0, 0.5, 1.0).value:.6f}")
print("  E exp(i xi_1) exact / empirical:", np.round(lp.xi_charfn(1.0, 1.0, 0.5), 5),
      np.round(np.exp(1j * xi[:, 1]).mean(), 5))

# Large dimensions: <X(t), phi> is stable with scale set by the potential of phi.
phi = GaussianBump(np.zeros(7), 1.0)
e = lp.sdsm_exponent(phi, 1.0, 7, 2.0, 0.5, 1.0)
print(f"d=7: log E exp(i <X(1), phi>) = {-e:.6f}")

for d in (5, 6, 7):
    plan = RegimePlan(d, 2.0, 0.5, 1.0, 100.0)
    print(f"F_100 in d={d} ({plan.regime}): {plan.F_T:.4f}")

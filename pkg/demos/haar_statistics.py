"""MET distribution of random single-qubit transitions, and what the fits say.

A small version of the random-pair campaign: 16 Haar-random pairs, a
descending-duration warm-start chain for each, a bootstrap of the empirical
CDF and fits of the homogeneous/isotropic model and its sin-power expansion.
The full 64-pair version is ``demos/configs/haar_1q.json`` (about 2 minutes
on one core):

    spinmet run demos/configs/haar_1q.json

    python3 demos/haar_statistics.py
"""
import numpy as np

from spinmet import OptimizerConfig, bootstrap_cdf, estimate_cdf, fit_hi, sample_pairs, table_one
from spinmet.fits import select_expansion
from spinmet.propagation import rabi_pi_time

device = table_one(1)
pairs = sample_pairs(n_qubits=1, n_pairs=16, seed=0)
print("initial overlaps |<psi0|phi>|:", np.round(np.sort(pairs.overlaps()), 2))

grid = np.arange(0, 301, 20.0)
estimate = estimate_cdf(pairs, device, grid, n_segments=40, stop_after_failures=2,
                        grape_config=OptimizerConfig(n_random_restarts=2, seed=0))
estimate = bootstrap_cdf(estimate, n_resamples=10_000, seed=0)
for t, p, lo, hi in zip(grid, estimate.cdf_values, estimate.ci_low, estimate.ci_high):
    print(f"  P(MET <= {t:5.0f} ns) = {p:.3f}   [{lo:.3f}, {hi:.3f}]")
print(f"largest MET {estimate.max_met:.0f} ns; resonant pi time {rabi_pi_time(device):.0f} ns")

hi = fit_hi(estimate, d=2)
print(f"HI fit: v = {hi.speed:.5f} rad/ns, chi2/NDoF = {hi.reduced_chi2:.2f}")
try:
    expansion = select_expansion(estimate, d=2)
    print(f"expansion: {expansion.n_terms} terms, chi2/NDoF = {expansion.reduced_chi2:.2f}")
except ValueError as exc:  # too few distinct grid points for this tiny sample
    print("expansion fit skipped:", exc)

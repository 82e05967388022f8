"""PrivateBHq on a binary dataset, from sensitivity scan to rejections.

Run: python3 demos/02_private_bhq.py
"""
import numpy as np

from privatebhq import (
    Dataset,
    bhq_step_up,
    binomial_pvalues,
    calibrate,
    default_nu,
    gamma_cutoffs,
    private_bhq,
    sensitivity_scan_binomial,
)

rng = np.random.default_rng(2000)
n, m = 100_000, 100
# Each column tests "success probability is 1/2". The first ten columns are
# planted at 0.52, a small effect that a large n makes very significant.
values = (rng.random((n, m)) < 0.5).astype(np.float32)
values[:, :10] = rng.random((n, 10)) < 0.52
data = Dataset(values)
print("non-private BHq rejects", bhq_step_up(binomial_pvalues(data), 0.1).R)

# Log p-values are truncated at a floor nu = m^(-1-c). Above the floor one
# person moves a log p-value by at most eta. The noise scale grows with eta,
# and the cutoffs move down by a multiple of it.
for c in (0.5, 4.0):
    nu = default_nu(m, c)
    prof = sensitivity_scan_binomial(n, nu)
    budget = calibrate(epsilon=0.5, delta=0.1, m_prime=10, eta=prof.eta)
    gammas = gamma_cutoffs(0.1, m, budget)
    rs = private_bhq(data, "binomial", 0.1, budget, nu, np.random.default_rng(1), profile=prof)
    print(f"\nc={c}: log nu = {np.log(nu):.1f}, eta = {prof.eta:.4f}, lambda = {budget.lam:.3f}")
    print(f"  log-scale cutoffs run from {gammas[0]:.1f} to {gammas[-1]:.1f}")
    print(f"  PrivateBHq rejects {rs.R}: {sorted(rs.rejected.tolist())}")

# With c = 0.5 every cutoff lies below log nu, so no truncated log p-value can
# pass and nothing is rejected. A lower floor costs a little more sensitivity
# but leaves room for the planted signals.

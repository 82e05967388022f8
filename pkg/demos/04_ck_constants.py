"""Monte Carlo constants C_k that bound FDR_k under arbitrary dependence.

Run: python3 demos/04_ck_constants.py
"""
from privatebhq import bound_fdr_k, bound_fdr_upper_k, estimate_ck_finite, estimate_ck_many
from privatebhq.fdr import ck_table

# C_k is the mean of sup_{j >= k} j / T_j for a unit-rate Poisson process.
# A quick estimate next to the shipped high-precision table.
table = ck_table()
est = estimate_ck_many([2, 3, 5, 10], reps=4000, j_max=20_000, seed=7)
for e in est:
    t = table[e.k]
    print(f"C_{e.k}: quick {e.mean:.3f} +- {e.std_error:.3f}   table {t.mean:.4f} +- {t.std_error:.4f}")

# The finite-n version climbs toward C_k; at n = k it equals k / (k - 1).
for n in (2, 10, 100):
    e = estimate_ck_finite(2, n, reps=50_000, seed=n)
    print(f"C_2 with n={n:>3}: {e.mean:.3f}")

# What it buys: FDR_k <= C_k * pi0 * q for BHq at level q.
for k in (2, 5, 25):
    print(f"k={k:>2}: bound {bound_fdr_k(k, 1.0, 0.1):.4f}, distribution-free {bound_fdr_upper_k(k, 0.1):.4f}")

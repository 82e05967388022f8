"""The two p-value families and their multiplicative sensitivity.

Run: python3 demos/03_pvalue_families.py
"""
import math

from privatebhq import sensitivity_scan_binomial, sensitivity_scan_truncexp, truncexp_tail
from privatebhq.pvalues import binomial_tail

# Binomial: P(T >= t) for T ~ Bin(n, 1/2). Adjacent datasets move t by one.
n = 4
print("binomial tails, n=4:", [str(binomial_tail(t, n)) for t in range(n + 1)])
for nu in (0.05, 0.4, 0.7):
    eta = sensitivity_scan_binomial(n, nu).eta
    print(f"  nu={nu}: eta={eta:.4f} (ratio {math.exp(eta):.4f})")

# Larger n: eta shrinks roughly like 1/sqrt(n) once tiny p-values are truncated.
for n in (100, 1000, 10000):
    print(f"n={n:>5}: eta={sensitivity_scan_binomial(n, 100 ** -1.5).eta:.5f}")

# Truncated exponential on [0, A]: the sum of n draws, upper tail.
# Exact for small n, saddlepoint for large n.
A = 1.0
for n in (2, 40, 200):
    mean = n * (1 - (A + 1) * math.exp(-A)) / (1 - math.exp(-A))
    print(f"n={n:>3}: P(T >= mean + 1) = {float(truncexp_tail(mean + 1, n, A)):.6f}")
prof = sensitivity_scan_truncexp(200, A, 1e-4, steps_per_bound=200)
print(f"truncexp sensitivity at n=200, A=1: eta={prof.eta:.4f} ({prof.method} scan)")
# A single row can move the statistic across the whole support.
print("n=1:", sensitivity_scan_truncexp(1, A, 1e-4, steps_per_bound=50).eta)

"""Benjamini-Hochberg step-up and step-down, and what "compliant" means.

Run: python3 demos/01_bhq_and_compliance.py
"""
import numpy as np

from privatebhq import bhq_cutoffs, bhq_step_down, bhq_step_up, is_compliant

q = 0.1
p = np.array([0.05, 0.055, 0.06])
print("p-values:", p, " level q =", q)
print("cutoffs qj/m:", np.round(bhq_cutoffs(q, p.size), 4))

# Step-down stops at the first rank that misses its cutoff. Step-up looks for
# the largest rank that makes it, so it can reject even after an early miss.
down, up = bhq_step_down(p, q), bhq_step_up(p, q)
print(f"step-down rejects {down.R}, step-up rejects {up.R}")

# A rejection set is compliant when every rejected p-value is at most the
# cutoff for the number of rejections. Both procedures always are.
cut = bhq_cutoffs(q, p.size)
print("step-up compliant:", is_compliant(up, p, cut))

# A larger problem with truth labels: 900 nulls and 100 signals.
rng = np.random.default_rng(0)
signal = rng.random(100) * 1e-3
null = rng.random(900)
p = np.concatenate([signal, null])
is_null = np.r_[np.zeros(100, bool), np.ones(900, bool)]
rs = bhq_step_up(p, q, is_null)
print(f"\nm=1000: R={rs.R} rejections, V={rs.V} false, FDP={rs.V / max(rs.R, 1):.3f}")

"""FDR_k of BHq under negative dependence, and the adversarial construction.

Run: python3 demos/05_dependence_studies.py
"""
import sys

from privatebhq import ExperimentConfig, run_experiment

# Equicorrelated-style normal example: the singular covariance ties signals
# and nulls together with negative correlation.
cfg = ExperimentConfig("normal", m=1000, m1_values=(50, 250), reps=200, seed=1)
run_experiment(cfg, threads=4).write_csv(sys.stdout)

# Pairs with correlation rho between a signal and its null partner.
print()
cfg = ExperimentConfig("block", m=2000, rhos=(-1.0, -0.4), reps=100, alternatives=("one-sided",), seed=2)
run_experiment(cfg, threads=4).write_csv(sys.stdout)

# Adversarial compliant procedures push FDP_k toward the C_k limit, but a
# draw is only realisable when there are enough false nulls to fill in.
print()
cfg = ExperimentConfig("adversarial", m=1000, m1_values=(500,), reps=2000, ks=(2, 5), seed=3)
res = run_experiment(cfg, threads=4)
res.write_csv(sys.stdout)
print("infeasible draws:", res.infeasible)

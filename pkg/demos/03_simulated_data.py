"""
From a calibrated scenario to data and back
===========================================

Simulate records from one grid scenario, write them to CSV, read them back
and compare plug-in estimates with their exact limits.  Then fit the
multiplicative structural mean model to a continuous exposure.
"""

# %%
import io

import numpy as np

from ivbias import (CalibrationSpec, Dataset, calibrate, empirical_moments, estimands_of_law,
                    observational_law, plugin_estimates, read_dataset, simulate,
                    solve_additive_smm, solve_msmm_general, write_dataset)

s = calibrate(CalibrationSpec(target_crr=3.03, alpha3=1, alpha4=1, beta4=0))
exact = estimands_of_law(observational_law(s))

# %%
data = simulate(s, 1_000_000, seed=1)
buf = io.StringIO()
write_dataset(data, buf)
print(buf.getvalue()[:40])
buf.seek(0)
back = read_dataset(buf)
assert np.array_equal(back.y, data.y)

# %%
est = plugin_estimates(empirical_moments(back))
for name in ("nrr", "livrr", "wald_rr", "msmm_rr"):
    print(f"{name:8s} sample {getattr(est, name):.3f}   limit {getattr(exact, name):.3f}")

# %%
# Sampling error shrinks like 1/sqrt(n).  At small n the MSMM can be
# undefined (a negative estimated exp(-gamma)); such replicates are counted.
for n in (10_000, 100_000, 1_000_000):
    reps = np.array([plugin_estimates(empirical_moments(simulate(s, n, seed=k))).msmm_rr
                     for k in range(10)])
    ok = np.isfinite(reps)
    print(f"n={n:>9,d}  MSMM RR sd {np.std(reps[ok], ddof=1):.4f}  undefined {np.sum(~ok)}/10")

# %%
# A continuous exposure with a log-linear effect exp(0.5 x).  The
# confounder u raises both exposure and outcome, so the naive slope is off
# while the structural mean models recover their targets.
rng = np.random.default_rng(5)
n = 500_000
u = rng.standard_normal(n)
g = rng.integers(0, 2, n)
x = 0.8 * g + 0.5 * u + rng.standard_normal(n)
y = np.exp(0.5 * x + 0.5 * u) * rng.exponential(size=n)
d = Dataset(g, x, y)
print("MSMM gamma", round(solve_msmm_general(d), 3))
print("naive log-slope", round(np.polyfit(x, np.log(y), 1)[0], 3))

# %%
# The additive model on a linear outcome.
y_lin = 0.7 * x + u + rng.standard_normal(n)
print("additive SMM", round(solve_additive_smm(Dataset(g, x, y_lin - y_lin.min())), 3))

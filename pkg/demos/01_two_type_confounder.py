"""
Estimands, bounds and the instrumental inequality on a small law
=================================================================

A confounder with two equally likely values drives both exposure and
outcome.  We compute every IV estimand exactly, compare them with the true
causal contrasts and look at what the data alone can say.
"""

# %%
import numpy as np
from scipy.special import logit

from ivbias import (ObservationalLaw, Scenario, bound_all, causal_targets, estimands_of_law,
                    instrumental_inequality, observational_law)

# P(X=1 | g, u) and P(Y=1 | x, u) at the two confounder values u = 1/4, 3/4.
px = {0: (0.2, 0.4), 1: (0.6, 0.8)}
py = {0: (0.1, 0.3), 1: (0.2, 0.5)}


def line(lo, hi):
    slope = (logit(hi) - logit(lo)) / 0.5
    return logit(lo) - 0.25 * slope, slope


b1, b3 = line(*px[0])
c1, c3 = line(*px[1])
a1, a3 = line(*py[0])
d1, d3 = line(*py[1])
s = Scenario(alpha1=a1, alpha2=d1 - a1, alpha3=a3, alpha4=d3 - a3,
             beta1=b1, beta2=c1 - b1, beta3=b3, beta4=c3 - b3, atoms=2)

# %%
# The observed law P(y, x, g), indexed [y, x, g].
law = observational_law(s)
print(np.round(law.p, 4))

# %%
# Truth against the estimands.  The naive ratio is far off, the two
# linear-model estimands land near the truth and the MSMM hits it.
truth = causal_targets(s)
est = estimands_of_law(law)
print(f"true CRR {truth.crr:.4f}  ACE {truth.ace:.4f}")
for name in ("nrr", "livrr", "wald_rr", "msmm_rr"):
    print(f"{name:8s} {getattr(est, name):.4f}")

# %%
# Assumption-free bounds from the response-type polytope.
for q, b in bound_all(law).items():
    print(f"{q:7s} [{b.lower:.4f}, {b.upper:.4f}]")

# %%
# The law passes the instrumental inequality; a law where G flips Y among
# the exposed does not.
print(instrumental_inequality(law))

# conditional P(y, x | g) indexed [g][y][x]
bad = ObservationalLaw.from_conditionals([[[0.2, 0.0], [0.0, 0.8]], [[0.2, 0.8], [0.0, 0.0]]], 0.5)
print(instrumental_inequality(bad))

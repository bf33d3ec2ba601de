#!/usr/bin/env python
"""
Positivity of the stochastic decay equation
===========================================

The equation ``dY = -lam Y dt + sigma Y dW`` keeps ``Y > 0`` forever. Explicit
Euler-Maruyama does not: one step multiplies the state by ``1 - lam h +
sigma dW``. The nonstandard variant replaces ``h`` in the drift by
``phi(h) = (1 - exp(-lam h)) / lam``, turning the multiplier into
``exp(-lam h) + sigma dW``.

Both schemes stay positive as long as the Brownian increment stays below a
bound; asking that this holds with probability ``1 - eps`` gives a minimal
step ``h0(eps)``.
"""
# %%

from nsem import (
    BoxDomain,
    GbmModel,
    InvarianceBounds,
    SchemeSpec,
    exit_statistics,
    invariance_probability,
    min_step_em,
    min_step_nsem,
    ratio_curve,
)
from nsem.schemes import exp_bound

lam, eps = 1.0, 0.01

# %%
# Minimal steps for two noise levels. The nonstandard scheme tolerates a
# much larger step when the noise is small compared with the decay rate.

for sigma in (0.1, 0.5):
    em = min_step_em(lam, sigma, eps).h0
    ns = min_step_nsem(lam, sigma, eps).h0
    print(f"sigma={sigma}: h0_em={em:.4f}  h0_nsem={ns:.4f}")

# %%
# The same comparison as a curve in sigma / lambda.

for ratio, em, ns in ratio_curve(lam, [0.05, 0.1, 0.2, 0.5, 1.0, 2.0], eps):
    print(f"{ratio:5.2f}  {em:.4f}  {ns:.4f}  gain x{ns / em:.2f}")

# %%
# What h0 means in practice: at h0 each step satisfies the bound with
# probability 0.99 exactly. Over the ~30 steps up to T = 10 that still lets a
# noticeable share of paths dip below zero; at half the step almost none do,
# while at twice the step most paths leave.

sigma = 0.5
model = GbmModel.decay(lam, sigma).to_sde()
bounds = InvarianceBounds.for_gbm(lam, sigma)
h0 = min_step_nsem(lam, sigma, eps).h0
for h in (0.5 * h0, h0, 2 * h0):
    st = exit_statistics(model, SchemeSpec.nsem(lam), BoxDomain.positive_orthant(), h, 10_000, 1,
                         bounds=bounds)
    p = invariance_probability(bounds, exp_bound, h)
    print(f"h={h:.3f}  P(bound holds)={p:.4f}  observed violations={st.overall_step_violation:.4f}"
          f"  paths leaving x>=0: {st.exit_fraction:.2%}")

# %%
# The balanced implicit method with c0 = lam, c1 = sigma never leaves, at any step.

for h in (0.1, 1.0, 10.0):
    st = exit_statistics(model, SchemeSpec.bim_scheme(lam, sigma), BoxDomain.positive_orthant(), h, 1000, 2)
    print(f"BIM h={h}: exit fraction {st.exit_fraction}")

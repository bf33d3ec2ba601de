#!/usr/bin/env python
"""
Means and strong errors on geometric Brownian motion
====================================================

Taking expectations of the nonstandard scheme on ``dY = -lam Y dt + sigma Y dW``
gives ``m_{k+1} = m_k (1 - lam phi(h)) = m_k exp(-lam h)``: the computed mean is
the exact one, at every step size. Euler-Maruyama's mean follows
``(1 - lam h)^k`` instead, which oscillates for ``h > 1/lam``.
"""
# %%

import math

import numpy as np

from nsem import GbmModel, SchemeSpec, mc_expectation, strong_error_curve

model = GbmModel.decay(1.0, 1.0)
sde = model.to_sde()

# %%
# Monte Carlo means with 10^4 paths: step 2 for NSEM, step 1 and 2 for EM.

for name, scheme, h in (("NSEM", SchemeSpec.nsem(1.0), 2.0), ("EM", SchemeSpec.em(), 1.0),
                        ("EM", SchemeSpec.em(), 2.0)):
    est = mc_expectation(sde, scheme, h, 10_000, 2024)
    print(f"{name} h={h}")
    for e in est[:6]:
        print(f"   t={e.time:4.1f}  mean={e.mean: .5f} +- {e.std_error:.5f}   exact={math.exp(-e.time):.5f}")

# %%
# Pathwise (strong) error on coupled dyadic grids: the coarse paths reuse the
# fine Brownian increments, so the exact solution is known at every node.

gbm = GbmModel(-1.0, 0.5, horizon=1.0)
for name, scheme in (("EM", SchemeSpec.em()), ("NSEM", SchemeSpec.nsem(1.0))):
    curve = strong_error_curve(gbm, scheme, 512, 6, 2000, 7)
    print(name, "order %.3f +- %.3f" % (curve.fitted_order, curve.fit_stderr))
    print(np.column_stack([curve.steps, curve.errors]))

# %%
# Without noise the nonstandard scheme is exact and there is nothing to fit.

exact = strong_error_curve(GbmModel(-1.0, 0.0, horizon=1.0), SchemeSpec.nsem(1.0), 64, 4, 10, 1)
print("sigma = 0:", exact.errors, "order:", exact.fitted_order)

#!/usr/bin/env python
"""
Error function, its inverse and Lambert W
=========================================

The minimal-step formulas need ``erf^{-1}(1 - eps)`` and the principal
branch of the Lambert W function. Both are computed in-package from exp,
log and sqrt only; the same inverse error function drives the Gaussian
random numbers.
"""
# %%

import math

import numpy as np

from nsem.specfun import erf, erf_inv, erfc, lambert_w0, norm_ppf

# %%
print("erf(1)        =", erf(1.0))
print("erf_inv(0.99) =", erf_inv(0.99))
print("erfc(6)       =", erfc(6.0), " (tail kept in relative precision)")

# %%
# Round trip and residuals over a range of arguments.

y = np.linspace(-0.9999, 0.9999, 10_001)
print("max |erf(erf_inv(y)) - y| =", np.abs(erf(erf_inv(y)) - y).max())
x = np.logspace(-8, 6, 1000)
w = lambert_w0(x)
print("max relative W residual   =", (np.abs(w * np.exp(w) - x) / x).max())

# %%
# The NSEM minimal step for lam=1, sigma=0.1, eps=0.01 is W(lam / (sigma a)^2) / (2 lam).

a = erf_inv(0.99)
arg = 1.0 / (0.1 * a) ** 2
print(f"W({arg:.4f}) = {lambert_w0(arg):.6f}  ->  h0 = {lambert_w0(arg) / 2:.6f}")

# %%
# Standard normal quantiles, deep into the tails.

print(norm_ppf(np.array([1e-300, 1e-10, 0.025, 0.5, 0.975])))
print("check:", math.sqrt(2) * erf_inv(0.95))

"""Error function, its inverses and the principal Lambert W branch.

Everything here is built from ``exp``, ``log`` and ``sqrt`` only, and every
function accepts either a Python float or a numpy array (evaluated
elementwise). Scalars in give floats out.

Algorithms
----------
erf / erfc
    For ``|x| < 2.5`` the everywhere-convergent series with positive terms

        erf(x) = 2/sqrt(pi) * exp(-x**2) * sum_n (2 x**2)**n * x / (2n+1)!!

    which has no cancellation. For ``|x| >= 1.5`` the Laplace continued
    fraction for erfc,

        erfc(x) = exp(-x**2)/sqrt(pi) / (x + (1/2)/(x + 1/(x + (3/2)/(x + ...))))

    evaluated backwards at a fixed depth. erf takes the series below 2.5 and
    ``1 - erfc`` above; erfc takes the fraction above 1.5 and ``1 - erf``
    below, so each keeps its own relative accuracy where it is small.
erf_inv / erfc_inv
    Winitzki's closed-form approximation as the starting point, then Newton
    steps on ``erf`` (central region) or ``erfc`` (tails, so that arguments
    close to +-1 keep their relative accuracy).
lambert_w0
    Halley iteration on ``w exp(w) - x`` from ``log1p(x)`` (small x) or the
    asymptotic ``L1 - L2 + L2/L1`` (large x).

Newton and Halley loops freeze each element as soon as its own step falls
below the tolerance, so an element's result never depends on which other
values were evaluated in the same call.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ArgumentError, DomainError, NumericError

__all__ = [
    "SpecFunConfig",
    "erf",
    "erfc",
    "erf_inv",
    "erfc_inv",
    "lambert_w0",
    "norm_ppf",
]

_TWO_OVER_SQRT_PI = 2.0 / math.sqrt(math.pi)
_SQRT_PI = math.sqrt(math.pi)
_SERIES_CUTOFF = 2.5
_SERIES_TERMS = 45
_CF_CUTOFF = 1.5
_CF_DEPTH = 90
# Winitzki's constant for the inverse-erf starting guess
_WINITZKI_A = 0.147


@dataclass(frozen=True)
class SpecFunConfig:
    """Iteration controls for the Newton/Halley refinements."""

    newton_tolerance: float = 1e-13
    max_iterations: int = 100

    def __post_init__(self):
        if not self.newton_tolerance > 0:
            raise ArgumentError("newton_tolerance must be > 0")
        if int(self.max_iterations) < 1:
            raise ArgumentError("max_iterations must be >= 1")


DEFAULT_CONFIG = SpecFunConfig()


def _as_array(x, name):
    arr = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ArgumentError(f"{name} must be finite")
    return arr


def _ret(arr, like):
    if np.ndim(like) == 0 and not isinstance(like, np.ndarray):
        return float(arr)
    return arr


def _erf_series(ax):
    # ax >= 0, ax < _SERIES_CUTOFF
    x2 = ax * ax
    term = ax.copy()
    total = ax.copy()
    for n in range(1, _SERIES_TERMS):
        term = term * (2.0 * x2) / (2 * n + 1)
        total = total + term
    return _TWO_OVER_SQRT_PI * np.exp(-x2) * total


def _erfc_cf(ax):
    # ax >= _CF_CUTOFF
    f = ax.copy()
    for k in range(_CF_DEPTH, 0, -1):
        f = ax + (0.5 * k) / f
    return np.exp(-ax * ax) / (_SQRT_PI * f)


def _erf_pos(ax):
    """erf and erfc for nonnegative arguments, as a pair of arrays."""
    erf_v = np.empty_like(ax)
    erfc_v = np.empty_like(ax)
    use_series = ax < _SERIES_CUTOFF
    use_cf = ax >= _CF_CUTOFF
    xs = ax[use_series]
    series = _erf_series(xs)
    erf_v[use_series] = series
    xl = ax[use_cf]
    frac = np.where(xl > 27.0, 0.0, _erfc_cf(np.minimum(xl, 27.0)))
    erfc_v[use_cf] = frac
    # overlap [1.5, 2.5) takes each function from its accurate branch
    erf_v[~use_series] = 1.0 - erfc_v[~use_series]
    erfc_v[~use_cf] = 1.0 - erf_v[~use_cf]
    return erf_v, erfc_v


def erf(x):
    """Error function ``2/sqrt(pi) * int_0^x exp(-t**2) dt``.

    Odd and strictly increasing; rounds to exactly +-1.0 once
    ``|x| > 6`` since the gap to 1 is below half an ulp there.

    Raises
    ------
    ArgumentError
        If any input is NaN or infinite.
    """
    arr = _as_array(x, "x")
    ax = np.abs(arr)
    val, _ = _erf_pos(ax)
    return _ret(np.copysign(val, arr), x)


def erfc(x):
    """Complementary error function ``1 - erf(x)``, accurate in the right tail."""
    arr = _as_array(x, "x")
    _, upper = _erf_pos(np.abs(arr))
    return _ret(np.where(arr >= 0, upper, 2.0 - upper), x)


def _winitzki_guess(q):
    # starting point for erfc(x) = q with 0 < q <= 1; uses log(1 - y**2)
    # written as log(q (2 - q)) so small q keeps full precision
    ln = np.log(q) + np.log(2.0 - q)
    b = 2.0 / (math.pi * _WINITZKI_A) + 0.5 * ln
    inner = np.sqrt(np.maximum(b * b - ln / _WINITZKI_A, 0.0)) - b
    return np.sqrt(np.maximum(inner, 0.0))


def _newton(x, residual, config):
    """Newton loop with per-element freezing.

    ``residual(x, idx)`` returns ``(r, dr)`` for the elements ``x`` sitting at
    positions ``idx``; an element stops once its step is below
    ``newton_tolerance`` relative to ``max(|x|, 1e-300)``.
    """
    x = np.array(x, dtype=np.float64)
    flat = x.reshape(-1)
    idx = np.arange(flat.size)
    for _ in range(config.max_iterations):
        if idx.size == 0:
            return x
        xa = flat[idx]
        r, dr = residual(xa, idx)
        step = r / dr
        xa = xa - step
        flat[idx] = xa
        idx = idx[np.abs(step) > config.newton_tolerance * np.maximum(np.abs(xa), 1e-300)]
    if idx.size:
        raise NumericError("Newton iteration did not converge")
    return x


def _log_erfc_pos(x):
    """``log(erfc(x))`` and its derivative for x >= 0, free of underflow."""
    out = np.empty_like(x)
    slope = np.empty_like(x)
    use_cf = x >= _CF_CUTOFF
    xl = x[use_cf]
    f = xl.copy()
    for k in range(_CF_DEPTH, 0, -1):
        f = xl + (0.5 * k) / f
    # erfc = exp(-x**2) / (sqrt(pi) f)
    out[use_cf] = -xl * xl - np.log(_SQRT_PI * f)
    slope[use_cf] = -2.0 * f
    xs = x[~use_cf]
    upper = 1.0 - _erf_series(xs)
    out[~use_cf] = np.log(upper)
    slope[~use_cf] = -_TWO_OVER_SQRT_PI * np.exp(-xs * xs) / upper
    return out, slope


def _erfc_inv_pos(q, config):
    """x >= 0 with erfc(x) = q for 0 < q <= 1/2, by Newton on ``log erfc``."""
    x = _winitzki_guess(q)
    logq = np.log(q).reshape(-1)

    def residual(x, idx):
        val, slope = _log_erfc_pos(x)
        return val - logq[idx], slope

    return _newton(x, residual, config)


def _erf_inv_central(y, config):
    """x with erf(x) = y for |y| < 0.5 (Newton directly on erf)."""
    q = 1.0 - np.abs(y)
    x = np.copysign(_winitzki_guess(q), y)
    yf = y.reshape(-1)

    def residual(x, idx):
        val, _ = _erf_pos(np.abs(x))
        return np.copysign(val, x) - yf[idx], _TWO_OVER_SQRT_PI * np.exp(-x * x)

    return _newton(x, residual, config)


def _inverse(y, tail, config):
    """Solve erf(x) = y given ``tail = 1 - |y|`` computed by the caller.

    ``|y| < 0.5`` runs Newton on erf; otherwise Newton runs on ``log erfc``
    against ``tail``, which the caller forms without cancellation.
    """
    shape = y.shape
    y = y.reshape(-1)
    tail = tail.reshape(-1)
    out = np.empty_like(y)
    central = np.abs(y) < 0.5
    out[central] = _erf_inv_central(y[central], config)
    xt = _erfc_inv_pos(tail[~central], config)
    out[~central] = np.copysign(xt, y[~central])
    return out.reshape(shape)


def erf_inv(y, config=DEFAULT_CONFIG):
    """Inverse error function on ``(-1, 1)``.

    >>> round(erf_inv(0.99), 7)
    1.8213864

    Raises
    ------
    DomainError
        If ``|y| >= 1``.
    ArgumentError
        If ``y`` is NaN or infinite.
    """
    arr = _as_array(y, "y")
    if np.any(np.abs(arr) >= 1.0):
        raise DomainError("erf_inv requires -1 < y < 1")
    return _ret(_inverse(arr, 1.0 - np.abs(arr), config), y)


def erfc_inv(q, config=DEFAULT_CONFIG):
    """Inverse complementary error function on ``(0, 2)``."""
    arr = _as_array(q, "q")
    if np.any((arr <= 0.0) | (arr >= 2.0)):
        raise DomainError("erfc_inv requires 0 < q < 2")
    tail = np.where(arr <= 1.0, arr, 2.0 - arr)
    return _ret(_inverse(1.0 - arr, tail, config), q)


def norm_ppf(u, config=DEFAULT_CONFIG):
    """Standard normal quantile ``sqrt(2) * erf_inv(2u - 1)`` for u in (0, 1).

    In the tails the small quantity ``2 min(u, 1 - u)`` is handed to the
    erfc inversion directly, so u close to 0 or 1 keeps its relative accuracy.
    """
    arr = _as_array(u, "u")
    if np.any((arr <= 0.0) | (arr >= 1.0)):
        raise DomainError("norm_ppf requires 0 < u < 1")
    tail = 2.0 * np.minimum(arr, 1.0 - arr)
    return _ret(math.sqrt(2.0) * _inverse(2.0 * arr - 1.0, tail, config), u)


def lambert_w0(x, config=DEFAULT_CONFIG):
    """Principal branch of the Lambert W function for ``x >= 0``.

    Returns w >= 0 with ``w * exp(w) == x``.

    Raises
    ------
    DomainError
        If any ``x < 0`` (the negative axis is not supported).
    """
    arr = _as_array(x, "x")
    if np.any(arr < 0):
        raise DomainError("lambert_w0 is only implemented for x >= 0")
    big = arr > math.e
    l1 = np.log(np.where(big, arr, math.e))
    l2 = np.log(l1)
    w = np.where(big, l1 - l2 + l2 / l1, np.log1p(arr))
    active = arr > 0
    w = np.where(active, w, 0.0)
    for _ in range(config.max_iterations):
        if not active.any():
            break
        ew = np.exp(w)
        f = w * ew - arr
        wp1 = w + 1.0
        step = f / (ew * wp1 - (w + 2.0) * f / (2.0 * wp1))
        step = np.where(active, step, 0.0)
        w = w - step
        active &= np.abs(step) > config.newton_tolerance * np.abs(w)
    else:
        if active.any():
            raise NumericError("Halley iteration for lambert_w0 did not converge")
    return _ret(w, x)

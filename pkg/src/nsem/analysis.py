"""Minimal steps for positivity, invariance probabilities and Monte Carlo.

Minimal steps
-------------
A step is safe for positivity when every Brownian increment satisfies
``|dW| <= bound(D h) / (S d)``. Each coordinate of dW is N(0, h), so that
event has probability ``erf(bound(D h) / (S d sqrt(2 h)))``. Requiring it to
be ``1 - eps`` fixes the largest admissible step h0 as the root of

    bound(D h) / (S d sqrt(2 h)) = erf_inv(1 - eps) =: a

For GBM decay (D = lam, S = sigma, d = 1) this has closed forms:

* Euler-Maruyama, bound ``1 - x``: squaring gives
  ``lam**2 h**2 - 2 (lam + a**2 sigma**2) h + 1 = 0`` whose smaller root is
  the answer. It is evaluated as ``1 / (lam**2 h_plus)`` (the roots multiply
  to ``1 / lam**2``) to avoid cancellation.
* NSEM, bound ``exp(-x)``: ``2 lam h exp(2 lam h) = lam / (sigma a)**2`` so
  ``h0 = W0(lam / (sigma a)**2) / (2 lam)``.

:func:`min_step_numeric` solves the general equation by bisection and is the
independent cross-check of both closed forms.
"""

from dataclasses import dataclass
import math

import numpy as np

from .errors import ArgumentError, DomainError, NumericError, RootNotFoundError
from .model import GbmModel, gbm_exact_solution
from .rng import generate_increments
from .schemes import exp_bound, integrate_many, linear_bound
from .specfun import erf, erf_inv, lambert_w0

__all__ = [
    "InvarianceBounds",
    "MinStepResult",
    "McEstimate",
    "StrongErrorCurve",
    "ExitStatistics",
    "alpha_of_epsilon",
    "min_step_em",
    "min_step_nsem",
    "min_step_numeric",
    "invariance_probability",
    "expectation_recursion",
    "mc_expectation",
    "strong_error_curve",
    "fit_order",
    "exit_statistics",
    "ratio_curve",
]


@dataclass(frozen=True)
class InvarianceBounds:
    """Sup-norm bounds ``D`` on the drift derivative and ``S`` on the diffusion derivative."""

    d_bound: float
    s_bound: float
    noise_dim: int = 1

    def __post_init__(self):
        if not (self.d_bound >= 0 and math.isfinite(self.d_bound)):
            raise ArgumentError("d_bound must be finite and >= 0")
        if not (self.s_bound >= 0 and math.isfinite(self.s_bound)):
            raise ArgumentError("s_bound must be finite and >= 0")
        if int(self.noise_dim) < 1:
            raise ArgumentError("noise_dim must be >= 1")

    @classmethod
    def for_gbm(cls, lam, sigma):
        """GBM with rate ``lam`` and volatility ``sigma``: D = lam, S = sigma."""
        return cls(abs(lam), sigma, 1)


@dataclass(frozen=True)
class MinStepResult:
    h0: float
    epsilon: float
    alpha_eps: float
    route: str  # "closed_form_em", "closed_form_nsem" or "numeric_root"


@dataclass(frozen=True)
class McEstimate:
    time: float
    mean: float
    std_error: float
    num_paths: int
    failures: int = 0


@dataclass(frozen=True, eq=False)
class StrongErrorCurve:
    steps: np.ndarray
    errors: np.ndarray
    error_std_errors: np.ndarray
    fitted_order: float  # None when fewer than two levels have nonzero error
    fit_stderr: float


@dataclass(frozen=True, eq=False)
class ExitStatistics:
    step_violation_fraction: np.ndarray  # per step k, over paths; None without bounds
    overall_step_violation: float
    exit_fraction: float
    first_exit_histogram: np.ndarray  # counts of first exit at state index k
    num_paths: int


def _check_eps(eps):
    if not (0.0 < eps < 0.5):
        raise DomainError("epsilon must lie in (0, 1/2)")


def _check_rates(lam, sigma):
    if not (lam > 0 and math.isfinite(lam)):
        raise DomainError("lambda must be > 0")
    if not (sigma > 0 and math.isfinite(sigma)):
        raise DomainError("sigma must be > 0")


def alpha_of_epsilon(eps):
    """``erf_inv(1 - eps)``, the normal-tail scale of the minimal-step equation."""
    _check_eps(eps)
    return erf_inv(1.0 - eps)


def min_step_em(lam, sigma, eps):
    """Largest positivity-preserving EM step for GBM decay (smaller quadratic root)."""
    _check_rates(lam, sigma)
    a = alpha_of_epsilon(eps)
    s2 = (a * sigma) ** 2
    h_plus = 1.0 / lam + s2 / lam**2 + a * sigma * math.sqrt(s2 + 2.0 * lam) / lam**2
    return MinStepResult(1.0 / (lam**2 * h_plus), eps, a, "closed_form_em")


def min_step_nsem(lam, sigma, eps):
    """Largest positivity-preserving NSEM step for GBM decay, via Lambert W."""
    _check_rates(lam, sigma)
    a = alpha_of_epsilon(eps)
    h0 = lambert_w0(lam / (sigma * a) ** 2) / (2.0 * lam)
    return MinStepResult(h0, eps, a, "closed_form_nsem")


def _scaled_bound(bounds, denom_bound, h):
    b = float(denom_bound(bounds.d_bound * h))
    return max(b, 0.0) / (bounds.s_bound * bounds.noise_dim * math.sqrt(2.0 * h))


def min_step_numeric(bounds, denom_bound, eps, rtol=1e-10, max_expansions=200):
    """Root of ``bound(D h) / (S d sqrt(2h)) = erf_inv(1 - eps)`` by bisection.

    The left end of the bracket is pushed towards 0 and the right end grows
    by doubling from ``1/D`` (or 1 when ``D = 0``) until the left side of the
    equation drops below its target. A bound that vanishes at ``D h = 1``,
    such as ``1 - x``, therefore brackets the root inside ``(0, 1/D]``.

    Raises
    ------
    RootNotFoundError
        If no sign change is found; ``err.bracket`` holds the last bracket.
    """
    _check_eps(eps)
    if not bounds.s_bound > 0:
        raise DomainError("S must be > 0")
    a = alpha_of_epsilon(eps)

    def gap(h):
        return _scaled_bound(bounds, denom_bound, h) - a

    hi = 1.0 / bounds.d_bound if bounds.d_bound > 0 else 1.0
    lo = hi
    for _ in range(max_expansions):
        if gap(lo) > 0:
            break
        lo *= 0.5
    for _ in range(max_expansions):
        if gap(hi) < 0:
            break
        hi *= 2.0
    if not (gap(lo) > 0 > gap(hi)):
        raise RootNotFoundError(f"no sign change on [{lo}, {hi}]", bracket=(lo, hi))
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if mid in (lo, hi):
            break
        if gap(mid) > 0:
            lo = mid
        else:
            hi = mid
    return MinStepResult(0.5 * (lo + hi), eps, a, "numeric_root")


def invariance_probability(bounds, denom_bound, h):
    """``P(|dW_p| <= bound(D h) / (S d))`` for one coordinate of an N(0, h) increment.

    A bound that is nonpositive at ``D h`` gives probability 0; ``S = 0``
    (no noise) gives 1.
    """
    if not (h > 0 and math.isfinite(h)):
        raise DomainError("h must be > 0")
    if bounds.s_bound == 0:
        return 1.0
    return erf(_scaled_bound(bounds, denom_bound, h))


def expectation_recursion(d_bound, denominator, h, m0, num_steps):
    """Mean recursion ``m_{k+1} = m_k (1 - D phi(h))`` of NSEM on linear decay.

    The multiplier is written ``(1 - D/alpha) + (D/alpha) bound(alpha h)``,
    which is the same quantity; with ``alpha = D`` it is exactly
    ``bound(D h)`` and the recursion reproduces ``m0 exp(-D t_k)`` to
    rounding when the bound is ``exp(-x)``.
    """
    r = d_bound / denominator.alpha
    mult = (1.0 - r) + r * float(denominator.bound(denominator.alpha * h))
    out = np.empty(int(num_steps) + 1)
    out[0] = m0
    for k in range(int(num_steps)):
        out[k + 1] = out[k] * mult
    return out


def _num_steps(horizon, h):
    if not (h > 0 and math.isfinite(h)):
        raise ArgumentError("h must be > 0")
    n = int(math.floor(horizon / h + 1e-9))
    if n < 1:
        raise ArgumentError("step exceeds the model horizon")
    return n


def _simulate(model, scheme, h, num_paths, master_seed, batch_size):
    """Yield ``(states, failed_at)`` for consecutive blocks of stream indices."""
    n_steps = _num_steps(model.horizon, h)
    for start in range(0, num_paths, batch_size):
        idx = range(start, min(start + batch_size, num_paths))
        inc = generate_increments(master_seed, idx, h, n_steps, model.dim_noise)
        states, failed = integrate_many(model, scheme, inc, h)
        yield inc, states, failed


def mc_expectation(model, scheme, h, num_paths, master_seed, component=0, batch_size=10_000):
    """Monte Carlo mean and standard error of ``X_k[component]`` at every node.

    Path p uses stream ``(master_seed, p)``. Sums are accumulated in
    ascending stream order with a fixed batch size, so results are bitwise
    reproducible. Values are shifted by the first successful path before
    summing; identical samples (e.g. a noiseless model) therefore give the
    exact common value as the mean and a standard error of exactly 0.

    Paths whose state turns non-finite are dropped from the nodes after the
    failure and counted in ``failures``.
    """
    if int(num_paths) < 2:
        raise ArgumentError("num_paths must be >= 2")
    num_paths = int(num_paths)
    n_steps = _num_steps(model.horizon, h)
    s1 = np.zeros(n_steps + 1)
    s2 = np.zeros(n_steps + 1)
    count = np.zeros(n_steps + 1, dtype=np.int64)
    failures = 0
    shift = None
    for _, states, failed in _simulate(model, scheme, h, num_paths, master_seed, batch_size):
        x = states[:, :, component]
        ok = np.isfinite(x)
        if shift is None:
            shift = np.array([x[ok[:, k], k][0] if ok[:, k].any() else 0.0 for k in range(n_steps + 1)])
        dev = np.where(ok, x - shift, 0.0)
        s1 += dev.sum(axis=0)
        s2 += (dev * dev).sum(axis=0)
        count += ok.sum(axis=0)
        failures += int(np.count_nonzero(failed >= 0))
    times = h * np.arange(n_steps + 1)
    out = []
    for k in range(n_steps + 1):
        c = int(count[k])
        if c == 0:
            out.append(McEstimate(float(times[k]), math.nan, math.nan, 0, failures))
            continue
        mean = shift[k] + s1[k] / c
        if c > 1:
            var = max(s2[k] - s1[k] * s1[k] / c, 0.0) / (c - 1)
            se = math.sqrt(var / c)
        else:
            se = math.nan
        out.append(McEstimate(float(times[k]), float(mean), se, c, failures))
    return out


def fit_order(steps, errors, zero_tol=0.0):
    """Least-squares slope of ``log2(error)`` against ``log2(h)``.

    Levels with ``error <= zero_tol`` are dropped. Returns
    ``(order, stderr)``, with ``(None, None)`` when fewer than two levels
    remain and ``stderr = 0`` for exactly two.
    """
    h = np.asarray(steps, dtype=np.float64)
    e = np.asarray(errors, dtype=np.float64)
    keep = e > zero_tol
    if np.count_nonzero(keep) < 2:
        return None, None
    x = np.log2(h[keep])
    y = np.log2(e[keep])
    xm = x - x.mean()
    sxx = float(xm @ xm)
    slope = float(xm @ (y - y.mean())) / sxx
    m = x.size
    if m == 2:
        return slope, 0.0
    resid = y - y.mean() - slope * xm
    return slope, math.sqrt(float(resid @ resid) / (m - 2) / sxx)


def strong_error_curve(model, scheme, fine_steps, levels, num_paths, master_seed, zero_tol=1e-12):
    """Pathwise error ``E[max_k |X_k - Y(t_k)|]`` on dyadically coarsened grids.

    Fine increments have step ``T / fine_steps``; level l uses the path
    coarsened by ``2**l`` for l = 0 .. levels-1, and compares the scheme with
    the exact GBM solution at the coarse nodes using the same Brownian
    values. Steps are returned coarsest first. Errors at or below
    ``zero_tol * y0`` count as zero for the order fit.
    """
    if not isinstance(model, GbmModel):
        raise ArgumentError("strong_error_curve needs a GbmModel (closed-form reference)")
    fine_steps, levels, num_paths = int(fine_steps), int(levels), int(num_paths)
    if levels < 1 or fine_steps < 1 or num_paths < 1:
        raise ArgumentError("fine_steps, levels and num_paths must be >= 1")
    if fine_steps % 2 ** (levels - 1):
        raise ArgumentError(f"fine_steps must be divisible by 2**(levels-1) = {2 ** (levels - 1)}")
    sde = model.to_sde()
    h_fine = model.horizon / fine_steps
    inc = generate_increments(master_seed, range(num_paths), h_fine, fine_steps, 1)
    w_fine = np.zeros((num_paths, fine_steps + 1))
    np.cumsum(inc[:, :, 0], axis=1, out=w_fine[:, 1:])
    steps, errs, ses = [], [], []
    for level in reversed(range(levels)):
        m = 2**level
        blocks = inc.reshape(num_paths, fine_steps // m, m, 1)
        coarse = blocks[:, :, 0, :].copy()
        for j in range(1, m):
            coarse += blocks[:, :, j, :]
        h = h_fine * m
        states, failed = integrate_many(sde, scheme, coarse, h)
        if np.any(failed >= 0):
            raise NumericError(f"{np.count_nonzero(failed >= 0)} paths blew up at step {h}")
        times = h * np.arange(fine_steps // m + 1)
        exact = gbm_exact_solution(model, w_fine[:, ::m], times)
        sup = np.max(np.abs(states[:, :, 0] - exact), axis=1)
        steps.append(h)
        errs.append(float(sup.mean()))
        ses.append(float(sup.std(ddof=1) / math.sqrt(num_paths)) if num_paths > 1 else math.nan)
    order, stderr = fit_order(steps, errs, zero_tol * model.y0)
    return StrongErrorCurve(np.array(steps), np.array(errs), np.array(ses), order, stderr)


def _default_violation_bound(scheme):
    if scheme.kind == "nsem":
        return scheme.denominator.bound
    if scheme.kind == "em":
        return linear_bound
    return exp_bound


def exit_statistics(model, scheme, domain, h, num_paths, master_seed, bounds=None, denom_bound=None,
                    batch_size=10_000):
    """Empirical domain exits and increment-bound violations.

    A path exits at the first state index k >= 1 with ``X_k`` outside the
    closed ``domain`` (non-finite states count as outside). When ``bounds``
    is given, step k of a path violates the increment condition if
    ``max_p |dW_k,p| > bound(D h) / (S d)``; ``denom_bound`` defaults to the
    scheme's own bound (``1 - x`` for EM, ``exp(-x)`` for BIM).
    """
    if int(num_paths) < 2:
        raise ArgumentError("num_paths must be >= 2")
    num_paths = int(num_paths)
    n_steps = _num_steps(model.horizon, h)
    if denom_bound is None:
        denom_bound = _default_violation_bound(scheme)
    threshold = None
    if bounds is not None and bounds.s_bound > 0:
        b = max(float(denom_bound(bounds.d_bound * h)), 0.0)
        threshold = b / (bounds.s_bound * bounds.noise_dim)
    hist = np.zeros(n_steps + 1, dtype=np.int64)
    viol = np.zeros(n_steps, dtype=np.int64)
    exits = 0
    for inc, states, _ in _simulate(model, scheme, h, num_paths, master_seed, batch_size):
        outside = ~domain.contains(states)
        outside[:, 0] = False
        left = outside.any(axis=1)
        first = np.argmax(outside, axis=1)
        np.add.at(hist, first[left], 1)
        exits += int(np.count_nonzero(left))
        if threshold is not None:
            viol += (np.max(np.abs(inc), axis=2) > threshold).sum(axis=0)
    if threshold is None and bounds is not None:
        per_step, overall = np.zeros(n_steps), 0.0
    elif threshold is None:
        per_step, overall = None, None
    else:
        per_step = viol / num_paths
        overall = float(viol.sum()) / (num_paths * n_steps)
    return ExitStatistics(per_step, overall, exits / num_paths, hist, num_paths)


def ratio_curve(lam, ratios, eps):
    """Rows ``(sigma/lam, h0_em, h0_nsem)`` for each ratio, ``sigma = ratio * lam``."""
    r = [float(v) for v in ratios]
    if not r or any(v <= 0 for v in r) or any(b <= a for a, b in zip(r, r[1:])):
        raise ArgumentError("ratios must be positive and strictly ascending")
    return [(v, min_step_em(lam, v * lam, eps).h0, min_step_nsem(lam, v * lam, eps).h0) for v in r]

"""SDE systems, box domains and geometric Brownian motion.

An :class:`SdeModel` describes the autonomous Ito equation

    dY = f(Y) dt + g(Y) dW,    Y(0) = Y0,  0 <= t <= T

with ``Y`` in R^n and ``W`` a d-dimensional Brownian motion. Index
conventions are Python's: state coordinates are numbered from 0.
"""

from dataclasses import dataclass, field
from typing import Callable, NamedTuple
import math

import numpy as np

from .errors import ArgumentError

__all__ = [
    "SdeModel",
    "GbmModel",
    "BoxDomain",
    "Violation",
    "MilianReport",
    "gbm_exact_solution",
    "gbm_exact_expectation",
    "check_milian_conditions",
]


@dataclass(frozen=True, eq=False)
class SdeModel:
    """Drift/diffusion pair with its initial state and time horizon.

    Parameters
    ----------
    drift : callable
        ``drift(x)`` maps a state of shape ``(n,)`` to a vector of shape ``(n,)``.
    diffusion : callable
        ``diffusion(x)`` maps a state to an ``(n, d)`` matrix.
    initial_state : array_like
        Y0, shape ``(n,)`` (a scalar is promoted to ``(1,)``).
    horizon : float
        Final time T > 0.
    vectorized : bool
        Declare that ``drift`` and ``diffusion`` also accept a batch of states
        of shape ``(P, n)`` and return ``(P, n)`` / ``(P, n, d)``. Monte Carlo
        routines then step all paths at once instead of looping.

    ``dim_state`` and ``dim_noise`` are read off the coefficient shapes at
    ``initial_state``; both functions are evaluated once on construction to
    validate them.
    """

    drift: Callable
    diffusion: Callable
    initial_state: np.ndarray
    horizon: float
    vectorized: bool = False
    dim_state: int = field(init=False)
    dim_noise: int = field(init=False)

    def __post_init__(self):
        y0 = np.atleast_1d(np.array(self.initial_state, dtype=np.float64))
        if y0.ndim != 1:
            raise ArgumentError("initial_state must be a vector")
        if not np.all(np.isfinite(y0)):
            raise ArgumentError("initial_state must be finite")
        if not (self.horizon > 0 and math.isfinite(self.horizon)):
            raise ArgumentError("horizon must be a positive finite time")
        n = y0.shape[0]
        f0 = np.asarray(self.drift(y0), dtype=np.float64)
        if f0.shape != (n,):
            raise ArgumentError(f"drift returned shape {f0.shape}, expected ({n},)")
        g0 = np.asarray(self.diffusion(y0), dtype=np.float64)
        if g0.ndim != 2 or g0.shape[0] != n or g0.shape[1] < 1:
            raise ArgumentError(f"diffusion returned shape {g0.shape}, expected ({n}, d)")
        y0.flags.writeable = False
        object.__setattr__(self, "initial_state", y0)
        object.__setattr__(self, "horizon", float(self.horizon))
        object.__setattr__(self, "dim_state", n)
        object.__setattr__(self, "dim_noise", g0.shape[1])


@dataclass(frozen=True)
class GbmModel:
    """Geometric Brownian motion ``dY = mu Y dt + sigma Y dW``.

    The decay example of the package uses ``mu = -lam`` with ``lam > 0``;
    see :meth:`decay`.
    """

    mu: float
    sigma: float
    y0: float = 1.0
    horizon: float = 10.0

    def __post_init__(self):
        for name in ("mu", "sigma", "y0", "horizon"):
            if not math.isfinite(getattr(self, name)):
                raise ArgumentError(f"{name} must be finite")
        if self.sigma < 0:
            raise ArgumentError("sigma must be >= 0")
        if self.y0 <= 0:
            raise ArgumentError("y0 must be > 0")
        if self.horizon <= 0:
            raise ArgumentError("horizon must be > 0")

    @classmethod
    def decay(cls, lam, sigma, y0=1.0, horizon=10.0):
        """Stochastic decay equation, ``mu = -lam``."""
        if lam <= 0:
            raise ArgumentError("lam must be > 0")
        return cls(-lam, sigma, y0, horizon)

    def to_sde(self):
        mu, sigma = self.mu, self.sigma

        def drift(x):
            return mu * np.asarray(x)

        def diffusion(x):
            return (sigma * np.asarray(x))[..., None]

        return SdeModel(drift, diffusion, [self.y0], self.horizon, vectorized=True)


@dataclass(frozen=True)
class BoxDomain:
    """Closed box ``{x : lower[i] <= x_i <= upper[i] for i in constrained}``.

    ``lower`` and ``upper`` map a coordinate index to its bound; a missing
    key (or an infinite value) means that side is unbounded.
    """

    constrained_indices: tuple
    lower: dict = field(default_factory=dict)
    upper: dict = field(default_factory=dict)

    def __post_init__(self):
        idx = tuple(int(i) for i in self.constrained_indices)
        lower = {int(i): float(v) for i, v in self.lower.items() if v != -math.inf}
        upper = {int(i): float(v) for i, v in self.upper.items() if v != math.inf}
        for i in set(lower) | set(upper):
            if i not in idx:
                raise ArgumentError(f"bound given for unconstrained index {i}")
        for i in idx:
            if i in lower and i in upper and not upper[i] > lower[i]:
                raise ArgumentError(f"upper bound must exceed lower bound at index {i}")
        object.__setattr__(self, "constrained_indices", idx)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)

    @classmethod
    def positive_orthant(cls, n=1):
        """``x_i >= 0`` for every coordinate."""
        return cls(tuple(range(n)), {i: 0.0 for i in range(n)})

    def contains(self, x):
        """Membership of one state ``(n,)`` or a batch ``(P, n)``; boundary counts as inside."""
        x = np.asarray(x, dtype=np.float64)
        inside = np.ones(x.shape[:-1], dtype=bool)
        for i, a in self.lower.items():
            inside &= x[..., i] >= a
        for i, b in self.upper.items():
            inside &= x[..., i] <= b
        return inside if inside.ndim else bool(inside)


def gbm_exact_solution(model, brownian_values, times):
    """Closed-form GBM ``y0 * exp((mu - sigma**2/2) t + sigma W(t))``.

    ``brownian_values`` holds W at ``times`` along its last axis, so a batch
    of paths ``(P, N + 1)`` is accepted as well as a single path.
    """
    w = np.asarray(brownian_values, dtype=np.float64)
    t = np.asarray(times, dtype=np.float64)
    if t.ndim != 1 or w.shape[-1:] != t.shape:
        raise ArgumentError("brownian_values and times must have matching lengths")
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(t))):
        raise ArgumentError("brownian_values and times must be finite")
    if t[0] != 0.0 or np.any(np.diff(t) < 0):
        raise ArgumentError("times must be ascending and start at 0")
    if np.any(w[..., 0] != 0.0):
        raise ArgumentError("W(0) must be 0")
    with np.errstate(over="ignore"):
        return model.y0 * np.exp((model.mu - 0.5 * model.sigma**2) * t + model.sigma * w)


def gbm_exact_expectation(model, t):
    """``E[Y(t)] = y0 * exp(mu t)`` for ``t >= 0`` (scalar or array)."""
    ta = np.asarray(t, dtype=np.float64)
    if np.any(ta < 0) or not np.all(np.isfinite(ta)):
        raise ArgumentError("t must be finite and >= 0")
    out = model.y0 * np.exp(model.mu * ta)
    return float(out) if np.ndim(t) == 0 else out


class Violation(NamedTuple):
    index: int
    boundary: str  # "lower" or "upper"
    point: tuple
    quantity: str  # "f" or "g[j]"
    value: float


@dataclass(frozen=True)
class MilianReport:
    satisfied: bool
    violations: tuple


_G_TOL = 1e-12


def _face_interval(domain, j, window):
    lo = domain.lower.get(j, window[0])
    hi = domain.upper.get(j, window[1])
    if hi <= lo:
        # a one-sided bound lying outside the window: shift the window onto it
        width = window[1] - window[0]
        if j in domain.lower:
            hi = lo + width
        else:
            lo = hi - width
    return lo, hi


def check_milian_conditions(model, domain, face_samples=64, seed=0, window=(-10.0, 10.0)):
    """Sample the faces of ``domain`` and test the invariance conditions.

    On the face ``x_i = a_i`` the drift must satisfy ``f_i >= 0``, on
    ``x_i = b_i`` it must satisfy ``f_i <= 0``, and on both every entry of row
    i of the diffusion must vanish (``|g_ij| <= 1e-12``). Coordinates other
    than ``i`` are drawn uniformly from the box; unbounded sides use
    ``window``.

    The report lists every sampled violation in a fixed order (index, lower
    face before upper face, sample number, quantity), so identical arguments
    always yield an identical report.
    """
    if not domain.constrained_indices:
        raise ArgumentError("domain has no constrained coordinates")
    if int(face_samples) < 1:
        raise ArgumentError("face_samples must be >= 1")
    if not window[1] > window[0]:
        raise ArgumentError("window must be an increasing pair")
    n = model.dim_state
    rng = np.random.Generator(np.random.PCG64(int(seed)))
    intervals = [_face_interval(domain, j, window) for j in range(n)]
    violations = []
    for i in domain.constrained_indices:
        for side, bounds in (("lower", domain.lower), ("upper", domain.upper)):
            if i not in bounds:
                continue
            for _ in range(int(face_samples)):
                x = np.array([rng.uniform(lo, hi) for lo, hi in intervals])
                x[i] = bounds[i]
                fi = float(np.asarray(model.drift(x))[i])
                point = tuple(float(v) for v in x)
                if (side == "lower" and fi < 0) or (side == "upper" and fi > 0):
                    violations.append(Violation(i, side, point, "f", fi))
                row = np.asarray(model.diffusion(x))[i]
                for j, gij in enumerate(row):
                    if abs(gij) > _G_TOL:
                        violations.append(Violation(i, side, point, f"g[{j}]", float(gij)))
    return MilianReport(not violations, tuple(violations))

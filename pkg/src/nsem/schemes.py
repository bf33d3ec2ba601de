"""One-step integrators (EM, NSEM, BIM) and the trajectory driver.

All three steppers share the form

    X_{k+1} = X_k + f(X_k) * w + g(X_k) dW_k

where the drift weight ``w`` is ``h`` for Euler-Maruyama and ``phi(h)`` for
the nonstandard variant. The balanced implicit method adds the damping term
``(c0 h + c1 |dW_k|)(X_k - X_{k+1})`` and solves the resulting scalar linear
equation for ``X_{k+1}``.

Nothing is clipped: if a scheme leaves a domain the trajectory shows it.
"""

from dataclasses import dataclass
from typing import Any
import csv
import math

import numpy as np

from .errors import ArgumentError, DomainError, NumericError, UnsupportedError

__all__ = [
    "ExpBound",
    "LinearBound",
    "exp_bound",
    "linear_bound",
    "Denominator",
    "BimParams",
    "SchemeSpec",
    "Trajectory",
    "em_step",
    "nsem_step",
    "bim_step",
    "integrate",
    "integrate_many",
    "write_trajectory_csv",
]


class ExpBound:
    """Bound function ``x -> exp(-x)``, the default choice for NSEM."""

    name = "exp"

    def __call__(self, x):
        return np.exp(-np.asarray(x, dtype=np.float64))

    def phi(self, alpha, h):
        # 1 - exp(-alpha h) without cancellation for small alpha h
        return -math.expm1(-alpha * h) / alpha

    def __repr__(self):
        return "exp_bound"


class LinearBound:
    """Bound function ``x -> 1 - x`` on ``0 < x < 1``; turns NSEM into EM."""

    name = "linear"

    def __call__(self, x):
        return 1.0 - np.asarray(x, dtype=np.float64)

    def phi(self, alpha, h):
        if not alpha * h < 1.0:
            raise DomainError("linear bound requires alpha * h < 1")
        return h

    def __repr__(self):
        return "linear_bound"


exp_bound = ExpBound()
linear_bound = LinearBound()


@dataclass(frozen=True)
class Denominator:
    """Step weight ``phi(h) = (1 - bound(alpha h)) / alpha``.

    ``bound`` must take values in ]0, 1[ for positive arguments. The two
    bundled bounds evaluate ``phi`` in closed form; any other callable goes
    through the defining formula.
    """

    alpha: float
    bound: Any = exp_bound

    def __post_init__(self):
        if not (self.alpha > 0 and math.isfinite(self.alpha)):
            raise ArgumentError("alpha must be a positive finite rate")
        if not callable(self.bound):
            raise ArgumentError("bound must be callable")

    def __call__(self, h):
        if h < 0:
            raise ArgumentError("h must be >= 0")
        if hasattr(self.bound, "phi"):
            return self.bound.phi(self.alpha, h)
        b = float(self.bound(self.alpha * h))
        if not 0.0 <= b <= 1.0:
            raise DomainError(f"bound({self.alpha * h}) = {b} lies outside [0, 1]")
        return (1.0 - b) / self.alpha


@dataclass(frozen=True)
class BimParams:
    """Balancing weights: ``c0`` multiplies h, ``c1`` multiplies ``|dW|``."""

    c0: float
    c1: float

    def __post_init__(self):
        if not (self.c0 >= 0 and self.c1 >= 0):
            raise ArgumentError("BIM weights must be nonnegative")


@dataclass(frozen=True)
class SchemeSpec:
    """Which stepper to run: ``"em"``, ``"nsem"`` (with a denominator) or ``"bim"``."""

    kind: str
    denominator: Denominator = None
    bim: BimParams = None

    def __post_init__(self):
        if self.kind not in ("em", "nsem", "bim"):
            raise ArgumentError(f"unknown scheme kind {self.kind!r}")
        if self.kind == "nsem" and not isinstance(self.denominator, Denominator):
            raise ArgumentError("NSEM needs a Denominator")
        if self.kind == "bim" and not isinstance(self.bim, BimParams):
            raise ArgumentError("BIM needs BimParams")

    @classmethod
    def em(cls):
        return cls("em")

    @classmethod
    def nsem(cls, alpha, bound=exp_bound):
        return cls("nsem", denominator=Denominator(alpha, bound))

    @classmethod
    def bim_scheme(cls, c0, c1):
        return cls("bim", bim=BimParams(c0, c1))

    def drift_weight(self, h):
        return self.denominator(h) if self.kind == "nsem" else h


@dataclass(frozen=True, eq=False)
class Trajectory:
    """States ``X_0..X_N`` (shape ``(N + 1, n)``) on ``times``."""

    times: np.ndarray
    states: np.ndarray
    scheme: SchemeSpec
    model: Any


def _noise(G, dW):
    # G: (..., n, d), dW: (..., d) -> (..., n)
    return np.einsum("...nd,...d->...n", G, dW)


def _check_h(h):
    if not (h >= 0 and math.isfinite(h)):
        raise ArgumentError("h must be a finite number >= 0")


def _coefficients(model, x):
    fx = np.asarray(model.drift(x), dtype=np.float64)
    gx = np.asarray(model.diffusion(x), dtype=np.float64)
    if not (np.all(np.isfinite(fx)) and np.all(np.isfinite(gx))):
        raise NumericError("drift or diffusion returned a non-finite value")
    return fx, gx


def _state(x):
    return np.atleast_1d(np.asarray(x, dtype=np.float64))


def _increment(model, dW):
    dW = np.atleast_1d(np.asarray(dW, dtype=np.float64))
    if dW.shape != (model.dim_noise,):
        raise ArgumentError(f"dW must have length {model.dim_noise}")
    return dW


def em_step(model, x, h, dW):
    """``x + f(x) h + g(x) dW``."""
    _check_h(h)
    x = _state(x)
    fx, gx = _coefficients(model, x)
    return x + fx * h + gx @ _increment(model, dW)


def nsem_step(model, x, denom, h, dW):
    """``x + f(x) phi(h) + g(x) dW`` with ``phi`` given by ``denom``."""
    _check_h(h)
    x = _state(x)
    fx, gx = _coefficients(model, x)
    return x + fx * denom(h) + gx @ _increment(model, dW)


def _require_scalar(model):
    if model.dim_state != 1 or model.dim_noise != 1:
        raise UnsupportedError("BIM is implemented for scalar equations (n = d = 1) only")


def bim_step(model, x, params, h, dW):
    """Balanced implicit step for a scalar equation.

    Solves ``X' = x + f(x) h + g(x) dW + (c0 h + c1 |dW|)(x - X')``, i.e.

        X' = (x + f(x) h + g(x) dW + (c0 h + c1 |dW|) x) / (1 + c0 h + c1 |dW|)
    """
    _require_scalar(model)
    _check_h(h)
    x = _state(x)
    dW = _increment(model, dW)
    fx, gx = _coefficients(model, x)
    damp = params.c0 * h + params.c1 * np.abs(dW[0])
    return (x + fx * h + gx @ dW + damp * x) / (1.0 + damp)


def _advance(model, scheme, X, h, w, dW):
    """Unchecked step for a batch ``X`` of shape ``(P, n)``, ``dW`` ``(P, d)``."""
    fx = model.drift(X)
    noise = _noise(model.diffusion(X), dW)
    if scheme.kind == "bim":
        p = scheme.bim
        damp = (p.c0 * h + p.c1 * np.abs(dW[:, 0]))[:, None]
        return (X + fx * h + noise + damp * X) / (1.0 + damp)
    return X + fx * w + noise


def _single(model, scheme, x, h, w, dW):
    fx = np.asarray(model.drift(x), dtype=np.float64)
    gx = np.asarray(model.diffusion(x), dtype=np.float64)
    if scheme.kind == "bim":
        p = scheme.bim
        damp = p.c0 * h + p.c1 * abs(dW[0])
        return (x + fx * h + gx @ dW + damp * x) / (1.0 + damp)
    return x + fx * w + gx @ dW


def _check_path(model, path):
    if path.dim != model.dim_noise:
        raise ArgumentError(f"path has {path.dim} noise coordinates, model needs {model.dim_noise}")
    if path.horizon > model.horizon * (1 + 1e-9) + 1e-12:
        raise ArgumentError("path extends beyond the model horizon")


def integrate(model, scheme, path):
    """Run ``scheme`` over every increment of ``path`` starting from Y0.

    Raises
    ------
    NumericError
        At the first step producing a non-finite state; ``err.step`` is its
        index k (the state X_{k+1} was bad).
    ArgumentError
        If the path's noise dimension or horizon does not fit the model.
    """
    _check_path(model, path)
    if scheme.kind == "bim":
        _require_scalar(model)
    h = path.step
    w = scheme.drift_weight(h)
    states = np.empty((path.num_steps + 1, model.dim_state))
    states[0] = model.initial_state
    x = states[0]
    for k in range(path.num_steps):
        with np.errstate(over="ignore", invalid="ignore"):
            x = _single(model, scheme, x, h, w, path.increments[k])
        if not np.all(np.isfinite(x)):
            raise NumericError(f"non-finite state after step {k}", step=k)
        states[k + 1] = x
    states.flags.writeable = False
    return Trajectory(path.times, states, scheme, model)


def integrate_many(model, scheme, increments, step):
    """Integrate a batch of paths given as increments ``(P, N, d)``.

    Returns ``(states, failed_at)``: ``states`` has shape ``(P, N + 1, n)``
    and ``failed_at[p]`` is the first step index whose output was non-finite
    for path p, or -1. States of a failed path are NaN from that point on.
    Scalar models give rows bitwise equal to ``integrate`` on the same
    increments.
    """
    inc = np.asarray(increments, dtype=np.float64)
    if inc.ndim != 3 or inc.shape[2] != model.dim_noise:
        raise ArgumentError("increments must have shape (P, N, dim_noise)")
    if inc.shape[1] * step > model.horizon * (1 + 1e-9) + 1e-12:
        raise ArgumentError("paths extend beyond the model horizon")
    if scheme.kind == "bim":
        _require_scalar(model)
    P, N, _ = inc.shape
    n = model.dim_state
    w = scheme.drift_weight(step)
    states = np.empty((P, N + 1, n))
    states[:, 0] = model.initial_state
    failed_at = np.full(P, -1, dtype=np.int64)
    if model.vectorized:
        X = states[:, 0].copy()
        with np.errstate(over="ignore", invalid="ignore"):
            for k in range(N):
                X = _advance(model, scheme, X, step, w, inc[:, k])
                bad = ~np.all(np.isfinite(X), axis=1) & (failed_at < 0)
                failed_at[bad] = k
                X[failed_at >= 0] = np.nan
                states[:, k + 1] = X
    else:
        with np.errstate(over="ignore", invalid="ignore"):
            for p in range(P):
                x = states[p, 0].copy()
                for k in range(N):
                    x = _single(model, scheme, x, step, w, inc[p, k])
                    if failed_at[p] < 0 and not np.all(np.isfinite(x)):
                        failed_at[p] = k
                    if failed_at[p] >= 0:
                        x = np.full(n, np.nan)
                    states[p, k + 1] = x
    return states, failed_at


def write_trajectory_csv(traj, fileobj):
    """Write ``k,t,x_1..x_n`` with 17 significant digits."""
    n = traj.states.shape[1]
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(["k", "t"] + [f"x_{i + 1}" for i in range(n)])
    for k, (t, x) in enumerate(zip(traj.times, traj.states)):
        writer.writerow([str(k), format(float(t), ".17g")] + [format(float(v), ".17g") for v in x])

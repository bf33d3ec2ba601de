"""Seeded Brownian increments with exact multi-resolution coupling.

Stream splitting
----------------
A stream is identified by ``(master_seed, stream_index)``. Its 64-bit seed is
the splitmix64 finaliser applied to

    master_seed + (stream_index + 1) * 0x9E3779B97F4A7C15   (mod 2**64)

and that seed drives a ``numpy.random.PCG64`` bit generator, which is
bit-reproducible across platforms.

Normal variates
---------------
Each uniform is ``(k + 0.5) / 2**53`` for a 53-bit integer ``k`` (never 0 or
1) and is mapped through :func:`nsem.specfun.norm_ppf`, so the whole package
shares one error-function implementation. Increments are ``sqrt(h) * z``.

Coupling
--------
``coarsen(path, m)`` sums ``m`` consecutive increments left to right and
keeps the fine path's Brownian values at every m-th node, so the coarse
``W(t_k)`` is bitwise the fine ``W(t_{mk})``.
"""

from dataclasses import dataclass, field
import csv
import math

import numpy as np

from .errors import ArgumentError
from .specfun import norm_ppf

__all__ = [
    "SeedSpec",
    "BrownianPath",
    "stream_seed",
    "generate_path",
    "generate_increments",
    "coarsen",
    "brownian_values",
    "write_path_csv",
    "read_path_csv",
]

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def _splitmix64(z):
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class SeedSpec:
    """One reproducible random stream: a master seed plus a stream index."""

    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if int(self.stream_index) < 0:
            raise ArgumentError("stream_index must be nonnegative")


def stream_seed(seed):
    """64-bit seed of the stream described by ``seed`` (a :class:`SeedSpec`)."""
    base = int(seed.master_seed) & _MASK64
    return _splitmix64((base + (int(seed.stream_index) + 1) * _GOLDEN) & _MASK64)


def _uniforms(seed, size):
    gen = np.random.Generator(np.random.PCG64(stream_seed(seed)))
    k = gen.integers(0, 1 << 53, size=size, dtype=np.int64)
    return (k + 0.5) * 2.0**-53


@dataclass(frozen=True, eq=False)
class BrownianPath:
    """Brownian increments on the uniform grid ``t_k = k * step``.

    ``increments`` has shape ``(num_steps, dim)``; ``values`` holds
    ``W(t_0), ..., W(t_N)`` with ``W(t_0) = 0``. When ``values`` is omitted it
    is the left-to-right prefix sum of the increments. Both arrays are
    read-only.
    """

    step: float
    increments: np.ndarray
    values: np.ndarray = field(default=None)

    def __post_init__(self):
        if not (self.step > 0 and math.isfinite(self.step)):
            raise ArgumentError("step must be a positive finite number")
        inc = np.array(self.increments, dtype=np.float64)
        if inc.ndim == 1:
            inc = inc[:, None]
        if inc.ndim != 2 or inc.shape[0] < 1 or inc.shape[1] < 1:
            raise ArgumentError("increments must have shape (num_steps, dim)")
        if self.values is None:
            vals = np.zeros((inc.shape[0] + 1, inc.shape[1]))
            np.cumsum(inc, axis=0, out=vals[1:])
        else:
            vals = np.array(self.values, dtype=np.float64).reshape(inc.shape[0] + 1, inc.shape[1])
            if np.any(vals[0] != 0.0):
                raise ArgumentError("W(0) must be 0")
        inc.flags.writeable = False
        vals.flags.writeable = False
        object.__setattr__(self, "step", float(self.step))
        object.__setattr__(self, "increments", inc)
        object.__setattr__(self, "values", vals)

    @property
    def num_steps(self):
        return self.increments.shape[0]

    @property
    def dim(self):
        return self.increments.shape[1]

    @property
    def horizon(self):
        return self.step * self.num_steps

    @property
    def times(self):
        return self.step * np.arange(self.num_steps + 1)


def _check_grid(step, num_steps, dim):
    if not (step > 0 and math.isfinite(step)):
        raise ArgumentError("step must be > 0")
    if int(num_steps) < 1:
        raise ArgumentError("num_steps must be >= 1")
    if int(dim) < 1:
        raise ArgumentError("dim must be >= 1")


def generate_path(seed, step, num_steps, dim=1):
    """Draw ``num_steps`` i.i.d. N(0, step) increments per noise coordinate.

    >>> p = generate_path(SeedSpec(7, 0), 0.01, 4)
    >>> p.increments.shape
    (4, 1)
    """
    _check_grid(step, num_steps, dim)
    z = norm_ppf(_uniforms(seed, (int(num_steps), int(dim))))
    return BrownianPath(step, math.sqrt(step) * z)


def generate_increments(master_seed, stream_indices, step, num_steps, dim=1):
    """Stack the increments of many streams into one ``(P, N, d)`` array.

    Row ``p`` is bitwise ``generate_path(SeedSpec(master_seed,
    stream_indices[p]), step, num_steps, dim).increments``; the normal
    transform is applied once to the whole block for speed.
    """
    _check_grid(step, num_steps, dim)
    idx = [int(i) for i in stream_indices]
    shape = (int(num_steps), int(dim))
    u = np.empty((len(idx),) + shape)
    for row, i in enumerate(idx):
        u[row] = _uniforms(SeedSpec(master_seed, i), shape)
    return math.sqrt(step) * norm_ppf(u)


def coarsen(path, factor):
    """Path on the grid of step ``factor * path.step`` sharing the same W.

    Raises
    ------
    ArgumentError
        If ``factor < 1`` or ``factor`` does not divide ``path.num_steps``.
    """
    m = int(factor)
    if m < 1 or m != factor:
        raise ArgumentError("factor must be a positive integer")
    if path.num_steps % m:
        raise ArgumentError(f"factor {m} does not divide num_steps {path.num_steps}")
    if m == 1:
        return path
    blocks = path.increments.reshape(path.num_steps // m, m, path.dim)
    acc = blocks[:, 0, :].copy()
    for j in range(1, m):
        acc += blocks[:, j, :]
    return BrownianPath(path.step * m, acc, path.values[::m])


def brownian_values(path):
    """``W(t_0), ..., W(t_N)`` as an ``(N + 1, d)`` array (first row zero)."""
    return path.values


def _fmt(x):
    return format(float(x), ".17g")


def write_path_csv(path, fileobj):
    """Write ``k,t,dW_1..dW_d,W_1..W_d``.

    Row k carries ``dW_k = W(t_{k+1}) - W(t_k)`` and ``W(t_k)``; the final
    row k = N has empty dW fields.
    """
    d = path.dim
    writer = csv.writer(fileobj, lineterminator="\n")
    writer.writerow(["k", "t"] + [f"dW_{j + 1}" for j in range(d)] + [f"W_{j + 1}" for j in range(d)])
    times = path.times
    for k in range(path.num_steps + 1):
        dw = [_fmt(v) for v in path.increments[k]] if k < path.num_steps else [""] * d
        writer.writerow([str(k), _fmt(times[k])] + dw + [_fmt(v) for v in path.values[k]])


def read_path_csv(fileobj):
    """Inverse of :func:`write_path_csv`."""
    rows = list(csv.reader(fileobj))
    header, body = rows[0], rows[1:]
    d = sum(1 for h in header if h.startswith("dW_"))
    if len(body) < 2 or d < 1:
        raise ArgumentError("path CSV needs a header and at least two rows")
    inc = np.array([[float(v) for v in r[2 : 2 + d]] for r in body[:-1]])
    vals = np.array([[float(v) for v in r[2 + d : 2 + 2 * d]] for r in body])
    step = float(body[1][1]) - float(body[0][1])
    return BrownianPath(step, inc, vals)

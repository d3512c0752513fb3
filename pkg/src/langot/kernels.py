"""Exponential kernels of the damped-inertia dynamics on the unit horizon.

Everything here is a deterministic function of a mass ``m`` and a friction
coefficient ``gamma``:

* ``kernel_K``     K(t)   = (1/gamma) (1 - exp(-gamma t / m))
* ``kernel_f``     f(t)   = gamma K(1 - t)
* ``kernel_phi``   phi(t) = 1 - int_t^1 f(s)^2 ds  (the time change)
* ``psi_operator`` the exponential smoothing (Psi f)(t)
                   = int_0^t (gamma/m) exp(-gamma (t-s)/m) f(s) ds

Evaluations stay finite for very small masses: every exponential difference
goes through ``expm1``.  All functions are pure and vectorize over numpy
arrays.
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError

#: absolute tolerance of the time-change inversion
PHI_INV_TOL = 1e-12
_PHI_INV_MAX_ITER = 200


@dataclass(frozen=True)
class KernelParams:
    """Mass and friction coefficient; both must be strictly positive."""

    m: float
    gamma: float

    def __post_init__(self):
        if not (np.isfinite(self.m) and self.m > 0):
            raise DomainError(f"mass must be positive, got {self.m}")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise DomainError(f"friction must be positive, got {self.gamma}")

    @property
    def rate(self):
        return self.gamma / self.m


@dataclass(frozen=True)
class TimeGrid:
    """Strictly increasing nodes inside [0, 1]."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or nodes.size < 2:
            raise DomainError("grid needs at least two nodes")
        if not np.all(np.isfinite(nodes)):
            raise DomainError("grid nodes must be finite")
        if np.any(np.diff(nodes) <= 0):
            raise DomainError("grid nodes must be strictly increasing")
        if nodes[0] < 0.0 or nodes[-1] > 1.0:
            raise DomainError("grid nodes must lie in [0, 1]")

    @classmethod
    def uniform(cls, n_steps, t0=0.0, t1=1.0):
        return cls(np.linspace(t0, t1, n_steps + 1))

    def __len__(self):
        return self.nodes.size

    @property
    def steps(self):
        return np.diff(self.nodes)


@dataclass(frozen=True)
class SampledPath:
    """Values attached to the nodes of a grid; shape (n,) or (n, d)."""

    grid: TimeGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", values)
        if values.shape[0] != len(self.grid):
            raise DomainError("one value per grid node required")
        if not np.all(np.isfinite(values)):
            raise DomainError("path values must be finite")


def _check_time(t):
    t = np.asarray(t, dtype=float)
    if np.any(t < 0.0) or np.any(t > 1.0):
        raise DomainError("time must lie in [0, 1]")
    return t


def kernel_K(params, t):
    """(1/gamma)(1 - exp(-gamma t / m)); increasing, K(0) = 0."""
    t = _check_time(t)
    return -np.expm1(-params.rate * t) / params.gamma


def kernel_f(params, t):
    """gamma K(1 - t) = 1 - exp(-gamma (1-t)/m); nonincreasing, f(1) = 0."""
    t = _check_time(t)
    return -np.expm1(-params.rate * (1.0 - t))


def kernel_phi(params, t):
    """Time change t + (2m/g)(1 - e^{-g(1-t)/m}) - (m/2g)(1 - e^{-2g(1-t)/m}).

    Antiderivative form of 1 - int_t^1 f(s)^2 ds; increasing with phi(1) = 1
    and 0 <= phi(t) - t <= 2m/gamma.
    """
    t = _check_time(t)
    m, g = params.m, params.gamma
    w = params.rate * (1.0 - t)
    return t - (2.0 * m / g) * np.expm1(-w) + (m / (2.0 * g)) * np.expm1(-2.0 * w)


def kernel_phi_inverse(params, s):
    """Solve phi(t) = s by bisection; |phi(t) - s| <= PHI_INV_TOL.

    phi is strictly increasing (its derivative f^2 vanishes only at t = 1),
    so bisection on [0, 1] is globally safe.
    """
    s = float(s)
    lo_val = float(kernel_phi(params, 0.0))
    if not (lo_val - PHI_INV_TOL <= s <= 1.0 + PHI_INV_TOL):
        raise DomainError(f"target {s} outside [phi(0), 1] = [{lo_val}, 1]")
    if s >= 1.0:
        return 1.0
    if s <= lo_val:
        return 0.0
    lo, hi = 0.0, 1.0
    for _ in range(_PHI_INV_MAX_ITER):
        mid = 0.5 * (lo + hi)
        val = float(kernel_phi(params, mid))
        if abs(val - s) <= PHI_INV_TOL:
            return mid
        if val < s:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _exp_cell_weights(x):
    """Per-cell weights of the exact exponential recurrence.

    For one cell of width ``dt`` with ``x = gamma dt / m`` and a linear
    integrand going from a to b, the cell integral of
    (gamma/m) e^{-gamma (t_next - s)/m} f(s) ds equals
    (w0 - w1) a + w1 b with w0 = 1 - e^{-x}, w1 = (x - 1 + e^{-x})/x.
    Both are cancellation-safe through expm1.
    """
    x = np.asarray(x, dtype=float)
    w0 = -np.expm1(-x)
    w1 = (x + np.expm1(-x)) / x
    return w0, w1


def psi_nodes(t_nodes, values, params):
    """Exponential smoothing of the piecewise-linear interpolant of values.

    values has shape (n, ...) with one leading entry per node; extra axes are
    carried along (used to smooth many paths at once).  Exact for piecewise
    linear data and unconditionally stable for m much smaller than the step.
    """
    t_nodes = np.asarray(t_nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    if values.shape[0] != t_nodes.size:
        raise DomainError("one value per node required")
    if t_nodes.size == 0:
        raise DomainError("empty path")
    x = params.rate * np.diff(t_nodes)
    decay = np.exp(-x)
    w0, w1 = _exp_cell_weights(x)
    head = w0 - w1
    out = np.zeros_like(values)
    acc = np.zeros(values.shape[1:], dtype=float)
    for k in range(x.size):
        acc = decay[k] * acc + head[k] * values[k] + w1[k] * values[k + 1]
        out[k + 1] = acc
    return out


def psi_operator(params, f):
    """Apply the smoothing operator to a sampled path; (Psi f)(0) = 0."""
    if len(f.grid) == 0:
        raise DomainError("empty path")
    return SampledPath(f.grid, psi_nodes(f.grid.nodes, f.values, params))

"""Simulation of the damped-inertia system and its small-mass limit.

Two integrators are provided for the position/momentum pair
``dX = Y/m dt``, ``dY = (u - gamma Y/m) dt + sigma dW``:

* ``simulate_underdamped_euler``: explicit Euler-Maruyama; guarded against
  the stiff regime ``gamma dt / m > 10``.
* ``simulate_underdamped_exact``: samples the exact joint Gaussian transition
  of the linear dynamics with the control frozen at the left node, so only
  the control freezing contributes O(dt) error; stable for any mass.

The first-order limit ``gamma dX = u dt + sigma dW`` is covered by
``simulate_overdamped``.  Controls are Markov feedback maps: ``u(t, x)`` for
the first-order dynamics, ``u(t, x, y)`` otherwise; they must accept a
batched state (n, d) and return matching controls.
"""

from dataclasses import dataclass

import numpy as np

from . import rng
from .errors import DomainError, NumericalError, StabilityError
from .kernels import KernelParams, SampledPath, TimeGrid, psi_nodes

EULER_MAX_RATE_STEP = 10.0
#: feedback controls are never evaluated at t >= 1 - END_GUARD
END_GUARD = 1e-6


@dataclass(frozen=True)
class SDEConfig:
    """Physical constants plus a constant diffusion matrix."""

    params: KernelParams
    dimension: int = 1
    sigma: object = None

    def __post_init__(self):
        if self.dimension < 1:
            raise DomainError("dimension must be >= 1")
        sigma = self.sigma
        if sigma is None:
            sigma = np.eye(self.dimension)
        sigma = np.atleast_2d(np.asarray(sigma, dtype=float))
        if sigma.shape != (self.dimension, self.dimension):
            raise DomainError("sigma must be a d x d matrix")
        if not np.all(np.isfinite(sigma)):
            raise DomainError("sigma entries must be finite")
        object.__setattr__(self, "sigma", sigma)


@dataclass(frozen=True)
class Trajectory:
    """One simulated path: positions, optional momenta, controls, noise."""

    grid: TimeGrid
    X: np.ndarray
    Y: object
    u: np.ndarray
    dW: np.ndarray
    seed: int
    path_index: int = 0

    def __post_init__(self):
        n = len(self.grid)
        for name, arr, rows in (("X", self.X, n), ("u", self.u, n), ("dW", self.dW, n - 1)):
            if arr.shape[0] != rows or not np.all(np.isfinite(arr)):
                raise DomainError(f"{name} must have {rows} finite rows")
        if self.Y is not None and (self.Y.shape != self.X.shape or not np.all(np.isfinite(self.Y))):
            raise DomainError("Y must match X in shape and be finite")

    def to_csv(self, path, meta_path=None):
        """Columns t, x_1..x_d, y_1..y_d, u_1..u_d (momenta only if present)."""
        from .measures import _write_csv

        d = self.X.shape[1]
        cols = [self.grid.nodes[:, None], self.X]
        header = ["t"] + [f"x_{i + 1}" for i in range(d)]
        if self.Y is not None:
            cols.append(self.Y)
            header += [f"y_{i + 1}" for i in range(d)]
        cols.append(self.u)
        header += [f"u_{i + 1}" for i in range(d)]
        _write_csv(path, header, np.hstack(cols))
        if meta_path is not None:
            import json

            meta = {
                "seed": self.seed,
                "path_index": self.path_index,
                "n_steps": len(self.grid) - 1,
                "dimension": d,
                "has_momentum": self.Y is not None,
            }
            with open(meta_path, "w") as fh:
                json.dump(meta, fh, sort_keys=True)
                fh.write("\n")


def exact_step_coefficients(params, dt):
    """Closed-form one-step moments of the linear system.

    Returns a dict with the decay ``e = exp(-gamma dt/m)``, the position
    kernel ``K = K(dt)``, the control weights ``int_e = int_0^dt e^{-g s/m}``
    and ``int_K = int_0^dt K(s) ds``, and the noise second moments per unit
    diffusion ``a = sigma sigma^T``:

        i_yy = int_0^dt e^{-2 g s/m} ds
        i_xy = int_0^dt K(s) e^{-g s/m} ds
        i_xx = int_0^dt K(s)^2 ds

    plus the conditional sampling pair (alpha, beta): the momentum noise is
    alpha * sigma dW + beta * sigma eta with eta an independent standard
    normal, which reproduces (i_yy, i_xy, i_xx) jointly with dW exactly.
    """
    if dt <= 0:
        raise DomainError("dt must be positive")
    g, m = params.gamma, params.m
    x = params.rate * dt
    e = np.exp(-x)
    K = -np.expm1(-x) / g
    int_e = m * K
    int_k = (dt - int_e) / g
    i_yy = -(m / (2.0 * g)) * np.expm1(-2.0 * x)
    i_xy = (int_e - i_yy) / g
    i_xx = (dt - 2.0 * int_e + i_yy) / g**2
    alpha = int_e / dt
    if x < 1e-3:
        beta_sq = dt * (x**2 / 12.0 - x**3 / 12.0 + 17.0 * x**4 / 360.0)
    else:
        beta_sq = i_yy - int_e**2 / dt
    if beta_sq < -1e-13 * max(dt, i_yy):
        raise NumericalError(f"conditional noise variance {beta_sq} < 0 at dt={dt}")
    return {
        "e": e,
        "K": K,
        "int_e": int_e,
        "int_K": int_k,
        "i_yy": i_yy,
        "i_xy": i_xy,
        "i_xx": i_xx,
        "alpha": alpha,
        "beta": np.sqrt(max(beta_sq, 0.0)),
    }


def _as_batch(x, d):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[None, :]
    if x.shape[1] != d:
        raise DomainError(f"state dimension {x.shape[1]} != {d}")
    return x


def _control_values(drift, t, *state):
    u = np.asarray(drift(t, *state), dtype=float)
    target = state[0].shape
    if u.shape != target:
        u = np.broadcast_to(u, target).copy()
    if not np.all(np.isfinite(u)):
        raise DomainError(f"control returned non-finite values at t={t}")
    return u


def underdamped_exact_batch(config, drift, x0, y0, grid_nodes, noise):
    """Exact-transition sampling for a batch of paths.

    noise has shape (n_steps, 2, n, d): per step, the standard normals that
    generate the Brownian increment and the conditional momentum remainder.
    Returns (X, Y, U, dW) with X, Y, U of shape (n_nodes, n, d).
    """
    params = config.params
    d = config.dimension
    x = _as_batch(x0, d).copy()
    y = _as_batch(y0, d).copy()
    n = x.shape[0]
    nodes = np.asarray(grid_nodes, dtype=float)
    steps = np.diff(nodes)
    X = np.empty((nodes.size, n, d))
    Y = np.empty_like(X)
    U = np.empty_like(X)
    dW = np.empty((steps.size, n, d))
    X[0], Y[0] = x, y
    sig = config.sigma
    sig_zero = not np.any(sig)
    coeff_cache = {}
    for k, dt in enumerate(steps):
        u = _control_values(drift, nodes[k], x, y)
        U[k] = u
        c = coeff_cache.get(dt)
        if c is None:
            c = exact_step_coefficients(params, dt)
            coeff_cache[dt] = c
        if sig_zero:
            dw = np.zeros((n, d))
            x_noise = y_noise = 0.0
        else:
            dw = np.sqrt(dt) * noise[k, 0]
            sdw = dw @ sig.T
            y_noise = c["alpha"] * sdw + c["beta"] * (noise[k, 1] @ sig.T)
            x_noise = (sdw - y_noise) / params.gamma
        dW[k] = dw
        x = x + c["K"] * y + c["int_K"] * u + x_noise
        y = c["e"] * y + c["int_e"] * u + y_noise
        X[k + 1], Y[k + 1] = x, y
    U[-1] = _control_values(drift, min(nodes[-1], 1.0 - END_GUARD), x, y)
    return X, Y, U, dW


def underdamped_euler_batch(config, drift, x0, y0, grid_nodes, noise):
    """Explicit Euler-Maruyama; refuses steps with gamma dt / m > 10."""
    params = config.params
    d = config.dimension
    x = _as_batch(x0, d).copy()
    y = _as_batch(y0, d).copy()
    n = x.shape[0]
    nodes = np.asarray(grid_nodes, dtype=float)
    steps = np.diff(nodes)
    if np.any(params.rate * steps > EULER_MAX_RATE_STEP):
        raise StabilityError(
            f"gamma dt / m = {params.rate * steps.max():.3g} > {EULER_MAX_RATE_STEP}; "
            "use the exact exponential integrator for this mass"
        )
    X = np.empty((nodes.size, n, d))
    Y = np.empty_like(X)
    U = np.empty_like(X)
    dW = np.empty((steps.size, n, d))
    X[0], Y[0] = x, y
    sig = config.sigma
    sig_zero = not np.any(sig)
    for k, dt in enumerate(steps):
        u = _control_values(drift, nodes[k], x, y)
        U[k] = u
        dw = np.zeros((n, d)) if sig_zero else np.sqrt(dt) * noise[k, 0]
        dW[k] = dw
        x = x + (dt / params.m) * y
        y = y + dt * (u - (params.gamma / params.m) * Y[k]) + dw @ sig.T
        X[k + 1], Y[k + 1] = x, y
    U[-1] = _control_values(drift, min(nodes[-1], 1.0 - END_GUARD), x, y)
    return X, Y, U, dW


def overdamped_batch(config, drift, x0, grid_nodes, noise):
    """Euler-Maruyama for gamma dX = u dt + sigma dW on a batch of paths.

    The control is evaluated at left nodes; at nodes beyond 1 - END_GUARD
    the previous control value is reused (feedback drifts may be singular
    at the terminal time).
    """
    g = config.params.gamma
    d = config.dimension
    x = _as_batch(x0, d).copy()
    n = x.shape[0]
    nodes = np.asarray(grid_nodes, dtype=float)
    steps = np.diff(nodes)
    X = np.empty((nodes.size, n, d))
    U = np.empty_like(X)
    dW = np.empty((steps.size, n, d))
    X[0] = x
    sig = config.sigma
    sig_zero = not np.any(sig)
    u = None
    for k, dt in enumerate(steps):
        if nodes[k] < 1.0 - END_GUARD or u is None:
            u = _control_values(drift, nodes[k], x)
        U[k] = u
        dw = np.zeros((n, d)) if sig_zero else np.sqrt(dt) * noise[k, 0]
        dW[k] = dw
        x = x + (dt / g) * u + (dw @ sig.T) / g
        X[k + 1] = x
    U[-1] = U[-2] if steps.size else _control_values(drift, nodes[0], x)
    return X, U, dW


def _noise_for(seed, path_index, n_steps, d, draws=2):
    gen = rng.path_rng(seed, path_index, rng.NOISE)
    return gen.standard_normal((n_steps, draws, 1, d))


def simulate_underdamped_euler(config, drift, x0, y0, grid, seed, path_index=0):
    noise = _noise_for(seed, path_index, len(grid) - 1, config.dimension)
    X, Y, U, dW = underdamped_euler_batch(config, drift, x0, y0, grid.nodes, noise)
    return Trajectory(grid, X[:, 0], Y[:, 0], U[:, 0], dW[:, 0], seed, path_index)


def simulate_underdamped_exact(config, drift, x0, y0, grid, seed, path_index=0):
    noise = _noise_for(seed, path_index, len(grid) - 1, config.dimension)
    X, Y, U, dW = underdamped_exact_batch(config, drift, x0, y0, grid.nodes, noise)
    return Trajectory(grid, X[:, 0], Y[:, 0], U[:, 0], dW[:, 0], seed, path_index)


def simulate_overdamped(config, drift, x0, grid, seed, path_index=0):
    noise = _noise_for(seed, path_index, len(grid) - 1, config.dimension, draws=1)
    X, U, dW = overdamped_batch(config, drift, x0, grid.nodes, noise)
    return Trajectory(grid, X[:, 0], None, U[:, 0], dW[:, 0], seed, path_index)


def decompose(traj, config):
    """Split a trajectory into cumulative control and martingale parts.

    Returns sampled paths (U, M) with U the cumulative trapezoid of the
    control and M the running sum of sigma dW; both start at zero.
    """
    if traj.u is None or traj.dW is None:
        raise DomainError("trajectory must carry controls and noise increments")
    nodes = traj.grid.nodes
    dt = np.diff(nodes)[:, None]
    u_cum = np.concatenate(
        [np.zeros((1, traj.u.shape[1])), np.cumsum(0.5 * dt * (traj.u[:-1] + traj.u[1:]), axis=0)]
    )
    m_cum = np.concatenate(
        [np.zeros((1, traj.dW.shape[1])), np.cumsum(traj.dW @ config.sigma.T, axis=0)]
    )
    return SampledPath(traj.grid, u_cum), SampledPath(traj.grid, m_cum)


def reconstruction_residual(traj, config):
    """Max-node defect of the variation-of-constants identity.

    The continuous dynamics satisfy
    ``X(t) = X(0) + Psi(U + M + Y(0))(t) / gamma`` exactly; on sampled data
    the smoothing of the piecewise-linear interpolant leaves a residual that
    shrinks like the grid modulus of the martingale part.
    """
    u_path, m_path = decompose(traj, config)
    smoothed = psi_nodes(
        traj.grid.nodes, u_path.values + m_path.values + traj.Y[0], config.params
    )
    recon = traj.X[0] + smoothed / config.params.gamma
    return float(np.max(np.linalg.norm(traj.X - recon, axis=-1)))

"""Weighted empirical measures, couplings, and distribution distances."""

import csv
import io

import numpy as np
from scipy import stats
from scipy.optimize import linprog

from .errors import DimensionError, DomainError, SizeError

WEIGHT_TOL = 1e-12
MARGINAL_TOL = 1e-10
MAX_EXACT_CELLS = 64


class EmpiricalMeasure:
    """Finitely supported probability measure: points (n, d), weights (n,)."""

    def __init__(self, points, weights=None):
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            points = points[:, None]
        if points.ndim != 2 or points.shape[0] == 0:
            raise DomainError("points must form a nonempty (n, d) array")
        if not np.all(np.isfinite(points)):
            raise DomainError("points must be finite")
        if weights is None:
            weights = np.full(points.shape[0], 1.0 / points.shape[0])
        weights = np.asarray(weights, dtype=float)
        if weights.shape != (points.shape[0],):
            raise DomainError("one weight per point required")
        if np.any(weights < 0) or not np.all(np.isfinite(weights)):
            raise DomainError("weights must be nonnegative and finite")
        if abs(weights.sum() - 1.0) > WEIGHT_TOL:
            raise DomainError(f"weights sum to {weights.sum()}, not 1")
        self.points = points
        self.weights = weights

    @property
    def dimension(self):
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @classmethod
    def from_samples(cls, samples):
        return cls(samples)

    @classmethod
    def point_mass(cls, x):
        return cls(np.atleast_2d(np.asarray(x, dtype=float)), np.array([1.0]))

    @classmethod
    def gaussian_quantiles(cls, mean, std, n):
        """Midpoint-quantile discretization of a 1-d Gaussian, equal weights."""
        if n < 1 or std <= 0:
            raise DomainError("need n >= 1 points and std > 0")
        q = (np.arange(n) + 0.5) / n
        return cls(mean + std * stats.norm.ppf(q))

    def to_csv(self, path_or_buffer):
        header = [f"x_{i + 1}" for i in range(self.dimension)] + ["weight"]
        rows = np.column_stack([self.points, self.weights])
        _write_csv(path_or_buffer, header, rows)

    @classmethod
    def from_csv(cls, path_or_buffer):
        header, rows = _read_csv(path_or_buffer)
        if not header or header[-1] != "weight":
            raise DomainError("measure CSV needs x_1..x_d, weight header")
        return cls(rows[:, :-1], rows[:, -1])


def _write_csv(path_or_buffer, header, rows):
    def dump(fh):
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in np.atleast_2d(rows):
            w.writerow([f"{v:.17g}" for v in row])

    if isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__"):
        with open(path_or_buffer, "w", newline="") as fh:
            dump(fh)
    else:
        dump(path_or_buffer)


def _read_csv(path_or_buffer):
    if isinstance(path_or_buffer, (str, bytes)) or hasattr(path_or_buffer, "__fspath__"):
        with open(path_or_buffer, newline="") as fh:
            text = fh.read()
    else:
        text = path_or_buffer.read()
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    rows = np.array([[float(v) for v in row] for row in reader], dtype=float)
    return header, rows


class DiscreteCoupling:
    """Nonnegative plan whose margins match two empirical measures."""

    def __init__(self, source, target, plan):
        plan = np.asarray(plan, dtype=float)
        if plan.shape != (len(source), len(target)):
            raise DomainError("plan shape must be (len(source), len(target))")
        if np.any(plan < 0) or not np.all(np.isfinite(plan)):
            raise DomainError("plan entries must be nonnegative and finite")
        row_err = np.abs(plan.sum(axis=1) - source.weights).max()
        col_err = np.abs(plan.sum(axis=0) - target.weights).max()
        if max(row_err, col_err) > MARGINAL_TOL:
            raise DomainError(
                f"plan margins off by {max(row_err, col_err):.3e} > {MARGINAL_TOL}"
            )
        self.source = source
        self.target = target
        self.plan = plan


def _same_support(mu, nu):
    return (
        mu.plan.shape == nu.plan.shape
        and np.array_equal(mu.source.points, nu.source.points)
        and np.array_equal(mu.target.points, nu.target.points)
    )


def relative_entropy(mu, nu):
    """sum mu_ij log(mu_ij / nu_ij); +inf if mu charges a nu-null cell."""
    if not _same_support(mu, nu):
        raise DomainError("couplings must share identical support indexing")
    a = mu.plan.ravel()
    b = nu.plan.ravel()
    pos = a > 0
    if np.any(b[pos] == 0):
        return np.inf
    return float(np.sum(a[pos] * np.log(a[pos] / b[pos])))


def _quantile_breakpoints(p):
    order = np.argsort(p.points[:, 0], kind="stable")
    x = p.points[order, 0]
    cum = np.cumsum(p.weights[order])
    cum[-1] = 1.0
    return x, cum


def wasserstein2_squared_1d(p, q):
    """Exact squared 2-Wasserstein distance between 1-d discrete measures.

    Equal-weight samples of equal size reduce to the mean squared difference
    of the sorted values; general weights go through the merged quantile
    representation of both CDFs.
    """
    if p.dimension != 1 or q.dimension != 1:
        raise DimensionError("only dimension 1 is supported")
    if len(p) == len(q) and np.allclose(p.weights, p.weights[0]) and np.allclose(
        q.weights, q.weights[0]
    ):
        a = np.sort(p.points[:, 0])
        b = np.sort(q.points[:, 0])
        return float(np.mean((a - b) ** 2))
    xp, cp = _quantile_breakpoints(p)
    xq, cq = _quantile_breakpoints(q)
    breaks = np.union1d(cp, cq)
    breaks = breaks[breaks > 0]
    seg = np.diff(np.concatenate([[0.0], breaks]))
    # left-continuous quantile functions: value on (c_{k-1}, c_k] is x_k
    iq_p = xp[np.searchsorted(cp, breaks - 1e-15, side="left")]
    iq_q = xq[np.searchsorted(cq, breaks - 1e-15, side="left")]
    return float(np.sum(seg * (iq_p - iq_q) ** 2))


def discrete_ot_exact(p, q, cost):
    """Exact optimal transport on a tiny instance (product of sizes <= 64).

    Solves the transportation linear program; the returned plan is a vertex
    of the polytope and satisfies the coupling margins.
    """
    cost = np.asarray(cost, dtype=float)
    n, m = len(p), len(q)
    if cost.shape != (n, m):
        raise DomainError("cost shape must match the supports")
    if n * m > MAX_EXACT_CELLS:
        raise SizeError(f"instance with {n * m} cells exceeds {MAX_EXACT_CELLS}")
    a_eq = np.zeros((n + m, n * m))
    for i in range(n):
        a_eq[i, i * m : (i + 1) * m] = 1.0
    for j in range(m):
        a_eq[n + j, j::m] = 1.0
    b_eq = np.concatenate([p.weights, q.weights])
    res = linprog(cost.ravel(), A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if not res.success:
        raise DomainError(f"transport LP failed: {res.message}")
    plan = np.clip(res.x.reshape(n, m), 0.0, None)
    plan = round_to_marginals(plan, p.weights, q.weights)
    return float(np.sum(plan * cost)), DiscreteCoupling(p, q, plan)


def round_to_marginals(plan, row, col):
    """Project a nearly feasible nonnegative plan onto exact margins."""
    plan = np.array(plan, dtype=float)
    r = plan.sum(axis=1)
    scale = np.where(r > 0, np.minimum(1.0, row / np.where(r > 0, r, 1.0)), 0.0)
    plan *= scale[:, None]
    c = plan.sum(axis=0)
    scale = np.where(c > 0, np.minimum(1.0, col / np.where(c > 0, c, 1.0)), 0.0)
    plan *= scale[None, :]
    dr = row - plan.sum(axis=1)
    dc = col - plan.sum(axis=0)
    total = dr.sum()
    if total > 0:
        plan += np.outer(dr, dc) / total
    return np.clip(plan, 0.0, None)


def energy_distance(p, q):
    """2 E|X-Y| - E|X-X'| - E|Y-Y'| with weighted double sums; >= 0."""
    if p.dimension != q.dimension:
        raise DimensionError("measures must share a dimension")

    def cross(a, wa, b, wb):
        diff = a[:, None, :] - b[None, :, :]
        return float(wa @ np.linalg.norm(diff, axis=2) @ wb)

    sxy = cross(p.points, p.weights, q.points, q.weights)
    sxx = cross(p.points, p.weights, p.points, p.weights)
    syy = cross(q.points, q.weights, q.points, q.weights)
    return max(2.0 * sxy - sxx - syy, 0.0)

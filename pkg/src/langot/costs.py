"""Running costs, action functionals, and assumption falsifiers.

Two cost families are supported: the quadratic |u|^2/2 and finite power
sums  sum_n a_n |u|^{p_n}  with a_n >= 0 and exponents 2 <= p_1 < p_2 < ...,
each optionally shifted by a bounded state potential U(t, z) >= 0 from a
small registry.  The assumption checks are sampling-based falsification:
they report worst inequality margins over random tuples, never proofs.
"""

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import polynomial as P

from .errors import DomainError, SizeError


def _bump_potential(t, z):
    # bounded by 1, uniformly continuous in (t, z)
    sq = np.sum(np.asarray(z, dtype=float) ** 2, axis=-1)
    return np.exp(-sq) * (0.5 + 0.5 * np.cos(2.0 * np.pi * np.asarray(t)))


POTENTIALS = {
    "zero": (None, 0.0),
    "bump": (_bump_potential, 1.0),
}


@dataclass(frozen=True)
class CostFunction:
    """Descriptor of L(t, z; u) = L1(u) + U(t, z)."""

    kind: str = "quadratic"
    coefficients: tuple = ()
    exponents: tuple = ()
    potential_name: str = "zero"
    r0_override: float | None = None

    def __post_init__(self):
        if self.kind not in ("quadratic", "power_sum"):
            raise DomainError(f"unknown cost kind '{self.kind}'")
        if self.kind == "power_sum":
            a = np.asarray(self.coefficients, dtype=float)
            p = np.asarray(self.exponents, dtype=float)
            if a.size == 0 or a.size != p.size:
                raise DomainError("power_sum needs matching coefficients and exponents")
            if np.any(a < 0) or not np.any(a > 0):
                raise DomainError("coefficients must be >= 0 with at least one positive")
            if np.any(p < 2) or np.any(np.diff(p) <= 0):
                raise DomainError("exponents must be strictly increasing and >= 2")
        if self.potential_name not in POTENTIALS:
            raise DomainError(f"unknown potential '{self.potential_name}'")

    @property
    def potential(self):
        return POTENTIALS[self.potential_name][0]

    @property
    def potential_bound(self):
        return POTENTIALS[self.potential_name][1]

    @property
    def r0(self):
        if self.r0_override is not None:
            return float(self.r0_override)
        if self.kind == "quadratic":
            return 2.0
        return float(max(self.exponents))

    @property
    def epsilon0(self):
        """Largest time scale with finite uniform (t, z) modulus.

        A cost without state potential does not depend on (t, z) at all, so
        the modulus vanishes for every window and the admissible-mass cap
        epsilon0 * gamma / 2 is vacuous.
        """
        return np.inf if self.potential is None else 0.1

    def control_part(self, sq_norm):
        """L1(u) as a function of |u|^2 (vectorized)."""
        sq_norm = np.asarray(sq_norm, dtype=float)
        if self.kind == "quadratic":
            return sq_norm / 2.0
        out = np.zeros_like(sq_norm)
        for a, p in zip(self.coefficients, self.exponents):
            out = out + a * sq_norm ** (p / 2.0)
        return out

    def c1_lower(self, radius):
        """Lower bound of C_{1,R} = inf_{|u| >= R} L / |u| (radial formula)."""
        if radius <= 0:
            raise DomainError("radius must be positive")
        if self.kind == "quadratic":
            return radius / 2.0
        return float(sum(a * radius ** (p - 1.0) for a, p in zip(self.coefficients, self.exponents)))

    def a4_constant(self):
        """Constant C of the growth inequality (exact for a single term)."""
        if self.kind == "quadratic":
            return 1.0
        terms = [a * p * max(2.0 ** (p - 2.0), 1.0) for a, p in zip(self.coefficients, self.exponents)]
        if len(terms) == 1:
            return terms[0]
        return 2.0 * sum(terms)

    def to_text(self):
        lines = [f"kind = {self.kind}"]
        if self.kind == "power_sum":
            lines.append("a = " + " ".join(f"{a:.17g}" for a in self.coefficients))
            lines.append("p = " + " ".join(f"{p:.17g}" for p in self.exponents))
        lines.append(f"r0 = {self.r0:.17g}")
        lines.append(f"U = {self.potential_name}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        fields = {}
        for raw in text.splitlines():
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise DomainError(f"cost descriptor line '{raw}' is not 'key = value'")
            key, _, val = line.partition("=")
            fields[key.strip()] = val.strip()
        unknown = set(fields) - {"kind", "a", "p", "r0", "U"}
        if unknown:
            raise DomainError(f"unknown cost descriptor keys {sorted(unknown)}")
        kind = fields.get("kind", "quadratic")
        coeffs = tuple(float(v) for v in fields.get("a", "").split())
        exps = tuple(float(v) for v in fields.get("p", "").split())
        r0 = float(fields["r0"]) if "r0" in fields else None
        return cls(
            kind=kind,
            coefficients=coeffs,
            exponents=exps,
            potential_name=fields.get("U", "zero"),
            r0_override=r0,
        )


def evaluate(cost, t, z, u):
    """L(t, z; u); vectorized over leading axes of u (and z)."""
    u = np.asarray(u, dtype=float)
    sq = np.sum(u * u, axis=-1)
    out = cost.control_part(sq)
    if cost.potential is not None:
        out = out + cost.potential(t, z)
    return out


def excess(cost, t, z, u):
    """R1(t, z; u) = L(t, z; u) - L(t, z; 0); the potential cancels."""
    return cost.control_part(np.sum(np.asarray(u) ** 2, axis=-1))


def action(control, state, cost):
    """Trapezoid quadrature of t -> L(t, z(t); u(t)) along a sampled path.

    state is one sampled path (positions; momentum treated as 0) or a pair
    (positions, momenta) on the same grid as the control.
    """
    paths = state if isinstance(state, (tuple, list)) else (state,)
    nodes = control.grid.nodes
    for p in paths:
        if p.values.shape[0] != nodes.size or not np.array_equal(p.grid.nodes, nodes):
            raise DomainError("state and control grids must coincide")
    x = paths[0].values
    y = paths[1].values if len(paths) > 1 else np.zeros_like(x)
    z = np.concatenate([np.atleast_2d(x.T).T, np.atleast_2d(y.T).T], axis=-1)
    integrand = evaluate(cost, nodes, z, control.values)
    return float(np.trapezoid(integrand, nodes))


def action_batch(nodes, x, y, u, cost):
    """Per-path actions for arrays shaped (n_nodes, n_paths, d)."""
    if y is None:
        y = np.zeros_like(x)
    z = np.concatenate([x, y], axis=-1)
    integrand = evaluate(cost, nodes[:, None], z, u)
    return np.trapezoid(integrand, nodes, axis=0)


def mc_value(values):
    """Sample mean and standard error of a Monte-Carlo batch."""
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise DomainError("empty Monte-Carlo batch")
    mean = float(values.mean())
    if values.size == 1:
        return mean, 0.0
    return mean, float(values.std(ddof=1) / np.sqrt(values.size))


def remark_counterexample(p):
    """|u|^2 - |u|^p + 1 with p in (0, 2): not convex near the origin."""
    if not 0 < p < 2:
        raise DomainError("counterexample needs p in (0, 2)")

    def fn(u):
        n = np.linalg.norm(np.asarray(u, dtype=float), axis=-1)
        return n**2 - n**p + 1.0

    return fn


def midpoint_convexity_check(fn, dimension, n_samples=1000, seed=0, radius=2.0):
    """Sampled midpoint convexity of u -> fn(u).

    Draws segment endpoints at several scales (biased toward the origin,
    where power-law kinks live) and reports the worst violation of
    fn((u+v)/2) <= (fn(u) + fn(v))/2.  Returns (is_convex, worst_violation).
    """
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        scale = radius * 10.0 ** rng.uniform(-3, 0)
        u = rng.normal(size=dimension) * scale
        v = rng.normal(size=dimension) * scale
        gap = fn(0.5 * (u + v)) - 0.5 * (fn(u) + fn(v))
        worst = max(worst, float(gap))
        gap = fn(np.zeros(dimension)) - 0.5 * (fn(u) + fn(-u))
        worst = max(worst, float(gap))
    return worst <= 1e-12, worst


@dataclass(frozen=True)
class AssumptionReport:
    """Sampled constants and worst inequality margins for one cost."""

    r_grid: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    cr0: np.ndarray
    scaling_margin: float
    growth_margin: float
    growth_constant: float
    delta_l: dict
    convex: bool
    convexity_violation: float
    n_samples: int
    u_radius: float

    def rows(self):
        return [
            {"R": float(r), "C_1R": float(c1), "C_2R": float(c2), "C_r0R": float(cr)}
            for r, c1, c2, cr in zip(self.r_grid, self.c1, self.c2, self.cr0)
        ]


def check_assumptions(cost, n_samples=2000, r_grid=None, epsilon_grid=None, seed=0, u_radius=50.0):
    """Sampling-based falsification report for one cost descriptor.

    Estimates C_{r,R} on an R-grid, the worst margins of the scaling
    inequality R1(t,z;ru) <= r^2 R1(t,z;u) and of the growth inequality
    L(u+v) <= L(u) + C |v| (|u|^{r0-1} + |v|^{r0-1}), the (t, z) modulus
    over an epsilon grid, and a midpoint-convexity verdict.  Negative
    margins mean a sampled violation.
    """
    if n_samples < 10:
        raise DomainError("need a nontrivial sample count")
    rng = np.random.default_rng(seed)
    if r_grid is None:
        r_grid = np.array([0.5, 1.0, 2.0, 5.0, 10.0, 50.0])
    if epsilon_grid is None:
        epsilon_grid = np.array([0.5, 0.1, 0.02])
    r_grid = np.asarray(r_grid, dtype=float)
    d = 2

    def sample_state(n):
        t = rng.uniform(0.0, 1.0, size=n)
        z = rng.normal(size=(n, 2 * d)) * 2.0
        return t, z

    def sample_u(n, lo, hi):
        direction = rng.normal(size=(n, d))
        direction /= np.linalg.norm(direction, axis=-1, keepdims=True)
        radii = np.exp(rng.uniform(np.log(lo), np.log(hi), size=(n, 1)))
        return direction * radii

    # C_{r,R} over the grid: the infimum is approached on |u| slightly above R
    c1 = np.empty(r_grid.size)
    c2 = np.empty(r_grid.size)
    cr0 = np.empty(r_grid.size)
    r0 = cost.r0
    for i, big_r in enumerate(r_grid):
        t, z = sample_state(n_samples)
        u = sample_u(n_samples, big_r, 3.0 * big_r)
        vals = evaluate(cost, t, z, u)
        sq = np.sum(u * u, axis=-1)
        c1[i] = float(np.min(vals / sq**0.5))
        c2[i] = float(np.min(vals / sq))
        cr0[i] = float(np.min(vals / sq ** (r0 / 2.0)))

    # scaling margin: min of (r^2 R1(u) - R1(ru)) / (1 + r^2 R1(u)), so the
    # report is scale-free; negative means a sampled violation
    t, z = sample_state(n_samples)
    u = sample_u(n_samples, 1e-2, u_radius)
    r = rng.uniform(0.0, 1.0, size=n_samples)
    upper = r**2 * excess(cost, t, z, u)
    scaling_margin = float(
        np.min((upper - excess(cost, t, z, r[:, None] * u)) / (1.0 + upper))
    )

    # growth margin: relative defect of
    # L(u+v) <= L(u) + C |v| (|u|^{r0-1} + |v|^{r0-1})
    C = cost.a4_constant()
    u = sample_u(n_samples, 1e-2, u_radius)
    v = sample_u(n_samples, 1e-2, u_radius)
    t, z = sample_state(n_samples)
    nu = np.linalg.norm(u, axis=-1)
    nv = np.linalg.norm(v, axis=-1)
    bound_side = evaluate(cost, t, z, u) + C * nv * (nu ** (r0 - 1.0) + nv ** (r0 - 1.0))
    growth_margin = float(
        np.min((bound_side - evaluate(cost, t, z, u + v)) / (1.0 + bound_side))
    )

    # (t, z) modulus on the epsilon grid, restricted to |u| <= u_radius
    delta_l = {}
    for eps in np.asarray(epsilon_grid, dtype=float):
        t1, z1 = sample_state(n_samples)
        t2 = np.clip(t1 + rng.uniform(-eps, eps, size=n_samples), 0.0, 1.0)
        z2 = z1 + rng.uniform(-1.0, 1.0, size=z1.shape) * (eps / np.sqrt(z1.shape[1]))
        u = sample_u(n_samples, 1e-2, u_radius)
        l1 = evaluate(cost, t1, z1, u)
        l2 = evaluate(cost, t2, z2, u)
        delta_l[float(eps)] = float(np.max((l1 - l2) / (1.0 + l2)))

    convex, violation = midpoint_convexity_check(
        lambda uu: float(evaluate(cost, 0.0, np.zeros(2 * d), uu)), d, min(n_samples, 1000), seed
    )
    return AssumptionReport(
        r_grid=r_grid,
        c1=c1,
        c2=c2,
        cr0=cr0,
        scaling_margin=scaling_margin,
        growth_margin=growth_margin,
        growth_constant=C,
        delta_l=delta_l,
        convex=convex,
        convexity_violation=violation,
        n_samples=n_samples,
        u_radius=u_radius,
    )


def polynomial_path(coefficients):
    """Validate a polynomial path spec; coefficients shape (deg+1, d)."""
    coeffs = np.atleast_2d(np.asarray(coefficients, dtype=float))
    if coeffs.shape[0] > 11:
        raise SizeError("polynomial degree above 10 is not supported")
    if not np.all(np.isfinite(coeffs)):
        raise DomainError("coefficients must be finite")
    return coeffs


def _poly_sq_integral(coeffs):
    """int_0^1 |p(t)|^2 dt for a vector polynomial, coefficient-exact."""
    total = 0.0
    for i in range(coeffs.shape[1]):
        sq = P.polymul(coeffs[:, i], coeffs[:, i])
        total += P.polyval(1.0, P.polyint(sq))
    return float(total)


def deterministic_identity_check(coefficients, params):
    """Both sides of the noiseless second-order action decomposition.

    For a polynomial path x(t) the squared effort of the combined control
    gamma x' + m x'' splits exactly as

        int |gamma x' + m x''|^2 = int (gamma^2 |x'|^2 + m^2 |x''|^2)
                                   + gamma m (|x'(1)|^2 - |x'(0)|^2).

    Returns (lhs, (integral_part, boundary_part)).
    """
    coeffs = polynomial_path(coefficients)
    g, m = params.gamma, params.m
    d1 = P.polyder(coeffs, axis=0) if coeffs.shape[0] > 1 else np.zeros((1, coeffs.shape[1]))
    d2 = P.polyder(d1, axis=0) if d1.shape[0] > 1 else np.zeros((1, coeffs.shape[1]))
    width = max(d1.shape[0], d2.shape[0])
    pad = lambda c: np.pad(c, ((0, width - c.shape[0]), (0, 0)))
    combined = g * pad(d1) + m * pad(d2)
    lhs = _poly_sq_integral(combined)
    integral_part = g**2 * _poly_sq_integral(d1) + m**2 * _poly_sq_integral(d2)
    v1 = P.polyval(1.0, d1)
    v0 = P.polyval(0.0, d1)
    boundary = g * m * (float(np.dot(v1, v1)) - float(np.dot(v0, v0)))
    return lhs, (integral_part, boundary)

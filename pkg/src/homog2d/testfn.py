"""Ad-hoc test functions for the perforated domain and their rate probes.

For a vector field ``phi`` and the complement cutoff ``n`` (see
:class:`homog2d.cutoff.Complement`)::

    Phi[phi]  = n phi + (x_perp . phi) grad_perp n
    Phi0[phi] = (1 - n) <phi> - (x_perp . <phi>) grad_perp n

with ``x_perp = (-x2, x1)``, ``grad_perp = (-d2, d1)`` and ``<phi>`` the mean
of phi over ``B_{eps alpha_eps}(0)``. ``Phi0`` is divergence free, and
``Phi + Phi0`` is the identity on constant fields.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .cutoff import Complement, CutoffSpec, RadialProfile, smooth_step
from .grid import Grid2D, ScalarField, VectorField, disk_quadrature, fd_divergence, fd_gradient, interior_cells


class ExponentError(ValueError):
    pass


# ---------------------------------------------------------------------------
# analytic vector fields
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AnalyticField:
    """Vector field with closed-form Jacobian ``J[i][j] = d_j phi_i``."""

    name: str
    value: Callable
    jacobian: Callable

    def __call__(self, x, y):
        return self.value(x, y)

    def div(self, x, y):
        J = self.jacobian(x, y)
        return J[0][0] + J[1][1]

    def scaled(self, a: float) -> "AnalyticField":
        return AnalyticField(
            f"{a}*{self.name}",
            lambda x, y: tuple(a * c for c in self.value(x, y)),
            lambda x, y: tuple(tuple(a * e for e in row) for row in self.jacobian(x, y)),
        )

    def __add__(self, other: "AnalyticField") -> "AnalyticField":
        def val(x, y):
            a, b = self.value(x, y), other.value(x, y)
            return a[0] + b[0], a[1] + b[1]

        def jac(x, y):
            A, B = self.jacobian(x, y), other.jacobian(x, y)
            return tuple(tuple(A[i][j] + B[i][j] for j in range(2)) for i in range(2))

        return AnalyticField(f"{self.name}+{other.name}", val, jac)


def constant_field(c: Sequence[float]) -> AnalyticField:
    c1, c2 = float(c[0]), float(c[1])
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return AnalyticField(
        f"const({c1},{c2})",
        lambda x, y: (z(x) + c1, z(x) + c2),
        lambda x, y: ((z(x), z(x)), (z(x), z(x))),
    )


def linear_field() -> AnalyticField:
    """phi(x) = x."""
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    o = lambda x: np.ones_like(np.asarray(x, dtype=float))
    return AnalyticField("linear", lambda x, y: (x + 0.0, y + 0.0), lambda x, y: ((o(x), z(x)), (z(x), o(x))))


def quadratic_field() -> AnalyticField:
    """phi(x) = (x1^2 + x2, x1 x2)."""
    o = lambda x: np.ones_like(np.asarray(x, dtype=float))
    return AnalyticField(
        "quad",
        lambda x, y: (x * x + y, x * y),
        lambda x, y: ((2 * x, o(x)), (y + 0.0, x + 0.0)),
    )


def sine_field() -> AnalyticField:
    """phi(x) = sin(pi x1) e1."""
    z = lambda x: np.zeros_like(np.asarray(x, dtype=float))
    return AnalyticField(
        "sine",
        lambda x, y: (np.sin(np.pi * x), z(x)),
        lambda x, y: ((np.pi * np.cos(np.pi * x), z(x)), (z(x), z(x))),
    )


def bump(cx: float, cy: float, radius: float):
    """Smooth compactly supported bump ``exp(1 - 1/(1 - s^2))`` with value, gradient, Hessian."""

    def parts(x, y):
        dx, dy = (x - cx) / radius, (y - cy) / radius
        s2 = dx * dx + dy * dy
        inside = s2 < 1
        w = np.where(inside, 1.0 - s2, 1.0)
        b = np.where(inside, np.exp(1.0 - 1.0 / w), 0.0)
        # b = exp(1 - 1/w), w = 1 - s2; db/ds2 = -b / w^2
        db = np.where(inside, -b / w**2, 0.0)
        # d2b/ds2^2 = b / w^4 - 2 b / w^3
        d2b = np.where(inside, b / w**4 - 2 * b / w**3, 0.0)
        return dx, dy, b, db, d2b

    def value(x, y):
        return parts(x, y)[2]

    def grad(x, y):
        dx, dy, _, db, _ = parts(x, y)
        return 2 * dx * db / radius, 2 * dy * db / radius

    def hess(x, y):
        dx, dy, _, db, d2b = parts(x, y)
        r2 = radius * radius
        H11 = (2 * db + 4 * dx * dx * d2b) / r2
        H22 = (2 * db + 4 * dy * dy * d2b) / r2
        H12 = 4 * dx * dy * d2b / r2
        return H11, H12, H22

    return value, grad, hess


def solenoidal_bump_field(cx: float, cy: float, radius: float, amplitude: float = 1.0) -> AnalyticField:
    """``grad_perp chi`` for a bump stream function chi: divergence free, compactly supported."""
    _, grad, hess = bump(cx, cy, radius)

    def val(x, y):
        gx, gy = grad(x, y)
        return -amplitude * gy, amplitude * gx

    def jac(x, y):
        H11, H12, H22 = hess(x, y)
        return ((-amplitude * H12, -amplitude * H22), (amplitude * H11, amplitude * H12))

    return AnalyticField(f"curl_bump({cx},{cy},{radius})", val, jac)


def compact_field(cx: float, cy: float, radius: float, direction: Sequence[float]) -> AnalyticField:
    """``chi(x) d`` for a bump chi and a fixed direction d (not divergence free)."""
    value, grad, _ = bump(cx, cy, radius)
    d1, d2 = float(direction[0]), float(direction[1])

    def val(x, y):
        b = value(x, y)
        return d1 * b, d2 * b

    def jac(x, y):
        gx, gy = grad(x, y)
        return ((d1 * gx, d1 * gy), (d2 * gx, d2 * gy))

    return AnalyticField(f"bump({cx},{cy},{radius})", val, jac)


def plateau_field(c: Sequence[float], r_in: float, r_out: float, center: Sequence[float] = (0.0, 0.0)) -> AnalyticField:
    """``grad_perp((x_perp . c) w)`` with a radial plateau w: equals c on ``B_{r_in}(center)``, divergence free."""
    c1, c2 = float(c[0]), float(c[1])
    x0, y0 = float(center[0]), float(center[1])
    width = r_out - r_in
    if not 0 < r_in < r_out:
        raise ValueError(f"need 0 < r_in < r_out, got {r_in}, {r_out}")

    def derivs(r):
        S, S1, S2 = smooth_step((r - r_in) / width)
        return 1.0 - S, -S1 / width, -S2 / width**2

    w = RadialProfile(derivs, (r_in, r_out), r_out)

    def val(x, y):
        X, Y = x - x0, y - y0
        ell = -y * c1 + x * c2
        wx, wy = w.grad(X, Y)
        ww = w.value(X, Y)
        # chi = ell w; grad chi = (c2, -c1) w + ell grad w
        gx = c2 * ww + ell * wx
        gy = -c1 * ww + ell * wy
        return -gy, gx

    def jac(x, y):
        X, Y = x - x0, y - y0
        ell = -y * c1 + x * c2
        wx, wy = w.grad(X, Y)
        H11, H12, _, H22 = w.hessian(X, Y)
        lx, ly = c2, -c1
        # Hessian of chi = ell w for linear ell
        C11 = 2 * lx * wx + ell * H11
        C22 = 2 * ly * wy + ell * H22
        C12 = lx * wy + ly * wx + ell * H12
        return ((-C12, -C22), (C11, C12))

    return AnalyticField(f"plateau({c1},{c2};{x0},{y0})", val, jac)


NAMED_FIELDS = {"linear": linear_field, "quad": quadratic_field, "sine": sine_field}


def named_field(name: str) -> AnalyticField:
    try:
        return NAMED_FIELDS[name]()
    except KeyError:
        raise ValueError(f"unknown test field {name!r}; choose from {sorted(NAMED_FIELDS)}") from None


# ---------------------------------------------------------------------------
# construction
# ---------------------------------------------------------------------------


def average_radius(comp: Complement) -> float:
    """Radius of the averaging ball ``B_{eps alpha_eps}(0)`` (alpha from the default policy)."""
    spec = CutoffSpec.with_default_alpha(comp.eps)
    return spec.outer


def ball_average(phi, spec: CutoffSpec | float, exact: bool | None = None):
    """Componentwise mean of phi over ``B_R(0)``, ``R = eps * alpha`` (or a given radius).

    A :class:`VectorField` is averaged by grid quadrature over the cells whose
    centres lie in the ball; an :class:`AnalyticField` by polar quadrature.
    """
    R = spec.outer if isinstance(spec, CutoffSpec) else float(spec)
    if isinstance(phi, VectorField):
        X, Y = phi.grid.cell_centers()
        sel = np.hypot(X, Y) < R
        if not sel.any():
            raise ValueError(f"ball of radius {R} contains no cell centre")
        return np.array([phi.x[sel].mean(), phi.y[sel].mean()])
    area = math.pi * R * R
    c1 = disk_quadrature(lambda x, y: phi(x, y)[0], (0.0, R)) / area
    c2 = disk_quadrature(lambda x, y: phi(x, y)[1], (0.0, R)) / area
    return np.array([c1, c2])


def _perp_terms(comp: Complement, x, y):
    nx, ny = comp.grad(x, y)
    return -ny, nx  # grad_perp n


def phi_values(comp: Complement, phi1, phi2, x, y):
    """Pointwise ``Phi[phi]`` from sampled components."""
    n = comp.value(x, y)
    p1, p2 = _perp_terms(comp, x, y)
    g = -y * phi1 + x * phi2
    return n * phi1 + g * p1, n * phi2 + g * p2


def phi_jacobian(comp: Complement, field: AnalyticField, x, y):
    """Exact Jacobian ``J[i][j] = d_j Phi_i`` of ``Phi[field]``."""
    n = comp.value(x, y)
    nx, ny = comp.grad(x, y)
    H11, H12, H21, H22 = comp.hessian(x, y)
    f1, f2 = field(x, y)
    J = field.jacobian(x, y)
    g = -y * f1 + x * f2
    gx = -y * J[0][0] + f2 + x * J[1][0]
    gy = -f1 - y * J[0][1] + x * J[1][1]
    p1, p2 = -ny, nx
    dp1 = (-H21, -H22)  # d_x, d_y of -d_y n
    dp2 = (H11, H12)  # d_x, d_y of d_x n
    grads_n = (nx, ny)
    gg = (gx, gy)
    out = [[None, None], [None, None]]
    for j in range(2):
        out[0][j] = grads_n[j] * f1 + n * J[0][j] + gg[j] * p1 + g * dp1[j]
        out[1][j] = grads_n[j] * f2 + n * J[1][j] + gg[j] * p2 + g * dp2[j]
    return out


def phi_divergence(comp: Complement, field: AnalyticField, x, y):
    J = phi_jacobian(comp, field, x, y)
    return J[0][0] + J[1][1]


def phi0_divergence_analytic(comp: Complement, c: Sequence[float], x, y):
    """Chain-rule divergence of ``Phi0`` for the mean vector ``c`` (zero up to round-off)."""
    return -phi_divergence(comp, constant_field(c), x, y)


@dataclass(frozen=True, eq=False)
class TestFunctionPair:
    __test__ = False

    Phi: VectorField
    Phi0: VectorField
    complement: Complement
    mean: np.ndarray
    source: object


def build_pair(phi, eps: float, grid: Grid2D | None = None, mean: np.ndarray | None = None) -> TestFunctionPair:
    """Sample ``Phi[phi]`` and ``Phi0[phi]`` at the cell centres.

    ``phi`` is a collocated :class:`VectorField` or an :class:`AnalyticField`
    (in which case ``grid`` is required). The mean defaults to
    :func:`ball_average`; analytic sources get the exact polar-quadrature mean.
    """
    if isinstance(phi, VectorField):
        grid = phi.grid
        p1, p2 = phi.x, phi.y
    else:
        if grid is None:
            raise ValueError("grid required for analytic fields")
        X, Y = grid.cell_centers()
        p1, p2 = (np.broadcast_to(c, X.shape).astype(float) for c in phi(X, Y))
    comp = Complement.build(eps, grid.L)
    if mean is None:
        mean = ball_average(phi, average_radius(comp))
    X, Y = grid.cell_centers()
    F1, F2 = phi_values(comp, p1, p2, X, Y)
    c1 = np.full_like(X, mean[0])
    c2 = np.full_like(X, mean[1])
    C1, C2 = phi_values(comp, c1, c2, X, Y)
    return TestFunctionPair(
        VectorField(grid, F1, F2), VectorField(grid, c1 - C1, c2 - C2), comp, np.asarray(mean, dtype=float), phi
    )


def div_phi0_residual(phi, eps: float, grid: Grid2D | None = None) -> tuple[ScalarField, float]:
    """FD divergence of ``Phi0[phi]`` and its maximum over interior cells."""
    pair = build_pair(phi, eps, grid)
    d = fd_divergence(pair.Phi0)
    inner = interior_cells(d.grid)
    return d, float(np.abs(d.values[inner]).max())


def div_decomposition(phi, eps: float, grid: Grid2D | None = None):
    """``div Phi[phi] - n div phi`` computed directly (FD) and by the three-term identity.

    Returns ``(direct, three_term)`` as :class:`ScalarField` objects. The
    identity reads ``grad n . (phi - c) + (grad_perp n (x) x_perp) : grad phi
    + (grad_perp n (x) (phi - c)) : grad x_perp`` with ``c = <phi>``.
    """
    pair = build_pair(phi, eps, grid)
    grid = pair.Phi.grid
    comp = pair.complement
    X, Y = grid.cell_centers()
    if isinstance(phi, VectorField):
        p1, p2 = phi.x, phi.y
        g1 = fd_gradient(ScalarField(grid, p1))
        g2 = fd_gradient(ScalarField(grid, p2))
        J = ((g1.x, g1.y), (g2.x, g2.y))
    else:
        p1, p2 = (np.broadcast_to(c, X.shape).astype(float) for c in phi(X, Y))
        J = phi.jacobian(X, Y)
    n = comp.value(X, Y)
    direct = fd_divergence(pair.Phi).values - n * fd_divergence(VectorField(grid, p1, p2)).values
    nx, ny = comp.grad(X, Y)
    q1, q2 = -ny, nx
    c1, c2 = pair.mean
    d1, d2 = p1 - c1, p2 - c2
    xp1, xp2 = -Y, X
    t1 = nx * d1 + ny * d2
    # sum_ij (grad_perp n)_i (x_perp)_j d_i phi_j
    t2 = q1 * (xp1 * J[0][0] + xp2 * J[1][0]) + q2 * (xp1 * J[0][1] + xp2 * J[1][1])
    # d_x x_perp = (0, 1), d_y x_perp = (-1, 0)
    t3 = q1 * d2 - q2 * d1
    return ScalarField(grid, direct), ScalarField(grid, t1 + t2 + t3)


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateRow:
    eps: float
    value: float
    gradient: float
    divergence: float


@dataclass(frozen=True)
class RateTable:
    phi: str
    p: float
    q: float
    rows: tuple[RateRow, ...]

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.rows])


def _square_lq(func, L: float, q: float, n_panels: int = 16, order: int = 10) -> float:
    xg, wg = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(-L, L, n_panels + 1)
    nodes = np.concatenate([0.5 * (b - a) * xg + 0.5 * (a + b) for a, b in zip(edges[:-1], edges[1:])])
    w = np.concatenate([0.5 * (b - a) * wg for a, b in zip(edges[:-1], edges[1:])])
    X, Y = np.meshgrid(nodes, nodes, indexing="ij")
    return float(np.sum(np.abs(func(X, Y)) ** q * np.outer(w, w)))


def w1q_norm(field: AnalyticField, q: float, L: float = 0.5) -> float:
    val = _square_lq(lambda x, y: np.hypot(*field(x, y)), L, q)
    J = None

    def jac_norm(x, y):
        J = field.jacobian(x, y)
        return np.sqrt(sum(np.asarray(J[i][j], dtype=float) ** 2 for i in range(2) for j in range(2)))

    grad = _square_lq(jac_norm, L, q)
    return (val + grad) ** (1.0 / q)


def discrepancy_norms(field: AnalyticField, eps: float, p: float, L: float = 0.5, mean=None) -> RateRow:
    """L^p norms of ``Phi - phi``, ``grad Phi - n grad phi`` and ``div Phi - n div phi``."""
    comp = Complement.build(eps, L)
    R = comp.support_radius
    breaks = [0.0] + [b for b in comp.breakpoints() if b < R] + [R]
    breaks = sorted(set(breaks))

    def value_err(x, y):
        F = phi_values(comp, *field(x, y), x, y)
        f = field(x, y)
        return np.hypot(F[0] - f[0], F[1] - f[1]) ** p

    def grad_err(x, y):
        JP = phi_jacobian(comp, field, x, y)
        J = field.jacobian(x, y)
        n = comp.value(x, y)
        s = sum((JP[i][j] - n * J[i][j]) ** 2 for i in range(2) for j in range(2))
        return np.sqrt(s) ** p

    def div_err(x, y):
        return np.abs(phi_divergence(comp, field, x, y) - comp.value(x, y) * field.div(x, y)) ** p

    vals = [disk_quadrature(f, breaks) ** (1.0 / p) for f in (value_err, grad_err, div_err)]
    return RateRow(eps, *vals)


def check_exponents(p: float, q: float) -> None:
    if not (1 <= p < q < math.inf):
        raise ExponentError(f"need 1 <= p < q < inf for the value and divergence probes, got p={p}, q={q}")
    if not (p <= 2 < q):
        raise ExponentError(f"need p <= 2 < q for the gradient probe, got p={p}, q={q}")


def rate_probe(field: AnalyticField, p: float, q: float, eps_list: Sequence[float], L: float = 0.5) -> RateTable:
    """Measured discrepancies divided by ``||phi||_{W^{1,q}}``, one row per eps (decreasing)."""
    check_exponents(p, q)
    eps_sorted = sorted(eps_list, reverse=True)
    if len(set(eps_sorted)) != len(eps_sorted):
        raise ValueError("eps_list entries must be distinct")
    norm = w1q_norm(field, q, L)
    if norm == 0:
        norm = 1.0
    rows = []
    for eps in eps_sorted:
        r = discrepancy_norms(field, eps, p, L)
        rows.append(RateRow(eps, r.value / norm, r.gradient / norm, r.divergence / norm))
    return RateTable(field.name, p, q, tuple(rows))


# ---------------------------------------------------------------------------
# three-dimensional corrector as printed
# ---------------------------------------------------------------------------


def _radial3d(eps: float, alpha: float):
    la = math.log(alpha)

    def grad(x):
        r = np.linalg.norm(x, axis=-1)
        inside = (r > eps) & (r < eps * alpha)
        c = np.where(inside, -1.0 / (np.where(r > 0, r, 1.0) ** 2 * la), 0.0)
        return c[..., None] * x

    def value(x):
        r = np.linalg.norm(x, axis=-1)
        return np.where(r <= eps, 1.0, np.where(r >= eps * alpha, 0.0, 1.0 - np.log(np.maximum(r, eps) / eps) / la))

    return value, grad


def phi0_3d(c: Sequence[float], eps: float, alpha: float):
    """Return ``x -> Phi0_3d(x)`` built from the printed 3x3 corrector with constant c."""
    c = np.asarray(c, dtype=float)
    value, grad = _radial3d(eps, alpha)

    def field(x):
        x = np.asarray(x, dtype=float)
        e = value(x)
        g = grad(x)
        x1, x2, x3 = x[..., 0], x[..., 1], x[..., 2]
        d1, d2, d3 = g[..., 0], g[..., 1], g[..., 2]
        m1 = x2 * d2 * c[0] - x2 * d3 * c[2]
        m2 = x3 * d3 * c[1] - x2 * d1 * c[0]
        m3 = x1 * d1 * c[2] - x3 * d2 * c[1]
        return np.stack([(1 - e) * c[0] - m1, (1 - e) * c[1] - m2, (1 - e) * c[2] - m3], axis=-1)

    return field


def div_phi0_3d_residual(c: Sequence[float], eps: float, sample_points: np.ndarray, alpha: float = 4.0, step: float | None = None) -> float:
    """Max central-difference divergence of the printed 3D corrector over the samples."""
    pts = np.atleast_2d(np.asarray(sample_points, dtype=float))
    F = phi0_3d(c, eps, alpha)
    d = 1e-4 * eps if step is None else step
    div = np.zeros(len(pts))
    for k in range(3):
        e = np.zeros(3)
        e[k] = d
        div += (F(pts + e)[:, k] - F(pts - e)[:, k]) / (2 * d)
    return float(np.abs(div).max()) if len(div) else 0.0


def shell_samples(eps: float, alpha: float, count: int, seed: int = 0, margin: float = 0.02) -> np.ndarray:
    """Random points in the open shell ``eps (1+m) < |x| < eps alpha (1-m)``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((count, 3))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    r = rng.uniform(eps * (1 + margin), eps * alpha * (1 - margin), count)
    return v * r[:, None]

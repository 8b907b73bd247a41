"""MAC (staggered) discretisation on the square with solid cells.

Layout for an ``n x n`` cell grid of width ``h``::

    u[i, j]  on vertical faces    x = -L + i h,         y = -L + (j + 1/2) h   shape (n+1, n)
    v[i, j]  on horizontal faces  x = -L + (i + 1/2) h, y = -L + j h           shape (n, n+1)
    p[i, j]  at cell centres                                                    shape (n, n)
    nodes    at cell corners                                                    shape (n+1, n+1)

A face is *free* when both adjacent cells exist and are fluid; every other
face carries zero normal velocity. Tangential derivatives that reach across
a solid face use the stored zero (no ghost reflection), so walls are
first-order accurate, the same as the staircase hole.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy import sparse

from .grid import Grid2D


@dataclass(frozen=True, eq=False)
class MACGrid:
    n: int
    h: float
    L: float
    solid: np.ndarray = field(repr=False)

    @classmethod
    def from_grid(cls, grid: Grid2D, solid: np.ndarray | None = None) -> "MACGrid":
        s = ~grid.fluid if solid is None else np.asarray(solid, dtype=bool)
        return cls(grid.n, grid.h, grid.L, s)

    @classmethod
    def square(cls, n: int, L: float, solid: np.ndarray | None = None) -> "MACGrid":
        s = np.zeros((n, n), dtype=bool) if solid is None else np.asarray(solid, dtype=bool)
        return cls(n, 2.0 * L / n, L, s)

    # -- geometry -----------------------------------------------------------
    @cached_property
    def fluid(self) -> np.ndarray:
        return ~self.solid

    @cached_property
    def free_u(self) -> np.ndarray:
        f = np.zeros((self.n + 1, self.n), dtype=bool)
        f[1:-1] = self.fluid[:-1] & self.fluid[1:]
        return f

    @cached_property
    def free_v(self) -> np.ndarray:
        f = np.zeros((self.n, self.n + 1), dtype=bool)
        f[:, 1:-1] = self.fluid[:, :-1] & self.fluid[:, 1:]
        return f

    def _c(self):
        return -self.L + (np.arange(self.n) + 0.5) * self.h

    def _e(self):
        return -self.L + np.arange(self.n + 1) * self.h

    def u_points(self):
        return np.meshgrid(self._e(), self._c(), indexing="ij")

    def v_points(self):
        return np.meshgrid(self._c(), self._e(), indexing="ij")

    def centers(self):
        return np.meshgrid(self._c(), self._c(), indexing="ij")

    def nodes(self):
        return np.meshgrid(self._e(), self._e(), indexing="ij")

    def zeros_u(self):
        return np.zeros((self.n + 1, self.n))

    def zeros_v(self):
        return np.zeros((self.n, self.n + 1))

    def sample(self, f):
        """Sample a vector function ``f(x, y) -> (fx, fy)`` at face points, zero on fixed faces."""
        Xu, Yu = self.u_points()
        Xv, Yv = self.v_points()
        u = np.asarray(np.broadcast_to(f(Xu, Yu)[0], Xu.shape), dtype=float) * self.free_u
        v = np.asarray(np.broadcast_to(f(Xv, Yv)[1], Xv.shape), dtype=float) * self.free_v
        return u, v

    # -- operators ------------------------------------------------------------
    def div(self, u, v):
        return (u[1:] - u[:-1] + v[:, 1:] - v[:, :-1]) / self.h

    def grad(self, p):
        """Face gradient of a cell field; zero on fixed faces."""
        gu = self.zeros_u()
        gv = self.zeros_v()
        gu[1:-1] = (p[1:] - p[:-1]) / self.h
        gv[:, 1:-1] = (p[:, 1:] - p[:, :-1]) / self.h
        return gu * self.free_u, gv * self.free_v

    def velocity_gradients(self, u, v):
        """``(ux, vy)`` at centres and ``(uy, vx)`` at nodes, with zeros beyond the walls."""
        h = self.h
        ux = (u[1:] - u[:-1]) / h
        vy = (v[:, 1:] - v[:, :-1]) / h
        up = np.pad(u, ((0, 0), (1, 1)))
        vp = np.pad(v, ((1, 1), (0, 0)))
        uy = (up[:, 1:] - up[:, :-1]) / h
        vx = (vp[1:] - vp[:-1]) / h
        return ux, vy, uy, vx

    def stress(self, u, v, mu, lam):
        """Centre components S11, S22 and node component S12 of ``2 mu D(u) + (lam - mu) div(u) I``."""
        ux, vy, uy, vx = self.velocity_gradients(u, v)
        d = ux + vy
        return 2 * mu * ux + (lam - mu) * d, 2 * mu * vy + (lam - mu) * d, mu * (uy + vx)

    def stress_divergence(self, u, v, mu, lam):
        """Discrete ``div S(u)`` on free faces; minus the adjoint of :meth:`velocity_gradients`."""
        h = self.h
        S11, S22, S12 = self.stress(u, v, mu, lam)
        fu = self.zeros_u()
        fv = self.zeros_v()
        fu[1:-1] = (S11[1:] - S11[:-1]) / h
        fu += (S12[:, 1:] - S12[:, :-1]) / h
        fv[:, 1:-1] = (S22[:, 1:] - S22[:, :-1]) / h
        fv += (S12[1:] - S12[:-1]) / h
        return fu * self.free_u, fv * self.free_v

    def dissipation_rate(self, u, v, mu, lam) -> float:
        """``int mu |grad u|^2 + lam |div u|^2`` with the staggered differences."""
        ux, vy, uy, vx = self.velocity_gradients(u, v)
        a = self.h * self.h
        return float(mu * (np.sum(ux**2 + vy**2) + np.sum(uy**2 + vx**2)) * a + lam * np.sum((ux + vy) ** 2) * a)

    def stress_work(self, u, v, mu, lam) -> float:
        """``int S(u) : grad u``; equals :meth:`dissipation_rate` for zero-trace fields."""
        ux, vy, uy, vx = self.velocity_gradients(u, v)
        S11, S22, S12 = self.stress(u, v, mu, lam)
        a = self.h * self.h
        return float((np.sum(S11 * ux + S22 * vy) + np.sum(S12 * (uy + vx))) * a)

    # -- norms ----------------------------------------------------------------
    def lp(self, u, v, p) -> float:
        a = self.h * self.h
        if np.isinf(p):
            return float(max(np.abs(u).max(initial=0.0), np.abs(v).max(initial=0.0)))
        return float(((np.sum(np.abs(u) ** p) + np.sum(np.abs(v) ** p)) * a) ** (1.0 / p))

    def grad_lp(self, u, v, p) -> float:
        ux, vy, uy, vx = self.velocity_gradients(u, v)
        a = self.h * self.h
        s = sum(np.sum(np.abs(c) ** p) for c in (ux, vy, uy, vx))
        return float((s * a) ** (1.0 / p))

    def w1p(self, u, v, p) -> float:
        return float((self.lp(u, v, p) ** p + self.grad_lp(u, v, p) ** p) ** (1.0 / p))

    def centred(self, u, v):
        """Average face values to cell centres."""
        return 0.5 * (u[1:] + u[:-1]), 0.5 * (v[:, 1:] + v[:, :-1])

    # -- sparse assembly -------------------------------------------------------
    @cached_property
    def _index(self):
        iu = -np.ones((self.n + 1, self.n), dtype=np.int64)
        iv = -np.ones((self.n, self.n + 1), dtype=np.int64)
        nu = int(self.free_u.sum())
        iu[self.free_u] = np.arange(nu)
        iv[self.free_v] = nu + np.arange(int(self.free_v.sum()))
        ic = -np.ones((self.n, self.n), dtype=np.int64)
        ic[self.fluid] = np.arange(int(self.fluid.sum()))
        return iu, iv, ic, nu + int(self.free_v.sum())

    @property
    def n_velocity(self) -> int:
        return self._index[3]

    @property
    def n_cells(self) -> int:
        return int(self.fluid.sum())

    def pack(self, u, v) -> np.ndarray:
        return np.concatenate([u[self.free_u], v[self.free_v]])

    def unpack(self, w):
        u = self.zeros_u()
        v = self.zeros_v()
        nu = int(self.free_u.sum())
        u[self.free_u] = w[:nu]
        v[self.free_v] = w[nu:]
        return u, v

    def divergence_matrix(self) -> sparse.csr_matrix:
        """Divergence from free faces to fluid cells, shape (n_cells, n_velocity)."""
        iu, iv, ic, nvel = self._index
        rows, cols, vals = [], [], []
        n = self.n
        h = self.h
        for (di, dj, idx, sign) in ((1, 0, iu, 1.0), (0, 0, iu, -1.0)):
            # u[i+di, j] contributes sign/h to cell (i, j)
            fi = idx[di : di + n, :]
            sel = (fi >= 0) & (ic >= 0)
            rows.append(ic[sel]); cols.append(fi[sel]); vals.append(np.full(sel.sum(), sign / h))
        for (dj, idx, sign) in ((1, iv, 1.0), (0, iv, -1.0)):
            fi = idx[:, dj : dj + n]
            sel = (fi >= 0) & (ic >= 0)
            rows.append(ic[sel]); cols.append(fi[sel]); vals.append(np.full(sel.sum(), sign / h))
        return sparse.csr_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(self.n_cells, nvel)
        )

    def gradient_matrix(self) -> sparse.csr_matrix:
        """Stacked velocity-gradient operator (ux, vy at centres; uy, vx at nodes) on free faces."""
        iu, iv, _, nvel = self._index
        n, h = self.n, self.h
        blocks = []

        def diff_rows(idx_hi, idx_lo, nrows):
            r_hi = np.arange(nrows)
            rows, cols, vals = [], [], []
            for idx, s in ((idx_hi, 1.0), (idx_lo, -1.0)):
                sel = idx >= 0
                rows.append(r_hi[sel]); cols.append(idx[sel]); vals.append(np.full(sel.sum(), s / h))
            return sparse.csr_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(nrows, nvel)
            )

        # ux at centres: u[i+1, j] - u[i, j]
        blocks.append(diff_rows(iu[1:].ravel(), iu[:-1].ravel(), n * n))
        # vy at centres
        blocks.append(diff_rows(iv[:, 1:].ravel(), iv[:, :-1].ravel(), n * n))
        # uy at nodes: u[i, j] - u[i, j-1] with zero padding
        up = np.pad(iu, ((0, 0), (1, 1)), constant_values=-1)
        blocks.append(diff_rows(up[:, 1:].ravel(), up[:, :-1].ravel(), (n + 1) * (n + 1)))
        vp = np.pad(iv, ((1, 1), (0, 0)), constant_values=-1)
        blocks.append(diff_rows(vp[1:].ravel(), vp[:-1].ravel(), (n + 1) * (n + 1)))
        return sparse.vstack(blocks).tocsr()

    def vector_laplacian(self) -> sparse.csc_matrix:
        """``G^T G`` on free faces: the SPD matrix of the Dirichlet energy ``sum |grad v|^2``."""
        G = self.gradient_matrix()
        return (G.T @ G).tocsc()

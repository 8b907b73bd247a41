"""Logarithmic capacity cutoffs and their mollified versions.

Every cutoff here is radial, so each one is a :class:`RadialProfile` holding
the value and the first two radial derivatives in closed form. Cartesian
gradients and Hessians come from the chain rule, with no finite differences.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .grid import radial_quadrature

PLATEAU = 1.1
SUPPORT = 1.2
OUTER_SCALE = 13.0 / 10.0


class CutoffError(ValueError):
    pass


# ---------------------------------------------------------------------------
# smooth step built from s(t) = exp(-1/t)
# ---------------------------------------------------------------------------


def _s(t):
    t = np.asarray(t, dtype=float)
    pos = t > 0
    safe = np.where(pos, t, 1.0)
    e = np.exp(-1.0 / safe)
    s0 = np.where(pos, e, 0.0)
    s1 = np.where(pos, e / safe**2, 0.0)
    s2 = np.where(pos, e * (1.0 / safe**4 - 2.0 / safe**3), 0.0)
    return s0, s1, s2


def smooth_step(t):
    """Return ``(S, S', S'')`` for the C-infinity step with S = 0 on t <= 0, 1 on t >= 1."""
    t = np.asarray(t, dtype=float)
    a0, a1, a2 = _s(t)
    b0, b1, b2 = _s(1.0 - t)
    d = a0 + b0
    S = a0 / d
    P = a1 * b0 + a0 * b1
    dD = a1 - b1
    S1 = P / d**2
    dP = a2 * b0 - a0 * b2
    S2 = (dP * d - 2.0 * P * dD) / d**3
    return S, S1, S2


def mollifier_g(y):
    """The plateau function: 1 on [0, 1.1], 0 on [1.2, inf), antisymmetric transition about 1.15."""
    return 1.0 - smooth_step((np.asarray(y, dtype=float) - PLATEAU) / (SUPPORT - PLATEAU))[0]


def _g_derivs(y):
    w = SUPPORT - PLATEAU
    S, S1, S2 = smooth_step((np.asarray(y, dtype=float) - PLATEAU) / w)
    return 1.0 - S, -S1 / w, -S2 / w**2


# ---------------------------------------------------------------------------
# radial profiles
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RadialProfile:
    """A radial function ``x -> f(|x|)`` with closed-form radial derivatives."""

    derivs: Callable[[np.ndarray], tuple[np.ndarray, np.ndarray, np.ndarray]]
    breakpoints: tuple[float, ...] = ()
    support: float = math.inf

    def __call__(self, r):
        return self.derivs(np.asarray(r, dtype=float))[0]

    def d1(self, r):
        return self.derivs(np.asarray(r, dtype=float))[1]

    def d2(self, r):
        return self.derivs(np.asarray(r, dtype=float))[2]

    def value(self, x, y):
        return self(np.hypot(x, y))

    def grad(self, x, y):
        r = np.hypot(x, y)
        _, f1, _ = self.derivs(r)
        rs = np.where(r > 0, r, 1.0)
        c = np.where(r > 0, f1 / rs, 0.0)
        return c * x, c * y

    def hessian(self, x, y):
        """Return ``(H11, H12, H21, H22)``; H12 and H21 are formed separately."""
        r = np.hypot(x, y)
        _, f1, f2 = self.derivs(r)
        rs = np.where(r > 0, r, 1.0)
        a = np.where(r > 0, f1 / rs, f2)
        b = np.where(r > 0, (f2 - f1 / rs) / rs**2, 0.0)
        H11 = a + b * x * x
        H12 = b * x * y
        H21 = b * y * x
        H22 = a + b * y * y
        return H11, H12, H21, H22


def log_profile(A: float, B: float, z):
    """``f_{A,B}``: 1 on [0, A], log-interpolated down to 0 on [A, B], 0 beyond."""
    return _log_profile_derivs(A, B, np.asarray(z, dtype=float))[0]


def _log_profile_derivs(A, B, z):
    if not 0 < A < B:
        raise CutoffError(f"log_profile needs 0 < A < B, got A={A}, B={B}")
    z = np.asarray(z, dtype=float)
    la = math.log(B / A)
    inside = (z >= A) & (z <= B)
    zs = np.where(inside, z, A)
    f0 = np.where(z < A, 1.0, np.where(inside, (np.log(zs) - math.log(B)) / (math.log(A) - math.log(B)), 0.0))
    f1 = np.where(inside, -1.0 / (zs * la), 0.0)
    f2 = np.where(inside, 1.0 / (zs**2 * la), 0.0)
    return f0, f1, f2


def default_alpha(eps: float, L: float | None = None) -> float:
    """``max(2, |ln eps|)``; clipped so that ``eps * alpha < L`` when L is given."""
    a = max(2.0, abs(math.log(eps)))
    if L is not None and eps * a >= L:
        a = 0.999 * L / eps
        if a <= 1.5:
            raise CutoffError(f"eps={eps} too large for L={L}: no admissible alpha")
    return a


@dataclass(frozen=True)
class CutoffSpec:
    eps: float
    alpha: float

    def __post_init__(self):
        if not self.eps > 0:
            raise CutoffError(f"eps must be positive, got {self.eps}")
        if not self.alpha > 1:
            raise CutoffError(f"alpha must exceed 1, got {self.alpha}")

    @classmethod
    def with_default_alpha(cls, eps: float, L: float | None = None) -> "CutoffSpec":
        return cls(eps, default_alpha(eps, L))

    @property
    def outer(self) -> float:
        return self.eps * self.alpha

    def tilde(self) -> RadialProfile:
        eps, outer = self.eps, self.outer
        return RadialProfile(lambda r: _log_profile_derivs(eps, outer, r), (eps, outer), outer)

    def smooth(self) -> RadialProfile:
        eps, alpha = self.eps, self.alpha
        outer = self.outer

        def derivs(r):
            t0, t1, t2 = _log_profile_derivs(eps, outer, r)
            ga, ga1, ga2 = _g_derivs(r / eps)
            ga1, ga2 = ga1 / eps, ga2 / eps**2
            k = OUTER_SCALE / outer
            gb, gb1, gb2 = _g_derivs(k * r)
            gb1, gb2 = gb1 * k, gb2 * k * k
            # eta = 1 + (1 - ga) * (t * gb - 1)
            u0, u1, u2 = 1.0 - ga, -ga1, -ga2
            w0 = t0 * gb - 1.0
            w1 = t1 * gb + t0 * gb1
            w2 = t2 * gb + 2.0 * t1 * gb1 + t0 * gb2
            return 1.0 + u0 * w0, u1 * w0 + u0 * w1, u2 * w0 + 2.0 * u1 * w1 + u0 * w2

        bps = (eps, PLATEAU * eps, SUPPORT * eps, outer * PLATEAU / OUTER_SCALE, outer * SUPPORT / OUTER_SCALE, outer)
        return RadialProfile(derivs, tuple(sorted(bps)), outer * SUPPORT / OUTER_SCALE)


def eta_tilde(spec: CutoffSpec, x, y=None):
    r = np.hypot(x, y) if y is not None else np.asarray(x, dtype=float)
    return spec.tilde()(r)


def eta_smooth(spec: CutoffSpec, x, y=None):
    r = np.hypot(x, y) if y is not None else np.asarray(x, dtype=float)
    return spec.smooth()(r)


def frak_n_spec(eps: float, L: float | None = None) -> CutoffSpec:
    """Cutoff spec behind the complement function: radius ``2 eps`` with ``alpha_{2 eps}``."""
    return CutoffSpec.with_default_alpha(2.0 * eps, L)


@dataclass(frozen=True)
class Complement:
    """``n_eps = 1 - eta_{2 eps, alpha_{2 eps}}``: 0 on B_{2 eps}, 1 far from the hole."""

    eps: float
    spec: CutoffSpec

    @classmethod
    def build(cls, eps: float, L: float | None = None) -> "Complement":
        return cls(eps, frak_n_spec(eps, L))

    @property
    def support_radius(self) -> float:
        """Radius outside which n_eps == 1."""
        return self.spec.outer * SUPPORT / OUTER_SCALE

    def _profile(self):
        return self.spec.smooth()

    def value(self, x, y):
        return 1.0 - self._profile().value(x, y)

    def grad(self, x, y):
        gx, gy = self._profile().grad(x, y)
        return -gx, -gy

    def hessian(self, x, y):
        return tuple(-h for h in self._profile().hessian(x, y))

    def breakpoints(self) -> tuple[float, ...]:
        return self._profile().breakpoints


def frak_n(eps: float, x, y, L: float | None = None):
    return Complement.build(eps, L).value(x, y)


# ---------------------------------------------------------------------------
# norm reports
# ---------------------------------------------------------------------------

WHICH = ("grad_tilde", "x_hess_tilde", "grad", "x_grad", "x_hess", "value")


@dataclass(frozen=True)
class NormReport:
    """``numeric`` is the q-th power of the L^q norm (the integral of |.|^q).

    ``closed_form`` is set only where an exact identity exists. For the smooth
    family, ``bound_ratio`` is numeric divided by the shape of the upper bound,
    i.e. the constant a bound of that shape would need.
    """

    which: str
    eps: float
    alpha: float
    q: float
    numeric: float
    closed_form: float | None = None
    bound_ratio: float | None = None

    @property
    def rel_err(self) -> float | None:
        if self.closed_form is None:
            return None
        return abs(self.numeric - self.closed_form) / abs(self.closed_form)


def closed_form_grad_tilde(eps: float, alpha: float, q: float) -> float:
    """Exact ``int |grad eta_tilde|^q`` for the logarithmic cutoff."""
    la = math.log(alpha)
    if q == 2:
        return 2 * math.pi / la
    if q < 2:
        return 2 * math.pi / (2 - q) * (alpha ** (2 - q) - 1) / la**q * eps ** (2 - q)
    return 2 * math.pi / (q - 2) / la**q * eps ** (2 - q) * (1 - alpha ** (2 - q))


def _bound_shape(which: str, eps: float, alpha: float, q: float) -> float:
    la = math.log(alpha)
    if which in ("grad", "x_hess"):
        if q == 2:
            return 1.0 / la
        if q < 2:
            return (eps * alpha) ** (2 - q) / ((2 - q) * la**q)
        return eps ** (2 - q) / ((q - 2) * la**q)
    # value and |x| grad: L^q norm bounded by (eps alpha)^{2/q}, so the q-th power by (eps alpha)^2
    return (eps * alpha) ** 2


def _radial_integrand(profile: RadialProfile, which: str):
    if which in ("grad_tilde", "grad"):
        return profile.d1
    if which == "value":
        return profile
    if which == "x_grad":
        return lambda r: r * profile.d1(r)
    if which in ("x_hess_tilde", "x_hess"):
        # Frobenius norm of the Hessian of a radial function: sqrt(f''^2 + (f'/r)^2)
        return lambda r: r * np.hypot(profile.d2(r), profile.d1(r) / r)
    raise CutoffError(f"unknown norm selector {which!r}")


def cutoff_norm_report(spec: CutoffSpec, q: float, which: str = "grad_tilde") -> NormReport:
    """Measure ``int |.|^q`` over R^2 for one of the cutoff quantities in :data:`WHICH`."""
    if q < 1:
        raise CutoffError(f"q must be >= 1, got {q}")
    if which not in WHICH:
        raise CutoffError(f"unknown norm selector {which!r}; expected one of {WHICH}")
    tilde = which.endswith("_tilde")
    profile = spec.tilde() if tilde else spec.smooth()
    r_lo = spec.eps if tilde else (0.0 if which == "value" else spec.eps * PLATEAU)
    r_hi = spec.outer if tilde else profile.support
    numeric = radial_quadrature(_radial_integrand(profile, which), q, r_lo, r_hi, profile.breakpoints)
    if which == "grad_tilde":
        return NormReport(which, spec.eps, spec.alpha, q, numeric, closed_form_grad_tilde(spec.eps, spec.alpha, q))
    if tilde:
        return NormReport(which, spec.eps, spec.alpha, q, numeric)
    return NormReport(which, spec.eps, spec.alpha, q, numeric, bound_ratio=numeric / _bound_shape(which, spec.eps, spec.alpha, q))

"""Test functions with vanishing moments and regularisation of initial data.

A profile of order ``q`` is ``phi(x) = p(x) * beta(x)`` where ``beta`` is the
standard bump on ``[-R, R]`` and ``p`` has degree ``q``.  The coefficients of
``p`` solve the Hankel moment system ``M c = e_0`` with
``M[j, k] = int x**(j+k) beta(x) dx``, so that ``int phi = 1`` and
``int x**j phi = 0`` for ``1 <= j <= q``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted


class QuadratureError(RuntimeError):
    pass


class SupportError(ValueError):
    """Raised when a regularised point datum leaves the domain."""


def adaptive_simpson(f, a, b, tol=1e-10, min_level=3, max_level=48):
    """Integrate a vectorised ``f`` over ``[a, b]`` with adaptive Simpson.

    All intervals of one refinement level are processed together; an
    interval is accepted when the Richardson estimate ``|S2 - S1| / 15`` is
    below its share of ``tol``.
    """
    if b == a:
        return 0.0
    lo = np.array([a], dtype=float)
    hi = np.array([b], dtype=float)
    mid = 0.5 * (lo + hi)
    fa, fm, fb = f(lo), f(mid), f(hi)
    whole = (hi - lo) / 6.0 * (fa + 4.0 * fm + fb)
    tols = np.array([tol], dtype=float)
    accepted = []
    for level in range(max_level):
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm, frm = f(lm), f(rm)
        left = (mid - lo) / 6.0 * (fa + 4.0 * flm + fm)
        right = (hi - mid) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        ok = np.abs(delta) <= 15.0 * tols
        if level < min_level:
            ok[:] = False
        if ok.any():
            accepted.append(left[ok] + right[ok] + delta[ok] / 15.0)
        if ok.all():
            return float(np.sum(np.concatenate(accepted)))
        k = ~ok
        lo, hi = np.concatenate([lo[k], mid[k]]), np.concatenate([mid[k], hi[k]])
        fa, fm, fb = (np.concatenate([fa[k], fm[k]]),
                      np.concatenate([flm[k], frm[k]]),
                      np.concatenate([fm[k], fb[k]]))
        whole = np.concatenate([left[k], right[k]])
        tols = np.concatenate([tols[k], tols[k]]) * 0.5
    raise QuadratureError(f"adaptive Simpson did not converge on [{a}, {b}] to {tol}")


def standard_bump(x, radius=1.0):
    """``exp(-1 / (1 - (x/R)**2))`` inside ``(-R, R)``, zero outside."""
    x = np.asarray(x, dtype=float)
    s = x / radius
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    out[inside] = np.exp(-1.0 / (1.0 - s[inside] ** 2))
    return out


def standard_bump_derivative(x, radius=1.0):
    x = np.asarray(x, dtype=float)
    s = x / radius
    out = np.zeros_like(s)
    inside = np.abs(s) < 1.0
    si = s[inside]
    w = 1.0 - si ** 2
    out[inside] = np.exp(-1.0 / w) * (-2.0 * si / w ** 2) / radius
    return out


@dataclass(frozen=True)
class MollifierSpec:
    q: int = 0
    support_radius: float = 1.0
    quadrature_tolerance: float = 1e-10

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 0:
            raise ValueError(f"moment order q must be a non-negative integer, got {self.q!r}")
        if not self.support_radius > 0:
            raise ValueError("support_radius must be positive")
        if not self.quadrature_tolerance > 0:
            raise ValueError("quadrature_tolerance must be positive")


@dataclass(frozen=True, eq=False)
class MollifierProfile:
    """An order-``q`` test function ``p * beta``; immutable once built."""

    spec: MollifierSpec
    polynomial_coeffs: np.ndarray = field(repr=False)

    @property
    def q(self):
        return self.spec.q

    @property
    def radius(self):
        return self.spec.support_radius

    @property
    def support_diameter(self):
        return 2.0 * self.spec.support_radius

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        p = np.polynomial.polynomial.polyval(x / self.radius, self.polynomial_coeffs)
        return p * standard_bump(x, self.radius)

    def derivative(self, x):
        x = np.asarray(x, dtype=float)
        c = self.polynomial_coeffs
        s = x / self.radius
        p = np.polynomial.polynomial.polyval(s, c)
        dp = np.polynomial.polynomial.polyval(s, np.polynomial.polynomial.polyder(c)) / self.radius
        return dp * standard_bump(x, self.radius) + p * standard_bump_derivative(x, self.radius)

    def cumulative(self, z, nodes=128):
        """``int_{-R}^{z} phi(s) ds`` for an array of upper limits."""
        z = np.clip(np.asarray(z, dtype=float), -self.radius, self.radius)
        t, w = np.polynomial.legendre.leggauss(nodes)
        lo = -self.radius
        half = 0.5 * (z - lo)
        s = lo + half[..., None] * (t + 1.0)
        return np.sum(w * self(s), axis=-1) * half


@lru_cache(maxsize=None)
def build_mollifier(spec: MollifierSpec) -> MollifierProfile:
    q, R = spec.q, spec.support_radius
    # Work in s = x/R; the matrix needs tighter quadrature than the moment target.
    tol = spec.quadrature_tolerance * 1e-3
    raw = np.array([adaptive_simpson(lambda s, k=k: s ** k * standard_bump(s), -1.0, 1.0, tol)
                    for k in range(2 * q + 1)])
    M = np.array([[raw[j + k] for k in range(q + 1)] for j in range(q + 1)])
    rhs = np.zeros(q + 1)
    rhs[0] = 1.0 / R
    try:
        coeffs = np.linalg.solve(M, rhs)
    except np.linalg.LinAlgError as exc:
        raise QuadratureError(f"singular moment system for q={q}") from exc
    coeffs.setflags(write=False)
    return MollifierProfile(spec, coeffs)


def moment(profile: MollifierProfile, j: int) -> float:
    if j < 0:
        raise ValueError("moment index must be non-negative")
    R = profile.radius
    return adaptive_simpson(lambda x: x ** j * profile(x), -R, R, profile.spec.quadrature_tolerance)


def scaled_eval(profile: MollifierProfile, eps: float, x):
    """``phi_eps(x) = phi(x / eps) / eps`` (one space dimension)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    return profile(np.asarray(x, dtype=float) / eps) / eps


@dataclass(frozen=True)
class InitialDatum:
    """Catalogue of initial data: point masses, their derivative, jumps and functions."""

    kind: str
    x0: float = 0.5
    function: Optional[Callable] = field(default=None, compare=False)

    KINDS = ("delta", "delta_prime", "heaviside", "smooth")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown datum kind {self.kind!r}; expected one of {self.KINDS}")
        if self.kind == "smooth" and self.function is None:
            raise ValueError("smooth datum needs a function")

    @classmethod
    def delta(cls, x0=0.5):
        return cls("delta", x0)

    @classmethod
    def delta_prime(cls, x0=0.5):
        return cls("delta_prime", x0)

    @classmethod
    def heaviside(cls, x0=0.5):
        return cls("heaviside", x0)

    @classmethod
    def smooth(cls, g):
        return cls("smooth", function=g)

    @property
    def point_supported(self):
        return self.kind in ("delta", "delta_prime")


def _grid_points(grid):
    return np.asarray(grid.x if hasattr(grid, "x") else grid, dtype=float)


def mollify(datum: InitialDatum, profile: MollifierProfile, eps: float, grid, n_nodes=257):
    """Sample ``datum * phi_eps`` on ``grid`` (a DomainSpec or an array of nodes)."""
    if not eps > 0:
        raise ValueError("eps must be positive")
    x = _grid_points(grid)
    R = profile.radius
    if datum.point_supported and hasattr(grid, "a"):
        if datum.x0 - eps * R <= grid.a or datum.x0 + eps * R >= grid.b:
            raise SupportError(
                f"support [{datum.x0 - eps * R}, {datum.x0 + eps * R}] escapes "
                f"({grid.a}, {grid.b}); eps={eps} too large for x0={datum.x0}")
    if datum.kind == "delta":
        return scaled_eval(profile, eps, x - datum.x0)
    if datum.kind == "delta_prime":
        return profile.derivative((x - datum.x0) / eps) / eps ** 2
    if datum.kind == "heaviside":
        return profile.cumulative((x - datum.x0) / eps)
    # Trapezoid in s = y/eps; phi is flat to all orders at +-R so the
    # endpoint corrections vanish.
    s = np.linspace(-R, R, n_nodes)
    w = np.full(n_nodes, s[1] - s[0])
    w[0] = w[-1] = 0.5 * (s[1] - s[0])
    vals = datum.function(x[:, None] - eps * s[None, :])
    return vals @ (w * profile(s))


class Mollifier(TransformerMixin, BaseEstimator):
    """Convolve sampled signals with ``phi_eps`` on a uniform grid.

    ``fit`` builds the order-``q`` profile; ``transform`` takes rows sampled
    with spacing ``dx`` and returns the discrete convolution, treating values
    outside the sampled window as zero.
    """

    def __init__(self, q=0, eps=0.1, dx=0.01, support_radius=1.0):
        self.q = q
        self.eps = eps
        self.dx = dx
        self.support_radius = support_radius

    def fit(self, X=None, y=None):
        if not self.eps > 0 or not self.dx > 0:
            raise ValueError("eps and dx must be positive")
        self.profile_ = build_mollifier(MollifierSpec(self.q, self.support_radius))
        half = int(np.floor(self.eps * self.support_radius / self.dx))
        offsets = np.arange(-half, half + 1) * self.dx
        self.kernel_ = scaled_eval(self.profile_, self.eps, offsets) * self.dx
        return self

    def transform(self, X):
        check_is_fitted(self, "kernel_")
        X = check_array(X, ensure_min_features=1)
        return np.vstack([np.convolve(row, self.kernel_, mode="same") for row in X])

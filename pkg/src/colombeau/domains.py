"""Interval domains, exhaustions, cut-offs, restrictions and traces."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mollifier import MollifierSpec, build_mollifier
from .nets import FieldNet, GridMismatchError


@dataclass(frozen=True)
class DomainSpec:
    """Closed interval ``[a, b]`` sampled at ``nx`` uniform nodes (endpoints included)."""

    a: float = 0.0
    b: float = 1.0
    nx: int = 201

    mollifier_dim = 1

    def __post_init__(self):
        if not self.a < self.b:
            raise ValueError("domain needs a < b")
        if self.nx < 16:
            raise ValueError("nx must be at least 16")

    @property
    def x(self):
        return np.linspace(self.a, self.b, self.nx)

    @property
    def h(self):
        return (self.b - self.a) / (self.nx - 1)

    @property
    def shape(self):
        return (self.nx,)

    @property
    def spacings(self):
        return (self.h,)


@dataclass(frozen=True)
class SpaceTimeGrid:
    """``Q-bar = [a, b] x [0, T]`` with values stored as ``(nx, nt)`` arrays."""

    domain: DomainSpec = DomainSpec()
    T: float = 0.1
    nt: int = 201

    mollifier_dim = 2

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError("T must be positive")
        if self.nt < 16:
            raise ValueError("nt must be at least 16")

    @property
    def x(self):
        return self.domain.x

    @property
    def t(self):
        return np.linspace(0.0, self.T, self.nt)

    @property
    def dt(self):
        return self.T / (self.nt - 1)

    @property
    def shape(self):
        return (self.domain.nx, self.nt)

    @property
    def spacings(self):
        return (self.domain.h, self.dt)


@dataclass(frozen=True)
class BoundaryCarrier:
    """``Q* = {a, b} x [0, T]``: two time trajectories."""

    grid: SpaceTimeGrid

    mollifier_dim = 2

    @property
    def t(self):
        return self.grid.t

    @property
    def shape(self):
        return (2, self.grid.nt)

    @property
    def spacings(self):
        return (None, self.grid.dt)


def exhaustion(domain: DomainSpec, l: int):
    """``Omega_l = (a + d_l, b - d_l)`` with ``d_l = (b - a) / (2 (l + 2))``."""
    if l < 0:
        raise ValueError("exhaustion level must be >= 0")
    d = (domain.b - domain.a) / (2.0 * (l + 2))
    return domain.a + d, domain.b - d


def _smooth_step(t):
    phi = build_mollifier(MollifierSpec(0))
    t = np.asarray(t, dtype=float)
    inner = phi.cumulative(np.clip(t, -1.0, 1.0))
    return np.where(t >= 1.0, 1.0, np.where(t <= -1.0, 0.0, inner))


@dataclass(frozen=True, eq=False)
class CutoffFamily:
    level: int
    domain: DomainSpec
    field: np.ndarray
    left: float
    right: float
    width: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return _smooth_step((x - self.left) / self.width) * _smooth_step((self.right - x) / self.width)


def build_cutoff(domain: DomainSpec, l: int, min_cells=8) -> CutoffFamily:
    """``chi_l``: equal to 1 on ``Omega_l``, supported inside ``Omega_{l+1}``.

    The indicator of the interval halfway between the two exhaustion sets is
    convolved with a bump of radius 0.45 * gap.
    """
    lo_l, hi_l = exhaustion(domain, l)
    lo_n, _ = exhaustion(domain, l + 1)
    gap = lo_l - lo_n
    if gap / domain.h < min_cells - 1e-9:
        raise ValueError(
            f"unresolvable cutoff gap at l={l}: {gap / domain.h:.2f} cells < {min_cells}; refine nx")
    width = 0.45 * gap
    left, right = lo_l - 0.5 * gap, hi_l + 0.5 * gap
    fam = CutoffFamily(l, domain, np.empty(0), left, right, width)
    values = fam(domain.x)
    values.setflags(write=False)
    return CutoffFamily(l, domain, values, left, right, width)


def window(domain: DomainSpec, l: int) -> DomainSpec:
    """The aligned sub-domain of grid nodes lying in the closure of ``Omega_l``."""
    lo, hi = exhaustion(domain, l)
    x = domain.x
    tol = 1e-12 * (domain.b - domain.a)
    idx = np.nonzero((x >= lo - tol) & (x <= hi + tol))[0]
    if idx.size < 16:
        raise ValueError(f"window Omega_{l} holds fewer than 16 nodes")
    return DomainSpec(float(x[idx[0]]), float(x[idx[-1]]), int(idx.size))


def _offset(parent: DomainSpec, sub: DomainSpec):
    j0 = int(round((sub.a - parent.a) / parent.h))
    tol = 1e-9 * (parent.b - parent.a)
    if j0 < 0 or j0 + sub.nx > parent.nx or abs(sub.h - parent.h) > tol:
        raise GridMismatchError("sub-carrier nodes are not a subset of the parent grid")
    if np.max(np.abs(parent.x[j0:j0 + sub.nx] - sub.x)) > tol:
        raise GridMismatchError("sub-carrier nodes are not aligned with the parent grid")
    return j0


def restrict(f: FieldNet, sub_carrier) -> FieldNet:
    """Index-subset copy of ``f`` onto a sub-carrier (no interpolation).

    The parent field is kept in ``meta`` so derivatives of the restriction
    can be taken on the parent grid, where the window edges are interior.
    """
    carrier = f.carrier
    if isinstance(carrier, SpaceTimeGrid):
        if not isinstance(sub_carrier, SpaceTimeGrid) or (sub_carrier.T, sub_carrier.nt) != (carrier.T, carrier.nt):
            raise GridMismatchError("space-time restriction keeps the time grid")
        j0 = _offset(carrier.domain, sub_carrier.domain)
        vals = f.values[:, :, j0:j0 + sub_carrier.domain.nx, :]
    elif isinstance(carrier, DomainSpec):
        j0 = _offset(carrier, sub_carrier)
        vals = f.values[:, :, j0:j0 + sub_carrier.nx]
    else:
        raise TypeError(f"cannot restrict a field on {type(carrier).__name__}")
    return FieldNet(f.grids, sub_carrier, vals.copy(), {"parent": f, "offset": j0})


def window_carrier(carrier, l):
    if isinstance(carrier, SpaceTimeGrid):
        return SpaceTimeGrid(window(carrier.domain, l), carrier.T, carrier.nt)
    return window(carrier, l)


def trace_time(f: FieldNet, t0: float) -> FieldNet:
    """Freeze time at the grid node nearest ``t0``; the order index is kept as is."""
    grid = f.carrier
    if not isinstance(grid, SpaceTimeGrid):
        raise TypeError("time trace needs a space-time field")
    if not 0.0 <= t0 <= grid.T:
        raise ValueError(f"t0={t0} outside [0, {grid.T}]")
    k = int(np.argmin(np.abs(grid.t - t0)))
    meta = {"t0": t0, "t0_snapped": float(grid.t[k]), "snap_distance": float(abs(grid.t[k] - t0))}
    return FieldNet(f.grids, grid.domain, f.values[..., k].copy(), meta)


def time_constant(f: FieldNet, grid: SpaceTimeGrid) -> FieldNet:
    if f.carrier != grid.domain:
        raise GridMismatchError("field and space-time grid disagree on the domain")
    vals = np.repeat(f.values[..., None], grid.nt, axis=-1)
    return FieldNet(f.grids, grid, vals)


def trace_boundary(f: FieldNet) -> FieldNet:
    """The two lateral trajectories ``x = a`` and ``x = b``."""
    grid = f.carrier
    if not isinstance(grid, SpaceTimeGrid):
        raise TypeError("boundary trace needs a space-time field")
    return FieldNet(f.grids, BoundaryCarrier(grid), f.values[:, :, [0, -1], :].copy())

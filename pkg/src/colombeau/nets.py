"""Generalised numbers and functions sampled over an (order, eps) lattice.

A net stores one value (or one sampled field) per cell ``(q, eps)``: the
representative evaluated at the scaled order-``q`` profile ``phi_eps``.
Asymptotic statements about the class are certified by least-squares fits
of ``log|value|`` against ``log eps`` over the smallest ``fit_window`` eps.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from ._csvio import write_csv

FLOOR = 1e-300
ZERO_SLOPE = math.inf


class GridMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class EpsilonGrid:
    eps_values: tuple = tuple(2.0 ** -k for k in range(3, 13))
    fit_window: int = 5

    def __post_init__(self):
        e = np.asarray(self.eps_values, dtype=float)
        object.__setattr__(self, "eps_values", tuple(float(v) for v in e))
        if e.ndim != 1 or e.size == 0:
            raise ValueError("eps grid must be a non-empty 1-d sequence")
        if np.any(e <= 0) or np.any(e > 1):
            raise ValueError("eps values must lie in (0, 1]")
        if np.any(np.diff(e) >= 0):
            raise ValueError("eps values must be strictly decreasing")
        if not 2 <= self.fit_window <= e.size:
            raise ValueError(f"fit_window must be in [2, {e.size}]")

    @classmethod
    def geometric(cls, eps_max=2.0 ** -3, eps_min=2.0 ** -12, count=10, fit_window=5):
        return cls(tuple(np.geomspace(eps_max, eps_min, count)), min(fit_window, count))

    @property
    def values(self):
        return np.asarray(self.eps_values)

    @property
    def window(self):
        """Index slice of the smallest ``fit_window`` eps values."""
        return slice(len(self.eps_values) - self.fit_window, None)


@dataclass(frozen=True)
class OrderGrid:
    q_values: tuple = tuple(range(7))

    def __post_init__(self):
        q = tuple(int(v) for v in self.q_values)
        object.__setattr__(self, "q_values", q)
        if not q:
            raise ValueError("order grid must be non-empty")
        if any(v < 0 for v in q) or any(b <= a for a, b in zip(q, q[1:])):
            raise ValueError("orders must be increasing non-negative integers")

    @property
    def values(self):
        return np.asarray(self.q_values)


@dataclass(frozen=True)
class NetGrids:
    """The (OrderGrid, EpsilonGrid) pair indexing every net, plus i(phi)."""

    orders: OrderGrid = field(default_factory=OrderGrid)
    eps: EpsilonGrid = field(default_factory=EpsilonGrid)
    support_radius: float = 1.0

    @property
    def shape(self):
        return (len(self.orders.q_values), len(self.eps.eps_values))

    @property
    def support_diameters(self):
        return np.full(len(self.orders.q_values), 2.0 * self.support_radius)

    def cells(self):
        for i, q in enumerate(self.orders.q_values):
            for j, e in enumerate(self.eps.eps_values):
                yield i, j, q, e


def _check_same(a, b):
    if a.grids != b.grids:
        raise GridMismatchError("nets live on different (q, eps) grids")
    if isinstance(a, FieldNet) and isinstance(b, FieldNet) and a.carrier != b.carrier:
        raise GridMismatchError("fields are sampled on different carriers")


class _NetOps:
    def _new(self, values):
        raise NotImplementedError

    def _binary(self, other, op):
        if isinstance(other, _NetOps):
            _check_same(self, other)
            other = other.values
        return self._new(op(self.values, other))

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __rsub__(self, other):
        return self._new(other - self.values)

    def __mul__(self, other):
        if isinstance(other, ScalarNet) and isinstance(self, FieldNet):
            _check_same(self, other)
            extra = (None,) * (self.values.ndim - 2)
            return self._new(self.values * other.values[(...,) + extra])
        return self._binary(other, np.multiply)

    def __rmul__(self, other):
        if isinstance(other, ScalarNet):
            return self.__mul__(other)
        return self._new(other * self.values)

    def __neg__(self):
        return self._new(-self.values)

    def __abs__(self):
        return self._new(np.abs(self.values))

    def __pow__(self, power):
        return self._new(np.power(self.values, power))


@dataclass(frozen=True, eq=False)
class ScalarNet(_NetOps):
    """A generalised number: one real per (q, eps) cell.

    ``dim`` is the mollifier dimension of the carrier the number came from
    (1 for the space domain, 2 for the space-time cylinder); it selects the
    matching scale elements in comparisons.
    """

    grids: NetGrids
    values: np.ndarray
    dim: int = 1

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        if v.shape != self.grids.shape:
            raise GridMismatchError(f"values shape {v.shape} != grid shape {self.grids.shape}")
        if np.isnan(v).any():
            raise ValueError("net values must not be NaN")
        object.__setattr__(self, "values", v)

    def _new(self, values):
        return ScalarNet(self.grids, values, self.dim)

    @property
    def support_diameter(self):
        return self.grids.support_diameters

    @classmethod
    def from_function(cls, grids, fn, dim=1):
        """Build from ``fn(q, eps, i_q)`` evaluated per cell."""
        vals = np.empty(grids.shape)
        diam = grids.support_diameters
        for i, j, q, e in grids.cells():
            vals[i, j] = fn(q, e, diam[i])
        return cls(grids, vals, dim)

    def to_csv(self, path):
        rows = [(q, e, self.values[i, j]) for i, j, q, e in self.grids.cells()]
        return write_csv(path, ["q", "eps", "value"], rows)


@dataclass(frozen=True, eq=False)
class FieldNet(_NetOps):
    """A generalised function: one sampled field per (q, eps) cell.

    ``values`` has shape ``grids.shape + carrier.shape``.
    """

    grids: NetGrids
    carrier: object
    values: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        expected = tuple(self.grids.shape) + tuple(self.carrier.shape)
        if v.shape != expected:
            raise GridMismatchError(f"values shape {v.shape} != {expected}")
        if not np.isfinite(v).all():
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)

    def _new(self, values):
        return FieldNet(self.grids, self.carrier, values)

    @property
    def dim(self):
        return self.carrier.mollifier_dim

    def cell(self, q, eps):
        i = self.grids.orders.q_values.index(q)
        j = int(np.argmin(np.abs(self.grids.eps.values - eps)))
        return self.values[i, j]

    @classmethod
    def from_function(cls, grids, carrier, fn):
        """Build from ``fn(q, eps, i_q)`` returning an array of ``carrier.shape``."""
        vals = np.empty(tuple(grids.shape) + tuple(carrier.shape))
        diam = grids.support_diameters
        for i, j, q, e in grids.cells():
            vals[i, j] = fn(q, e, diam[i])
        return cls(grids, carrier, vals)

    def to_csv(self, path):
        nd = len(self.carrier.shape)
        header = ["q", "eps"] + [f"i{k}" for k in range(nd)] + ["value"]
        rows = []
        for i, j, q, e in self.grids.cells():
            cell = self.values[i, j]
            for idx in np.ndindex(cell.shape):
                rows.append((q, e) + tuple(int(k) for k in idx) + (cell[idx],))
        return write_csv(path, header, rows)


def net_arithmetic(a, b=None, op="add", power=None):
    ops = {
        "add": lambda: a + b,
        "sub": lambda: a - b,
        "mul": lambda: a * b,
        "neg": lambda: -a,
        "abs": lambda: abs(a),
        "pow": lambda: a ** power,
    }
    if op not in ops:
        raise ValueError(f"unknown op {op!r}")
    return ops[op]()


def scale_element(r, grids: NetGrids, dim=1, m=1):
    """The scale net ``alpha_r``: ``(i_q * eps)**r`` on a ``dim``-dimensional index.

    Nets over an ``(m+1)``-dimensional carrier are indexed by the
    ``m``-dimensional eps; its own parameter is ``eps**(m/(m+1))``.
    """
    e = grids.eps.values ** (m / dim)
    vals = (grids.support_diameters[:, None] * e[None, :]) ** r
    return ScalarNet(grids, vals, dim)


@dataclass(frozen=True)
class ExponentFit:
    q_values: tuple
    slope: np.ndarray
    intercept: np.ndarray
    residual: np.ndarray
    zero: np.ndarray

    def rows(self):
        for k, q in enumerate(self.q_values):
            yield q, self.slope[k], self.intercept[k], self.residual[k]


def fit_exponent(net: ScalarNet, window: Optional[slice] = None) -> ExponentFit:
    """Per q, least squares of ``log |value|`` on ``log eps`` over the fit window.

    Magnitudes are floored at 1e-300; an all-floored window yields slope
    ``+inf`` with the ``zero`` flag set.  Non-finite values yield ``-inf``.
    """
    win = net.grids.eps.window if window is None else window
    eps = net.grids.eps.values[win]
    if eps.size < 2:
        raise ValueError("need at least 2 eps values in the fit window")
    v = np.abs(net.values[:, win])
    nq = v.shape[0]
    slope, icpt, res = np.empty(nq), np.empty(nq), np.empty(nq)
    zero = np.zeros(nq, dtype=bool)
    A = np.column_stack([np.log(eps), np.ones_like(eps)])
    for k in range(nq):
        row = v[k]
        if not np.isfinite(row).all():
            slope[k], icpt[k], res[k] = -math.inf, math.inf, 0.0
            continue
        if np.all(row <= FLOOR):
            slope[k], icpt[k], res[k], zero[k] = ZERO_SLOPE, -math.inf, 0.0, True
            continue
        y = np.log(np.maximum(row, FLOOR))
        coef, *_ = np.linalg.lstsq(A, y, rcond=None)
        slope[k], icpt[k] = coef
        res[k] = math.sqrt(np.mean((A @ coef - y) ** 2))
    return ExponentFit(net.grids.orders.q_values, slope, icpt, res, zero)


@dataclass(frozen=True)
class NegligibilityPolicy:
    gauge: Callable = field(default=lambda q: float(q), compare=False)
    offset_N: int = 0
    min_gauge_slope: float = 0.8
    residual_max: float = 0.15
    sentinel_slope: float = -50.0
    exponent_slack: float = 0.2
    fit_tolerance: float = 1e-6


@dataclass(frozen=True)
class Verdict:
    status: str
    N: Optional[int] = None
    fit: Optional[ExponentFit] = None
    reason: str = ""

    @property
    def yes(self):
        return self.status == "yes"

    def __str__(self):
        return f"yes(N={self.N})" if self.yes and self.N is not None else self.status


def is_moderate(net: ScalarNet, policy: NegligibilityPolicy = NegligibilityPolicy()) -> Verdict:
    fit = fit_exponent(net)
    live = ~fit.zero
    if np.any(fit.slope[live] < policy.sentinel_slope):
        return Verdict("no", fit=fit, reason="growth faster than any tested power")
    if np.any(fit.residual[live] > policy.residual_max):
        return Verdict("inconclusive", fit=fit,
                       reason=f"fit residual {fit.residual[live].max():.3g} > {policy.residual_max}")
    if not live.any():
        return Verdict("yes", 0, fit, "identically zero")
    worst = float(np.max(-fit.slope[live]))
    return Verdict("yes", int(math.ceil(worst - policy.exponent_slack)), fit)


def is_negligible(net: ScalarNet, policy: NegligibilityPolicy = NegligibilityPolicy()) -> Verdict:
    fit = fit_exponent(net)
    live = ~fit.zero
    if np.any(fit.slope[live] == -math.inf):
        return Verdict("no", fit=fit, reason="non-finite values")
    if np.any(fit.residual[live] > policy.residual_max):
        return Verdict("inconclusive", fit=fit,
                       reason=f"fit residual {fit.residual[live].max():.3g} > {policy.residual_max}")
    gamma = np.array([policy.gauge(q) for q in fit.q_values], dtype=float)
    short = live & (fit.slope < gamma - policy.offset_N - policy.fit_tolerance)
    if short.any():
        q_bad = [q for q, s in zip(fit.q_values, short) if s]
        return Verdict("no", fit=fit, reason=f"exponent below gauge at q={q_bad}")
    if live.sum() >= 2:
        trend = np.polyfit(gamma[live], fit.slope[live], 1)[0]
        if trend < policy.min_gauge_slope:
            return Verdict("no", fit=fit, reason=f"exponents bounded in q (trend {trend:.3g})")
    return Verdict("yes", fit=fit)


def net_leq(x: ScalarNet, y: ScalarNet, b_test=10.0, slack=1e-9, margin=1e-3, fail_margin=0.05,
            residual_max=0.15):
    """Eventual order ``x <= y`` of generalised numbers, per q.

    A q-row passes when ``x - y - eps**b_test <= slack * max(|x|, |y|, 1)``
    throughout the fit window, or, for positive rows with clean power-law
    fits, when the exponent of ``x`` exceeds that of ``y`` by ``margin``.
    Rows whose exponent of ``x`` is below that of ``y`` by ``fail_margin``
    fail even if the window happens to be dominated. The wider fail margin
    absorbs the slope bias of sums of nearby powers.
    """
    _check_same(x, y)
    win = x.grids.eps.window
    eps = x.grids.eps.values[win]
    xv, yv = x.values[:, win], y.values[:, win]
    fx, fy = fit_exponent(x), fit_exponent(y)
    for k in range(xv.shape[0]):
        scale = np.maximum(np.maximum(np.abs(xv[k]), np.abs(yv[k])), 1.0)
        direct = bool(np.all(xv[k] - yv[k] - eps ** b_test <= slack * scale))
        clean = (np.all(xv[k] > 0) and np.all(yv[k] > 0)
                 and fx.residual[k] <= residual_max and fy.residual[k] <= residual_max
                 and np.isfinite(fx.slope[k]) and np.isfinite(fy.slope[k]))
        if clean:
            gap = fx.slope[k] - fy.slope[k]
            if gap > margin:
                continue
            if gap < -fail_margin:
                return False
        if fx.zero[k] and np.all(yv[k] >= -eps ** b_test):
            continue
        if not direct:
            return False
    return True


def synthetic_battery(grids: NetGrids):
    """Twenty nets with known exponents: ``(name, values, expected)``.

    ``expected`` is ``"negligible"`` when every row decays at least like
    ``eps**q``, and ``"not"`` otherwise.
    """
    q = grids.orders.values[:, None].astype(float)
    e = grids.eps.values[None, :]
    ones = np.ones_like(q)
    negligible = {
        "eps_pow_q": e ** q,
        "eps_pow_q_plus_half": e ** (q + 0.5),
        "eps_pow_q_plus_1": e ** (q + 1),
        "eps_pow_q_plus_2": e ** (q + 2) * (1 + q),
        "eps_pow_2q": e ** (2 * q),
        "three_eps_pow_q_plus_1": 3 * e ** (q + 1),
        "eps_pow_q_times_cos": e ** q * (2 + np.cos(q)),
        "minus_eps_pow_q_plus_1": -e ** (q + 1),
        "eps_pow_1p5q_plus_1": e ** (1.5 * q + 1),
        "zero": 0 * e * ones,
    }
    not_negligible = {
        "eps_pow_minus_1": ones * e ** -1.0,
        "eps_pow_0": ones * e ** 0.0,
        "eps_pow_3": ones * e ** 3.0,
        "eps_pow_minus_3": ones * e ** -3.0,
        "eps_pow_minus_2": ones * e ** -2.0,
        "minus_eps_pow_minus_1": -ones * e ** -1.0,
        "eps_pow_q_minus_1": e ** (q - 1),
        "eps_pow_q_minus_half": e ** (q - 0.5),
        "eps_pow_half_q": e ** (q / 2),
        "eps_times_order": e * (1 + q),
    }
    return ([(k, v, "negligible") for k, v in negligible.items()]
            + [(k, v, "not") for k, v in not_negligible.items()])

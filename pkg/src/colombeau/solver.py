"""Finite-difference solver for ``u_t - u_xx + u**3 = 0`` with zero Dirichlet data.

The default step lags the cubic coefficient,

    (I - dt * L_h + dt * diag(u_n**2)) u_{n+1} = u_n,

an M-matrix with unit-dominant rows, so ``max|u|`` never increases.  A
Crank-Nicolson step with Newton iterations is available for second order
in time.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import solve_banded

from ._csvio import write_csv
from .domains import DomainSpec, SpaceTimeGrid
from .finite_difference import DerivativeBudgetError, partial

log = logging.getLogger(__name__)

SCHEMES = ("linear-implicit", "crank-nicolson-newton")


class NewtonDivergenceError(RuntimeError):
    pass


class NonFiniteSolutionError(RuntimeError):
    pass


@dataclass(frozen=True)
class SolverConfig:
    scheme: str = "linear-implicit"
    dt: float = 5e-5
    newton_tol: float = 1e-12
    newton_max_iters: int = 25
    laplacian_enabled: bool = True
    cubic_enabled: bool = True
    boundary_projection: bool = True

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ValueError(f"scheme must be one of {SCHEMES}")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if self.newton_max_iters < 1:
            raise ValueError("newton_max_iters must be >= 1")


@dataclass(eq=False)
class ClassicalField:
    """One trajectory on the saved nodes of ``grid``; values are ``(nx, nt)``.

    ``step_sup[n]`` is ``max|u|`` after internal step ``n`` (index 0 is the
    initial state), so it has one more entry than there are internal steps.
    """

    grid: SpaceTimeGrid
    values: np.ndarray
    datum_norms: dict
    step_sup: np.ndarray
    config: SolverConfig
    projected: float = 0.0
    newton_iters: Optional[np.ndarray] = None

    @property
    def sup(self):
        return float(np.max(np.abs(self.values)))

    def max_principle_violations(self, tol=1e-12):
        return int(np.count_nonzero(np.diff(self.step_sup) > tol))

    def to_csv(self, path):
        x, t = self.grid.x, self.grid.t
        rows = [(t[k], x[j], self.values[j, k]) for k in range(len(t)) for j in range(len(x))]
        return write_csv(path, ["t", "x", "value"], rows)

    def diagnostics(self):
        """``(step, sup, newton_iters)`` per internal step."""
        iters = self.newton_iters if self.newton_iters is not None else np.zeros(len(self.step_sup), int)
        return [(n, float(s), int(i)) for n, (s, i) in enumerate(zip(self.step_sup, iters))]


def _stride(grid: SpaceTimeGrid, dt: float):
    """Internal steps per saved interval; the saved spacing must be a multiple of dt."""
    k = max(1, int(round(grid.dt / dt)))
    if abs(k * dt - grid.dt) > 1e-9 * grid.dt:
        raise ValueError(f"saved spacing {grid.dt:g} is not a multiple of dt={dt:g}")
    return k, grid.dt / k


def _datum_norms(g, h):
    return {
        "sup": float(np.max(np.abs(g))),
        "d1_sup": float(np.max(np.abs(partial(g, (h,), (1,))))),
        "d2_sup": float(np.max(np.abs(partial(g, (h,), (2,))))),
    }


def _project(g, config):
    g = np.array(g, dtype=float)
    removed = 0.0
    if config.laplacian_enabled and config.boundary_projection:
        removed = float(max(abs(g[0]), abs(g[-1])))
        g[0] = g[-1] = 0.0
    return g, removed


def _banded(n, coupling, diag):
    ab = np.empty((3, n))
    ab[0, 0] = ab[2, -1] = 0.0
    ab[0, 1:] = -coupling
    ab[2, :-1] = -coupling
    ab[1] = diag
    return ab


def _laplacian_interior(u, h):
    return (u[2:] - 2.0 * u[1:-1] + u[:-2]) / h ** 2


class _Stepper:
    """One-step maps for both schemes; Dirichlet rows stay at zero."""

    def __init__(self, nx, h, dt, config):
        self.h, self.dt, self.cfg = h, dt, config
        self.c = dt / h ** 2 if config.laplacian_enabled else 0.0
        self.n = nx - 2

    def _coef(self, u):
        return u * u if self.cfg.cubic_enabled else np.zeros_like(u)

    def lagged(self, u, a_extra=0.0, rhs=None):
        """Solve ``(I - dt L + dt (u^2 + a_extra)) v = rhs`` (``rhs`` defaults to ``u``)."""
        rhs = u if rhs is None else rhs
        if not self.cfg.laplacian_enabled:
            return rhs / (1.0 + self.dt * (self._coef(u) + a_extra))
        out = np.zeros_like(u)
        a = self._coef(u)[1:-1] + (a_extra[1:-1] if np.ndim(a_extra) else a_extra)
        ab = _banded(self.n, self.c, 1.0 + 2.0 * self.c + self.dt * a)
        out[1:-1] = solve_banded((1, 1), ab, rhs[1:-1])
        return out

    def crank_nicolson(self, u):
        dt, cfg = self.dt, self.cfg
        lap_on = cfg.laplacian_enabled
        sl = slice(1, -1) if lap_on else slice(None)

        def residual(v):
            r = v[sl] - u[sl]
            if lap_on:
                r -= 0.5 * dt * (_laplacian_interior(v, self.h) + _laplacian_interior(u, self.h))
            if cfg.cubic_enabled:
                r += 0.5 * dt * (v[sl] ** 3 + u[sl] ** 3)
            return r

        v = u.copy()
        scale = max(1.0, float(np.max(np.abs(u))))
        for it in range(1, cfg.newton_max_iters + 1):
            with np.errstate(over="ignore", invalid="ignore"):
                r = residual(v)
                jd = 1.0 + (1.5 * dt * v[sl] ** 2 if cfg.cubic_enabled else 0.0)
            if not (np.all(np.isfinite(r)) and np.all(np.isfinite(jd))):
                raise NewtonDivergenceError("Newton residual became non-finite")
            if lap_on:
                c = 0.5 * self.c
                dv = solve_banded((1, 1), _banded(self.n, c, jd + 2.0 * c), r)
            else:
                dv = r / jd
            v[sl] -= dv
            if not np.all(np.isfinite(v)):
                raise NewtonDivergenceError("Newton iterate became non-finite")
            if np.max(np.abs(dv)) <= cfg.newton_tol * scale:
                return v, it
        raise NewtonDivergenceError(f"Newton did not converge in {cfg.newton_max_iters} iterations")


def solve_semilinear(g, grid: SpaceTimeGrid, config: SolverConfig = SolverConfig()) -> ClassicalField:
    """March ``u_t - u_xx + u^3 = 0`` from ``g``; save on the nodes of ``grid``.

    With ``laplacian_enabled=False`` each node evolves by ``u' = -u^3`` and
    the boundary is left alone (a diagnostic mode for the ODE).
    """
    g = np.asarray(g, dtype=float)
    if g.shape != (grid.domain.nx,):
        raise ValueError(f"initial field has shape {g.shape}, expected {(grid.domain.nx,)}")
    stride, dt = _stride(grid, config.dt)
    u, removed = _project(g, config)
    step = _Stepper(grid.domain.nx, grid.domain.h, dt, config)
    n_steps = stride * (grid.nt - 1)
    out = np.empty(grid.shape)
    out[:, 0] = u
    sups = np.empty(n_steps + 1)
    sups[0] = np.max(np.abs(u))
    iters = np.zeros(n_steps + 1, dtype=int)
    for n in range(1, n_steps + 1):
        if config.scheme == "linear-implicit":
            u = step.lagged(u)
        else:
            u, iters[n] = step.crank_nicolson(u)
        if not np.all(np.isfinite(u)):
            raise NonFiniteSolutionError(f"non-finite values at step {n}")
        sups[n] = np.max(np.abs(u))
        if n % stride == 0:
            out[:, n // stride] = u
    log.debug("solved %d steps, final sup %.3g", n_steps, sups[-1])
    return ClassicalField(grid, out, _datum_norms(g, grid.domain.h), sups, replace(config, dt=dt),
                          removed, iters if config.scheme != "linear-implicit" else None)


def _as_node_field(value, x, t, name):
    if callable(value):
        return np.asarray(value(x, t), dtype=float) * np.ones_like(x)
    arr = np.asarray(value, dtype=float)
    if arr.ndim not in (0, 1) or (arr.ndim == 1 and arr.shape != x.shape):
        raise ValueError(f"{name} must be a scalar, an (nx,) array or a callable (x, t)")
    return np.broadcast_to(arr, x.shape).astype(float)


def solve_linear(a0, f, g, grid: SpaceTimeGrid, config: SolverConfig = SolverConfig()) -> ClassicalField:
    """``v_t - v_xx + a0 v = f`` with ``v = 0`` on the boundary, lagged-implicit march.

    ``a0`` and ``f`` are scalars, ``(nx,)`` arrays or callables ``(x, t)``.
    """
    x = grid.x
    stride, dt = _stride(grid, config.dt)
    cfg = replace(config, cubic_enabled=False, scheme="linear-implicit", dt=dt)
    v, removed = _project(g, cfg)
    step = _Stepper(grid.domain.nx, grid.domain.h, dt, cfg)
    n_steps = stride * (grid.nt - 1)
    out = np.empty(grid.shape)
    out[:, 0] = v
    sups = np.empty(n_steps + 1)
    sups[0] = np.max(np.abs(v))
    for n in range(1, n_steps + 1):
        t = n * dt
        a = _as_node_field(a0, x, t, "a0")
        if np.any(a < 0):
            raise ValueError("a0 must be non-negative")
        rhs = v + dt * _as_node_field(f, x, t, "f")
        v = step.lagged(v, a_extra=a, rhs=rhs)
        sups[n] = np.max(np.abs(v))
        if n % stride == 0:
            out[:, n // stride] = v
    return ClassicalField(grid, out, _datum_norms(np.asarray(g, float), grid.domain.h), sups, cfg, removed)


def solve_with_perturbation(g, w0, grid: SpaceTimeGrid, config: SolverConfig = SolverConfig()):
    """Solutions from ``g`` and from ``g + w0``, the second stored as the difference ``w``.

    ``w`` is marched through the exact difference of the two lagged steps,

        A(u_n + w_n) w_{n+1} = w_n - dt * w_n (2 u_n + w_n) u_{n+1},

    so tiny perturbations are not lost to cancellation.
    """
    if config.scheme != "linear-implicit":
        raise ValueError("the difference march is defined for the lagged scheme")
    stride, dt = _stride(grid, config.dt)
    cfg = replace(config, dt=dt)
    u, removed = _project(g, cfg)
    w, _ = _project(w0, cfg)
    step = _Stepper(grid.domain.nx, grid.domain.h, dt, cfg)
    n_steps = stride * (grid.nt - 1)
    out_u, out_w = np.empty(grid.shape), np.empty(grid.shape)
    out_u[:, 0], out_w[:, 0] = u, w
    sup_u, sup_w = np.empty(n_steps + 1), np.empty(n_steps + 1)
    sup_u[0], sup_w[0] = np.max(np.abs(u)), np.max(np.abs(w))
    for n in range(1, n_steps + 1):
        u_next = step.lagged(u)
        rhs = w - dt * w * (2.0 * u + w) * u_next if cfg.cubic_enabled else w
        v = u + w
        extra = (v * v - u * u) if cfg.cubic_enabled else 0.0
        # A(v) = A(u) + dt * diag(v^2 - u^2); lagged() adds u^2 itself
        w = step.lagged(u, a_extra=extra, rhs=rhs)
        u = u_next
        sup_u[n], sup_w[n] = np.max(np.abs(u)), np.max(np.abs(w))
        if n % stride == 0:
            out_u[:, n // stride], out_w[:, n // stride] = u, w
    norms = _datum_norms(np.asarray(g, float), grid.domain.h)
    return (ClassicalField(grid, out_u, norms, sup_u, cfg, removed),
            ClassicalField(grid, out_w, _datum_norms(np.asarray(w0, float), grid.domain.h), sup_w, cfg))


def derivative_field(u: ClassicalField, sigma, budget=2):
    """``d_x^sigma[0] d_t^sigma[1] u`` by second-order differences."""
    sigma = tuple(int(s) for s in sigma)
    if len(sigma) != 2:
        raise ValueError("sigma must be (space order, time order)")
    return partial(u.values, u.grid.spacings, sigma, budget)


def ck_norm(u: ClassicalField, k: int) -> float:
    """``sum_{|sigma| <= k} sup |d^sigma u|`` over the saved nodes."""
    if k > 2:
        raise DerivativeBudgetError("C^k norms are available for k <= 2")
    total = 0.0
    for i in range(k + 1):
        for j in range(k + 1 - i):
            total += float(np.max(np.abs(derivative_field(u, (i, j)))))
    return total


@dataclass
class ConvergenceReport:
    kind: str
    steps: np.ndarray
    errors: np.ndarray
    order: float
    ratios: np.ndarray = field(default_factory=lambda: np.empty(0))

    def rows(self):
        return [(self.kind, s, e) for s, e in zip(self.steps, self.errors)]

    def to_csv(self, path):
        return write_csv(path, ["study", "step", "error"], self.rows())


def sine_reference(x, t, decay=np.pi ** 2):
    return np.exp(-decay * t) * np.sin(np.pi * x)


def _order(steps, errors):
    steps, errors = np.asarray(steps, float), np.asarray(errors, float)
    if np.all(errors == 0):
        return ConvergenceReport("", steps, errors, np.inf, np.zeros(len(steps) - 1))
    ratios = errors[:-1] / errors[1:]
    order = float(np.polyfit(np.log(steps), np.log(errors), 1)[0])
    return ConvergenceReport("", steps, errors, order, ratios)


def convergence_study(kind="space", nx_values=(26, 51, 101), dt_values=(5e-3, 2.5e-3, 1.25e-3),
                      T=0.1, fine_nx=401, dt_space=1e-4, amplitude=1.0):
    """Sup error at ``t = T`` of the heat flow of ``amplitude * sin(pi x)``.

    ``space`` refines ``nx`` with the Crank-Nicolson step (time error
    negligible); ``time`` refines ``dt`` with the lagged step at ``fine_nx``.
    ``amplitude=0`` gives the zero-data study.
    """
    if kind not in ("space", "time"):
        raise ValueError("kind must be 'space' or 'time'")
    runs = []
    if kind == "space":
        if len(nx_values) < 3:
            raise ValueError("need at least 3 grids")
        cfg = SolverConfig(scheme="crank-nicolson-newton", dt=dt_space, cubic_enabled=False)
        for nx in nx_values:
            runs.append((DomainSpec(0.0, 1.0, nx), cfg, 1.0 / (nx - 1)))
    else:
        if len(dt_values) < 3:
            raise ValueError("need at least 3 time steps")
        for dt in dt_values:
            runs.append((DomainSpec(0.0, 1.0, fine_nx), SolverConfig(dt=dt, cubic_enabled=False), dt))
    steps, errors = [], []
    for dom, cfg, step in runs:
        grid = SpaceTimeGrid(dom, T, 21)
        u = solve_semilinear(amplitude * np.sin(np.pi * dom.x), grid, cfg)
        exact = amplitude * sine_reference(dom.x, T)
        steps.append(step)
        errors.append(float(np.max(np.abs(u.values[:, -1] - exact))))
    rep = _order(steps, errors)
    rep.kind = kind
    return rep

"""Generalised solutions of ``u_t - u_xx + u^3 = 0`` with zero Dirichlet data.

Each ``(q, eps)`` cell regularises the initial datum with the order-``q``
profile at scale ``eps`` and solves the classical problem.  The collected
trajectories form a FieldNet on the space-time grid, which is then checked
for moderateness, a-priori bounds, the cut-off Cauchy property and
stability under negligible perturbations.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Callable, Optional

import numpy as np
from joblib import Parallel, delayed
from scipy.stats import spearmanr
from sklearn.base import BaseEstimator

from ._csvio import write_csv
from .domains import (DomainSpec, SpaceTimeGrid, build_cutoff, restrict, trace_boundary,
                      trace_time, window)
from .mollifier import InitialDatum, MollifierSpec, build_mollifier, mollify, standard_bump
from .nets import (EpsilonGrid, FieldNet, NegligibilityPolicy, NetGrids, OrderGrid, ScalarNet,
                   fit_exponent, is_moderate, is_negligible)
from .solver import SolverConfig, solve_semilinear, solve_with_perturbation
from .topology import NeighborhoodSpec, boundary_seminorm, cauchy_limit, in_W, seminorm

IBVP_SIGMAS = ((0, 0), (1, 0), (0, 1), (2, 0))


@dataclass(frozen=True)
class GeneralizedInitialDatum:
    """Initial data indexed by ``(q, eps)``.

    ``boundary_decaying`` is ``eps**(-amplitude_exponent) * 4 (x-a)(b-x) / (b-a)**2``;
    ``custom`` calls ``function(q, eps, x)`` directly.  The other kinds are
    regularised by the order-``q`` profile.
    """

    kind: str
    x0: float = 0.5
    function: Optional[Callable] = field(default=None, compare=False)
    amplitude_exponent: float = 0.5

    KINDS = ("delta", "delta_prime", "heaviside", "smooth", "boundary_decaying", "custom")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown datum kind {self.kind!r}; expected one of {self.KINDS}")
        if self.kind in ("smooth", "custom") and self.function is None:
            raise ValueError(f"{self.kind} datum needs a function")

    @classmethod
    def delta(cls, x0=0.5):
        return cls("delta", x0)

    @classmethod
    def boundary_decaying(cls, amplitude_exponent=0.5):
        return cls("boundary_decaying", amplitude_exponent=amplitude_exponent)

    @property
    def compact(self):
        return self.kind in ("delta", "delta_prime")

    def representative(self, q, eps, domain: DomainSpec):
        x = domain.x
        if self.kind == "boundary_decaying":
            shape = 4.0 * (x - domain.a) * (domain.b - x) / (domain.b - domain.a) ** 2
            return eps ** (-self.amplitude_exponent) * shape
        if self.kind == "custom":
            vals = np.asarray(self.function(q, eps, x), dtype=float)
            if vals.shape != x.shape or not np.all(np.isfinite(vals)):
                raise ValueError("custom datum must return finite values on the grid")
            return vals
        profile = build_mollifier(MollifierSpec(q))
        return mollify(InitialDatum(self.kind, self.x0, self.function), profile, eps, domain)


def initial_net(u0: GeneralizedInitialDatum, grids: NetGrids, domain: DomainSpec) -> FieldNet:
    return FieldNet.from_function(grids, domain, lambda q, e, _: u0.representative(q, e, domain))


def default_grid():
    return SpaceTimeGrid(DomainSpec(0.0, 1.0, 201), 0.1, 201)


@dataclass
class IbvpResult:
    solution: FieldNet
    seminorm_nets: dict
    moderate_verdicts: dict
    initial_trace_residual: ScalarNet
    boundary_trace_residual: ScalarNet
    initial: FieldNet
    step_sup: np.ndarray
    provenance: dict
    failures: list = field(default_factory=list)

    @property
    def partial(self):
        return bool(self.failures)

    def fit_rows(self):
        """``(sigma, q, slope, intercept, residual, verdict)`` per recorded seminorm."""
        rows = []
        for sigma, net in self.seminorm_nets.items():
            verdict = self.moderate_verdicts[sigma]
            for q, s, b, r in fit_exponent(net).rows():
                rows.append((sigma, q, s, b, r, str(verdict)))
        return rows


def _solve_cell(g, grid, config):
    try:
        f = solve_semilinear(g, grid, config)
        return f.values, f.step_sup, None
    except (RuntimeError, ValueError) as exc:
        return None, None, f"{type(exc).__name__}: {exc}"


def _solve_all(datas, grid, config, jobs):
    if jobs == 1:
        return [_solve_cell(g, grid, config) for g in datas]
    return Parallel(n_jobs=jobs)(delayed(_solve_cell)(g, grid, config) for g in datas)


def solve_field(init: FieldNet, grid: SpaceTimeGrid, config: SolverConfig, jobs=1):
    """Solve every cell of ``init``; returns ``(solution, step_sup, failures)``."""
    grids = init.grids
    cells = list(grids.cells())
    out = _solve_all([init.values[i, j] for i, j, _, _ in cells], grid, config, jobs)
    vals = np.zeros(tuple(grids.shape) + grid.shape)
    sups, failures = None, []
    for (i, j, q, e), (v, s, err) in zip(cells, out):
        if err is not None:
            failures.append((q, e, err))
            continue
        if sups is None:
            sups = np.full(tuple(grids.shape) + s.shape, np.nan)
        vals[i, j], sups[i, j] = v, s
    return FieldNet(grids, grid, vals), sups, failures


def solve_generalized(u0: GeneralizedInitialDatum, grid: Optional[SpaceTimeGrid] = None,
                      grids: Optional[NetGrids] = None, config: Optional[SolverConfig] = None,
                      sigmas=IBVP_SIGMAS, policy=NegligibilityPolicy(), jobs=1) -> IbvpResult:
    grid = grid or default_grid()
    grids = grids or NetGrids()
    config = config or SolverConfig()
    init = initial_net(u0, grids, grid.domain)
    sol, sups, failures = solve_field(init, grid, config, jobs)
    nets = {tuple(s): seminorm(sol, s) for s in sigmas}
    verdicts = {s: is_moderate(n, policy) for s, n in nets.items()}
    init_res = seminorm(trace_time(sol, 0.0) - init, (0,))
    bnd_res = boundary_seminorm(trace_boundary(sol), 0)
    prov = {"datum": u0.kind, "x0": u0.x0, "nx": grid.domain.nx, "nt": grid.nt, "T": grid.T,
            "dt": config.dt, "scheme": config.scheme, "q": grids.orders.q_values,
            "eps": grids.eps.eps_values}
    return IbvpResult(sol, nets, verdicts, init_res, bnd_res, init, sups, prov, failures)


@dataclass
class AprioriReport:
    k0_violations: list
    smoothing_violations: list
    max_principle_violations: int
    worst_smoothing_ratio: float

    @property
    def passed(self):
        return not self.k0_violations and not self.smoothing_violations and not self.max_principle_violations


def verify_apriori(result: IbvpResult, smoothing_factor=1.05, min_steps=5, tol=1e-12) -> AprioriReport:
    """Per cell: ``sup_Q |u| <= sup |u_0|`` and ``|u(., t)| <= 1.05 / sqrt(2 t)`` for ``t >= 5 dt``."""
    if result.partial:
        raise ValueError(f"{len(result.failures)} cell solves failed; a-priori checks need every cell")
    dt = result.provenance["dt"]
    sol, init = result.solution, result.initial
    k0, smooth = [], []
    mp = 0
    worst = 0.0
    t = np.arange(result.step_sup.shape[-1]) * dt
    late = np.arange(t.size) >= min_steps
    bound = smoothing_factor / np.sqrt(2.0 * t[late])
    for i, j, q, e in sol.grids.cells():
        sup_q = float(np.max(np.abs(sol.values[i, j])))
        sup_0 = float(np.max(np.abs(init.values[i, j])))
        if sup_q > sup_0 * (1.0 + tol):
            k0.append((q, e, sup_q, sup_0))
        s = result.step_sup[i, j]
        mp += int(np.count_nonzero(np.diff(s) > tol))
        ratio = s[late] / bound
        worst = max(worst, float(ratio.max()) * smoothing_factor)
        bad = np.nonzero(ratio > 1.0)[0]
        if bad.size:
            smooth.append((q, e, float(t[late][bad[0]]), float(s[late][bad[0]])))
    return AprioriReport(k0, smooth, mp, worst)


@dataclass
class CutoffReport:
    datum: GeneralizedInitialDatum
    P: int
    solutions: list
    initial: FieldNet
    pair_rows: list
    consecutive_sups: np.ndarray
    strictly_decreasing: bool
    spearman: float
    positivity_min: float
    identity_max_ulps: float
    p0: Optional[int]
    dt_check: dict
    residual_chain: list

    @property
    def passed(self):
        ok = self.positivity_min >= -1e-12 and self.identity_max_ulps <= 4.0
        if self.datum.compact:
            return ok and self.p0 is not None
        return ok and self.strictly_decreasing and self.spearman >= 0.9

    def to_csv(self, path):
        header = ["p", "q_pair", "sigma", "fitted_exponent", "in_W_target", "pass"]
        return write_csv(path, header, self.pair_rows)


def _ulps(a, b):
    scale = np.maximum(np.maximum(np.abs(a), np.abs(b)), np.finfo(float).tiny)
    return float(np.max(np.abs(a - b) / np.spacing(scale)))


def _difference_residual(w: FieldNet, a: np.ndarray):
    """Relative residual of ``w_t - w_xx + a w = 0`` on the saved interior nodes.

    The residual is divided by the sum of the sups of the three terms, so
    it measures truncation error of the saved-grid differences, not size.
    """
    h, dt = w.carrier.spacings
    v = w.values
    wt = (v[..., 1:] - v[..., :-1]) / dt
    wxx = (v[..., 2:, 1:] - 2 * v[..., 1:-1, 1:] + v[..., :-2, 1:]) / h ** 2
    aw = a[..., 1:-1, 1:] * v[..., 1:-1, 1:]
    r = wt[..., 1:-1, :] - wxx + aw
    scale = float(np.max(np.abs(wt)) + np.max(np.abs(wxx)) + np.max(np.abs(aw)))
    return float(np.max(np.abs(r))) / max(scale, 1e-300)


def cutoff_grid():
    """Space-time grid fine enough to resolve the cut-off of level 7."""
    return SpaceTimeGrid(DomainSpec(0.0, 1.0, 1441), 0.1, 21)


def cutoff_sequence_run(u0: GeneralizedInitialDatum, P=7, targets=(NeighborhoodSpec((0, 0), -2.0),),
                        grid: Optional[SpaceTimeGrid] = None, grids: Optional[NetGrids] = None,
                        config: Optional[SolverConfig] = None, sigmas=IBVP_SIGMAS,
                        check_pair=True, jobs=1) -> CutoffReport:
    """Solve from ``chi_p * u0`` for ``p = 1..P`` and compare the solutions.

    Pairs ``(p, p+1)`` are scored by the sup over all cells of the
    difference.  ``a_pq = u_p^2 + u_q^2 + u_p u_q`` is checked against the
    sum of squares ``(u_p + u_q/2)^2 + 3/4 u_q^2``.
    """
    if P < 4:
        raise ValueError("P must be at least 4")
    grid = grid or cutoff_grid()
    grids = grids or NetGrids()
    config = config or SolverConfig(dt=5e-4)
    dom = grid.domain
    init = initial_net(u0, grids, dom)
    chis = [build_cutoff(dom, p) for p in range(1, P + 1)]
    inits = [FieldNet(grids, dom, init.values * chi.field) for chi in chis]
    sols = []
    for f0 in inits:
        sol, _, failures = solve_field(f0, grid, config, jobs)
        if failures:
            raise RuntimeError(f"cell solves failed: {failures[:3]}")
        sols.append(sol)

    p0 = None
    for p in range(P, 0, -1):
        if not np.array_equal(inits[p - 1].values, init.values):
            break
        p0 = p

    rows, sups = [], []
    pos_min, ulp_max = math.inf, 0.0
    chain = []
    for p in range(1, P):
        up, uq = sols[p - 1].values, sols[p].values
        a = up * up + uq * uq + up * uq
        squares = (up + 0.5 * uq) ** 2 + 0.75 * uq * uq
        pos_min = min(pos_min, float(a.min()))
        ulp_max = max(ulp_max, _ulps(a, squares))
        w = sols[p - 1] - sols[p]
        sups.append(float(np.max(np.abs(w.values))))
        if sups[-1] > 0:
            chain.append((p, p + 1, _difference_residual(w, a)))
        for s in sigmas:
            net = seminorm(w, s)
            fit = fit_exponent(net)
            for spec in targets:
                if tuple(spec.sigma) != tuple(s):
                    continue
                member = in_W(w, spec)
                worst = float(np.min(fit.slope))
                rows.append((p, f"{p}-{p + 1}", "".join(map(str, s)), worst, f"W{tuple(spec.sigma)},{spec.r}",
                             member))
    sups = np.asarray(sups)
    if u0.compact:
        beyond = sups[(p0 or P) - 1:] if p0 else sups
        decreasing = bool(np.all(beyond == 0.0))
        rho = math.nan
    else:
        decreasing = bool(np.all(np.diff(sups) < 0))
        rho = float(spearmanr(sups, -np.arange(1, P)).statistic)

    dt_check = {}
    if check_pair and not u0.compact:
        half = replace(config, dt=config.dt / 2)
        a, _, _ = solve_field(inits[P - 2], grid, half, jobs)
        b, _, _ = solve_field(inits[P - 1], grid, half, jobs)
        fine = a.values - b.values
        coarse = sols[P - 2].values - sols[P - 1].values
        dt_check = {"pair": (P - 1, P), "sup": sups[-1],
                    "sup_half_dt": float(np.max(np.abs(fine))),
                    "relative_change": float(np.max(np.abs(fine - coarse))) / max(sups[-1], 1e-300)}
    return CutoffReport(u0, P, sols, init, rows, sups, decreasing, rho, pos_min, ulp_max, p0,
                        dt_check, chain)


@dataclass
class LimitReport:
    limit: FieldNet
    window_level: int
    qualified_q: tuple
    trace_residual: ScalarNet
    datum_residual: ScalarNet
    boundary_sup: float

    @property
    def trace_residual_fit(self):
        return fit_exponent(self.trace_residual)

    @property
    def datum_residual_fit(self):
        return fit_exponent(self.datum_residual)

    @property
    def passed(self):
        rows = [self.limit.grids.orders.q_values.index(q) for q in self.qualified_q]
        ok = self.trace_residual_fit.slope[rows] >= self.datum_residual_fit.slope[rows] - 1e-9
        return self.boundary_sup == 0.0 and bool(rows) and bool(np.all(ok))


def limit_assembly(report: CutoffReport, window_level=2) -> LimitReport:
    """Telescope the cut-off solutions with schedule ``nu_i = i`` and check the traces.

    Cell ``(q, eps)`` of the limit holds the solution of the highest
    cut-off level its indicators admit.  On the interior window
    ``Omega_nu`` the initial trace is compared with the datum for the
    orders whose level exceeds ``nu``; the reference residual is that of
    the level-``nu`` cut-off datum itself.  Residuals within the rounding
    of the telescoped sum are reported as zero.
    """
    sups = report.consecutive_sups
    if not report.datum.compact and np.any(np.diff(sups) >= 0):
        raise ValueError("solution differences are not monotone in p; refusing to assemble")
    limit = cauchy_limit(report.solutions, range(1, report.P + 1))
    level = 1 + limit.meta["active_terms"][:, limit.grids.eps.window]
    qualified = tuple(q for q, lv in zip(limit.grids.orders.q_values, level) if np.all(lv > window_level))
    dom = limit.carrier.domain
    sub = window(dom, window_level)
    target = restrict(report.initial, sub)
    res = seminorm(restrict(trace_time(limit, 0.0), sub) - target, (0,))
    # telescoping P terms rounds at a few ulps of the datum size
    floor = 4.0 * report.P * np.finfo(float).eps * seminorm(target, (0,)).values
    res = ScalarNet(res.grids, np.where(res.values <= floor, 0.0, res.values), res.dim)
    chi = build_cutoff(dom, window_level)
    cut = FieldNet(report.initial.grids, dom, report.initial.values * chi.field)
    datum_res = seminorm(restrict(cut, sub) - target, (0,))
    bsup = float(np.max(np.abs(trace_boundary(limit).values)))
    return LimitReport(limit, window_level, qualified, res, datum_res, bsup)


@dataclass
class UniquenessReport:
    q_values: tuple
    difference: ScalarNet
    fit: object
    verdict: object
    offset: int
    control: bool

    def rows(self):
        return [(q, s, b, r, str(self.verdict)) for q, s, b, r in self.fit.rows()]


def perturbation_bump(domain: DomainSpec, center=0.5, radius=0.25):
    return standard_bump(domain.x - center, radius)


def uniqueness_probe(u0: GeneralizedInitialDatum, q_list=(2, 3, 4, 5, 6), offset=3, exponent=None,
                     grid: Optional[SpaceTimeGrid] = None, eps: Optional[EpsilonGrid] = None,
                     config: Optional[SolverConfig] = None, jobs=1) -> UniquenessReport:
    """Solve from ``u0`` and from ``u0 + eps**(q + offset) * bump`` per cell.

    ``exponent`` fixes the perturbation power for every ``q`` (the
    non-negligible control).  The sup over the space-time grid of the
    difference must be negligible with gauge ``gamma(q) = q``.
    """
    grid = grid or default_grid()
    grids = NetGrids(OrderGrid(tuple(q_list)), eps or EpsilonGrid())
    config = config or SolverConfig()
    init = initial_net(u0, grids, grid.domain)
    bump = perturbation_bump(grid.domain)

    def cell(i, j, q, e):
        power = exponent if exponent is not None else q + offset
        _, w = solve_with_perturbation(init.values[i, j], e ** power * bump, grid, config)
        return w.sup

    cells = list(grids.cells())
    if jobs == 1:
        sups = [cell(*c) for c in cells]
    else:
        sups = Parallel(n_jobs=jobs)(delayed(cell)(*c) for c in cells)
    vals = np.zeros(grids.shape)
    for (i, j, _, _), s in zip(cells, sups):
        vals[i, j] = s
    diff = ScalarNet(grids, vals, grid.mollifier_dim)
    fit = fit_exponent(diff)
    return UniquenessReport(tuple(q_list), diff, fit, is_negligible(diff), offset, exponent is not None)


class GeneralizedIBVPSolver(BaseEstimator):
    """Estimator wrapper: ``fit(datum)`` solves every cell, ``predict(t)`` returns the time trace."""

    def __init__(self, nx=201, T=0.1, nt=201, dt=5e-5, q_max=6, eps_max=2.0 ** -3, eps_min=2.0 ** -12,
                 eps_count=10, fit_window=5, scheme="linear-implicit", jobs=1):
        self.nx = nx
        self.T = T
        self.nt = nt
        self.dt = dt
        self.q_max = q_max
        self.eps_max = eps_max
        self.eps_min = eps_min
        self.eps_count = eps_count
        self.fit_window = fit_window
        self.scheme = scheme
        self.jobs = jobs

    def _grids(self):
        if not 0 < self.eps_min < self.eps_max <= 1:
            raise ValueError("need 0 < eps_min < eps_max <= 1")
        eps = EpsilonGrid.geometric(self.eps_max, self.eps_min, self.eps_count, self.fit_window)
        return NetGrids(OrderGrid(tuple(range(self.q_max + 1))), eps)

    def fit(self, X, y=None):
        if not isinstance(X, GeneralizedInitialDatum):
            raise TypeError("fit expects a GeneralizedInitialDatum")
        grid = SpaceTimeGrid(DomainSpec(0.0, 1.0, self.nx), self.T, self.nt)
        self.result_ = solve_generalized(X, grid, self._grids(), SolverConfig(self.scheme, self.dt),
                                         jobs=self.jobs)
        return self

    def predict(self, t0):
        if not hasattr(self, "result_"):
            raise AttributeError("call fit before predict")
        return trace_time(self.result_.solution, t0)

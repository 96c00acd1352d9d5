"""Seminorms, sharp neighbourhoods and completeness on sampled nets.

``seminorm(f, sigma)`` is the net of sup-norms of ``d^sigma f`` per cell.
``W_{sigma, r}`` holds the fields whose seminorms of every order
``kappa <= sigma`` are eventually below the scale element ``alpha_r``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from ._csvio import write_csv
from .domains import BoundaryCarrier
from .finite_difference import DerivativeBudgetError, partial, truncation_bound
from .nets import FieldNet, GridMismatchError, ScalarNet, net_leq, scale_element

DEFAULT_BUDGET = 2


class MultiIndex(tuple):
    """Non-negative integer multi-index with the componentwise partial order."""

    def __new__(cls, *components):
        if len(components) == 1 and not isinstance(components[0], (int, np.integer)):
            components = tuple(components[0])
        comps = tuple(int(c) for c in components)
        if not comps or any(c < 0 for c in comps):
            raise ValueError(f"invalid multi-index {components!r}")
        return super().__new__(cls, comps)

    @classmethod
    def diag(cls, i, dim):
        """``(i, ..., i)`` of length ``dim``."""
        return cls((i,) * dim)

    @property
    def order(self):
        return sum(self)

    def __le__(self, other):
        return len(self) == len(other) and all(a <= b for a, b in zip(self, other))

    def __ge__(self, other):
        return MultiIndex(other) <= self

    def below(self):
        """Every ``kappa <= self``, in lexicographic order."""
        for k in itertools.product(*(range(c + 1) for c in self)):
            yield MultiIndex(k)

    def binom(self, kappa):
        return math.prod(math.comb(s, k) for s, k in zip(self, kappa))

    def truncate(self, budget):
        return MultiIndex(min(c, budget) for c in self)


@dataclass(frozen=True)
class NeighborhoodSpec:
    sigma: MultiIndex
    r: float

    def __post_init__(self):
        object.__setattr__(self, "sigma", MultiIndex(self.sigma))


@dataclass(frozen=True)
class BoundarySeminormSpec:
    nu: int
    s: float


def seminorm(f: FieldNet, sigma, budget=DEFAULT_BUDGET) -> ScalarNet:
    """Per cell, ``sup |d^sigma f|`` over the carrier, by central differences.

    For a restricted field the differences are taken on the parent grid.
    """
    sigma = MultiIndex(sigma)
    if isinstance(f.carrier, BoundaryCarrier):
        raise TypeError("use boundary_seminorm for fields on the lateral boundary")
    if len(sigma) != len(f.carrier.shape):
        raise ValueError(f"multi-index {tuple(sigma)} does not match a {len(f.carrier.shape)}-d carrier")
    parent = f.meta.get("parent")
    if parent is not None and sigma.order > 0:
        d = partial(parent.values, parent.carrier.spacings, sigma, budget, first_axis=2)
        j0 = f.meta["offset"]
        d = d[:, :, j0:j0 + f.values.shape[2]]
    else:
        d = partial(f.values, f.carrier.spacings, sigma, budget, first_axis=2)
    sup = np.abs(d).reshape(d.shape[:2] + (-1,)).max(axis=-1)
    return ScalarNet(f.grids, sup, f.dim)


def boundary_seminorm(u: FieldNet, nu: int, budget=DEFAULT_BUDGET) -> ScalarNet:
    """``sup`` over both boundary trajectories of ``|d_t^nu u|``."""
    if not isinstance(u.carrier, BoundaryCarrier):
        raise TypeError("boundary seminorm needs a field on the lateral boundary")
    if nu > budget:
        raise DerivativeBudgetError(f"time derivative order {nu} exceeds budget {budget}")
    d = partial(u.values, (u.carrier.grid.dt,), (nu,), budget, first_axis=3)
    return ScalarNet(u.grids, np.abs(d).max(axis=(2, 3)), u.dim)


def in_W(f: FieldNet, spec: NeighborhoodSpec, budget=DEFAULT_BUDGET, **leq_kw) -> bool:
    alpha = scale_element(spec.r, f.grids, dim=f.dim)
    return all(net_leq(seminorm(f, kappa, budget), alpha, **leq_kw) for kappa in spec.sigma.below())


def in_V(x: ScalarNet, r: float, **leq_kw) -> bool:
    return net_leq(abs(x), scale_element(r, x.grids, dim=x.dim), **leq_kw)


def in_N(u: FieldNet, spec: BoundarySeminormSpec, budget=DEFAULT_BUDGET, **leq_kw) -> bool:
    alpha = scale_element(spec.s, u.grids, dim=u.dim)
    return all(net_leq(boundary_seminorm(u, l, budget), alpha, **leq_kw) for l in range(spec.nu + 1))


def leibniz_bound(f: FieldNet, g: FieldNet, sigma, budget=DEFAULT_BUDGET) -> ScalarNet:
    """``sum_{kappa <= sigma} binom(sigma, kappa) |f|_kappa |g|_{sigma - kappa}``."""
    sigma = MultiIndex(sigma)
    total = np.zeros(f.grids.shape)
    for kappa in sigma.below():
        rest = MultiIndex(s - k for s, k in zip(sigma, kappa))
        total += sigma.binom(kappa) * seminorm(f, kappa, budget).values * seminorm(g, rest, budget).values
    return ScalarNet(f.grids, total, f.dim)


def seminorm_error(f: FieldNet, sigma, budget=DEFAULT_BUDGET) -> np.ndarray:
    """Per cell, the truncation bound of the differences behind ``seminorm(f, sigma)``."""
    sigma = MultiIndex(sigma)
    if sigma.order == 0:
        return np.zeros(f.grids.shape)
    return truncation_bound(f.values, f.carrier.spacings, sigma, first_axis=2)


def leibniz_tolerance(f: FieldNet, g: FieldNet, sigma, budget=DEFAULT_BUDGET) -> np.ndarray:
    """Slack for the discrete product inequality implied by the truncation bounds.

    The exact inequality holds for true derivatives; each sampled seminorm
    may sit above or below its true value by its truncation bound.
    """
    sigma = MultiIndex(sigma)
    tol = seminorm_error(f * g, sigma, budget)
    for kappa in sigma.below():
        rest = MultiIndex(s - k for s, k in zip(sigma, kappa))
        ef, eg = seminorm_error(f, kappa, budget), seminorm_error(g, rest, budget)
        sf, sg = seminorm(f, kappa, budget).values, seminorm(g, rest, budget).values
        tol = tol + sigma.binom(kappa) * (ef * sg + sf * eg + ef * eg)
    return tol


class PowerLawFieldGenerator:
    """Random fields ``c * alpha_e * h`` with ``h`` a product of sines.

    The amplitude of ``h`` is chosen so that every derivative of order
    ``kappa <= sigma`` (per axis at most ``budget``) has sup at most 0.95,
    which makes membership in ``W_{sigma, e}`` known in advance.
    """

    def __init__(self, grids, carrier, budget=DEFAULT_BUDGET, max_freq=3.0 * np.pi):
        self.grids = grids
        self.carrier = carrier
        self.budget = budget
        self.max_freq = max_freq

    def _axes(self):
        c = self.carrier
        return [c.x] if len(c.shape) == 1 else [c.x, c.t]

    def profile(self, rng, sigma=None):
        axes = self._axes()
        sigma = MultiIndex(sigma) if sigma is not None else MultiIndex.diag(self.budget, len(axes))
        h = np.ones(())
        amp = 0.95
        for ax, s in zip(axes, sigma):
            w = rng.uniform(0.5, self.max_freq)
            th = rng.uniform(0.0, 2.0 * np.pi)
            amp /= max(1.0, w) ** min(s, self.budget)
            h = np.multiply.outer(h, np.sin(w * ax + th)) if h.ndim else np.sin(w * ax + th)
        return amp * h

    def power_law(self, rng, exponent, amplitude, sigma=None):
        alpha = scale_element(exponent, self.grids, dim=self.carrier.mollifier_dim).values
        h = self.profile(rng, sigma)
        vals = amplitude * alpha[(...,) + (None,) * h.ndim] * h
        return FieldNet(self.grids, self.carrier, vals, {"exponent": exponent, "amplitude": amplitude})

    def member(self, rng, sigma, r, spread=2.0, amplitude_max=1.0):
        """A field in ``W_{sigma, r}`` (exponent in ``[r, r + spread]``)."""
        return self.power_law(rng, r + rng.uniform(0.0, spread), rng.uniform(0.05, amplitude_max), sigma)

    def bounded(self, rng, N, c, sigma=None):
        """A field with ``|g|_kappa <= c * alpha_{-N}`` for every ``kappa <= sigma``."""
        return self.power_law(rng, -float(N), rng.uniform(0.1, 1.0) * c, sigma)


@dataclass
class AxiomReport:
    rows: list = field(default_factory=list)
    counterexamples: dict = field(default_factory=dict)

    def counts(self):
        out = {}
        for axiom, _, ok, _ in self.rows:
            p, n = out.get(axiom, (0, 0))
            out[axiom] = (p + bool(ok), n + 1)
        return out

    @property
    def passed(self):
        return all(ok for _, _, ok, _ in self.rows)

    def to_csv(self, path):
        return write_csv(path, ["axiom", "trial", "pass", "counterexample_id"], self.rows)


def check_filter_axioms(generator: PowerLawFieldGenerator, trials=100, sigma=(1,), r=1.0,
                        s_sum=None, N=2, c=10.0, seed=0) -> AxiomReport:
    """Randomised membership rechecks for the neighbourhood-basis conditions.

    * ``GA_I``: ``W_{sigma, s} + W_{sigma, s}`` inside ``W_{sigma, r}``;
    * ``AV_II``: ``W_{sigma, r}^2`` inside ``W_{sigma, r}``;
    * ``AV_I``: ``g W_{sigma, N + r + 1}`` inside ``W_{sigma, r}`` when
      ``|g|_kappa <= c alpha_{-N}``.

    ``s_sum`` defaults to ``r + 0.5``.
    """
    sigma = MultiIndex(sigma)
    s_sum = r + 0.5 if s_sum is None else s_sum
    rng = np.random.default_rng(seed)
    target = NeighborhoodSpec(sigma, r)
    report = AxiomReport()

    def record(axiom, trial, ok, nets):
        cid = ""
        if not ok:
            cid = f"{axiom}-{trial}"
            report.counterexamples[cid] = nets
        report.rows.append((axiom, trial, bool(ok), cid))

    for trial in range(trials):
        f, g = generator.member(rng, sigma, s_sum), generator.member(rng, sigma, s_sum)
        record("GA_I", trial, in_W(f + g, target, generator.budget), (f, g))
        f, g = generator.member(rng, sigma, r), generator.member(rng, sigma, r)
        record("AV_II", trial, in_W(f * g, target, generator.budget), (f, g))
        gb = generator.bounded(rng, N, c, sigma)
        f = generator.member(rng, sigma, N + r + 1)
        record("AV_I", trial, in_W(gb * f, target, generator.budget), (gb, f))
    return report


def cauchy_limit(sequence, nu_schedule) -> FieldNet:
    """Telescoped limit of ``f_{nu_1}, f_{nu_2}, ...`` (1-based indices into ``sequence``).

    The difference ``f_{nu_{i+1}} - f_{nu_i}`` enters cell ``(q, eps)`` only
    when ``q >= nu_i`` and ``eps < 1 / nu_i``, so each cell sums finitely
    many terms.
    """
    nu = [int(v) for v in nu_schedule]
    if len(nu) < 1 or any(b <= a for a, b in zip(nu, nu[1:])) or nu[0] < 1:
        raise ValueError("nu_schedule must be strictly increasing positive integers")
    if nu[-1] > len(sequence):
        raise ValueError(f"schedule index {nu[-1]} beyond a sequence of length {len(sequence)}")
    first = sequence[nu[0] - 1]
    for other in sequence:
        if other.grids != first.grids or other.carrier != first.carrier:
            raise GridMismatchError("sequence members must share grids and carrier")
    q = first.grids.orders.values[:, None]
    eps = first.grids.eps.values[None, :]
    extra = (None,) * len(first.carrier.shape)
    total = first.values.copy()
    active = np.zeros(first.grids.shape, dtype=int)
    for i in range(len(nu) - 1):
        gate = (q >= nu[i]) & (eps < 1.0 / nu[i])
        diff = sequence[nu[i + 1] - 1].values - sequence[nu[i] - 1].values
        total += np.where(gate[(...,) + extra], diff, 0.0)
        active += gate
    return FieldNet(first.grids, first.carrier, total, {"active_terms": active})


def cauchy_convergence(limit: FieldNet, sequence, nu_schedule, target: NeighborhoodSpec,
                       budget=DEFAULT_BUDGET):
    """Membership of ``limit - f_{nu_{t+1}}`` in ``target`` for each ``t``.

    Returns ``(theta, memberships)``; ``theta`` is the first ``t`` from which
    every later membership holds (``None`` if the last one fails).
    """
    nu = [int(v) for v in nu_schedule]
    member = [in_W(limit - sequence[nu[t] - 1], target, budget) for t in range(len(nu))]
    theta = None
    for t in range(len(nu) - 1, -1, -1):
        if not member[t]:
            break
        theta = t
    return theta, member


def synthetic_cauchy_sequence(generator: PowerLawFieldGenerator, rng, length, amplitude=0.5):
    """``f_1 = d_0`` and ``f_{i+1} = f_i + d_i`` with ``d_i`` in ``W_{sigma_{i+1}, i+1}``.

    Each ``d_i`` is ``amplitude * alpha_{i+1} * h_i`` with every derivative
    of ``h_i`` within the budget bounded by 0.95.
    """
    dim = len(generator.carrier.shape)
    seq = []
    total = None
    for i in range(length):
        sigma = MultiIndex.diag(min(i + 1, generator.budget), dim)
        d = generator.power_law(rng, float(i + 1), amplitude, sigma)
        total = d if total is None else total + d
        seq.append(total)
    return seq

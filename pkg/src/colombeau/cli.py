"""Command-line entry point: ``colombeau <experiment> [--config PATH] [--out DIR] [--jobs N] [--seed N]``.

The configuration file is INI-style (``key = value`` under ``[run]`` and
``[datum]``).  Every experiment writes CSV reports with a ``pass`` column;
the exit status is 1 when any row has ``pass=false``, 2 on configuration
errors and 0 otherwise.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import os
import sys
import time
from dataclasses import dataclass, fields

import numpy as np
from scipy.integrate import quad

from ._csvio import write_csv
from .domains import DomainSpec, SpaceTimeGrid
from .ibvp import (GeneralizedInitialDatum, cutoff_sequence_run, limit_assembly, solve_generalized,
                   uniqueness_probe, verify_apriori)
from .mollifier import MollifierSpec, build_mollifier, moment
from .nets import (EpsilonGrid, NetGrids, OrderGrid, ScalarNet, fit_exponent, is_moderate,
                   is_negligible, net_leq, scale_element, synthetic_battery)
from .solver import SolverConfig, convergence_study, sine_reference, solve_semilinear
from .topology import NeighborhoodSpec, PowerLawFieldGenerator, check_filter_axioms

EXPERIMENTS = ("mollifier-check", "net-fit", "topology-axioms", "solve-classical", "ibvp-run",
               "ibvp-cauchy", "ibvp-unique", "full-suite")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    experiment: str = "full-suite"
    eps_min: float = 2.0 ** -12
    eps_max: float = 2.0 ** -3
    eps_count: int = 10
    fit_window: int = 5
    q_max: int = 6
    nx: int = 201
    nt: int = 201
    T: float = 0.1
    a: float = 0.0
    b: float = 1.0
    dt: float = 5e-5
    datum: str = "delta"
    x0: float = 0.5
    amplitude_exponent: float = 0.5
    cauchy_P: int = 7
    cauchy_nx: int = 1441
    cauchy_nt: int = 21
    cauchy_dt: float = 5e-4
    unique_offset: int = 3
    trials: int = 100
    output_dir: str = "colombeau-out"
    seed: int = 0
    jobs: int = 1

    def validate(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}")
        if not 0 < self.eps_min < self.eps_max <= 1:
            raise ConfigError("need 0 < eps_min < eps_max <= 1")
        if not 0 <= self.q_max <= 8:
            raise ConfigError("q_max must be in [0, 8]")
        if not 2 <= self.fit_window <= self.eps_count:
            raise ConfigError("fit_window must be in [2, eps_count]")
        if self.datum not in GeneralizedInitialDatum.KINDS or self.datum in ("smooth", "custom"):
            raise ConfigError(f"datum must be delta, delta_prime, heaviside or boundary_decaying, got {self.datum!r}")
        if self.jobs < 1:
            raise ConfigError("jobs must be >= 1")
        for key, nt in (("dt", self.nt), ("cauchy_dt", self.cauchy_nt)):
            ratio = self.T / (nt - 1) / getattr(self, key)
            if ratio < 1 - 1e-9 or abs(ratio - round(ratio)) > 1e-6:
                raise ConfigError(f"{key} must divide the saved time spacing T/(nt-1)")
        return self

    @property
    def net_grids(self):
        eps = EpsilonGrid.geometric(self.eps_max, self.eps_min, self.eps_count, self.fit_window)
        return NetGrids(OrderGrid(tuple(range(self.q_max + 1))), eps)

    @property
    def grid(self):
        return SpaceTimeGrid(DomainSpec(self.a, self.b, self.nx), self.T, self.nt)

    def datum_spec(self, kind=None):
        return GeneralizedInitialDatum(kind or self.datum, self.x0, amplitude_exponent=self.amplitude_exponent)


_KEYS = {f.name: f.type for f in fields(RunConfig)}
_CASTS = {"float": float, "int": int, "str": str}


def load_config(path, overrides=None) -> RunConfig:
    """Read ``[run]`` / ``[datum]`` sections; errors carry the offending line number."""
    values = {}
    if path is not None:
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
        if not text.strip():
            raise ConfigError(f"{path}:1: empty configuration file (expected a [run] section)")
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text, source=path)
        except configparser.Error as exc:
            line = getattr(exc, "lineno", None)
            where = f"{path}:{line}" if line else str(path)
            raise ConfigError(f"{where}: {exc.message.splitlines()[0]}") from exc
        lines = text.splitlines()
        for section in parser.sections():
            if section not in ("run", "datum"):
                raise ConfigError(f"{path}:{_line_of(lines, '[' + section)}: unknown section [{section}]")
            for key, raw in parser.items(section):
                if key not in _KEYS:
                    raise ConfigError(f"{path}:{_line_of(lines, key)}: unknown key {key!r}")
                try:
                    values[key] = _CASTS[_KEYS[key]](raw)
                except ValueError as exc:
                    raise ConfigError(f"{path}:{_line_of(lines, key)}: bad value for {key}: {raw!r}") from exc
    values.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return RunConfig(**values).validate()


def _line_of(lines, needle):
    for n, line in enumerate(lines, 1):
        if line.strip().startswith(needle):
            return n
    return 1


class Reporter:
    """Collects emitted CSVs and the first failing invariant."""

    def __init__(self, out):
        self.out = out
        self.files = []
        self.first_failure = None
        self.summary = []

    def emit(self, name, header, rows, check=None):
        path = write_csv(os.path.join(self.out, name), header, rows)
        self.files.append(path)
        if "pass" in header:
            k = header.index("pass")
            for row in rows:
                if not bool(row[k]) and self.first_failure is None:
                    label = check or name
                    self.first_failure = (label, path)
        return path

    def note(self, line):
        self.summary.append(line)


def _all_pass(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or "pass" not in rows[0]:
        return True
    k = rows[0].index("pass")
    return all(r[k] == "true" for r in rows[1:])


def run_mollifier_check(cfg, rep):
    rows = []
    for q in range(cfg.q_max + 1):
        prof = build_mollifier(MollifierSpec(q))
        for j in range(q + 1):
            val = moment(prof, j)
            oracle = quad(lambda x: x ** j * prof(x), -prof.radius, prof.radius, epsabs=1e-13, limit=200)[0]
            target = 1.0 if j == 0 else 0.0
            ok = abs(val - target) <= 1e-8 and abs(oracle - target) <= 1e-8
            rows.append((q, j, val, oracle, ok))
    rep.emit("moments.csv", ["q", "j", "value", "oracle", "pass"], rows, "mollifier moments")
    rep.note(f"mollifier-check: {sum(r[-1] for r in rows)}/{len(rows)} moments within 1e-8")


def run_net_fit(cfg, rep):
    grids = cfg.net_grids
    battery = []
    for name, vals, expected in synthetic_battery(grids):
        net = ScalarNet(grids, vals)
        fit = fit_exponent(net)
        mod = is_moderate(net)
        neg = is_negligible(net)
        rep.emit(f"fits_{name}.csv", ["q", "slope", "intercept", "residual", "verdict"],
                 [(q, s, b, r, str(mod)) for q, s, b, r in fit.rows()])
        ok = neg.yes == (expected == "negligible")
        battery.append((name, expected, str(neg), str(mod), ok))
    rep.emit("negligibility.csv", ["net", "expected", "negligible", "moderate", "pass"], battery,
             "negligibility discrimination")
    rep.note(f"net-fit: {sum(b[-1] for b in battery)}/{len(battery)} synthetic nets classified")


def run_topology_axioms(cfg, rep):
    grids = cfg.net_grids
    gen = PowerLawFieldGenerator(grids, DomainSpec(cfg.a, cfg.b, cfg.nx))
    report = check_filter_axioms(gen, cfg.trials, (1,), 1.0, seed=cfg.seed)
    rep.emit("axioms.csv", ["axiom", "trial", "pass", "counterexample_id"], report.rows, "filter axioms")
    rows = []
    for k in (1, 10, 100):
        for r in (1, 2, 3):
            for s, expect in ((r / 2 + 0.1, True), (r / 2 - 0.1, False)):
                a_s = scale_element(s, grids)
                got = net_leq(k * a_s * a_s, scale_element(r, grids))
                rows.append((k, r, s, expect, got, got == expect))
    rep.emit("scale_inequalities.csv", ["k", "r", "s", "expected", "accepted", "pass"], rows,
             "scale inequalities")
    counts = report.counts()
    rep.note("topology-axioms: " + ", ".join(f"{a} {p}/{n}" for a, (p, n) in counts.items()))


def run_solve_classical(cfg, rep):
    space, time_ = convergence_study("space"), convergence_study("time")
    rep.emit("convergence.csv", ["study", "step", "error"], space.rows() + time_.rows())
    checks = [("spatial refinement ratio", r, "4 +- 0.5", abs(r - 4.0) <= 0.5) for r in space.ratios]
    checks.append(("time order", time_.order, "1 +- 0.25", abs(time_.order - 1.0) <= 0.25))
    d = DomainSpec(0.0, 1.0, 200)
    grid = SpaceTimeGrid(d, 0.1, 21)
    u = solve_semilinear(np.sin(np.pi * d.x), grid, SolverConfig(dt=1e-4, cubic_enabled=False))
    exact = sine_reference(d.x, 0.1)
    rel = float(np.max(np.abs(u.values[:, -1] - exact)) / np.max(np.abs(exact)))
    checks.append(("linear sine relative error", rel, "<= 1e-3", rel <= 1e-3))
    ode_grid = SpaceTimeGrid(DomainSpec(0.0, 1.0, 16), 1.0, 21)
    v = solve_semilinear(np.full(16, 2.0), ode_grid, SolverConfig(dt=1e-5, laplacian_enabled=False))
    err = float(np.max(np.abs(v.values - 2.0 / np.sqrt(1.0 + 8.0 * ode_grid.t)[None, :])))
    checks.append(("cubic decay ODE error", err, "<= 1e-4", err <= 1e-4))
    rep.emit("solver_checks.csv", ["check", "value", "tolerance", "pass"], checks, "solver regression")
    rep.note(f"solve-classical: sine error {rel:.2e}, spatial ratios {np.round(space.ratios, 3).tolist()}, "
             f"time order {time_.order:.3f}, ODE error {err:.2e}")


def run_ibvp(cfg, rep):
    res = solve_generalized(cfg.datum_spec(), cfg.grid, cfg.net_grids, SolverConfig(dt=cfg.dt), jobs=cfg.jobs)
    rows = []
    for sigma, net in res.seminorm_nets.items():
        tag = "".join(map(str, sigma))
        for i, j, q, e in net.grids.cells():
            rows.append((q, e, tag, net.values[i, j]))
        verdict = res.moderate_verdicts[sigma]
        rep.emit(f"fits_sigma{tag}.csv", ["q", "slope", "intercept", "residual", "verdict"],
                 [(q, s, b, r, str(verdict)) for q, s, b, r in fit_exponent(net).rows()])
    rep.emit("seminorm.csv", ["q", "eps", "sigma", "value"], rows)
    ap = verify_apriori(res)
    v00 = res.moderate_verdicts[(0, 0)]
    checks = [
        ("moderate sigma=00", str(v00), v00.yes and float(np.min(v00.fit.slope)) >= -1.2
         and float(np.max(v00.fit.residual)) <= 0.15),
    ]
    for sigma in ((1, 0), (0, 1)):
        v = res.moderate_verdicts[sigma]
        checks.append((f"moderate sigma={sigma[0]}{sigma[1]}", str(v), v.yes))
    checks += [
        ("k=0 a-priori bound", f"{len(ap.k0_violations)} violations", not ap.k0_violations),
        ("maximum principle per step", f"{ap.max_principle_violations} violations",
         ap.max_principle_violations == 0),
        ("smoothing bound", f"{len(ap.smoothing_violations)} violations; worst ratio {ap.worst_smoothing_ratio:.4g}",
         not ap.smoothing_violations),
        ("boundary trace", f"{float(res.boundary_trace_residual.values.max()):.3g}",
         bool(np.all(res.boundary_trace_residual.values == 0.0))),
        ("partial result", f"{len(res.failures)} failed cells", not res.failures),
    ]
    rep.emit("ibvp_checks.csv", ["check", "value", "pass"], checks, "ibvp run")
    rep.note(f"ibvp-run ({cfg.datum}): sigma=00 {v00}, worst smoothing ratio {ap.worst_smoothing_ratio:.3f}")


def run_cauchy(cfg, rep):
    grid = SpaceTimeGrid(DomainSpec(cfg.a, cfg.b, cfg.cauchy_nx), cfg.T, cfg.cauchy_nt)
    config = SolverConfig(dt=cfg.cauchy_dt)
    checks = []
    for kind in ("boundary_decaying", "delta"):
        r = cutoff_sequence_run(cfg.datum_spec(kind), cfg.cauchy_P, grid=grid, grids=cfg.net_grids,
                                config=config, jobs=cfg.jobs)
        rep.emit(f"cauchy_{kind}.csv", ["p", "q_pair", "sigma", "fitted_exponent", "in_W_target", "pass"],
                 r.pair_rows, f"cauchy memberships ({kind})")
        checks.append((kind, "a_pq minimum", r.positivity_min, r.positivity_min >= -1e-12))
        checks.append((kind, "a_pq identity ulps", r.identity_max_ulps, r.identity_max_ulps <= 4.0))
        if r.datum.compact:
            checks.append((kind, "p0", r.p0, r.p0 is not None))
        else:
            checks.append((kind, "strictly decreasing differences", r.strictly_decreasing, r.strictly_decreasing))
            checks.append((kind, "spearman", r.spearman, r.spearman >= 0.9))
            checks.append((kind, "half-dt relative change", r.dt_check["relative_change"], True))
            rep.note(f"ibvp-cauchy: consecutive sups {np.round(r.consecutive_sups, 4).tolist()}, "
                     f"spearman {r.spearman:.3f}")
        lim = limit_assembly(r)
        checks.append((kind, "limit traces", lim.boundary_sup, lim.passed))
    rep.emit("cauchy_checks.csv", ["datum", "check", "value", "pass"], checks, "cauchy pipeline")


def run_unique(cfg, rep):
    grids = cfg.net_grids
    q_list = tuple(q for q in range(2, cfg.q_max + 1))
    kw = dict(grid=cfg.grid, eps=grids.eps, config=SolverConfig(dt=cfg.dt), jobs=cfg.jobs)
    probe = uniqueness_probe(cfg.datum_spec("delta"), q_list, cfg.unique_offset, **kw)
    control = uniqueness_probe(cfg.datum_spec("delta"), q_list, exponent=1, **kw)
    rep.emit("unique_fits.csv", ["q", "slope", "intercept", "residual", "verdict"], probe.rows())
    rep.emit("unique_control_fits.csv", ["q", "slope", "intercept", "residual", "verdict"], control.rows())
    checks = [(f"exponent q={q}", s, s >= q + cfg.unique_offset - 1) for q, s, _, _ in probe.fit.rows()]
    checks.append(("negligible perturbation", str(probe.verdict), probe.verdict.yes))
    checks.append(("eps^1 control", str(control.verdict), control.verdict.status == "no"))
    rep.emit("unique_checks.csv", ["check", "value", "pass"], checks, "uniqueness probe")
    rep.note(f"ibvp-unique: exponents {np.round(probe.fit.slope, 3).tolist()}, "
             f"verdict {probe.verdict}, control {control.verdict}")


RUNNERS = {
    "mollifier-check": run_mollifier_check,
    "net-fit": run_net_fit,
    "topology-axioms": run_topology_axioms,
    "solve-classical": run_solve_classical,
    "ibvp-run": run_ibvp,
    "ibvp-cauchy": run_cauchy,
    "ibvp-unique": run_unique,
}


def run(cfg: RunConfig, out=None, stream=None) -> int:
    out = out or cfg.output_dir
    stream = stream or sys.stdout
    rep = Reporter(out)
    names = list(RUNNERS) if cfg.experiment == "full-suite" else [cfg.experiment]
    start = time.perf_counter()
    for name in names:
        sub = Reporter(os.path.join(out, name)) if cfg.experiment == "full-suite" else rep
        RUNNERS[name](cfg, sub)
        if sub is not rep:
            rep.files += sub.files
            rep.summary += sub.summary
            rep.first_failure = rep.first_failure or sub.first_failure
    for line in rep.summary:
        print(line, file=stream)
    failed = any(not _all_pass(p) for p in rep.files)
    print(f"{len(rep.files)} reports in {out} ({time.perf_counter() - start:.1f} s)", file=stream)
    if failed:
        label, path = rep.first_failure
        print(f"FAIL: {label} (see {path})", file=stream)
        return 1
    print("PASS", file=stream)
    return 0


def build_parser():
    p = argparse.ArgumentParser(prog="colombeau", description=__doc__.splitlines()[0])
    p.add_argument("experiment", choices=EXPERIMENTS)
    p.add_argument("--config", help="INI file with [run] and [datum] sections")
    p.add_argument("--out", help="output directory (default: output_dir from the config)")
    p.add_argument("--jobs", type=int, help="worker processes (fallback: COLOMBEAU_JOBS)")
    p.add_argument("--seed", type=int, help="seed for randomised checks")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    jobs = args.jobs
    if jobs is None and os.environ.get("COLOMBEAU_JOBS"):
        try:
            jobs = int(os.environ["COLOMBEAU_JOBS"])
        except ValueError:
            print("error: COLOMBEAU_JOBS must be an integer", file=sys.stderr)
            return 2
    try:
        cfg = load_config(args.config, {"experiment": args.experiment, "jobs": jobs, "seed": args.seed})
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return run(cfg, args.out)


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from colombeau.domains import DomainSpec, SpaceTimeGrid
from colombeau.finite_difference import DerivativeBudgetError
from colombeau.solver import (ClassicalField, NewtonDivergenceError, SolverConfig, ck_norm, convergence_study,
                              derivative_field,
                              sine_reference, solve_linear, solve_semilinear, solve_with_perturbation)


def exact_field(grid, fn):
    X, Tt = np.meshgrid(grid.x, grid.t, indexing="ij")
    return ClassicalField(grid, fn(X, Tt), {}, np.zeros(1), SolverConfig())


def test_config_validation():
    with pytest.raises(ValueError):
        SolverConfig(scheme="explicit")
    with pytest.raises(ValueError):
        SolverConfig(dt=0.0)
    with pytest.raises(ValueError):
        SolverConfig(newton_tol=0.0)


def test_zero_data(small_spacetime):
    u = solve_semilinear(np.zeros(101), small_spacetime)
    assert np.all(u.values == 0.0)
    assert u.max_principle_violations() == 0


def test_shape_and_stride_checks(small_spacetime):
    with pytest.raises(ValueError):
        solve_semilinear(np.zeros(50), small_spacetime)
    with pytest.raises(ValueError):
        solve_semilinear(np.zeros(101), small_spacetime, SolverConfig(dt=3e-4))


def test_linear_sine_regression():
    grid = SpaceTimeGrid(DomainSpec(0.0, 1.0, 200), 0.1, 21)
    g = np.sin(np.pi * grid.x)
    u = solve_semilinear(g, grid, SolverConfig(dt=1e-4, cubic_enabled=False))
    exact = sine_reference(grid.x, 0.1)
    assert np.max(np.abs(u.values[:, -1] - exact)) / np.max(np.abs(exact)) <= 1e-3
    assert np.all(u.values[[0, -1]] == 0.0)


def test_ode_mode_closed_form():
    # the closed form is first confirmed by an independent adaptive integrator
    ref = solve_ivp(lambda t, y: -y ** 3, (0.0, 1.0), [2.0], rtol=1e-12, atol=1e-14, dense_output=True)
    t = np.linspace(0.0, 1.0, 21)
    closed = 2.0 / np.sqrt(1.0 + 8.0 * t)
    np.testing.assert_allclose(ref.sol(t)[0], closed, rtol=1e-9)
    grid = SpaceTimeGrid(DomainSpec(0.0, 1.0, 16), 1.0, 21)
    cfg = SolverConfig(dt=1e-5, laplacian_enabled=False)
    u = solve_semilinear(np.full(16, 2.0), grid, cfg)
    assert u.projected == 0.0
    assert np.max(np.abs(u.values - closed[None, :])) <= 1e-4


def test_boundary_projection_recorded(small_spacetime):
    g = np.ones(101)
    u = solve_semilinear(g, small_spacetime)
    assert u.projected == 1.0
    assert np.all(u.values[[0, -1]] == 0.0)


@pytest.mark.parametrize("a0, decay", [(0.0, np.pi ** 2), (1.0, np.pi ** 2 + 1.0)])
def test_linear_variant_decay(a0, decay):
    grid = SpaceTimeGrid(DomainSpec(0.0, 1.0, 200), 0.1, 21)
    v = solve_linear(a0, 0.0, np.sin(np.pi * grid.x), grid, SolverConfig(dt=1e-4))
    exact = sine_reference(grid.x, 0.1, decay)
    assert np.max(np.abs(v.values[:, -1] - exact)) / np.max(np.abs(exact)) <= 1e-3


def test_linear_variant_supersolution_bound(rng):
    grid = SpaceTimeGrid(DomainSpec(0.0, 1.0, 101), 0.2, 21)
    x = grid.x
    for _ in range(5):
        c = rng.uniform(0, 3, size=3)
        a0 = lambda x, t, c=c: c[0] * (1 + np.sin(3 * x + t)) + c[1] * x
        f = rng.uniform(-2, 2) * np.cos(2 * x) + rng.uniform(-1, 1)
        g = rng.uniform(-1, 1) * np.sin(np.pi * x) * (1 + c[2] * x)
        v = solve_linear(a0, f, g, grid, SolverConfig(dt=1e-3))
        assert v.sup <= np.max(np.abs(g)) + grid.T * np.max(np.abs(f)) + 1e-12
        # the same march is bounded at every saved time by the supersolution |g| + t |f|
        assert np.all(np.max(np.abs(v.values), axis=0) <= np.max(np.abs(g)) + grid.t * np.max(np.abs(f)) + 1e-12)


def test_linear_variant_rejects_negative_coefficient(small_spacetime):
    with pytest.raises(ValueError):
        solve_linear(-1.0, 0.0, np.zeros(101), small_spacetime)
    with pytest.raises(ValueError):
        solve_linear(np.zeros(7), 0.0, np.zeros(101), small_spacetime)


def test_derivative_field_identity_and_closed_form():
    grid = SpaceTimeGrid(DomainSpec(0.0, 1.0, 201), 0.1, 201)
    u = exact_field(grid, sine_reference)
    assert np.array_equal(derivative_field(u, (0, 0)), u.values)
    X, Tt = np.meshgrid(grid.x, grid.t, indexing="ij")
    dx = np.pi * np.exp(-np.pi ** 2 * Tt) * np.cos(np.pi * X)
    assert np.max(np.abs(derivative_field(u, (1, 0)) - dx)) <= 2 * np.pi ** 3 * grid.domain.h ** 2
    with pytest.raises(DerivativeBudgetError):
        derivative_field(u, (3, 0))


def test_derivative_field_second_order():
    errors = []
    for nx in (51, 101, 201):
        grid = SpaceTimeGrid(DomainSpec(0.0, 1.0, nx), 0.1, 21)
        u = exact_field(grid, sine_reference)
        X, Tt = np.meshgrid(grid.x, grid.t, indexing="ij")
        dx = np.pi * np.exp(-np.pi ** 2 * Tt) * np.cos(np.pi * X)
        errors.append(np.max(np.abs(derivative_field(u, (1, 0)) - dx)))
    ratios = np.array(errors[:-1]) / np.array(errors[1:])
    assert np.all(np.abs(ratios - 4.0) <= 0.5)


def test_ck_norm_values():
    grid = SpaceTimeGrid(DomainSpec(0.0, 1.0, 201), 0.1, 201)
    zero = exact_field(grid, lambda x, t: 0 * x)
    assert ck_norm(zero, 2) == 0.0
    u = exact_field(grid, sine_reference)
    assert abs(ck_norm(u, 0) - 1.0) <= 1e-12
    # sup|u| + sup|u_x| + sup|u_t|, all attained at t = 0
    assert abs(ck_norm(u, 1) / (1 + np.pi + np.pi ** 2) - 1) <= 0.01
    with pytest.raises(DerivativeBudgetError):
        ck_norm(u, 3)


def test_spatial_convergence_order():
    rep = convergence_study("space")
    assert abs(rep.order - 2.0) <= 0.25
    assert np.all(np.abs(rep.ratios - 4.0) <= 0.5)


def test_time_convergence_order():
    rep = convergence_study("time", fine_nx=201)
    assert abs(rep.order - 1.0) <= 0.25


def test_zero_data_study():
    rep = convergence_study("space", amplitude=0.0)
    assert np.all(rep.errors == 0.0)
    with pytest.raises(ValueError):
        convergence_study("space", nx_values=(26, 51))
    with pytest.raises(ValueError):
        convergence_study("both")


def test_convergence_csv(tmp_path):
    rep = convergence_study("space", amplitude=0.0)
    lines = open(rep.to_csv(tmp_path / "c.csv")).read().splitlines()
    assert lines[0] == "study,step,error"
    assert len(lines) == 4


@pytest.mark.parametrize("g", [lambda x: 40 * np.exp(-((x - 0.3) / 0.02) ** 2),
                               lambda x: 5 * np.sign(np.sin(6 * np.pi * x)),
                               lambda x: 100 * x * (1 - x)])
def test_maximum_principle(g, small_spacetime):
    u = solve_semilinear(g(small_spacetime.x), small_spacetime)
    assert u.max_principle_violations() == 0
    assert u.sup <= np.max(np.abs(g(small_spacetime.x)))


def test_odd_symmetry(small_spacetime):
    x = small_spacetime.x
    u = solve_semilinear(3 * np.sin(2 * np.pi * x) + np.sin(4 * np.pi * x), small_spacetime)
    assert np.max(np.abs(u.values + u.values[::-1])) <= 1e-10


def test_newton_mode_agrees_with_lagged(small_spacetime):
    g = 4 * np.sin(np.pi * small_spacetime.x)
    lag = solve_semilinear(g, small_spacetime, SolverConfig(dt=1e-5))
    cn = solve_semilinear(g, small_spacetime, SolverConfig("crank-nicolson-newton", dt=1e-4))
    assert np.max(np.abs(lag.values - cn.values)) <= 1e-3
    assert cn.newton_iters[1:].max() <= cn.config.newton_max_iters
    steps = cn.diagnostics()
    assert len(steps) == len(cn.step_sup) and steps[0][0] == 0


def test_perturbation_march_matches_direct_difference(small_spacetime):
    x = small_spacetime.x
    g = 10 * np.sin(np.pi * x)
    w0 = 1e-3 * np.sin(3 * np.pi * x)
    u, w = solve_with_perturbation(g, w0, small_spacetime)
    v = solve_semilinear(g + w0, small_spacetime)
    base = solve_semilinear(g, small_spacetime)
    np.testing.assert_allclose(u.values, base.values, atol=1e-13)
    np.testing.assert_allclose(w.values, v.values - base.values, atol=1e-12)
    _, zero = solve_with_perturbation(g, np.zeros_like(x), small_spacetime)
    assert np.all(zero.values == 0.0)


def test_trajectory_csv(tmp_path, small_spacetime):
    u = solve_semilinear(np.zeros(101), small_spacetime)
    lines = open(u.to_csv(tmp_path / "traj.csv")).read().splitlines()
    assert lines[0] == "t,x,value"
    assert len(lines) == 1 + 101 * 21


def test_newton_divergence_reported(small_spacetime):
    with pytest.raises(NewtonDivergenceError):
        solve_semilinear(1e200 * np.sin(np.pi * small_spacetime.x), small_spacetime,
                         SolverConfig("crank-nicolson-newton", dt=1e-4))

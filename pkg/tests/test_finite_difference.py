import numpy as np
import pytest

from colombeau.finite_difference import DerivativeBudgetError, derivative, partial


def test_order_zero_is_identity():
    v = np.arange(10.0)
    assert np.array_equal(derivative(v, 0.1, 0), v)


def test_quadratic_is_exact():
    x = np.linspace(0, 1, 21)
    h = x[1] - x[0]
    np.testing.assert_allclose(derivative(x ** 2, h, 1), 2 * x, atol=1e-12)
    np.testing.assert_allclose(derivative(x ** 2, h, 2), 2.0, atol=1e-9)


@pytest.mark.parametrize("order", [1, 2])
def test_second_order_convergence(order):
    errs = []
    for n in (41, 81, 161):
        x = np.linspace(0, 1, n)
        exact = np.pi * np.cos(np.pi * x) if order == 1 else -np.pi ** 2 * np.sin(np.pi * x)
        errs.append(np.max(np.abs(derivative(np.sin(np.pi * x), x[1] - x[0], order) - exact)))
    ratios = np.array(errs[:-1]) / np.array(errs[1:])
    np.testing.assert_allclose(ratios, 4.0, atol=0.5)


def test_mixed_partial():
    x, t = np.linspace(0, 1, 51), np.linspace(0, 1, 41)
    u = np.outer(x ** 2, t)
    d = partial(u, (x[1] - x[0], t[1] - t[0]), (1, 1))
    np.testing.assert_allclose(d, np.outer(2 * x, np.ones_like(t)), atol=1e-10)


def test_budget():
    with pytest.raises(DerivativeBudgetError):
        partial(np.zeros((5, 5)), (1.0, 1.0), (3, 0))

"""Second-order finite differences on uniform grids."""
import numpy as np


class DerivativeBudgetError(ValueError):
    pass


def _second(v, h, axis):
    v = np.moveaxis(v, axis, -1)
    if v.shape[-1] < 4:
        raise ValueError("need at least 4 samples for a second derivative")
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / h ** 2
    out[..., 0] = (2.0 * v[..., 0] - 5.0 * v[..., 1] + 4.0 * v[..., 2] - v[..., 3]) / h ** 2
    out[..., -1] = (2.0 * v[..., -1] - 5.0 * v[..., -2] + 4.0 * v[..., -3] - v[..., -4]) / h ** 2
    return np.moveaxis(out, -1, axis)


def derivative(values, h, order, axis=-1):
    """``order``-th derivative along ``axis``: central inside, one-sided at the edges."""
    v = np.asarray(values, dtype=float)
    if order == 0:
        return v
    if order % 2:
        v = np.gradient(v, h, axis=axis, edge_order=2)
    for _ in range(order // 2):
        v = _second(v, h, axis)
    return v


def partial(values, spacings, sigma, budget=2, first_axis=0):
    """Mixed partial ``d^sigma`` over the trailing axes starting at ``first_axis``."""
    if any(s > budget for s in sigma):
        raise DerivativeBudgetError(f"derivative order {tuple(sigma)} exceeds budget {budget} per axis")
    out = np.asarray(values, dtype=float)
    for k, (s, h) in enumerate(zip(sigma, spacings)):
        if s:
            out = derivative(out, h, s, axis=first_axis + k)
    return out


# Worst-case truncation constants over the stencils above: one-sided first
# derivative (h^2/3 f'''), one-sided second derivative (11 h^2/12 f'''').
_EDGE_CONSTANT = {1: 1.0 / 3.0, 2: 11.0 / 12.0}


def truncation_bound(values, spacings, sigma, first_axis=0, safety=1.5):
    """Sup-norm bound on ``|partial(values, sigma) - d^sigma u|`` for smooth ``u``.

    Per differentiated axis, ``C h^2 sup|d^(s+2) ...|`` with the higher
    derivative itself estimated by differences; ``safety`` covers that
    estimate.  Reduced over the trailing carrier axes.
    """
    v = np.asarray(values, dtype=float)
    carrier_axes = tuple(range(first_axis, v.ndim))
    total = np.zeros(v.shape[:first_axis])
    for k, (s, h) in enumerate(zip(sigma, spacings)):
        if not s:
            continue
        rest = tuple(0 if j == k else sj for j, sj in enumerate(sigma))
        high = tuple(s + 2 if j == k else 0 for j in range(len(sigma)))
        d = partial(partial(v, spacings, rest, budget=2, first_axis=first_axis), spacings, high,
                    budget=4, first_axis=first_axis)
        total = total + _EDGE_CONSTANT[s] * h ** 2 * np.abs(d).max(axis=carrier_axes)
    return safety * total

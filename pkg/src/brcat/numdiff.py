"""Central-difference gradients and Hessians with Richardson extrapolation."""

from __future__ import annotations

import numpy as np

from .exceptions import BrcatError


class DifferentiationError(BrcatError, ArithmeticError):
    pass


def _steps(theta, step):
    theta = np.asarray(theta, dtype=float)
    if step is None:
        step = 1e-2
    return np.asarray(step, dtype=float) * np.maximum(1.0, np.abs(theta))


def _call(f, x):
    val = float(f(x))
    if not np.isfinite(val):
        raise DifferentiationError(f"function is not finite at {x}")
    return val


def _call_batch(f, points):
    vals = np.asarray(f(np.asarray(points)), dtype=float).reshape(len(points))
    if not np.all(np.isfinite(vals)):
        raise DifferentiationError("function is not finite on the difference stencil")
    return vals


def _richardson(table):
    # table[r] holds estimates with step h / 2**r; errors are even in h
    table = [np.asarray(t, dtype=float) for t in table]
    for level in range(1, len(table)):
        factor = 4.0 ** level
        table = [(factor * table[r + 1] - table[r]) / (factor - 1) for r in range(len(table) - 1)]
    return table[0]


def numeric_gradient(f, theta, step=None, levels=4, vectorized=False):
    """Gradient of scalar ``f`` at ``theta``.

    With ``vectorized=True``, ``f`` maps an (m, v) array of points to m values
    and the whole stencil is evaluated in one call.
    """
    theta = np.asarray(theta, dtype=float)
    h0 = _steps(theta, step)
    if vectorized:
        v = theta.size
        h = h0[None, :] / 2.0 ** np.arange(levels)[:, None]          # (levels, v)
        E = np.eye(v)[None, :, :] * h[:, :, None]                    # (levels, v, v)
        pts = np.concatenate([theta + E, theta - E], axis=0).reshape(-1, v)
        vals = _call_batch(f, pts).reshape(2, levels, v)
        return _richardson(list((vals[0] - vals[1]) / (2 * h)))
    table = []
    for r in range(levels):
        h = h0 / 2 ** r
        g = np.empty(theta.size)
        for t in range(theta.size):
            e = np.zeros(theta.size)
            e[t] = h[t]
            g[t] = (_call(f, theta + e) - _call(f, theta - e)) / (2 * h[t])
        table.append(g)
    return _richardson(table)


def numeric_hessian(f, theta, step=None, levels=4, vectorized=False):
    """Symmetrized Hessian of scalar ``f`` at ``theta``.

    Uses the four-point stencil ``[f(++) - f(+-) - f(-+) + f(--)] / (4 h_a h_b)``
    for every pair (a, b), including a == b, and extrapolates over step
    halvings. Raises :class:`DifferentiationError` if ``f`` is not finite on
    the stencil.
    """
    theta = np.asarray(theta, dtype=float)
    v = theta.size
    h0 = _steps(theta, step)
    if vectorized:
        return _hessian_batch(f, theta, h0, levels)
    table = []
    for r in range(levels):
        h = h0 / 2 ** r
        H = np.empty((v, v))
        for a in range(v):
            for b in range(a, v):
                ea = np.zeros(v)
                eb = np.zeros(v)
                ea[a] = h[a]
                eb[b] = h[b]
                val = (_call(f, theta + ea + eb) - _call(f, theta + ea - eb)
                       - _call(f, theta - ea + eb) + _call(f, theta - ea - eb))
                H[a, b] = H[b, a] = val / (4 * h[a] * h[b])
        table.append(H)
    H = _richardson(table)
    return 0.5 * (H + H.T)


def _hessian_batch(f, theta, h0, levels):
    v = theta.size
    a, b = np.triu_indices(v)
    signs = np.array([[1, 1], [1, -1], [-1, 1], [-1, -1]], dtype=float)
    h = h0[None, :] / 2.0 ** np.arange(levels)[:, None]               # (levels, v)
    ea = np.eye(v)[a][None] * h[:, a][:, :, None]                      # (levels, pairs, v)
    eb = np.eye(v)[b][None] * h[:, b][:, :, None]
    pts = theta + signs[:, 0, None, None, None] * ea + signs[:, 1, None, None, None] * eb
    vals = _call_batch(f, pts.reshape(-1, v)).reshape(4, levels, a.size)
    second = (vals[0] - vals[1] - vals[2] + vals[3]) / (4 * h[:, a] * h[:, b])
    table = []
    for r in range(levels):
        H = np.empty((v, v))
        H[a, b] = second[r]
        H[b, a] = second[r]
        table.append(H)
    H = _richardson(table)
    return 0.5 * (H + H.T)


def numeric_jacobian(f, theta, step=None, levels=4):
    """Jacobian of vector-valued ``f``; rows index outputs."""
    theta = np.asarray(theta, dtype=float)
    h0 = _steps(theta, step)
    table = []
    for r in range(levels):
        h = h0 / 2 ** r
        cols = []
        for t in range(theta.size):
            e = np.zeros(theta.size)
            e[t] = h[t]
            cols.append((np.asarray(f(theta + e)) - np.asarray(f(theta - e))) / (2 * h[t]))
        table.append(np.stack(cols, axis=-1))
    return _richardson(table)

"""Dense two-phase tableau simplex with Bland's anti-cycling rule.

Small problems only: the separation LPs here have a few dozen variables and
at most a few hundred constraints.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .exceptions import SolverError

EPS = 1e-9


@dataclass(frozen=True)
class LPResult:
    status: str  # "optimal", "infeasible" or "unbounded"
    x: np.ndarray
    objective: float
    pivots: int


def _pivot(T, row, col):
    T[row] /= T[row, col]
    for r in range(T.shape[0]):
        if r != row and T[r, col] != 0.0:
            T[r] -= T[r, col] * T[row]


def _run(T, basis, n_cols, max_pivots, pivots):
    """Maximize the objective held in the last row (stored as -c); Bland's rule."""
    m = T.shape[0] - 1
    while True:
        obj = T[-1, :n_cols]
        entering = next((j for j in range(n_cols) if obj[j] < -EPS), None)
        if entering is None:
            return "optimal", pivots
        col = T[:m, entering]
        rows = [i for i in range(m) if col[i] > EPS]
        if not rows:
            return "unbounded", pivots
        ratios = [T[i, -1] / col[i] for i in rows]
        best = min(ratios)
        ties = [i for i, r in zip(rows, ratios) if r <= best + EPS * max(1.0, abs(best))]
        leaving = min(ties, key=lambda i: basis[i])
        _pivot(T, leaving, entering)
        basis[leaving] = entering
        pivots += 1
        if pivots > max_pivots:
            raise SolverError(f"simplex exceeded {max_pivots} pivots")


def linprog_max(c, A_ub=None, b_ub=None, A_eq=None, b_eq=None, max_pivots=100_000):
    """Maximize ``c @ x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq``, ``x >= 0``."""
    c = np.asarray(c, dtype=float)
    n = c.size
    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)

    rows, kinds, rhs = [], [], []
    for a, b in zip(A_ub, b_ub):
        if b >= 0:
            rows.append(a), kinds.append("le"), rhs.append(b)
        else:
            rows.append(-a), kinds.append("ge"), rhs.append(-b)
    for a, b in zip(A_eq, b_eq):
        sign = 1.0 if b >= 0 else -1.0
        rows.append(sign * a), kinds.append("eq"), rhs.append(sign * b)
    m = len(rows)
    n_slack = sum(k != "eq" for k in kinds)
    n_art = sum(k != "le" for k in kinds)
    N = n + n_slack + n_art
    T = np.zeros((m + 1, N + 1))
    basis = [0] * m
    s = n
    a_col = n + n_slack
    artificial = []
    for i, (a, kind, b) in enumerate(zip(rows, kinds, rhs)):
        T[i, :n] = a
        T[i, -1] = b
        if kind == "le":
            T[i, s] = 1.0
            basis[i] = s
            s += 1
        else:
            if kind == "ge":
                T[i, s] = -1.0
                s += 1
            T[i, a_col] = 1.0
            basis[i] = a_col
            artificial.append(a_col)
            a_col += 1

    pivots = 0
    if artificial:
        # phase 1: maximize -sum(artificials)
        T[-1, :] = 0.0
        T[-1, artificial] = 1.0
        for i in range(m):
            if basis[i] in artificial:
                T[-1] -= T[i]
        status, pivots = _run(T, basis, N, max_pivots, pivots)
        if T[-1, -1] < -1e-7:
            return LPResult("infeasible", np.full(n, np.nan), float("nan"), pivots)
        art = set(artificial)
        for i in range(m):
            if basis[i] in art:
                j = next((j for j in range(n + n_slack) if abs(T[i, j]) > EPS), None)
                if j is not None:
                    _pivot(T, i, j)
                    basis[i] = j
        keep = [i for i in range(m) if basis[i] not in art]
        T = np.vstack([T[keep], T[-1:]])
        basis = [basis[i] for i in keep]
        T = np.hstack([T[:, : n + n_slack], T[:, -1:]])
        N = n + n_slack
        m = len(basis)

    T[-1, :] = 0.0
    T[-1, :n] = -c
    for i in range(m):
        if T[-1, basis[i]] != 0.0:
            T[-1] -= T[-1, basis[i]] * T[i]
    status, pivots = _run(T, basis, N, max_pivots, pivots)
    if status == "unbounded":
        return LPResult("unbounded", np.full(n, np.nan), float("inf"), pivots)
    x = np.zeros(N)
    for i, j in enumerate(basis):
        x[j] = T[i, -1]
    return LPResult("optimal", x[:n], float(T[-1, -1]), pivots)

"""Separation detection and empirical adjacent logits.

A direction ``b`` in parameter space is a recession direction of the
multinomial log-likelihood when, for every row ``i`` and every observed
category ``j``, the linear predictor of ``j`` is maximal along ``b``::

    (X_ij - X_il) @ b >= 0   for all l != j        (X_ik = 0)

The ML estimate has infinite components exactly when such a ``b`` makes at
least one of these margins strictly positive.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from .exceptions import SolverError
from .simplex import linprog_max

TOL = 1e-7


class SeparationStatus(str, Enum):
    OVERLAP = "overlap"
    QUASI_COMPLETE = "quasi-complete"
    COMPLETE = "complete"


@dataclass(frozen=True)
class SeparationReport:
    status: SeparationStatus
    separating_direction: Optional[np.ndarray]
    infinite_components: np.ndarray  # -1, 0, +1 per parameter
    names: tuple = ()

    @property
    def separated(self):
        return self.status is not SeparationStatus.OVERLAP

    def describe(self):
        if not self.separated:
            return "overlap; all ML estimates are finite"
        parts = [
            f"{name}->{'+inf' if s > 0 else '-inf'}"
            for name, s in zip(self.names, self.infinite_components) if s
        ]
        if not parts:
            return f"{self.status.value}; no single coefficient has a fixed sign along every separating direction"
        return f"{self.status.value}; " + ", ".join(parts)


def margin_rows(design, Y):
    """One row per (observation, observed category, other category) pair."""
    n, q, v = design.shape
    full = np.concatenate([design, np.zeros((n, 1, v))], axis=1)
    rows = []
    for i in range(n):
        for j in np.flatnonzero(Y[i] > 0):
            for l in range(q + 1):
                if l != j:
                    rows.append(full[i, j] - full[i, l])
    return np.array(rows).reshape(-1, v)


def _free(A):
    # b = b_plus - b_minus so the simplex sees non-negative variables only
    return np.hstack([A, -A])


def _maximal_separated(M):
    """Maximize sum(s) with 0 <= s <= 1, s <= M b, M b >= 0; returns (b, s)."""
    P, v = M.shape
    c = np.concatenate([np.zeros(2 * v), np.ones(P)])
    A_ub = np.vstack([
        np.hstack([-_free(M), np.eye(P)]),          # s - M b <= 0
        np.hstack([-_free(M), np.zeros((P, P))]),   # -M b <= 0
        np.hstack([np.zeros((P, 2 * v)), np.eye(P)]),  # s <= 1
    ])
    b_ub = np.concatenate([np.zeros(2 * P), np.ones(P)])
    res = linprog_max(c, A_ub, b_ub)
    if res.status != "optimal":
        raise SolverError(f"separation LP ended with status {res.status}")
    b = res.x[:v] - res.x[v:2 * v]
    return b, res.x[2 * v:]


def _component_signs(M, separated):
    """Sign of each coordinate that is bounded away from zero over the separating cone."""
    P, v = M.shape
    lower = np.where(separated, 1.0, 0.0)
    A_ub = -_free(M)
    b_ub = -lower
    signs = np.zeros(v, dtype=int)
    for t in range(v):
        e = np.zeros(v)
        e[t] = 1.0
        lo = linprog_max(-np.concatenate([e, -e]), A_ub, b_ub)   # max -b_t
        if lo.status == "optimal" and -lo.objective > TOL:
            signs[t] = 1
            continue
        hi = linprog_max(np.concatenate([e, -e]), A_ub, b_ub)    # max b_t
        if hi.status == "optimal" and hi.objective < -TOL:
            signs[t] = -1
    return signs


def detect_separation(mm, d, design=None):
    """Classify the data configuration as overlap, quasi-complete or complete separation.

    Directions and infinite components are reported in the model's native
    parameterization. A component is reported infinite when every direction
    achieving the maximal separation moves it with the same sign.
    """
    X = mm.design if design is None else design
    v = X.shape[2]
    M = margin_rows(X, d.Y)
    scale = np.max(np.abs(M)) if M.size else 1.0
    M = M / (scale if scale > 0 else 1.0)
    b, s = _maximal_separated(M)
    separated = s > 1 - 1e-6
    if not separated.any():
        return SeparationReport(SeparationStatus.OVERLAP, None, np.zeros(v, dtype=int), mm.names)
    status = SeparationStatus.COMPLETE if separated.all() else SeparationStatus.QUASI_COMPLETE
    direction = b / np.max(np.abs(b))
    signs = _component_signs(M, separated)
    return SeparationReport(status, direction, signs, mm.names)


def empirical_adjacent_logits(y):
    """log{(y_j + 1/2) / (y_{j+1} + 1/2)} for j = 1..k-1."""
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("counts must be non-negative")
    adj = y + 0.5
    return np.log(adj[..., :-1] / adj[..., 1:])

"""Log-likelihood, score, information and bias-reducing adjustments.

All quantities are for independent multinomial rows under a canonical
(baseline-category logit) link, so observed and expected information
coincide and the ``Q_t`` terms of the general adjusted scores vanish.
Functions accept either a :class:`~brcat.model.ParamVector` or a plain
array in the model matrix's native parameterization.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve
from scipy.special import gammaln

from .exceptions import SingularInformationError


def _theta(theta):
    return np.asarray(theta, dtype=float)


def _design(mm, design):
    return mm.design if design is None else design


def _probs(mm, theta, design=None):
    X = _design(mm, design)
    eta = X @ theta
    full = np.concatenate([eta, np.zeros((eta.shape[0], 1))], axis=1)
    full -= full.max(axis=1, keepdims=True)
    logp = full - np.log(np.exp(full).sum(axis=1, keepdims=True))
    return logp


def log_likelihood(mm, d, theta, design=None):
    """sum_i sum_j y_ij log pi_ij, multinomial coefficients omitted."""
    logp = _probs(mm, _theta(theta), design)
    Y = d.Y
    return float(np.sum(np.where(Y > 0, Y * logp, 0.0)))


def multinomial_constant(d):
    """sum_i log{m_i! / prod_j y_ij!}; gamma functions allow non-integer counts."""
    Y = d.Y
    return float(np.sum(gammaln(d.totals + 1)) - np.sum(gammaln(Y + 1)))


def fitted_means(mm, d, theta, design=None):
    """Expected counts m_i pi_ij, shape (n, k)."""
    return d.totals[:, None] * np.exp(_probs(mm, _theta(theta), design))


def score(mm, d, theta, design=None):
    X = _design(mm, design)
    mu = fitted_means(mm, d, theta, X)
    q = X.shape[1]
    return np.einsum("nqv,nq->v", X, d.Y[:, :q] - mu[:, :q])


def _info_matrix(X, m, pi):
    q = X.shape[1]
    p = pi[:, :q]
    # X' (diag(pi) - pi pi') X per row, weighted by totals
    xbar = np.einsum("nqv,nq->nv", X, p)
    first = np.einsum("n,nq,nqa,nqb->ab", m, p, X, X)
    return first - np.einsum("n,na,nb->ab", m, xbar, xbar)


class InfoMatrix:
    """Expected information with lazily cached Cholesky factor, inverse and log-determinant."""

    def __init__(self, i):
        i = np.asarray(i, dtype=float)
        self.i = 0.5 * (i + i.T)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.i, dtype=dtype)

    @cached_property
    def _cho(self):
        try:
            return cho_factor(self.i, lower=True, check_finite=True)
        except (LinAlgError, ValueError) as exc:
            raise SingularInformationError(f"information matrix is singular: {exc}") from None

    @cached_property
    def log_det(self):
        c, _ = self._cho
        return float(2.0 * np.sum(np.log(np.diag(c))))

    @cached_property
    def inverse(self):
        inv = cho_solve(self._cho, np.eye(self.i.shape[0]))
        return 0.5 * (inv + inv.T)

    def solve(self, b):
        return cho_solve(self._cho, b)


def expected_info(mm, d, theta, design=None):
    X = _design(mm, design)
    pi = np.exp(_probs(mm, _theta(theta), X))
    return InfoMatrix(_info_matrix(X, d.totals, pi))


def penalized_log_likelihood(mm, d, theta, power=0.5, design=None):
    """l(theta) + power * log det i(theta).

    ``power=0.5`` is the Jeffreys-prior penalty whose maximizer solves the
    mean bias-reducing score equations; ``power=1/6`` matches median bias
    reduction for one-parameter models.
    """
    ll = log_likelihood(mm, d, theta, design)
    if power == 0:
        return ll
    return ll + power * expected_info(mm, d, theta, design).log_det


def _p_tensor(X, m, pi):
    q = X.shape[1]
    p = pi[:, :q]
    # third cumulant of the multinomial, contracted with the row design:
    # sum_j p_j X_ja X_jb X_jt - W_ab xbar_t - W_at xbar_b - W_bt xbar_a + 2 xbar_a xbar_b xbar_t
    xbar = np.einsum("nqv,nq->nv", X, p)
    W = np.einsum("nq,nqa,nqb->nab", p, X, X)
    P = np.einsum("n,nq,nqa,nqb,nqt->abt", m, p, X, X, X)
    P -= np.einsum("n,nab,nt->abt", m, W, xbar)
    P -= np.einsum("n,nat,nb->abt", m, W, xbar)
    P -= np.einsum("n,nbt,na->abt", m, W, xbar)
    P += 2.0 * np.einsum("n,na,nb,nt->abt", m, xbar, xbar, xbar)
    return P


def p_tensor(mm, d, theta, design=None):
    """Array ``P[a, b, t] = E(S_a S_b S_t)`` of shape (v, v, v)."""
    X = _design(mm, design)
    pi = np.exp(_probs(mm, _theta(theta), X))
    return _p_tensor(X, d.totals, pi)


@dataclass(frozen=True)
class AdjustmentTerms:
    A: np.ndarray
    M: np.ndarray
    P_tensor: np.ndarray


def _mean_adjustment(P, inv):
    return 0.5 * np.einsum("ab,abt->t", inv, P)


def _median_modification(P, info, inv):
    # F_u = sum_t [i^-1]_ut tr(h_u P_t) / 3 with h_u = [i^-1]_u [i^-1]_u' / [i^-1]_uu,
    # i.e. the third cumulant of the leading term of the u-th estimator scaled by its variance
    quad = np.einsum("au,abt,bu->ut", inv, P, inv) / np.diag(inv)[:, None]
    F = np.einsum("ut,ut->u", inv, quad) / 3.0
    return info @ F


def adjustment_terms(mm, d, theta, design=None):
    X = _design(mm, design)
    pi = np.exp(_probs(mm, _theta(theta), X))
    info = InfoMatrix(_info_matrix(X, d.totals, pi))
    P = _p_tensor(X, d.totals, pi)
    inv = info.inverse
    return AdjustmentTerms(_mean_adjustment(P, inv), _median_modification(P, info.i, inv), P)


def mean_adjustment(mm, d, theta, design=None):
    """A_t = trace(i^-1 P_t) / 2."""
    X = _design(mm, design)
    pi = np.exp(_probs(mm, _theta(theta), X))
    inv = InfoMatrix(_info_matrix(X, d.totals, pi)).inverse
    return _mean_adjustment(_p_tensor(X, d.totals, pi), inv)


def median_modification(mm, d, theta, design=None):
    """The vector i(theta) F(theta) subtracted from S + A for median bias reduction."""
    return adjustment_terms(mm, d, theta, design).M


def sufficient_statistics(mm, d, design=None):
    X = _design(mm, design)
    return np.einsum("nqv,nq->v", X, d.Y[:, : X.shape[1]])


class Evaluation:
    """Everything the scoring iterations need at one parameter value."""

    __slots__ = ("theta", "loglik", "score", "info", "P", "pi")

    def __init__(self, X, d, theta, need_p=True):
        self.theta = theta
        eta = X @ theta
        full = np.concatenate([eta, np.zeros((eta.shape[0], 1))], axis=1)
        full -= full.max(axis=1, keepdims=True)
        logp = full - np.log(np.exp(full).sum(axis=1, keepdims=True))
        pi = np.exp(logp)
        self.pi = pi
        Y = d.Y
        m = d.totals
        q = X.shape[1]
        self.loglik = float(np.sum(np.where(Y > 0, Y * logp, 0.0)))
        self.score = np.einsum("nqv,nq->v", X, Y[:, :q] - m[:, None] * pi[:, :q])
        self.info = InfoMatrix(_info_matrix(X, m, pi))
        self.P = _p_tensor(X, m, pi) if need_p else None

    def adjusted_score(self, method):
        if method == "ml":
            return self.score
        inv = self.info.inverse
        A = _mean_adjustment(self.P, inv)
        if method == "mbr":
            return self.score + A
        return self.score + A - _median_modification(self.P, self.info.i, inv)

"""Wald inference, bias of transformations, odds ratios and ordinal superiority."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.stats import chi2, norm

from .exceptions import ModelError
from .numdiff import numeric_gradient, numeric_hessian


def _require_mbr(fit, what):
    if fit.method != "mbr":
        raise ValueError(f"{what} requires a mean bias-reduced fit, got method={fit.method!r}")


def _index(fit, j):
    if isinstance(j, str):
        try:
            return fit.names.index(j)
        except ValueError:
            raise KeyError(f"no parameter named {j!r}; have {fit.names}") from None
    return int(j)


def transform_bias(fit, h, step=None):
    """First-order mean bias of ``h(theta*)``: trace(i^-1 Hess h) / 2 at the mBR estimate.

    The bias-corrected estimator of ``h(theta)`` is ``h(theta*)`` minus the
    returned value.
    """
    _require_mbr(fit, "transform_bias")
    H = numeric_hessian(h, fit.coef, step=step)
    return 0.5 * float(np.sum(fit.vcov * H))


@dataclass(frozen=True)
class OddsRatioEstimates:
    zeta_hat: float
    zeta_star: float
    zeta_2star: float
    zeta_3star: float
    se_zeta_hat: float
    se_zeta_star: float
    se_zeta_2star: float
    se_zeta_3star: float
    nonsensical: bool


def odds_ratio_estimators(beta, v_jj):
    """Odds-ratio estimators from a mean bias-reduced log odds ratio ``beta``.

    ``zeta_star`` subtracts the estimated bias of ``exp(beta)``,
    ``zeta_2star`` divides by the bias factor ``1 + v_jj / 2`` and
    ``zeta_3star = exp(beta - v_jj / 2)``. ``zeta_star`` is negative whenever
    ``v_jj > 2``, which is flagged as ``nonsensical``. Delta-method standard
    errors treat ``v_jj`` as fixed.
    """
    e = np.exp(beta)
    se = np.sqrt(v_jj)
    z1 = e * (1 - v_jj / 2)
    z2 = e / (1 + v_jj / 2)
    z3 = np.exp(beta - v_jj / 2)
    return OddsRatioEstimates(
        zeta_hat=float(e), zeta_star=float(z1), zeta_2star=float(z2), zeta_3star=float(z3),
        se_zeta_hat=float(e * se), se_zeta_star=float(abs(z1) * se),
        se_zeta_2star=float(z2 * se), se_zeta_3star=float(z3 * se),
        nonsensical=bool(z1 < 0),
    )


def odds_ratio_estimates(fit, j):
    _require_mbr(fit, "odds_ratio_estimates")
    t = _index(fit, j)
    return odds_ratio_estimators(fit.coef[t], fit.vcov[t, t])


@dataclass(frozen=True)
class WaldReport:
    statistic: float
    df: int
    p_value: float
    contrast: np.ndarray
    critical_value: float
    level: float = 0.95


def wald_test(fit, C, level=0.95):
    """W = (C theta)' {C i^-1 C'}^-1 (C theta), referred to chi-squared on rank(C) df."""
    C = np.atleast_2d(np.asarray(C, dtype=float))
    if C.shape[1] != fit.coef.size:
        raise ModelError(f"contrast has {C.shape[1]} columns, model has {fit.coef.size} parameters")
    q = C.shape[0]
    if q == 0 or np.linalg.matrix_rank(C) < q:
        raise ModelError("contrast matrix must have full row rank")
    c = C @ fit.coef
    W = float(c @ np.linalg.solve(C @ fit.vcov @ C.T, c))
    W = max(W, 0.0)
    return WaldReport(W, q, float(chi2.sf(W, q)), C, float(chi2.ppf(level, q)), level)


def parallel_contrast(k, p):
    """Contrast for equal slopes across the k-1 adjacent logits, per covariate.

    Columns follow the non-proportional layout ``(alpha_1..alpha_{k-1},
    beta_11..beta_1,k-1, ..., beta_p1..beta_p,k-1)``; each covariate block
    carries ``[I_{k-2} | -1]``.
    """
    if k < 3:
        raise ModelError(f"parallel-logit contrast needs k >= 3, got k={k}")
    q = k - 1
    C1 = np.hstack([np.eye(q - 1), -np.ones((q - 1, 1))])
    C = np.zeros((p * (q - 1), q * (p + 1)))
    for l in range(p):
        C[l * (q - 1):(l + 1) * (q - 1), q + l * q:q + (l + 1) * q] = C1
    return C


@dataclass(frozen=True)
class ZRow:
    name: str
    estimate: float
    se: float
    z: float
    p_value: float
    divergence: int = 0

    @property
    def annotation(self):
        if self.divergence > 0:
            return "estimate diverges to +inf"
        if self.divergence < 0:
            return "estimate diverges to -inf"
        return ""


def z_statistics(estimate, se):
    """z = estimate / se and p = 2 min(Phi(z), 1 - Phi(z))."""
    estimate = np.asarray(estimate, dtype=float)
    se = np.asarray(se, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(estimate == 0, 0.0, estimate / se)
    p = 2 * np.minimum(norm.cdf(z), norm.sf(z))
    return z, np.minimum(p, 1.0)


def z_table(fit):
    z, p = z_statistics(fit.coef, fit.se)
    return [
        ZRow(name, float(b), float(s), float(zz), float(pp), int(flag))
        for name, b, s, zz, pp, flag in zip(fit.names, fit.coef, fit.se, z, p, fit.divergence_flags)
    ]


# ordinal superiority -------------------------------------------------------


def delta_measure(pi1, pi0):
    """sum_{r>s} pi1_r pi0_s - sum_{r<s} pi1_r pi0_s; ties count for neither."""
    outer = np.outer(pi1, pi0)
    return float(np.tril(outer, -1).sum() - np.triu(outer, 1).sum())


def gamma_from_delta(delta):
    # probability that group 1 responds higher, ties split evenly
    return (delta + 1.0) / 2.0


@dataclass(frozen=True)
class SuperiorityResult:
    delta: float
    gamma: float
    B_star: float
    delta_corrected: float
    gamma_corrected: float
    se_delta: float
    se_gamma: float
    w: Optional[dict]
    corrected: bool

    @property
    def estimate_gamma(self):
        return self.gamma_corrected if self.corrected else self.gamma

    @property
    def estimate_delta(self):
        return self.delta_corrected if self.corrected else self.delta


def _group_index(fit, group):
    names = list(fit.model.covariate_names)
    g = names.index(group) if isinstance(group, str) else int(group)
    col = fit.data.X[:, g]
    if not np.all(np.isin(col, (0.0, 1.0))):
        raise ModelError(f"group covariate {names[g]!r} is not coded 0/1")
    return g


def _settings(fit, g, w):
    names = list(fit.model.covariate_names)
    others = [n for i, n in enumerate(names) if i != g]
    if w is None:
        w = {}
    if not isinstance(w, dict):
        w = dict(zip(others, np.atleast_1d(np.asarray(w, dtype=float)).tolist()))
    missing = [n for n in others if n not in w]
    if missing:
        raise ModelError(f"covariate setting missing values for {missing}")
    x = np.array([float(w[n]) if i != g else 0.0 for i, n in enumerate(names)])
    x1, x0 = x.copy(), x.copy()
    x1[g] = 1.0
    return {n: float(w[n]) for n in others}, x1, x0


def _delta_function(fit, pairs):
    """Vectorized Delta (averaged over ``pairs``) for an (m, v) batch of parameter values."""
    mm = fit.model
    D1 = np.stack([mm.rows(x1)[0] for x1, _ in pairs])   # (pairs, q, v)
    D0 = np.stack([mm.rows(x0)[0] for _, x0 in pairs])
    k = mm.k
    S = np.sign(np.subtract.outer(np.arange(k), np.arange(k)))

    def probs(D, thetas):
        eta = np.einsum("pqv,mv->mpq", D, thetas)
        eta = np.concatenate([eta, np.zeros(eta.shape[:2] + (1,))], axis=2)
        eta -= eta.max(axis=2, keepdims=True)
        e = np.exp(eta)
        return e / e.sum(axis=2, keepdims=True)

    def f(thetas):
        thetas = np.atleast_2d(thetas)
        vals = np.einsum("mpr,rs,mps->mp", probs(D1, thetas), S, probs(D0, thetas))
        return vals.mean(axis=1)

    return f


def _superiority(fit, f, w, corrected, step=None):
    if corrected:
        _require_mbr(fit, "corrected superiority")
    theta = fit.coef
    delta = float(f(theta)[0])
    g = numeric_gradient(f, theta, step=step, vectorized=True)
    se_delta = float(np.sqrt(max(g @ fit.vcov @ g, 0.0)))
    B = 0.0
    if corrected:
        H = numeric_hessian(f, theta, step=step, vectorized=True)
        B = 0.5 * float(np.sum(fit.vcov * H))
    dc = delta - B
    return SuperiorityResult(
        delta=delta, gamma=gamma_from_delta(delta), B_star=B, delta_corrected=dc,
        gamma_corrected=gamma_from_delta(dc), se_delta=se_delta, se_gamma=se_delta / 2,
        w=w, corrected=corrected,
    )


def superiority(fit, w, group, corrected=False, step=None):
    """Ordinal superiority of group ``z = 1`` over ``z = 0`` at covariate setting ``w``.

    Parameters
    ----------
    fit : FitResult
    w : dict or array-like
        Values of the non-group covariates, by name or in column order.
    group : str or int
        The 0/1 group indicator covariate.
    corrected : bool
        Subtract the first-order bias ``B*`` of ``Delta`` at the mBR estimate.
        Requires ``fit.method == "mbr"``.
    """
    g = _group_index(fit, group)
    w, x1, x0 = _settings(fit, g, w)
    return _superiority(fit, _delta_function(fit, [(x1, x0)]), w, corrected, step)


def summary_superiority(fit, group, corrected=False, step=None):
    """Superiority averaged over the dataset's covariate rows."""
    g = _group_index(fit, group)
    pairs = []
    for x in fit.data.X:
        x1, x0 = x.copy(), x.copy()
        x1[g], x0[g] = 1.0, 0.0
        pairs.append((x1, x0))
    return _superiority(fit, _delta_function(fit, pairs), None, corrected, step)

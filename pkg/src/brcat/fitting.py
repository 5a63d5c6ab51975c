"""Maximum likelihood, mean and median bias-reduced estimation.

All three estimators solve ``U(theta) = 0`` by quasi-Fisher scoring,
``theta <- theta + i(theta)^-1 U(theta)``, where ``U`` is the score (ML), the
mean bias-reducing adjusted score (mBR) or the median bias-reducing adjusted
score (mdBR).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .exceptions import ConvergenceError, ModelError, SingularInformationError
from .likelihood import Evaluation, InfoMatrix, multinomial_constant
from .model import Parameterization, ParamVector, acl_from_bcl

log = logging.getLogger(__name__)

METHODS = ("ml", "mbr", "mdbr")


def _method(method):
    m = str(method).lower()
    if m not in METHODS:
        raise ValueError(f"method must be one of {METHODS}, got {method!r}")
    return m


@dataclass(frozen=True)
class FitOptions:
    method: str = "mbr"
    max_iter: int = 100
    tol: float = 1e-8
    start: Optional[np.ndarray] = None
    max_step_halvings: int = 20
    divergence_threshold: float = 20.0

    def __post_init__(self):
        object.__setattr__(self, "method", _method(self.method))
        if not self.tol > 0:
            raise ValueError(f"tol must be positive, got {self.tol}")
        if self.max_iter < 1:
            raise ValueError(f"max_iter must be >= 1, got {self.max_iter}")


@dataclass(frozen=True)
class IterationRecord:
    iteration: int
    theta: np.ndarray
    objective: float
    norm: float


@dataclass(frozen=True, eq=False)
class FitResult:
    """Estimates, plug-in variance and convergence diagnostics of one fit.

    ``divergence_flags`` holds -1, 0 or +1 per parameter: the sign in which an
    ML coefficient appears to run off to infinity, or 0 for a finite one.
    """

    model: object
    data: object
    theta: ParamVector
    vcov: np.ndarray
    se: np.ndarray
    method: str
    converged: bool
    iterations: int
    estimating_fn_norm: float
    objective: float
    loglik: float
    divergence_flags: np.ndarray
    trace: list = field(default_factory=list, repr=False)
    options: FitOptions = field(default_factory=FitOptions, repr=False)

    @property
    def coef(self):
        return self.theta.values

    @property
    def names(self):
        return self.theta.names

    @property
    def diverged(self):
        return self.divergence_flags != 0

    @property
    def loglik_full(self):
        """Log-likelihood including the multinomial coefficients."""
        return self.loglik + multinomial_constant(self.data)

    @property
    def theta_bcl(self):
        T = self.model.to_bcl
        return ParamVector(T @ self.theta.values, Parameterization.BCL, self.model.names)

    @property
    def theta_acl(self):
        if self.theta.parameterization is Parameterization.ACL:
            return self.theta
        return acl_from_bcl(self.theta_bcl, self.model.spec)

    @property
    def info(self):
        return InfoMatrix(np.linalg.inv(self.vcov))


def _objective(ev, method):
    if method == "ml":
        return ev.loglik
    if method == "mbr":
        return ev.loglik + 0.5 * ev.info.log_det
    return None


def _evaluate(X, d, theta, method):
    ev = Evaluation(X, d, theta, need_p=method != "ml")
    U = ev.adjusted_score(method)
    if not np.all(np.isfinite(U)):
        raise SingularInformationError("non-finite estimating function")
    obj = _objective(ev, method)
    norm = float(np.max(np.abs(U))) if U.size else 0.0
    return ev, U, obj, norm


def _weighted_norm(ev, U):
    # U' i^-1 U; decreases along short quasi-Fisher steps even where the objective is flat
    try:
        return float(U @ ev.info.solve(U))
    except SingularInformationError:
        return float(U @ U)


def _better(method, new, old):
    (ev_new, U_new, obj_new, norm_new), (ev_old, U_old, obj_old, norm_old) = new, old
    if method == "mdbr":
        return norm_new < norm_old
    slack = 1e-12 * max(1.0, abs(obj_old))
    if obj_new > obj_old + slack:
        return True
    if obj_new < obj_old - slack:
        return False
    # objective flat to rounding: settle on the size of the estimating function
    return _weighted_norm(ev_new, U_new) <= _weighted_norm(ev_old, U_old)


def _newton_step(X, d, theta, U, method):
    """-J^-1 U with J the central-difference Jacobian of the adjusted score, or None."""
    v = theta.size
    J = np.empty((v, v))
    h = 1e-6 * np.maximum(1.0, np.abs(theta))
    for t in range(v):
        e = np.zeros(v)
        e[t] = h[t]
        try:
            up = Evaluation(X, d, theta + e).adjusted_score(method)
            down = Evaluation(X, d, theta - e).adjusted_score(method)
        except SingularInformationError:
            return None
        J[:, t] = (up - down) / (2 * h[t])
    try:
        step = -np.linalg.solve(J, U)
    except np.linalg.LinAlgError:
        return None
    return step if np.all(np.isfinite(step)) else None


def _line_search(X, d, theta, step, current, opts):
    """Halve ``step`` until it improves on ``current``; returns (accepted, first evaluable)."""
    fallback = None
    for _ in range(opts.max_step_halvings + 1):
        cand = theta + step
        try:
            res = _evaluate(X, d, cand, opts.method)
        except SingularInformationError:
            step = step / 2
            continue
        if fallback is None:
            fallback = (cand, res)
        if _better(opts.method, res, current):
            return (cand, res), fallback
        step = step / 2
    return None, fallback


def quasi_fisher(X, d, opts):
    """Run the scoring iterations on design ``X``; returns a dict of raw results.

    For the adjusted scores, where ``i(theta)`` is only an approximation to
    the Jacobian, the iterations switch to Newton steps with a
    finite-difference Jacobian once convergence has turned slow.
    """
    method = opts.method
    v = X.shape[2]
    theta = np.zeros(v) if opts.start is None else np.array(opts.start, dtype=float)
    if theta.shape != (v,):
        raise ModelError(f"start has length {theta.size}, model has {v} parameters")
    ev, U, obj, norm = _evaluate(X, d, theta, method)
    trace = [IterationRecord(0, theta.copy(), obj if obj is not None else norm, norm)]
    converged = norm < opts.tol
    it = 0
    slow = False
    while (not converged or _still_running_off(ev, U, theta, opts)) and it < opts.max_iter:
        it += 1
        current = (ev, U, obj, norm)
        accepted = fallback = None
        newton = _newton_step(X, d, theta, U, method) if slow else None
        if newton is not None:
            accepted, _ = _line_search(X, d, theta, newton, current, opts)
        newton_used = accepted is not None
        if accepted is None:
            try:
                step = ev.info.solve(U)
            except SingularInformationError:
                step = np.linalg.lstsq(ev.info.i, U, rcond=None)[0]
            accepted, fallback = _line_search(X, d, theta, step, current, opts)
        if accepted is None:
            if fallback is None:
                raise SingularInformationError("information singular along every trial step")
            # no improving step: take the full step and let the next iteration recover
            accepted = fallback
        previous = norm
        theta, (ev, U, obj, norm) = accepted
        trace.append(IterationRecord(it, theta.copy(), obj if obj is not None else norm, norm))
        converged = norm < opts.tol
        # scoring contracts linearly; a ratio near one means many more iterations
        slow = method != "ml" and (newton_used or (it >= 5 and norm > 0.5 * previous))
    return dict(theta=theta, ev=ev, U=U, objective=obj, norm=norm,
                converged=converged, iterations=it, trace=trace)


def _still_running_off(ev, U, theta, opts):
    """True while ML iterates keep taking O(1) steps in coordinates below the threshold.

    Along a separation ray the score vanishes geometrically while scoring steps
    stay of unit size, so a small score alone does not mean the estimate has
    settled.
    """
    if opts.method != "ml":
        return False
    try:
        step = ev.info.solve(U)
    except SingularInformationError:
        step = np.linalg.lstsq(ev.info.i, U, rcond=None)[0]
    moving = np.abs(step) > 1e-3
    return bool(np.any(moving & (np.abs(theta) <= opts.divergence_threshold)))


def _divergence_flags(theta, trace, opts):
    flags = np.zeros(theta.size, dtype=int)
    if opts.method != "ml":
        return flags
    objs = [r.objective for r in trace[-4:]]
    plateau = len(objs) >= 2 and max(objs) - min(objs) < max(opts.tol, 1e-6) * max(1.0, abs(objs[-1]))
    if plateau:
        big = np.abs(theta) > opts.divergence_threshold
        # once i(theta) is numerically singular the iterates may stall below the
        # threshold; steady same-signed steps on a flat likelihood give them away
        steps = np.diff([r.theta for r in trace[-5:]], axis=0)
        drifting = np.zeros(theta.size, dtype=bool)
        if steps.shape[0] == 4:
            drifting = np.all(np.abs(steps) > 1e-2, axis=0) & np.all(
                np.sign(steps) == np.sign(steps[-1]), axis=0)
        flags[big] = np.sign(theta[big]).astype(int)
        flags[drifting & ~big] = np.sign(steps[-1][drifting & ~big]).astype(int)
    return flags


def _vcov(ev):
    try:
        return ev.info.inverse
    except SingularInformationError:
        return np.linalg.pinv(ev.info.i)


def _result(mm, d, raw, opts, names=None, parameterization=None):
    flags = _divergence_flags(raw["theta"], raw["trace"], opts)
    if not raw["converged"] and not flags.any():
        raise ConvergenceError(
            f"{opts.method} iterations did not converge in {opts.max_iter} steps "
            f"(estimating function sup-norm {raw['norm']:.3g})",
            raw["trace"],
        )
    ev = raw["ev"]
    vcov = _vcov(ev)
    se = np.sqrt(np.clip(np.diag(vcov), 0, None))
    objective = raw["objective"] if raw["objective"] is not None else ev.loglik
    theta = ParamVector(raw["theta"], parameterization or mm.parameterization, names or mm.names)
    return FitResult(
        model=mm, data=d, theta=theta, vcov=vcov, se=se, method=opts.method,
        converged=bool(raw["converged"]), iterations=raw["iterations"],
        estimating_fn_norm=raw["norm"], objective=float(objective), loglik=ev.loglik,
        divergence_flags=flags, trace=raw["trace"], options=opts,
    )


def fit(mm, d, opts=None, **kwargs):
    """Fit by ML, mBR or mdBR.

    Parameters
    ----------
    mm : ModelMatrix
    d : Dataset
    opts : FitOptions, optional
        Keyword arguments are forwarded to :class:`FitOptions` when ``opts``
        is not given, e.g. ``fit(mm, d, method="mdbr")``.

    Returns
    -------
    FitResult
        For ML fits on separated data the last iterate is returned with the
        offending coefficients marked in ``divergence_flags``.

    Raises
    ------
    ConvergenceError
        When ``max_iter`` is exhausted and no divergence was detected.
    """
    opts = opts or FitOptions(**kwargs)
    raw = quasi_fisher(mm.design, d, opts)
    return _result(mm, d, raw, opts)


def refit_under_contrast(mm, d, T, opts=None, **kwargs):
    """Fit the model in the parameterization ``phi = T @ theta``.

    The design becomes ``X @ inv(T)``. ML and mBR estimates are exactly
    ``T @ theta_hat``; mdBR estimates generally are not, since median bias
    reduction is only equivariant under componentwise transformations.
    """
    opts = opts or FitOptions(**kwargs)
    T = np.asarray(T, dtype=float)
    v = mm.dim
    if T.shape != (v, v):
        raise ModelError(f"T must be {v}x{v}, got {T.shape}")
    if np.linalg.matrix_rank(T) < v:
        raise ModelError("T is singular")
    Tinv = np.linalg.inv(T)
    if opts.start is not None:
        opts = replace(opts, start=T @ np.asarray(opts.start))
    names = tuple(f"phi{t + 1}" for t in range(v))
    design = mm.design @ Tinv
    design.setflags(write=False)
    transformed = replace(mm, design=design, to_bcl=mm.to_bcl @ Tinv, names=names)
    raw = quasi_fisher(design, d, opts)
    return _result(transformed, d, raw, opts)

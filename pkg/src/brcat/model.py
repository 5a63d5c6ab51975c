"""Data model, model specification and design construction.

Every family is represented through baseline-category logits with the last
category as reference::

    log(pi_j / pi_k) = X_j(x) @ theta_bcl        (j = 1, ..., k-1)

Adjacent-categories models are linear reparameterizations of that form,
``theta_bcl = T @ theta_acl``, and their design is ``X_bcl @ T``.
"""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.special import logsumexp

from .exceptions import DataError, ModelError, RankDeficiencyError

INTERCEPT = "(Intercept)"


class Family(str, Enum):
    LOGIT = "logit"
    BCL = "bcl"
    ACL_PO = "acl-po"
    ACL_NPO = "acl-npo"

    @property
    def proportional(self):
        return self is Family.ACL_PO


class Parameterization(str, Enum):
    ACL = "acl"
    BCL = "bcl"


@dataclass(frozen=True, eq=False)
class Dataset:
    """Covariate rows with per-row multinomial counts.

    Parameters
    ----------
    X : array of shape (n, p)
        Covariate values. ``p`` may be zero.
    Y : array of shape (n, k)
        Category counts, ordered as ``category_labels``. Counts are usually
        integers but any non-negative finite value is accepted, which allows
        fitting to expected counts.
    """

    X: np.ndarray
    Y: np.ndarray
    category_labels: tuple = ()
    covariate_names: tuple = ()

    def __post_init__(self):
        Y = np.array(self.Y, dtype=float)
        if Y.ndim != 2:
            raise DataError(f"counts must be a 2-d array, got shape {Y.shape}")
        n, k = Y.shape
        X = np.array(self.X, dtype=float)
        if X.size == 0:
            X = X.reshape(n, 0)
        if X.ndim == 1:
            X = X.reshape(n, -1)
        if X.shape[0] != n:
            raise DataError(f"{X.shape[0]} covariate rows but {n} count rows")
        if k < 2:
            raise DataError("at least two response categories are required")
        if not np.all(np.isfinite(X)):
            raise DataError("covariates must be finite")
        for i in range(n):
            if not np.all(np.isfinite(Y[i])) or np.any(Y[i] < 0):
                raise DataError("counts must be finite and non-negative", row=i + 1)
            if Y[i].sum() <= 0:
                raise DataError("row total must be positive", row=i + 1)
        labels = tuple(self.category_labels) or tuple(str(j + 1) for j in range(k))
        names = tuple(self.covariate_names) or tuple(f"x{l + 1}" for l in range(X.shape[1]))
        if len(labels) != k:
            raise DataError(f"{len(labels)} category labels for {k} categories")
        if len(names) != X.shape[1]:
            raise DataError(f"{len(names)} covariate names for {X.shape[1]} columns")
        X.setflags(write=False)
        Y.setflags(write=False)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Y", Y)
        object.__setattr__(self, "category_labels", labels)
        object.__setattr__(self, "covariate_names", names)

    @property
    def n(self):
        return self.Y.shape[0]

    @property
    def k(self):
        return self.Y.shape[1]

    @property
    def p(self):
        return self.X.shape[1]

    @property
    def totals(self):
        return self.Y.sum(axis=1)

    @property
    def rows(self):
        return [(self.X[i], self.Y[i], self.totals[i]) for i in range(self.n)]

    def with_counts(self, Y):
        """Same covariate rows, new counts."""
        return Dataset(self.X, Y, self.category_labels, self.covariate_names)

    @classmethod
    def from_labels(cls, X, labels, categories=None, covariate_names=()):
        """Aggregate one-trial-per-row data into per-pattern counts."""
        X = np.asarray(X, dtype=float)
        if X.ndim == 1:
            X = X.reshape(-1, 1) if X.size else X.reshape(len(labels), 0)
        labels = [str(lab) for lab in labels]
        if categories is None:
            categories = _natural_sort(set(labels))
        categories = [str(c) for c in categories]
        index = {c: j for j, c in enumerate(categories)}
        patterns = {}
        counts = []
        for i, (x, lab) in enumerate(zip(X, labels)):
            if lab not in index:
                raise DataError(f"unknown category label {lab!r}", row=i + 1)
            key = tuple(x)
            if key not in patterns:
                patterns[key] = len(counts)
                counts.append(np.zeros(len(categories)))
            counts[patterns[key]][index[lab]] += 1
        Xa = np.array(list(patterns), dtype=float).reshape(len(patterns), X.shape[1])
        return cls(Xa, np.array(counts), tuple(categories), tuple(covariate_names))


def _natural_sort(values):
    values = list(values)
    try:
        return sorted(values, key=float)
    except ValueError:
        return sorted(values)


def _aggregate(X, Y):
    keys = {}
    Xs, Ys = [], []
    for x, y in zip(X, Y):
        key = tuple(x)
        if key in keys:
            Ys[keys[key]] = Ys[keys[key]] + y
        else:
            keys[key] = len(Xs)
            Xs.append(x)
            Ys.append(np.array(y, dtype=float))
    return np.array(Xs).reshape(len(Xs), X.shape[1]), np.array(Ys)


def _open_text(source):
    if isinstance(source, bytes):
        return io.StringIO(source.decode("utf-8-sig"))
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source, encoding="utf-8-sig", newline="") as fh:
            return io.StringIO(fh.read())
    if isinstance(source, str):
        return io.StringIO(source)
    data = source.read()
    if isinstance(data, bytes):
        data = data.decode("utf-8-sig")
    return io.StringIO(data)


def _split_columns(cols):
    if cols is None:
        return None
    if isinstance(cols, str):
        return [c.strip() for c in cols.split(",") if c.strip()]
    return list(cols)


def parse_dataset(source, counts=None, covariates=None, response=None, categories=None):
    """Read a CSV file into a :class:`Dataset`.

    Either ``counts`` (wide format, one column per category in order) or
    ``response`` (long format, one label column per trial) must be given.
    ``covariates`` defaults to every remaining column. Rows with identical
    covariate values are aggregated. Column lists may be given as
    comma-separated strings.
    """
    counts = _split_columns(counts)
    covariates = _split_columns(covariates)
    categories = _split_columns(categories)
    if (counts is None) == (response is None):
        raise DataError("give exactly one of `counts` or `response`")

    reader = csv.reader(_open_text(source))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError("empty CSV input") from None
    used = set(counts or [response])
    if covariates is None:
        covariates = [h for h in header if h not in used]
    for col in list(covariates) + list(used):
        if col not in header:
            raise DataError(f"column {col!r} not found in header {header}")
    pos = {h: i for i, h in enumerate(header)}

    X_rows, Y_rows, labels = [], [], []
    for r, row in enumerate(reader, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise DataError(f"expected {len(header)} fields, found {len(row)}", row=r)
        try:
            X_rows.append([float(row[pos[c]]) for c in covariates])
        except ValueError:
            raise DataError("non-numeric covariate value", row=r) from None
        if counts is not None:
            try:
                y = [float(row[pos[c]]) for c in counts]
            except ValueError:
                raise DataError("non-numeric count", row=r) from None
            if any(v < 0 for v in y):
                raise DataError("negative count", row=r)
            if sum(y) <= 0:
                raise DataError("row has zero total", row=r)
            Y_rows.append(y)
        else:
            lab = row[pos[response]].strip()
            if categories is not None and lab not in categories:
                raise DataError(f"unknown category label {lab!r}", row=r)
            labels.append(lab)
    if not X_rows:
        raise DataError("CSV has no data rows")

    X = np.array(X_rows, dtype=float).reshape(len(X_rows), len(covariates))
    if counts is not None:
        Xa, Ya = _aggregate(X, np.array(Y_rows))
        return Dataset(Xa, Ya, tuple(counts), tuple(covariates))
    return Dataset.from_labels(X, labels, categories, tuple(covariates))


@dataclass(frozen=True)
class ModelSpec:
    family: Family
    n_categories: int

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        if self.n_categories < 2:
            raise ModelError("need at least two categories")
        if self.family is Family.LOGIT and self.n_categories != 2:
            raise ModelError(f"logit family requires k == 2, got k = {self.n_categories}")

    @property
    def parameterization(self):
        if self.family in (Family.ACL_PO, Family.ACL_NPO):
            return Parameterization.ACL
        return Parameterization.BCL

    def n_params(self, p):
        q = self.n_categories - 1
        return q + p if self.family.proportional else q * (p + 1)

    def n_covariates(self, v):
        q = self.n_categories - 1
        p = v - q if self.family.proportional else v // q - 1
        if self.n_params(p) != v or p < 0:
            raise ModelError(f"{v} parameters do not fit family {self.family.value} with k={self.n_categories}")
        return p


def bcl_rows(X, spec):
    """Baseline-category design rows, shape (n, k-1, v)."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    n, p = X.shape
    q = spec.n_categories - 1
    out = np.zeros((n, q, spec.n_params(p)))
    j = np.arange(q)
    out[:, j, j] = 1.0
    if spec.family.proportional:
        out[:, :, q:] = (q - j)[None, :, None] * X[:, None, :]
    else:
        for l in range(p):
            out[:, j, q + l * q + j] = X[:, l][:, None]
    return out


def _cumsum_block(q):
    # U[j, l] = 1 for l >= j, so (U @ a)_j = sum_{l >= j} a_l
    return np.triu(np.ones((q, q)))


def reparameterization_matrix(spec, p):
    """Matrix T with ``theta_bcl = T @ theta`` for the family's native parameters."""
    q = spec.n_categories - 1
    v = spec.n_params(p)
    if spec.parameterization is Parameterization.BCL:
        return np.eye(v)
    U = _cumsum_block(q)
    T = np.zeros((v, v))
    T[:q, :q] = U
    if spec.family.proportional:
        T[q:, q:] = np.eye(p)
    else:
        for l in range(p):
            s = q + l * q
            T[s:s + q, s:s + q] = U
    return T


def parameter_names(spec, covariate_names, parameterization=None):
    parameterization = parameterization or spec.parameterization
    q = spec.n_categories - 1
    if spec.family is Family.LOGIT:
        return (INTERCEPT,) + tuple(covariate_names)
    names = [f"{INTERCEPT}:{j + 1}" for j in range(q)]
    if spec.family.proportional:
        names += list(covariate_names)
    else:
        names += [f"{c}:{j + 1}" for c in covariate_names for j in range(q)]
    return tuple(names)


@dataclass(frozen=True, eq=False)
class ParamVector:
    values: np.ndarray
    parameterization: Parameterization
    names: tuple = ()

    def __post_init__(self):
        values = np.array(self.values, dtype=float).ravel()
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "parameterization", Parameterization(self.parameterization))
        if self.names and len(self.names) != values.size:
            raise ModelError(f"{len(self.names)} names for {values.size} values")

    def __len__(self):
        return self.values.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def as_dict(self):
        return dict(zip(self.names, self.values.tolist()))


def _check_tag(params, expected):
    if params.parameterization is not expected:
        raise ModelError(
            f"expected {expected.value} parameters, got {params.parameterization.value}"
        )


def _blocks(spec, v):
    q = spec.n_categories - 1
    p = spec.n_covariates(v)
    blocks = [slice(0, q)]
    if not spec.family.proportional:
        blocks += [slice(q + l * q, q + (l + 1) * q) for l in range(p)]
    return blocks, p


def acl_from_bcl(params, spec):
    """alpha_j = gamma_j - gamma_{j+1}, beta_j = delta_j - delta_{j+1}, gamma_k = delta_k = 0."""
    _check_tag(params, Parameterization.BCL)
    out = params.values.copy()
    blocks, p = _blocks(spec, out.size)
    for b in blocks:
        g = params.values[b]
        out[b] = g - np.append(g[1:], 0.0)
    acl_spec = ModelSpec(Family.ACL_PO if spec.family.proportional else Family.ACL_NPO, spec.n_categories)
    names = _renamed(params.names, acl_spec, p)
    return ParamVector(out, Parameterization.ACL, names)


def bcl_from_acl(params, spec):
    """gamma_j = sum_{l >= j} alpha_l and likewise for the non-proportional slopes."""
    _check_tag(params, Parameterization.ACL)
    out = params.values.copy()
    blocks, p = _blocks(spec, out.size)
    for b in blocks:
        out[b] = np.cumsum(params.values[b][::-1])[::-1]
    return ParamVector(out, Parameterization.BCL, _renamed(params.names, spec, p))


def _renamed(names, spec, p):
    # names are shared across parameterizations; only the tag changes
    return tuple(names) if names else parameter_names(spec, [f"x{l + 1}" for l in range(p)])


@dataclass(frozen=True, eq=False)
class ModelMatrix:
    """Per-observation block design for the k-1 linear predictors.

    ``design`` is in the family's native parameterization (adjacent-category
    parameters for the ACL families); ``bcl_design`` is the equivalent
    baseline-category design and ``to_bcl`` the linear map between them.
    """

    spec: ModelSpec
    covariate_names: tuple
    design: np.ndarray
    bcl_design: np.ndarray
    to_bcl: np.ndarray
    names: tuple
    parameterization: Parameterization = field(default=Parameterization.BCL)

    @property
    def dim(self):
        return self.design.shape[2]

    @property
    def k(self):
        return self.spec.n_categories

    @property
    def p(self):
        return len(self.covariate_names)

    def rows(self, X):
        """Native design rows for arbitrary covariate settings."""
        return bcl_rows(X, self.spec) @ self.to_bcl

    def param_vector(self, values):
        return ParamVector(values, self.parameterization, self.names)

    def to_bcl_params(self, theta):
        return ParamVector(self.to_bcl @ np.asarray(theta, dtype=float), Parameterization.BCL, self.names)

    def linear_predictors(self, theta, X=None):
        design = self.design if X is None else self.rows(X)
        return design @ np.asarray(theta, dtype=float)

    def log_probabilities(self, theta, X=None):
        eta = self.linear_predictors(theta, X)
        full = np.concatenate([eta, np.zeros(eta.shape[:-1] + (1,))], axis=-1)
        return full - logsumexp(full, axis=-1, keepdims=True)

    def probabilities(self, theta, X=None):
        return np.exp(self.log_probabilities(theta, X))


def build_model(d, s):
    """Construct the design for dataset ``d`` under spec ``s``.

    Raises
    ------
    RankDeficiencyError
        If the stacked design is not of full column rank.
    """
    if s.n_categories != d.k:
        raise ModelError(f"spec has k={s.n_categories} but data has k={d.k}")
    bcl = bcl_rows(d.X, s)
    T = reparameterization_matrix(s, d.p)
    design = bcl @ T
    names = parameter_names(s, d.covariate_names)
    _check_rank(design.reshape(-1, design.shape[2]), names)
    for arr in (bcl, T, design):
        arr.setflags(write=False)
    return ModelMatrix(s, d.covariate_names, design, bcl, T, names, s.parameterization)


def _check_rank(Z, names):
    _, sv, Vt = np.linalg.svd(Z, full_matrices=True)
    v = Z.shape[1]
    cutoff = 1e-10 * (sv[0] if sv.size else 1.0)
    rank = int(np.sum(sv > cutoff))
    if rank < v:
        null = Vt[rank:]
        dependent = [names[t] for t in range(v) if np.any(np.abs(null[:, t]) > 1e-8)]
        raise RankDeficiencyError(
            f"design has rank {rank} < {v}; dependent columns: {', '.join(dependent)}",
            dependent,
        )

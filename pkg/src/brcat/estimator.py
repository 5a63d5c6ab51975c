"""scikit-learn style estimators on top of :func:`brcat.fitting.fit`.

``y`` may be a vector of class labels (one trial per row) or an ``(n, k)``
matrix of category counts. Rows with identical covariates are aggregated
before fitting, which leaves every estimator unchanged.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .fitting import METHODS, FitOptions, fit
from .model import Dataset, Family, ModelSpec, build_model


class _BiasReducedMultinomial(ClassifierMixin, BaseEstimator):
    """Shared fit/predict plumbing; subclasses fix the model family."""

    def __init__(self, method="mbr", categories=None, tol=1e-8, max_iter=100):
        self.method = method
        self.categories = categories
        self.tol = tol
        self.max_iter = max_iter

    def _family(self):
        raise NotImplementedError

    def _category_order(self, classes):
        return classes

    def _validate_y(self, X, y):
        y = np.asarray(y)
        if y.ndim == 2 and y.shape[1] > 1:
            Y = check_array(y, dtype=float, ensure_all_finite=True)
            if Y.shape[0] != X.shape[0]:
                raise ValueError(f"X has {X.shape[0]} rows but the count matrix has {Y.shape[0]}")
            classes = np.asarray(self.categories) if self.categories is not None else np.arange(Y.shape[1])
            if classes.size != Y.shape[1]:
                raise ValueError(f"{classes.size} categories given for {Y.shape[1]} count columns")
            return Y, classes
        y = y.ravel()
        if y.shape[0] != X.shape[0]:
            raise ValueError(f"X has {X.shape[0]} rows but y has {y.shape[0]}")
        if self.categories is not None:
            classes = np.asarray(self.categories)
            unknown = np.setdiff1d(np.unique(y), classes)
            if unknown.size:
                raise ValueError(f"labels {unknown.tolist()} not among categories {classes.tolist()}")
        else:
            classes = np.unique(y)
        Y = (y[:, None] == classes[None, :]).astype(float)
        return Y, classes

    def fit(self, X, y):
        """Fit the model.

        Parameters
        ----------
        X : array-like of shape (n_samples, n_features)
        y : array-like of shape (n_samples,) or (n_samples, n_categories)
            Class labels, or counts per category.

        Returns
        -------
        self
        """
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}, got {self.method!r}")
        names = getattr(X, "columns", None)
        X = check_array(X, dtype=float)
        Y, classes = self._validate_y(X, y)
        if classes.size < 2:
            raise ValueError("need at least two categories")
        order = self._category_order(classes)
        cols = [int(np.flatnonzero(classes == c)[0]) for c in order]
        Y = Y[:, cols]
        keep = Y.sum(axis=1) > 0
        feature_names = tuple(str(c) for c in names) if names is not None else tuple(
            f"x{i}" for i in range(X.shape[1]))

        d = Dataset(X[keep], Y[keep], tuple(str(c) for c in order), feature_names)
        self.model_ = build_model(d, ModelSpec(self._family(), d.k))
        self.fit_result_ = fit(self.model_, d, FitOptions(method=self.method, tol=self.tol,
                                                          max_iter=self.max_iter))
        self.classes_ = classes
        self._order = cols
        self.n_features_in_ = X.shape[1]
        if names is not None:
            self.feature_names_in_ = np.asarray(feature_names, dtype=object)
        res = self.fit_result_
        self.n_iter_ = res.iterations
        self.loglik_ = res.loglik_full
        self.bse_ = res.se
        self.vcov_ = res.vcov
        self.divergence_flags_ = res.divergence_flags
        self._set_coefficients(res.coef)
        return self

    def _set_coefficients(self, theta):
        q = self.model_.k - 1
        p = self.n_features_in_
        self.intercept_ = theta[:q]
        self.coef_ = theta[q:].reshape(p, q).T

    def predict_proba(self, X):
        """Category probabilities, columns ordered as ``classes_``."""
        check_is_fitted(self)
        X = check_array(X, dtype=float)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        P = self.model_.probabilities(self.fit_result_.coef, X)
        out = np.empty_like(P)
        out[:, self._order] = P
        return out

    def predict_log_proba(self, X):
        return np.log(self.predict_proba(X))

    def predict(self, X):
        check_is_fitted(self)
        return self.classes_[np.argmax(self.predict_proba(X), axis=1)]

    def summary(self):
        """Rows of (name, estimate, se, z, p, divergence) as returned by :func:`brcat.inference.z_table`."""
        from .inference import z_table
        check_is_fitted(self)
        return z_table(self.fit_result_)


class BiasReducedLogisticRegression(_BiasReducedMultinomial):
    """Binary logistic regression by ML, mean (Firth-type) or median bias reduction.

    ``coef_`` and ``intercept_`` describe the log odds of ``classes_[1]``,
    as in :class:`sklearn.linear_model.LogisticRegression`.

    Examples
    --------
    >>> import numpy as np
    >>> X = np.array([[0.], [1.], [2.], [3.]])
    >>> y = np.array([0, 0, 1, 1])
    >>> clf = BiasReducedLogisticRegression().fit(X, y)
    >>> bool(np.isfinite(clf.coef_).all())
    True
    """

    def _family(self):
        return Family.LOGIT

    def _category_order(self, classes):
        if classes.size != 2:
            raise ValueError(f"logistic regression needs 2 classes, got {classes.size}")
        # the last category is the reference, so put the positive class first
        return classes[::-1]

    def _set_coefficients(self, theta):
        self.intercept_ = theta[:1]
        self.coef_ = theta[1:].reshape(1, -1)


class BaselineCategoryLogit(_BiasReducedMultinomial):
    """Nominal multinomial logit with the last category as reference.

    ``coef_`` has shape ``(k-1, n_features)``; row ``j`` holds the slopes of
    ``log(pi_j / pi_k)``.
    """

    def _family(self):
        return Family.BCL


class AdjacentCategoriesLogit(_BiasReducedMultinomial):
    """Ordinal adjacent-categories logit, ``log(pi_j / pi_{j+1}) = alpha_j + x' beta_j``.

    Parameters
    ----------
    proportional : bool
        Share one slope vector across the ``k-1`` logits (``coef_`` of shape
        ``(n_features,)``) or fit one per logit (``(k-1, n_features)``).
    method : {"ml", "mbr", "mdbr"}
    categories : sequence, optional
        Ordered category labels. Defaults to the sorted unique labels, or
        ``0..k-1`` for a count matrix.
    tol, max_iter : float, int
        Passed to the quasi-Fisher scoring iterations.
    """

    def __init__(self, proportional=True, method="mbr", categories=None, tol=1e-8, max_iter=100):
        super().__init__(method=method, categories=categories, tol=tol, max_iter=max_iter)
        self.proportional = proportional

    def _family(self):
        return Family.ACL_PO if self.proportional else Family.ACL_NPO

    def _set_coefficients(self, theta):
        if not self.proportional:
            return super()._set_coefficients(theta)
        q = self.model_.k - 1
        self.intercept_ = theta[:q]
        self.coef_ = theta[q:]

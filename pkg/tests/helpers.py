"""Random small datasets shared by several test modules."""

import itertools

import numpy as np
from scipy.stats import multinomial

from brcat.model import Dataset


def random_dataset(rng, n=5, p=1, k=3, total=(5, 15)):
    """Multinomial counts for ``n`` distinct covariate rows with random probabilities."""
    while True:
        X = np.round(rng.normal(size=(n, p)), 1)
        if np.linalg.matrix_rank(np.column_stack([np.ones(n), X])) == p + 1 and len(
                np.unique(X, axis=0)) == n:
            break
    m = rng.integers(total[0], total[1] + 1, size=n)
    probs = rng.dirichlet(np.full(k, 2.0), size=n)
    Y = np.array([rng.multinomial(mi, pi) for mi, pi in zip(m, probs)], dtype=float)
    labels = tuple(str(j + 1) for j in range(k))
    names = tuple(f"x{l + 1}" for l in range(p))
    return Dataset(X, Y, labels, names)


def example_separated(seed=1, n=100, cut=0.3):
    """One-trial binary data with y = 1 exactly when x1 + 2 x2 > cut."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 2))
    y = np.where(X[:, 0] + 2 * X[:, 1] > cut, "1", "0")
    return Dataset.from_labels(X, y, categories=("1", "0"), covariate_names=("x1", "x2"))


def _compositions(m, k):
    for cut in itertools.combinations(range(m + k - 1), k - 1):
        edges = (-1,) + cut + (m + k - 1,)
        yield np.array([edges[i + 1] - edges[i] - 1 for i in range(k)])


def enumerated_third_moment(X, m, pi):
    """E[S S S] with S = X'(y - m pi) by summing over every outcome of one multinomial row."""
    q = X.shape[0]
    out = np.zeros((X.shape[1],) * 3)
    for y in _compositions(m, q + 1):
        w = multinomial.pmf(y, m, pi)
        s = X.T @ (y[:q] - m * pi[:q])
        out += w * np.einsum("a,b,c->abc", s, s, s)
    return out

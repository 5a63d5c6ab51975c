"""Bundled example data: bitterness ratings of white wine.

Counts of ratings 1 (least bitter) to 5 by temperature (0 cold, 1 warm)
and skin contact (0 no, 1 yes), 72 ratings in total.
"""

from __future__ import annotations

from importlib.resources import files

import numpy as np

from .model import Dataset, parse_dataset


def wine_path():
    return files("brcat.data") / "wine.csv"


def wine():
    """The 4 x 5 table of ratings, covariates ``temp`` and ``contact``."""
    return parse_dataset(wine_path().read_bytes(), counts=["1", "2", "3", "4", "5"],
                         covariates=["temp", "contact"])


def wine_merged():
    """Ratings 2, 3 and 4 merged into a single middle category ``2-4``."""
    d = wine()
    Y = np.column_stack([d.Y[:, 0], d.Y[:, 1:4].sum(axis=1), d.Y[:, 4]])
    return Dataset(d.X, Y, ("1", "2-4", "5"), d.covariate_names)

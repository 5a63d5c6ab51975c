"""Reference values for the white-wine bitterness data, frozen for regression tests.

Layout follows the non-proportional parameter order
(alpha_1..alpha_4, temp:1..temp:4, contact:1..contact:4).
"""

import numpy as np

# mean bias-reduced adjacent-categories fit, reference values to two decimals
NPO_MBR = np.array([-0.76, 0.62, 2.73, 1.53, -1.65, -1.12, -1.75, -1.26, -0.82, -0.80, -1.38, 0.07])
NPO_MBR_SE = np.array([0.59, 0.52, 0.99, 1.83, 1.60, 0.66, 0.87, 1.68, 1.08, 0.64, 0.81, 1.03])

# maximum likelihood fit: the finite components and their standard errors
NPO_ML_FINITE = {
    "(Intercept):1": (-0.83, 0.59), "(Intercept):2": (0.67, 0.52), "(Intercept):3": (3.08, 1.05),
    "temp:2": (-1.21, 0.66), "temp:3": (-1.98, 0.92),
    "contact:1": (-1.10, 1.21), "contact:2": (-0.87, 0.64), "contact:3": (-1.54, 0.83),
    "contact:4": (0.04, 1.08),
}
NPO_ML_DIVERGENT = {"(Intercept):4": 1, "temp:1": -1, "temp:4": -1}
NPO_ML_LOGLIK = -15.29

# proportional-odds slopes (temp, contact) and standard errors by method
PO = {
    "ml": ((-1.69, -0.96), (0.41, 0.32)),
    "mbr": ((-1.56, -0.90), (0.38, 0.31)),
    "mdbr": ((-1.61, -0.92), (0.39, 0.31)),
}

# merged ratings (1, 2-4, 5), proportional odds, mean bias-reduced
MERGED_MBR = np.array([-1.247, 5.331, -3.291, -1.181])

WALD_PARALLEL = 1.067
CHI2_6_95 = 12.592

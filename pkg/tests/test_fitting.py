import time

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.optimize import minimize_scalar

from brcat.datasets import wine, wine_merged
from brcat.exceptions import ConvergenceError, ModelError
from brcat.fitting import FitOptions, fit, refit_under_contrast
from brcat.likelihood import Evaluation, penalized_log_likelihood
from brcat.model import Dataset, Family, ModelSpec, Parameterization, build_model

import goldens
from helpers import example_separated, random_dataset


@pytest.fixture(scope="module")
def npo():
    d = wine()
    return build_model(d, ModelSpec(Family.ACL_NPO, 5)), d


@pytest.fixture(scope="module")
def po():
    d = wine()
    return build_model(d, ModelSpec(Family.ACL_PO, 5)), d


class TestMeanBiasReduction:
    def test_npo_estimates(self, npo):
        res = fit(*npo, method="mbr", tol=1e-10)
        assert res.converged
        assert_allclose(res.coef, goldens.NPO_MBR, atol=0.01)
        assert_allclose(res.se, goldens.NPO_MBR_SE, atol=0.01)
        assert res.estimating_fn_norm < 1e-9
        assert not res.diverged.any()

    def test_frozen_npo_values(self, npo):
        # full precision values of this implementation, frozen to catch regressions
        res = fit(*npo, method="mbr", tol=1e-12)
        assert res.coef[0] == pytest.approx(-0.76428168, abs=1e-7)
        assert res.coef[11] == pytest.approx(0.07104108, abs=1e-7)

    def test_objective_is_penalized_likelihood(self, npo):
        mm, d = npo
        res = fit(mm, d, method="mbr")
        assert res.objective == pytest.approx(penalized_log_likelihood(mm, d, res.coef))

    def test_parameterization_tag(self, npo):
        res = fit(*npo)
        assert res.theta.parameterization is Parameterization.ACL
        assert_allclose(res.theta_bcl.values, npo[0].to_bcl @ res.coef)
        assert_allclose(res.theta_acl.values, res.coef)


class TestMaximumLikelihood:
    def test_npo_finite_components_and_flags(self, npo):
        res = fit(*npo, method="ml", tol=1e-7)
        assert res.loglik_full == pytest.approx(goldens.NPO_ML_LOGLIK, abs=0.01)
        for name, (est, se) in goldens.NPO_ML_FINITE.items():
            t = res.names.index(name)
            assert res.coef[t] == pytest.approx(est, abs=0.01)
            assert res.se[t] == pytest.approx(se, abs=0.01)
        flagged = {n: int(f) for n, f in zip(res.names, res.divergence_flags) if f}
        assert flagged == goldens.NPO_ML_DIVERGENT

    def test_tighter_tolerance_pushes_divergent_components_further(self, npo):
        loose = fit(*npo, method="ml", tol=1e-7)
        tight = fit(*npo, method="ml", tol=1e-9)
        div = loose.diverged
        assert np.all(np.abs(tight.coef[div]) > np.abs(loose.coef[div]))
        assert abs(tight.loglik - loose.loglik) < 1e-4
        assert_allclose(tight.coef[~div], loose.coef[~div], atol=1e-4)

    def test_po_has_finite_estimates(self, po):
        res = fit(*po, method="ml")
        assert res.converged and not res.diverged.any()

    def test_stalled_iterates_flagged_below_threshold(self):
        # quasi-complete separation; the information turns singular at |theta| < 20
        d = Dataset(np.array([[1.3], [1.2], [0.9], [-1.0]]),
                    np.array([[3.0, 0, 0], [1, 0, 0], [2, 0, 0], [1, 2, 1]]), ("1", "2", "3"), ("x1",))
        res = fit(build_model(d, ModelSpec(Family.ACL_PO, 3)), d, method="ml")
        assert np.all(res.divergence_flags == 1)


@pytest.mark.parametrize("method", ["ml", "mbr", "mdbr"])
def test_po_triple(po, method):
    res = fit(*po, method=method, tol=1e-10)
    est, se = goldens.PO[method]
    assert_allclose(res.coef[-2:], est, atol=0.01)
    assert_allclose(res.se[-2:], se, atol=0.01)


class TestMedianBiasReduction:
    def test_adjusted_score_vanishes(self, po):
        mm, d = po
        res = fit(mm, d, method="mdbr", tol=1e-10)
        ev = Evaluation(mm.design, d, res.coef)
        assert np.max(np.abs(ev.adjusted_score("mdbr"))) < 1e-9

    def test_one_parameter_penalty(self):
        d = Dataset(np.zeros((1, 0)), np.array([[3.0, 9.0]]), ("a", "b"), ())
        mm = build_model(d, ModelSpec(Family.LOGIT, 2))
        res = fit(mm, d, method="mdbr", tol=1e-12)
        opt = minimize_scalar(lambda t: -penalized_log_likelihood(mm, d, [t], power=1 / 6),
                              bracket=(-3, 0), tol=1e-12)
        assert res.coef[0] == pytest.approx(opt.x, abs=1e-6)


class TestEquivariance:
    @pytest.mark.parametrize("method", ["ml", "mbr"])
    def test_linear_reparameterization(self, po, method):
        mm, d = po
        T = np.random.default_rng(0).normal(size=(mm.dim, mm.dim)) + 3 * np.eye(mm.dim)
        base = fit(mm, d, method=method, tol=1e-12)
        res = refit_under_contrast(mm, d, T, method=method, tol=1e-12)
        assert_allclose(res.coef, T @ base.coef, atol=1e-8)
        assert_allclose(res.theta_bcl.values, base.theta_bcl.values, atol=1e-8)

    def test_mdbr_componentwise_rescaling(self, npo):
        mm, d = npo
        D = np.diag(np.random.default_rng(1).uniform(0.2, 5, size=mm.dim) * np.where(np.arange(mm.dim) % 2, -1, 1))
        base = fit(mm, d, method="mdbr", tol=1e-12)
        res = refit_under_contrast(mm, d, D, method="mdbr", tol=1e-12)
        assert_allclose(res.coef, D @ base.coef, atol=1e-6)

    def test_mdbr_not_linearly_equivariant(self, po):
        mm, d = po
        T = np.eye(mm.dim)
        T[-1, -2] = 1.0
        base = fit(mm, d, method="mdbr", tol=1e-12)
        res = refit_under_contrast(mm, d, T, method="mdbr", tol=1e-12)
        assert np.max(np.abs(res.coef - T @ base.coef)) > 1e-3

    def test_mdbr_contrast_on_separated_data(self):
        # beta_2 - beta_3 estimated directly differs from the difference of the estimates
        d = example_separated()
        mm = build_model(d, ModelSpec(Family.LOGIT, 2))
        T = np.eye(3)
        T[1, 2] = -1.0
        base = fit(mm, d, method="mdbr", tol=1e-9)
        res = refit_under_contrast(mm, d, T, method="mdbr", tol=1e-9)
        assert np.all(np.isfinite(base.coef))
        assert abs(res.coef[1] - (base.coef[1] - base.coef[2])) > 1e-3
        assert np.sign(res.coef[1]) == np.sign(base.coef[1] - base.coef[2])

    def test_bcl_and_acl_mbr_agree(self):
        d = wine()
        acl = fit(build_model(d, ModelSpec(Family.ACL_NPO, 5)), d, tol=1e-12)
        bcl = fit(build_model(d, ModelSpec(Family.BCL, 5)), d, tol=1e-12)
        assert_allclose(acl.theta_bcl.values, bcl.coef, atol=1e-8)


class TestOptions:
    def test_unknown_method(self):
        with pytest.raises(ValueError):
            FitOptions(method="firth")

    def test_bad_start_length(self, po):
        with pytest.raises(ModelError):
            fit(*po, start=np.zeros(3))

    def test_start_near_solution(self, po):
        base = fit(*po, tol=1e-12)
        res = fit(*po, start=base.coef + 0.01, tol=1e-12)
        assert_allclose(res.coef, base.coef, atol=1e-9)
        assert res.iterations < base.iterations

    def test_iteration_limit(self, npo):
        with pytest.raises(ConvergenceError) as exc:
            fit(*npo, method="mbr", max_iter=1)
        assert len(exc.value.trace) == 2

    def test_merged_ratings(self):
        d = wine_merged()
        mm = build_model(d, ModelSpec(Family.ACL_PO, 3))
        assert_allclose(fit(mm, d).coef, goldens.MERGED_MBR, atol=0.0005)
        ml = fit(mm, d, method="ml")
        assert dict(zip(ml.names, ml.divergence_flags))["(Intercept):2"] == 1
        assert dict(zip(ml.names, ml.divergence_flags))["temp"] == -1

    def test_mbr_finite_on_random_data(self):
        rng = np.random.default_rng(3)
        for _ in range(10):
            d = random_dataset(rng, n=4, p=1, k=3, total=(1, 4))
            res = fit(build_model(d, ModelSpec(Family.ACL_NPO, 3)), d)
            assert res.converged and np.all(np.isfinite(res.coef))

    def test_runtime(self, npo):
        t0 = time.perf_counter()
        fit(*npo, method="mbr")
        assert time.perf_counter() - t0 < 1.0

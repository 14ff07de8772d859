"""Parametric estimation from household counts."""
import dataclasses

import numpy as np
import pandas as pd
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy.special import gammaln
from scipy.stats import multinomial

from choice.gev import FcMnlSpec
from choice.logit import LogitSpec
from estimation import (
    bootstrap_se,
    constant_basis,
    entropy_spec_test,
    fixed_models_spec,
    heteroskedastic_spec,
    indicator_basis,
    information_criteria,
    log_likelihood,
    logit_spec,
    min_distance,
    mle,
    moment_match,
    polynomial_basis,
    profile_likelihood,
    select_models,
    spec_from_dict,
)
from estimation.basis import BasisSet, scale_labels
from estimation.bootstrap import run_replicates
from estimation.criteria import criteria_values
from estimation.information import fd_gradient, fd_hessian, guarded_inverse
from estimation.spec_test import entropy_statistic
from market.errors import DimensionError, EstimationError, NumericalError, ValidationError
from market.models import Margins, Matching, SampleCounts, SurplusMatrix
from services.equilibrium import solve
from services.options import SolveOptions
from services.simulation import simulate_sample


@pytest.fixture
def counts():
    return SampleCounts([[30, 10, 5], [8, 25, 12], [4, 9, 20]], [20, 15, 11], [10, 6, 9])


def saturated_surplus(data):
    c = data.muhat.astype(float)
    return np.log(c * c / np.outer(data.muhat_x0, data.muhat_0y))


def saturated_loglik(data):
    c = data.cells().astype(float)
    c = c[c > 0]
    return float(np.sum(c * np.log(c / data.H)))


class TestBasis:
    def test_polynomial_names_and_values(self):
        basis = polynomial_basis([0, 1, 2], [10, 20], 1, 1)
        assert basis.names == ("x0_y0", "x0_y1", "x1_y0", "x1_y1")
        assert_allclose(basis.bases[3], np.outer([-1.0, 0.0, 1.0], [-1.0, 1.0]))
        assert_allclose(scale_labels([5, 5]), [0.0, 0.0])

    def test_rank_deficient(self):
        with pytest.raises(ValidationError, match="rank"):
            BasisSet(np.ones((2, 2, 2)))

    def test_degree_too_high(self):
        with pytest.raises(ValidationError):
            polynomial_basis([0, 1], [0, 1], 2, 0)

    def test_comoments_and_surplus(self):
        basis = indicator_basis((2, 2))
        assert basis.saturated
        mu = np.array([[1.0, 2.0], [3.0, 4.0]])
        assert_allclose(basis.comoments(mu), [1.0, 2.0, 3.0, 4.0])
        assert_allclose(basis.surplus([1.0, 2.0, 3.0, 4.0]), mu)
        assert constant_basis((2, 2)).comoments(mu)[0] == 10.0
        with pytest.raises(DimensionError):
            basis.surplus([1.0])


class TestSpecDocuments:
    def test_heteroskedastic(self):
        doc = {
            "basis": {"kind": "polynomial", "degree_x": 1, "degree_y": 1},
            "heterogeneity": {"kind": "heteroskedastic", "degree_x": 1},
        }
        spec = spec_from_dict(doc, (3, 3))
        assert spec.parameter_names == ("x0_y0", "x0_y1", "x1_y0", "x1_y1", "sigma_1", "tau_0")
        men, women = spec.models([np.log(2.0), 0.0])
        assert [m.scale for m in (men[0], men[2])] == pytest.approx([0.5, 2.0])
        assert isinstance(men[1], LogitSpec) and isinstance(women[0], LogitSpec)

    def test_theta_and_forbidden(self):
        spec = spec_from_dict({"heterogeneity": {"kind": "gender"}, "theta": [0.5], "forbidden": [[0, 1]]}, (2, 2))
        assert spec.basis.saturated
        assert spec.forbidden.tolist() == [[False, True], [False, False]]
        assert_allclose(spec.theta_ref, [0.5])
        with pytest.raises(DimensionError):
            spec_from_dict({"heterogeneity": {"kind": "gender"}, "theta": [0.5, 1.0]}, (2, 2))

    def test_unknown_kinds(self):
        with pytest.raises(ValidationError):
            spec_from_dict({"basis": {"kind": "spline"}}, (2, 2))
        with pytest.raises(ValidationError):
            spec_from_dict({"heterogeneity": {"kind": "probit"}}, (2, 2))


class TestCriteria:
    def test_values(self):
        aic, bic = criteria_values(0.0, 2, np.e ** 2)
        assert aic == pytest.approx(4.0)
        assert bic == pytest.approx(4.0)
        assert criteria_values(-10.0, 1, 1) == (22.0, 20.0)

    def test_no_observations(self):
        with pytest.raises(ValidationError):
            criteria_values(0.0, 1, 0)

    @pytest.mark.parametrize("loglik", [np.nan, -np.inf, np.inf])
    def test_non_finite_loglik(self, loglik):
        with pytest.raises(ValidationError):
            criteria_values(loglik, 1, 10)

    def test_from_result(self, counts):
        result = moment_match(logit_spec(constant_basis(counts.shape)), counts, compute_se=False)
        assert information_criteria(result) == pytest.approx((result.aic, result.bic))
        aic, bic = information_criteria(result, n_obs=np.e ** 2)
        assert bic == pytest.approx(-2.0 * result.loglik + 2.0)
        with pytest.raises(ValidationError):
            information_criteria(dataclasses.replace(result, loglik=np.nan))

    def test_bigger_model_fits_at_least_as_well(self, counts):
        small = moment_match(logit_spec(constant_basis(counts.shape)), counts, compute_se=False)
        big = moment_match(logit_spec(polynomial_basis([0, 1, 2], [0, 1, 2], 1, 1)), counts, compute_se=False)
        assert -2.0 * big.loglik <= -2.0 * small.loglik + 1e-8
        assert big.bic - small.bic == pytest.approx(
            -2.0 * (big.loglik - small.loglik) + np.log(counts.H) * (big.dim - small.dim)
        )


class TestLikelihood:
    def test_matches_multinomial(self, counts):
        spec = logit_spec(constant_basis(counts.shape))
        value = log_likelihood(spec, [0.7], [], counts)
        eq = solve([LogitSpec()] * 3, [LogitSpec()] * 3, spec.phi([0.7]), counts.margins(), SolveOptions(tol=1e-12))
        p = eq.matching.cells() / eq.matching.total_households
        c = counts.cells()
        expected = multinomial.logpmf(c, n=counts.H, p=p) - gammaln(counts.H + 1) + gammaln(c + 1).sum()
        assert value == pytest.approx(expected, rel=1e-9)

    def test_saturated_value(self, counts):
        spec = logit_spec(indicator_basis(counts.shape))
        value = log_likelihood(spec, saturated_surplus(counts).ravel(), [], counts)
        assert value == pytest.approx(saturated_loglik(counts), rel=1e-9)


class TestMomentMatching:
    def test_saturated_exact_fit(self, counts):
        spec = logit_spec(indicator_basis(counts.shape))
        result = moment_match(spec, counts, compute_se=False)
        assert result.converged
        assert_allclose(result.lam, saturated_surplus(counts).ravel(), atol=1e-6)
        assert result.loglik == pytest.approx(saturated_loglik(counts), abs=1e-6)
        assert result.dim == 9

    def test_comoments_match(self, counts):
        spec = logit_spec(polynomial_basis([0, 1, 2], [0, 1, 2], 1, 1))
        result = moment_match(spec, counts)
        assert result.converged
        assert_allclose(result.comoments, result.observed_comoments, atol=1e-6)
        assert np.all(np.isfinite(result.se)) and np.all(result.se > 0)
        assert result.aic == pytest.approx(-2.0 * result.loglik + 8.0)
        assert result.loglik < saturated_loglik(counts)

    def test_to_dict_is_json_ready(self, counts):
        result = moment_match(logit_spec(constant_basis(counts.shape)), counts, compute_se=False)
        doc = result.to_dict()
        assert doc["estimator"] == "mm"
        assert doc["se"] == [None]
        assert doc["fixed_theta"] is True

    def test_shape_mismatch(self, counts):
        with pytest.raises(DimensionError):
            moment_match(logit_spec(constant_basis((2, 2))), counts)

    @staticmethod
    def welfare(spec, margins, lam):
        men, women = spec.models()
        return solve(men, women, spec.phi(lam), margins, SolveOptions(tol=1e-12, max_iter=100000))

    def test_objective_is_concave(self, counts):
        spec = logit_spec(polynomial_basis([0, 1, 2], [0, 1, 2], 1, 1))
        margins = counts.margins()
        observed = spec.basis.comoments(counts.matching().mu)

        def objective(lam):
            return float(observed @ lam) - self.welfare(spec, margins, lam).report.social_welfare

        rng = np.random.default_rng(5)
        for _ in range(3):
            a, b = rng.normal(size=(2, spec.K))
            fa, fb = objective(a), objective(b)
            for t in (0.25, 0.5, 0.75):
                assert objective((1.0 - t) * a + t * b) >= (1.0 - t) * fa + t * fb - 1e-9

    def test_welfare_gradient_is_comoments(self, counts):
        spec = logit_spec(polynomial_basis([0, 1, 2], [0, 1, 2], 1, 1))
        margins = counts.margins()
        lam = np.array([0.5, -0.2, 0.3, 0.1])
        predicted = spec.basis.comoments(self.welfare(spec, margins, lam).matching.mu)
        fd = fd_gradient(lambda x: self.welfare(spec, margins, x).report.social_welfare, lam)
        assert_allclose(fd, predicted, rtol=1e-4)


class TestMle:
    def test_logit_agrees_with_moment_matching(self, counts):
        spec = logit_spec(polynomial_basis([0, 1, 2], [0, 1, 2], 1, 0))
        mm = moment_match(spec, counts, compute_se=False)
        result = mle(spec, counts)
        assert result.converged
        assert result.loglik >= mm.loglik - 1e-6
        assert result.parameter_names == ("x0_y0", "x1_y0")
        assert np.all(result.se > 0)

    def test_fixed_parameters(self, counts):
        spec = logit_spec(constant_basis(counts.shape))
        result = mle(spec, counts, fixed={0: 0.25})
        assert_allclose(result.lam, [0.25])
        assert result.aic == pytest.approx(-2.0 * result.loglik)
        assert result.dim == 0
        assert information_criteria(result) == pytest.approx((result.aic, result.bic))
        with pytest.raises(ValidationError):
            mle(spec, counts, fixed={3: 0.0})

    def test_fixed_distribution_parameter_not_counted(self, counts):
        labels = [0, 1, 2]
        spec = heteroskedastic_spec(constant_basis(counts.shape), labels, labels, degree_x=1, degree_y=0)
        assert spec.parameter_names == ("constant", "sigma_1", "tau_0")
        result = mle(spec, counts, fixed={2: 0.0}, compute_se=False)
        assert result.theta[1] == 0.0
        assert result.fixed_params == (2,)
        assert result.dim == 2
        assert result.to_dict()["dim"] == 2
        assert information_criteria(result) == pytest.approx((result.aic, result.bic))
        assert result.aic == pytest.approx(-2.0 * result.loglik + 4.0)

    def test_profile(self, counts):
        spec = logit_spec(constant_basis(counts.shape))
        best = moment_match(spec, counts, compute_se=False)
        frame = profile_likelihood(spec, counts, "constant", [best.lam[0] - 0.5, best.lam[0], best.lam[0] + 0.5])
        assert list(frame.columns) == ["parameter", "value", "loglik", "converged"]
        assert frame["loglik"].idxmax() == 1
        assert frame["loglik"].max() == pytest.approx(best.loglik, abs=1e-8)
        with pytest.raises(ValidationError):
            profile_likelihood(spec, counts, "tau_0", [0.0])

    @pytest.mark.slow
    def test_recovers_heteroskedastic_parameters(self):
        labels = [0, 1, 2, 3]
        spec = heteroskedastic_spec(polynomial_basis(labels, labels, 1, 1), labels, labels, degree_x=1, degree_y=0)
        lam, theta = np.array([1.0, 0.5, -0.3, 0.8]), np.array([0.3, -0.2])
        men, women = spec.models(theta)
        r = Margins([1.0, 2.0, 1.5, 1.0], [1.2, 1.0, 2.0, 0.8])
        _, data = simulate_sample(men, women, spec.phi(lam), r, 400_000, seed=8, opts=SolveOptions(tol=1e-12))
        result = mle(spec, data)
        assert result.converged
        assert_allclose(result.params, np.concatenate([lam, theta]), atol=0.25)


class TestMinDistance:
    def test_saturated_exact_fit(self, counts):
        result = min_distance(logit_spec(indicator_basis(counts.shape)), counts)
        assert_allclose(result.lam, saturated_surplus(counts).ravel(), atol=1e-10)
        assert result.diagnostics["j_statistic"] == pytest.approx(0.0, abs=1e-12)
        assert result.diagnostics["df"] == 0
        assert np.isnan(result.diagnostics["p_value"])

    def test_identity_weighting_averages(self, counts):
        result = min_distance(logit_spec(constant_basis(counts.shape)), counts, weighting="identity")
        assert result.lam[0] == pytest.approx(saturated_surplus(counts).mean())

    def test_efficient_weighting(self, counts):
        result = min_distance(logit_spec(polynomial_basis([0, 1, 2], [0, 1, 2], 1, 1)), counts)
        assert result.diagnostics["df"] == 5
        assert result.diagnostics["j_statistic"] >= 0.0
        assert 0.0 <= result.diagnostics["p_value"] <= 1.0
        assert np.all(result.se > 0)

    def test_finite_difference_jacobian(self, counts):
        basis = polynomial_basis([0, 1, 2], [0, 1, 2], 1, 0)
        exact = min_distance(logit_spec(basis), counts)
        fcmnl = FcMnlSpec(np.eye(4), 0.5, 1.5)
        numeric = min_distance(fixed_models_spec(basis, [fcmnl] * 3, [fcmnl] * 3), counts)
        assert_allclose(numeric.lam, exact.lam, atol=1e-5)
        assert_allclose(numeric.se, exact.se, rtol=1e-4)

    def test_weighting_validation(self, counts):
        spec = logit_spec(constant_basis(counts.shape))
        with pytest.raises(ValidationError):
            min_distance(spec, counts, weighting="optimal")
        with pytest.raises(ValidationError, match="positive definite"):
            min_distance(spec, counts, weighting=-np.eye(9))
        with pytest.raises(DimensionError):
            min_distance(spec, counts, weighting=np.eye(4))

    def test_too_few_cells(self):
        data = SampleCounts([[5, 0], [3, 4]], [2, 2], [1, 1])
        with pytest.raises(EstimationError):
            min_distance(logit_spec(indicator_basis((2, 2))), data)


class TestBootstrap:
    @staticmethod
    def shares(data):
        return data.cells() / data.H

    def test_deterministic_given_seed(self, counts):
        spec = logit_spec(constant_basis(counts.shape))
        a = bootstrap_se(spec, counts, estimator=self.shares, n_boot=20, seed=5)
        b = bootstrap_se(spec, counts, estimator=self.shares, n_boot=20, seed=5)
        c = bootstrap_se(spec, counts, estimator=self.shares, n_boot=20, seed=6)
        assert_array_equal(a.replicates.to_numpy(), b.replicates.to_numpy())
        assert not np.array_equal(a.replicates.to_numpy(), c.replicates.to_numpy())
        assert a.replicates.index.name == "replicate"
        assert_allclose(a.se, a.replicates.std(axis=0, ddof=1).to_numpy())

    def test_parallel_matches_serial(self, counts):
        spec = logit_spec(constant_basis(counts.shape))
        serial = bootstrap_se(spec, counts, estimator=self.shares, n_boot=12, seed=1)
        parallel = bootstrap_se(spec, counts, estimator=self.shares, n_boot=12, seed=1, jobs=3)
        pd.testing.assert_frame_equal(serial.replicates, parallel.replicates)

    def test_moment_matching_replicates(self, counts):
        spec = logit_spec(constant_basis(counts.shape))
        result = bootstrap_se(spec, counts, estimator="mm", n_boot=5, seed=0)
        assert list(result.replicates.columns) == ["constant"]
        assert result.failures == 0
        assert result.se[0] > 0

    def test_all_replicates_fail(self, counts):
        def broken(data):
            raise EstimationError("degenerate resample")

        with pytest.raises(EstimationError, match="20 of 20"):
            bootstrap_se(logit_spec(constant_basis(counts.shape)), counts, estimator=broken, n_boot=20)

    def test_isolated_failure_is_dropped(self):
        def job(index, seed):
            if index == 0:
                raise EstimationError("boom")
            return index

        results = run_replicates(job, 40, seed=0)
        assert results[0] is None
        assert results[1:] == list(range(1, 40))


class TestSpecificationTest:
    def test_saturated_is_zero(self, counts):
        result = entropy_spec_test(logit_spec(indicator_basis(counts.shape)), counts, n_boot=5)
        assert result.statistic == 0.0
        assert result.p_value == 1.0
        assert result.replicates.size == 0

    def test_bootstrap_p_value(self, counts):
        result = entropy_spec_test(logit_spec(constant_basis(counts.shape)), counts, n_boot=9, seed=3)
        assert result.statistic > 0.0
        assert result.replicates.size + result.failures == 9
        assert 0.0 < result.p_value <= 1.0
        assert result.p_value == pytest.approx((1 + np.sum(result.replicates >= result.statistic)) / (result.replicates.size + 1))
        assert list(result.replicates_frame().columns) == ["replicate", "statistic"]

    def test_negative_statistic_is_an_error(self, counts):
        spec = logit_spec(constant_basis(counts.shape))
        fit = moment_match(spec, counts, compute_se=False)
        r = counts.margins()
        singles = Matching(np.zeros(counts.shape), r.n, r.m)
        # everyone single has zero entropy, below the observed matching's
        broken = dataclasses.replace(fit, matching=singles, comoments=fit.observed_comoments)
        with pytest.raises(NumericalError):
            entropy_statistic(spec, counts, broken)

    def test_negative_statistic_within_comoment_gap(self, counts):
        spec = logit_spec(constant_basis(counts.shape))
        fit = moment_match(spec, counts, compute_se=False)
        r = counts.margins()
        singles = Matching(np.zeros(counts.shape), r.n, r.m)
        loose = dataclasses.replace(fit, matching=singles, comoments=fit.observed_comoments + 1e3)
        assert entropy_statistic(spec, counts, loose) == 0.0


@pytest.mark.slow
class TestMonteCarlo:
    labels = [0, 1, 2]
    margins = Margins([1.0, 2.0, 1.5], [1.2, 1.0, 2.0])

    def three_basis_spec(self):
        full = polynomial_basis(self.labels, self.labels, 1, 1)
        return logit_spec(BasisSet(full.bases[:3], full.names[:3]))

    def test_recovery_within_standard_errors(self):
        spec = self.three_basis_spec()
        lam = np.array([0.8, -0.4, 0.6])
        men, women = spec.models()
        covered = {"mm": 0, "mle": 0}
        for seed in range(5):
            _, data = simulate_sample(men, women, spec.phi(lam), self.margins, 100_000, seed=seed, opts=SolveOptions(tol=1e-12))
            for name, result in (("mm", moment_match(spec, data)), ("mle", mle(spec, data))):
                assert result.converged
                covered[name] += bool(np.all(np.abs(result.lam - lam) <= 3.0 * result.se[: spec.K]))
        assert covered["mm"] >= 4
        assert covered["mle"] >= 4

    def test_size_and_power(self):
        spec = logit_spec(constant_basis((3, 3)))
        men, women = spec.models()
        null_phi = spec.phi([0.5])
        alternative_phi = null_phi.phi + np.diag([1.5, 1.5, 1.5])
        opts = SolveOptions(tol=1e-12)

        def rejected(phi, seed):
            _, data = simulate_sample(men, women, phi, self.margins, 10_000, seed=seed, opts=opts)
            return entropy_spec_test(spec, data, n_boot=19, seed=1000 + seed).p_value <= 0.05

        size = np.mean([rejected(null_phi, seed) for seed in range(100)])
        assert 0.01 <= size <= 0.12
        power = np.mean([rejected(SurplusMatrix(alternative_phi), seed) for seed in range(20)])
        assert power >= 0.8


class TestSelection:
    def test_ranked_by_bic(self, counts):
        frame = select_models(counts, max_degree_x=1, max_degree_y=1)
        assert len(frame) == 4
        assert frame["rank"].tolist() == [1, 2, 3, 4]
        assert frame["bic"].is_monotonic_increasing
        assert (frame["error"] == "").all()
        assert set(zip(frame["degree_x"], frame["degree_y"])) == {(0, 0), (0, 1), (1, 0), (1, 1)}

    def test_degrees_capped_by_groups(self):
        data = SampleCounts([[5, 3], [2, 6]], [2, 2], [1, 3])
        assert len(select_models(data, max_degree_x=4, max_degree_y=4)) == 4


class TestInformation:
    def test_quadratic(self):
        A = np.array([[2.0, 0.5], [0.5, 1.0]])

        def f(x):
            return -0.5 * x @ A @ x + x[0]

        x = np.array([0.3, -0.2])
        assert_allclose(fd_gradient(f, x), -A @ x + [1.0, 0.0], atol=1e-8)
        assert_allclose(fd_hessian(f, x), -A, atol=1e-5)

    def test_guard_pins_flat_directions(self):
        info = np.diag([4.0, 1e-14])
        inv, pinned = guarded_inverse(info)
        assert_allclose(inv, np.diag([0.25, 0.0]))
        assert len(pinned) == 1
        assert_allclose(np.abs(pinned[0]), [0.0, 1.0])

"""Discretized heterogeneity, optimal-transport conjugates and random-coefficient logit."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from choice.logit import LogitSpec
from choice.rc_logit import RcLogitSpec, conj_rc
from choice.transport import DiscretizedDistribution, SimplexBackend, SinkhornBackend, conj_ot
from market.errors import DimensionError, ParameterError, ParseError, ValidationError


@pytest.fixture
def draws():
    rng = np.random.default_rng(7)
    return DiscretizedDistribution(rng.normal(size=(40, 3)), backend=SimplexBackend())


class TestDiscretizedDistribution:
    def test_single_draw_closed_form(self):
        support = np.array([[0.3, -0.1, 0.8]])
        dist = DiscretizedDistribution(support)
        mu = np.array([0.25, 0.5])
        solution = conj_ot(dist, mu, backend=SimplexBackend())
        assert solution.value == pytest.approx(0.25 * 0.3 - 0.25 * 0.1 + 0.5 * 0.8)
        assert solution.backend == "simplex"

    def test_emax_and_probs(self):
        dist = DiscretizedDistribution([[0.0, 1.0, 0.0], [2.0, 0.0, 0.0]], [0.25, 0.75])
        assert dist.emax([0.0, 0.5]) == pytest.approx(0.25 * 1.0 + 0.75 * 2.0)
        assert_allclose(dist.probs([0.0, 0.5]), [0.25, 0.0])

    def test_fenchel_identity(self, draws):
        U = np.array([0.3, -0.2])
        p = draws.probs(U)
        assert draws.emax(U) + draws.conj(p) == pytest.approx(p @ U, abs=1e-7)

    def test_recovered_utilities_rationalize_mu(self, draws):
        mu = np.array([0.35, 0.25])
        solution = conj_ot(draws, mu)
        assert solution.value == pytest.approx(draws.emax(solution.U) - mu @ solution.U, abs=1e-7)

    def test_sinkhorn_matches_simplex(self, draws):
        mu = np.array([0.3, 0.45])
        exact = conj_ot(draws, mu, backend=SimplexBackend())
        approx = conj_ot(draws, mu, backend=SinkhornBackend())
        assert approx.backend == "sinkhorn"
        assert approx.value >= exact.value - 1e-9
        assert approx.value == pytest.approx(exact.value, abs=1e-2)

    def test_forbidden_option_dropped(self, draws):
        solution = conj_ot(draws, [0.4, 0.0], forbidden=[False, True])
        assert np.isnan(solution.U[1])

    def test_weights_must_sum_to_one(self):
        with pytest.raises(ValidationError):
            DiscretizedDistribution([[0.0, 1.0], [1.0, 0.0]], [0.5, 0.6])

    def test_csv(self, tmp_path):
        dist = DiscretizedDistribution([[0.0, 1.0], [1.0, 0.0]], [0.2, 0.8])
        path = tmp_path / "draws.csv"
        dist.to_csv_frame().to_csv(path, index=False)
        loaded = DiscretizedDistribution.from_csv(path)
        assert_allclose(loaded.weights, [0.2, 0.8])
        assert_allclose(loaded.support, dist.support)
        path.write_text("a,b\n1,2\n", encoding="utf-8")
        with pytest.raises(ParseError):
            DiscretizedDistribution.from_csv(path)

    def test_gumbel_methods(self):
        for method in ("random", "halton", "quantile"):
            dist = DiscretizedDistribution.gumbel(64, 3, seed=1, method=method)
            assert dist.support.shape == (64, 3)
        assert_allclose(
            DiscretizedDistribution.gumbel(8, 2, seed=3).support,
            DiscretizedDistribution.gumbel(8, 2, seed=3).support,
        )
        with pytest.raises(ParameterError):
            DiscretizedDistribution.gumbel(8, 2, method="sobol")

    @pytest.mark.slow
    def test_gumbel_discretization_approximates_logit(self):
        dist = DiscretizedDistribution.gumbel(4000, 3, seed=11, method="quantile")
        mu = np.array([0.3, 0.2])
        value = conj_ot(dist, mu, backend=SimplexBackend()).value
        assert -value == pytest.approx(LogitSpec().conj(mu), abs=0.05)

    @pytest.mark.slow
    def test_error_shrinks_with_nodes(self):
        mu = np.array([0.5])
        exact = LogitSpec().conj(mu)
        assert exact == pytest.approx(np.log(0.5))
        errors = []
        for K in (100, 1000, 10000):
            values = [conj_ot(DiscretizedDistribution.gumbel(K, 2, seed=s, method="quantile"), mu, backend=SimplexBackend()).value for s in range(5)]
            errors.append(abs(-np.mean(values) - exact))
        assert errors[0] > errors[1] > errors[2]
        assert errors[2] < 0.02


class TestRcLogit:
    def test_no_loadings_is_logit(self):
        spec = RcLogitSpec(np.zeros((3, 1)), DiscretizedDistribution([[1.0], [-1.0]]), T=1.0)
        U = np.array([0.2, -0.4])
        assert spec.emax(U) == pytest.approx(LogitSpec().emax(U))
        mu = LogitSpec().probs(U)
        value, recovered = conj_rc(spec, mu)
        assert -value == pytest.approx(LogitSpec().conj(mu), abs=1e-10)
        assert_allclose(recovered, U, atol=1e-8)

    def test_inversion_round_trip(self):
        e = DiscretizedDistribution(np.random.default_rng(2).normal(size=(30, 2)))
        Z = np.array([[0.0, 0.0], [1.0, 0.5], [-0.5, 1.0]])
        spec = RcLogitSpec(Z, e, T=0.7)
        U = np.array([0.1, 0.3])
        assert_allclose(spec.invert(spec.probs(U)), U, atol=1e-6)
        p = spec.probs(U)
        assert spec.emax(U) + spec.conj(p) == pytest.approx(p @ U, abs=1e-9)

    def test_zero_temperature_is_transport(self):
        e = DiscretizedDistribution(np.random.default_rng(4).normal(size=(25, 1)))
        spec = RcLogitSpec([[0.0], [1.0], [-1.0]], e, T=0.0)
        assert not spec.smooth
        mu = np.array([0.3, 0.3])
        value, _ = conj_rc(spec, mu, backend=SimplexBackend())
        expected = conj_ot(spec.induced_distribution(), mu, backend=SimplexBackend()).value
        assert value == pytest.approx(expected)

    def test_validation(self):
        e = DiscretizedDistribution([[0.0, 1.0]])
        with pytest.raises(DimensionError):
            RcLogitSpec(np.zeros((3, 1)), e)
        with pytest.raises(ParameterError):
            RcLogitSpec(np.zeros((3, 2)), e, T=-1.0)

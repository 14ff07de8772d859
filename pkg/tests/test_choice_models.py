"""Logit, nested logit, scaled and GEV choice models."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from choice.gev import FcMnlSpec, GevSpec, NestedGenerator, SumGenerator
from choice.logit import LogitSpec, NestedLogitSpec, ScaledModel, heteroskedastic_logit, is_logit, logit_scale
from choice.registry import model_from_dict, models_from_document, models_to_document
from market.errors import (
    BoundaryError,
    DimensionError,
    InfeasibleProbabilitiesError,
    ParameterError,
    UnsupportedModelError,
)

U = np.array([0.4, -1.2, 0.7])


def fenchel_gap(model, U, forbidden=None):
    p = model.probs(U, forbidden)
    return model.emax(U, forbidden) + model.conj(p, forbidden) - p @ np.where(np.isnan(U), 0.0, U)


class TestLogit:
    def test_closed_forms(self):
        model = LogitSpec()
        assert model.emax([0.0, 0.0]) == pytest.approx(np.log(3.0))
        assert_allclose(model.probs([0.0, 0.0]), [1 / 3, 1 / 3])
        mu = np.array([0.2, 0.5])
        expected = 0.3 * np.log(0.3) + 0.2 * np.log(0.2) + 0.5 * np.log(0.5)
        assert model.conj(mu) == pytest.approx(expected)
        assert_allclose(model.invert(mu), np.log(mu / 0.3))

    def test_fenchel_identity(self):
        assert fenchel_gap(LogitSpec(), U) == pytest.approx(0.0, abs=1e-12)

    def test_probs_are_the_emax_gradient(self):
        model = LogitSpec()
        h = 1e-6
        grad = [(model.emax(U + h * e) - model.emax(U - h * e)) / (2 * h) for e in np.eye(U.size)]
        assert_allclose(grad, model.probs(U), atol=1e-8)

    def test_forbidden_option_gets_no_mass(self):
        model = LogitSpec()
        forbidden = np.array([False, True, False])
        p = model.probs([0.0, 5.0, 0.0], forbidden)
        assert p[1] == 0.0
        assert_allclose(p[[0, 2]], [1 / 3, 1 / 3])
        assert np.isnan(model.invert([0.2, 0.0, 0.3], forbidden)[1])

    def test_conj_rejects_excess_mass(self):
        with pytest.raises(InfeasibleProbabilitiesError):
            LogitSpec().conj([0.7, 0.6])

    def test_conj_on_the_boundary(self):
        assert LogitSpec().conj([0.5, 0.5]) == pytest.approx(np.log(0.5))

    def test_invert_needs_interior(self):
        with pytest.raises(BoundaryError) as info:
            LogitSpec().invert([0.0, 0.5])
        assert info.value.cells == [(0,)]
        with pytest.raises(BoundaryError):
            LogitSpec().invert([0.5, 0.5])


class TestNestedLogit:
    def test_unit_lambdas_collapse_to_logit(self):
        nested = NestedLogitSpec([[0, 2], [1]], [1.0, 1.0])
        assert nested.emax(U) == pytest.approx(LogitSpec().emax(U))
        assert_allclose(nested.probs(U), LogitSpec().probs(U))

    def test_fenchel_and_inversion(self):
        nested = NestedLogitSpec([[0, 1], [2]], [0.5, 0.8])
        assert fenchel_gap(nested, U) == pytest.approx(0.0, abs=1e-10)
        assert_allclose(nested.invert(nested.probs(U)), U, atol=1e-10)

    def test_lambda_out_of_range(self):
        with pytest.raises(ParameterError):
            NestedLogitSpec([[0], [1]], [0.5, 1.5])

    def test_nests_must_partition(self):
        with pytest.raises(ParameterError):
            NestedLogitSpec([[0, 1], [1]], [0.5, 0.5])

    def test_wrong_option_count(self):
        with pytest.raises(DimensionError):
            NestedLogitSpec([[0, 1]], [0.5]).emax(U)


class TestScaled:
    def test_scaled_logit(self):
        model = ScaledModel(LogitSpec(), 2.0)
        assert model.emax(U) == pytest.approx(2.0 * np.log1p(np.exp(U / 2.0).sum()))
        assert fenchel_gap(model, U) == pytest.approx(0.0, abs=1e-12)
        assert_allclose(model.invert(model.probs(U)), U, atol=1e-10)

    def test_scale_helpers(self):
        assert is_logit(heteroskedastic_logit(1.0))
        assert logit_scale(heteroskedastic_logit(0.5)) == 0.5
        assert logit_scale(ScaledModel(ScaledModel(LogitSpec(), 2.0), 3.0)) == 6.0
        assert logit_scale(NestedLogitSpec([[0]], [0.5])) is None

    def test_non_positive_scale(self):
        with pytest.raises(ParameterError):
            ScaledModel(LogitSpec(), 0.0)


class TestGev:
    def test_sum_generator_is_logit(self):
        model = GevSpec(SumGenerator(), 3)
        assert model.emax(U) == pytest.approx(LogitSpec().emax(U))
        assert_allclose(model.probs(U), LogitSpec().probs(U))

    def test_nested_generator_matches_nested_logit(self):
        nests, lambdas = [[0, 1], [2]], [0.4, 0.9]
        gev = GevSpec(NestedGenerator(nests, lambdas), 3)
        nested = NestedLogitSpec(nests, lambdas)
        assert gev.emax(U) == pytest.approx(nested.emax(U))
        assert_allclose(gev.probs(U), nested.probs(U))

    def test_generic_inversion(self):
        gev = GevSpec(NestedGenerator([[0, 1], [2]], [0.6, 1.0]), 3)
        assert_allclose(gev.invert(gev.probs(U)), U, atol=1e-8)
        assert fenchel_gap(gev, U) == pytest.approx(0.0, abs=1e-8)

    def test_fcmnl_identity_is_logit(self):
        model = FcMnlSpec(np.eye(4), sigma=0.5, tau=1.5)
        assert model.emax(U) == pytest.approx(LogitSpec().emax(U))
        assert_allclose(model.probs(U), LogitSpec().probs(U))
        assert model.nested_form(3) is not None

    def test_fcmnl_probabilities(self):
        b = np.array([[1.0, 0.3, 0.0, 0.2], [0.3, 1.0, 0.5, 0.0], [0.0, 0.5, 1.0, 0.1], [0.2, 0.0, 0.1, 1.0]])
        model = FcMnlSpec(b, sigma=0.6, tau=1.5)
        p = model.probs(U)
        assert np.all(p > 0) and p.sum() < 1.0
        h = 1e-6
        grad = [(model.emax(U + h * e) - model.emax(U - h * e)) / (2 * h) for e in np.eye(U.size)]
        assert_allclose(grad, p, atol=1e-7)
        assert_allclose(model.invert(p), U, atol=1e-7)

    def test_fcmnl_conjugate_round_trip(self):
        b = np.array([[1.0, 0.0, 0.4, 0.0], [0.0, 1.0, 0.7, 0.2], [0.4, 0.7, 1.0, 0.0], [0.0, 0.2, 0.0, 1.0]])
        model = FcMnlSpec(b, sigma=0.4, tau=2.0)
        assert fenchel_gap(model, U) == pytest.approx(0.0, abs=1e-8)
        p = model.probs(U)
        other = model.probs(U + np.array([0.3, 0.0, -0.2]))
        assert model.conj(other) >= model.conj(p) + model.invert(p) @ (other - p) - 1e-9

    @pytest.mark.parametrize("sigma, tau", [(1.0, 1.5), (0.5, 1.0), (0.8, 1.5)])
    def test_fcmnl_parameter_range(self, sigma, tau):
        with pytest.raises(ParameterError):
            FcMnlSpec(np.eye(3), sigma=sigma, tau=tau)


class TestRegistry:
    def test_documents(self):
        doc = {"family": "scaled", "scale": 2.0, "base": {"family": "nested_logit", "nests": [[0], [1]], "lambdas": [0.5, 1.0]}}
        model = model_from_dict(doc)
        assert model.to_dict() == doc
        assert model_from_dict({"family": "fcmnl", "b": np.eye(3).tolist(), "sigma": 0.5, "tau": 2.0}).n_options == 2

    def test_shared_and_grouped(self):
        shared = models_from_document({"family": "logit"}, 3)
        assert len(shared) == 3 and models_to_document(shared) == {"family": "logit"}
        grouped = models_from_document({"groups": [{"family": "logit"}, {"family": "scaled", "scale": 2.0, "base": {"family": "logit"}}]}, 2)
        assert logit_scale(grouped[1]) == 2.0
        with pytest.raises(DimensionError):
            models_from_document({"groups": [{"family": "logit"}]}, 2)

    def test_unknown_family(self):
        with pytest.raises(UnsupportedModelError):
            model_from_dict({"family": "probit"})

"""Recovering surplus and utilities from an observed matching."""
import numpy as np
import pytest
from numpy.testing import assert_allclose

from choice.gev import FcMnlSpec
from choice.logit import LogitSpec, NestedLogitSpec, ScaledModel
from market.errors import BoundaryError, UnsupportedModelError, ValidationError
from market.models import Margins, Matching, SurplusMatrix
from services.equilibrium import solve
from services.identification import (
    identify_surplus,
    identify_utilities,
    log_odds_ratio,
    semi_elasticities,
    smooth_matching,
    surplus_share,
)
from services.options import SolveOptions


@pytest.fixture
def equilibrium(small_market, logit_sides, tight_opts):
    r, phi = small_market
    return solve(*logit_sides, phi, r, tight_opts)


class TestSurplus:
    def test_round_trip(self, small_market, logit_sides, equilibrium):
        r, phi = small_market
        recovered = identify_surplus(*logit_sides, equilibrium.matching, r)
        assert_allclose(recovered.phi, phi.phi, atol=1e-8)

    def test_logit_closed_form(self, logit):
        r = Margins([2.0], [3.0])
        mu = Matching([[1.0]], [1.0], [2.0])
        phi = identify_surplus([logit], [logit], mu, r)
        assert phi.phi[0, 0] == pytest.approx(2.0 * np.log(1.0) - np.log(1.0) - np.log(2.0))

    def test_utilities_add_up(self, small_market, logit_sides, equilibrium):
        r, phi = small_market
        systematic, groups = identify_utilities(*logit_sides, equilibrium.matching, r)
        assert_allclose(systematic.joint, phi.phi, atol=1e-8)
        assert_allclose(groups.u, equilibrium.utilities.u, atol=1e-8)
        assert_allclose(groups.v, equilibrium.utilities.v, atol=1e-8)

    def test_zero_cell_becomes_forbidden(self, logit):
        r = Margins([2.0, 2.0], [2.0, 2.0])
        mu = Matching([[1.0, 0.0], [0.5, 0.5]], [1.0, 1.0], [0.5, 1.5])
        phi = identify_surplus([logit] * 2, [logit] * 2, mu, r)
        assert phi.forbidden.tolist() == [[False, True], [False, False]]

    def test_zero_cell_without_mask(self, logit):
        r = Margins([2.0, 2.0], [2.0, 2.0])
        mu = Matching([[1.0, 0.0], [0.5, 0.5]], [1.0, 1.0], [0.5, 1.5])
        with pytest.raises(BoundaryError) as info:
            identify_utilities([logit] * 2, [logit] * 2, mu, r)
        assert info.value.cells == [(0, 1)]

    def test_no_singles(self, logit):
        r = Margins([1.0], [1.0])
        mu = Matching([[1.0]], [0.0], [0.0])
        with pytest.raises(BoundaryError) as info:
            identify_surplus([logit], [logit], mu, r)
        assert (0, -1) in info.value.cells

    def test_smoothing_fills_zero_cells(self, logit):
        r = Margins([1.0], [1.0])
        mu = Matching([[1.0]], [0.0], [0.0])
        phi = identify_surplus([logit], [logit], mu, r, smoothing=0.5)
        assert phi.phi[0, 0] == pytest.approx(2.0 * np.log(1.5) - 2.0 * np.log(0.5))
        assert smooth_matching(mu, 0.5).total_households == pytest.approx(2.5)

    def test_inconsistent_margins(self, logit):
        mu = Matching([[1.0]], [1.0], [1.0])
        with pytest.raises(ValidationError, match="inconsistent"):
            identify_surplus([logit], [logit], mu, Margins([5.0], [2.0]))

    def test_nested_round_trip(self, small_market, logit, tight_opts):
        r, phi = small_market
        men = [NestedLogitSpec([[0, 2], [1]], [0.6, 1.0])] * 2
        women = [ScaledModel(LogitSpec(), 1.5)] * 3
        eq = solve(men, women, phi, r, tight_opts)
        assert_allclose(identify_surplus(men, women, eq.matching, r).phi, phi.phi, atol=1e-7)


class TestLogOdds:
    def test_margin_free_under_logit(self, logit, tight_opts):
        phi = SurplusMatrix([[1.0, 0.2], [-0.3, 0.9]])
        expected = (1.0 + 0.9 - 0.2 + 0.3) / 2.0
        for r in (Margins([1.0, 1.0], [1.0, 1.0]), Margins([5.0, 0.5], [0.2, 3.0])):
            mu = solve([logit] * 2, [logit] * 2, phi, r, tight_opts).matching
            assert log_odds_ratio(mu, 0, 1, 0, 1) == pytest.approx(expected, abs=1e-8)

    def test_margins_matter_under_heteroskedasticity(self, logit, tight_opts):
        phi = SurplusMatrix([[1.0, 0.2], [-0.3, 0.9]])
        men = [ScaledModel(LogitSpec(), 0.5), ScaledModel(LogitSpec(), 2.0)]
        ratios = [
            log_odds_ratio(solve(men, [logit] * 2, phi, r, tight_opts).matching, 0, 1, 0, 1)
            for r in (Margins([1.0, 1.0], [1.0, 1.0]), Margins([5.0, 0.5], [0.2, 3.0]))
        ]
        assert abs(ratios[0] - ratios[1]) > 1e-3

    def test_margins_matter_under_fcmnl(self, logit):
        phi = SurplusMatrix([[1.0, 0.2], [-0.3, 0.9]])
        b = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.9], [0.0, 0.9, 1.0]])
        men = [FcMnlSpec(b, 0.5, 1.5)] * 2
        opts = SolveOptions(tol=1e-9, method="minemax")
        ratios = [
            log_odds_ratio(solve(men, [logit] * 2, phi, r, opts).matching, 0, 1, 0, 1)
            for r in (Margins([1.0, 1.0], [1.0, 1.0]), Margins([5.0, 0.5], [0.2, 3.0]))
        ]
        assert abs(ratios[0] - ratios[1]) > 1e-3


class TestSurplusShare:
    def test_logit_shares(self, logit):
        r = Margins([2.0], [4.0])
        mu = Matching([[1.0]], [1.0], [3.0])
        share = surplus_share([logit], [logit], mu, r)
        u, v = np.log(2.0), np.log(4.0 / 3.0)
        assert share[0, 0] == pytest.approx(u / (u + v))

    def test_heteroskedastic_scales(self):
        r = Margins([2.0], [4.0])
        mu = Matching([[1.0]], [1.0], [3.0])
        share = surplus_share([ScaledModel(LogitSpec(), 2.0)], [LogitSpec()], mu, r)
        u, v = 2.0 * np.log(2.0), np.log(4.0 / 3.0)
        assert share[0, 0] == pytest.approx(u / (u + v))

    def test_other_families(self, logit):
        r = Margins([2.0], [4.0])
        mu = Matching([[1.0]], [1.0], [3.0])
        with pytest.raises(UnsupportedModelError):
            surplus_share([NestedLogitSpec([[0]], [0.5])], [logit], mu, r)


class TestSemiElasticities:
    def test_logit(self):
        U = np.array([0.2, -0.5, 1.0])
        p = LogitSpec().probs(U)
        out = semi_elasticities(LogitSpec(), U, 1)
        assert_allclose(out, [-p[1], 1.0 - p[1], -p[1]])

    def test_scaled_logit(self):
        U = np.array([0.2, -0.5])
        model = ScaledModel(LogitSpec(), 2.0)
        p = model.probs(U)
        assert_allclose(semi_elasticities(model, U, 0), [(1.0 - p[0]) / 2.0, -p[0] / 2.0])

    def test_finite_differences_match_closed_form(self):
        U = np.array([0.2, -0.5, 1.0])
        fd = semi_elasticities(FcMnlSpec(np.eye(4), 0.5, 1.5), U, 2)
        assert_allclose(fd, semi_elasticities(LogitSpec(), U, 2), atol=1e-7)

    def test_forbidden_option_is_nan(self):
        out = semi_elasticities(LogitSpec(), [0.0, 0.0], 0, forbidden=[False, True])
        assert np.isnan(out[1])
        assert out[0] == pytest.approx(0.5)

    def test_fcmnl_substitution_follows_distance(self):
        b = np.eye(5)
        for t in range(1, 4):
            b[t, t + 1] = b[t + 1, t] = 0.8
        out = semi_elasticities(FcMnlSpec(b, 0.5, 1.5), np.zeros(4), 0)
        assert np.ptp(out[1:]) > 1e-3
        assert out[1] < out[3]

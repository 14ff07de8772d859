"""Generalized entropy of matching, social welfare and per-side utilities."""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from choice.base import ChoiceModel, check_models
from market.errors import ValidationError
from market.feasibility import max_residual
from market.models import GroupUtilities, Margins, Matching, SurplusMatrix

logger = logging.getLogger(__name__)


def _row_mask(forbidden: Optional[np.ndarray], i: int):
    return None if forbidden is None else forbidden[i]


def side_conjugate(
    models: Sequence[ChoiceModel], M: np.ndarray, masses: np.ndarray, forbidden: Optional[np.ndarray] = None
) -> float:
    """sum_i mass_i G*_i(M_i / mass_i) for one side, rows of M indexed by that side's groups."""
    total = 0.0
    for i, model in enumerate(models):
        if masses[i] <= 0:
            continue
        total += masses[i] * model.conj(M[i] / masses[i], _row_mask(forbidden, i))
    return total


def side_utilities(
    models: Sequence[ChoiceModel], M: np.ndarray, masses: np.ndarray, forbidden: Optional[np.ndarray] = None
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Mean utilities and group utilities for one side: U_i = invert_i(M_i / mass_i)
    and u_i = emax_i(U_i). Groups of zero mass get NaN.
    """
    U = np.full(M.shape, np.nan)
    u = np.full(M.shape[0], np.nan)
    for i, model in enumerate(models):
        if masses[i] <= 0:
            continue
        mask = _row_mask(forbidden, i)
        U[i] = model.invert(M[i] / masses[i], mask)
        u[i] = model.emax(np.where(np.isnan(U[i]), 0.0, U[i]), mask)
    return U, u


def _feasibility_tol(r: Margins, tol: Optional[float]) -> float:
    if tol is not None:
        return tol
    return 1e-5 * (1.0 + max(r.n.max(), r.m.max()))


def generalized_entropy(
    men: Sequence[ChoiceModel],
    women: Sequence[ChoiceModel],
    mu: Matching,
    r: Margins,
    forbidden: Optional[np.ndarray] = None,
    tol: Optional[float] = None,
) -> float:
    """E(mu, r) = -sum_x n_x G*_x(mu_x. / n_x) - sum_y m_y H*_y(mu_.y / m_y)."""
    nx, ny = r.shape
    if mu.shape != r.shape:
        raise ValidationError(f"matching shape {mu.shape} does not match margins {r.shape}")
    check_models(men, nx, ny, "men")
    check_models(women, ny, nx, "women")
    residual = max_residual(mu, r)
    if residual > _feasibility_tol(r, tol):
        raise ValidationError(f"matching is infeasible for the margins (max residual {residual:.3e})")
    forbidden_t = None if forbidden is None else forbidden.T
    men_part = side_conjugate(men, np.asarray(mu.mu), r.n, forbidden)
    women_part = side_conjugate(women, np.asarray(mu.mu).T, r.m, forbidden_t)
    return float(-men_part - women_part)


def social_welfare(
    men: Sequence[ChoiceModel],
    women: Sequence[ChoiceModel],
    phi: SurplusMatrix,
    mu: Matching,
    r: Margins,
    tol: Optional[float] = None,
) -> float:
    """W = sum mu Phi + E(mu, r), the primal social gain at a feasible matching."""
    if np.any(np.asarray(mu.mu)[phi.forbidden] > 0):
        raise ValidationError("matching puts mass on forbidden cells")
    systematic = float(np.sum(np.asarray(mu.mu) * phi.filled(0.0)))
    entropy = generalized_entropy(men, women, mu, r, phi.forbidden if phi.has_forbidden else None, tol)
    return systematic + entropy


def dual_value(utilities: GroupUtilities, r: Margins) -> float:
    """sum_x n_x u_x + sum_y m_y v_y."""
    return utilities.total(r)

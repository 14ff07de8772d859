"""Recover surplus and utilities from an observed matching under known heterogeneity."""
import logging
from typing import Optional, Sequence, Tuple

import numpy as np

from choice.base import ChoiceModel, check_models
from choice.logit import logit_scale
from market.errors import BoundaryError, DimensionError, UnsupportedModelError, ValidationError
from market.feasibility import max_residual
from market.models import GroupUtilities, Margins, Matching, SurplusMatrix, SystematicUtilities
from services.welfare import side_utilities

logger = logging.getLogger(__name__)

FD_SEMI_ELASTICITY = 1e-5


def smooth_matching(mu: Matching, pseudo_count: float) -> Matching:
    """Add a pseudo-count to every household cell."""
    if pseudo_count < 0:
        raise ValidationError(f"smoothing must be non-negative, got {pseudo_count}")
    return Matching(mu.mu + pseudo_count, mu.mu_x0 + pseudo_count, mu.mu_0y + pseudo_count)


def _prepare(men, women, mu: Matching, r: Margins, smoothing: float) -> Tuple[Matching, Margins]:
    if mu.shape != r.shape:
        raise DimensionError("matching", r.shape, mu.shape)
    nx, ny = r.shape
    check_models(men, nx, ny, "men")
    check_models(women, ny, nx, "women")
    if smoothing > 0:
        mu = smooth_matching(mu, smoothing)
        r = mu.margins()
    residual = max_residual(mu, r)
    if residual > 1e-6 * (1.0 + max(r.n.max(), r.m.max())):
        raise ValidationError(f"matching is inconsistent with the margins (max residual {residual:.3e})")
    singles = [(x, -1) for x in np.flatnonzero(mu.mu_x0 <= 0)] + [(-1, y) for y in np.flatnonzero(mu.mu_0y <= 0)]
    if singles:
        raise BoundaryError("identification needs positive singles mass", [(int(a), int(b)) for a, b in singles])
    return mu, r


def identify_utilities(
    men: Sequence[ChoiceModel],
    women: Sequence[ChoiceModel],
    mu: Matching,
    r: Margins,
    forbidden: Optional[np.ndarray] = None,
    smoothing: float = 0.0,
) -> Tuple[SystematicUtilities, GroupUtilities]:
    """
    U_xy = invert_x(mu_.|x)_y, V_xy = invert_y(mu_.|y)_x, u_x = emax_x(U_x.), v_y = emax_y(V_.y).

    Every allowed cell must carry positive mass; forbidden cells get NaN.
    """
    mu, r = _prepare(men, women, mu, r, smoothing)
    M = np.asarray(mu.mu)
    allowed = np.ones(M.shape, dtype=bool) if forbidden is None else ~np.asarray(forbidden, dtype=bool)
    zero = np.argwhere(allowed & (M <= 0))
    if zero.size:
        raise BoundaryError("zero matching mass on allowed cells", [tuple(int(i) for i in cell) for cell in zero])
    mask = None if allowed.all() else ~allowed
    U, u = side_utilities(men, M, r.n, mask)
    Vt, v = side_utilities(women, M.T, r.m, None if mask is None else mask.T)
    return SystematicUtilities(U, Vt.T), GroupUtilities(u, v)


def identify_surplus(
    men: Sequence[ChoiceModel],
    women: Sequence[ChoiceModel],
    mu: Matching,
    r: Margins,
    smoothing: float = 0.0,
) -> SurplusMatrix:
    """Phi = U + V on positive cells; zero cells are marked forbidden."""
    mu_checked, _ = _prepare(men, women, mu, r, smoothing)
    forbidden = np.asarray(mu_checked.mu) <= 0
    if forbidden.any():
        logger.warning(f"{int(forbidden.sum())} zero cells marked forbidden")
    systematic, _ = identify_utilities(men, women, mu, r, forbidden if forbidden.any() else None, smoothing)
    return SurplusMatrix(np.where(forbidden, 0.0, systematic.joint), forbidden)


def surplus_share(
    men: Sequence[ChoiceModel],
    women: Sequence[ChoiceModel],
    mu: Matching,
    r: Margins,
) -> np.ndarray:
    """
    Men's average share u_x / (u_x + v_y) of an (x, y) match for (heteroskedastic) logit models,
    with u_x = -sigma_x log mu_0|x. Cells with a zero denominator are NaN.
    """
    mu, r = _prepare(men, women, mu, r, 0.0)
    sigma = np.array([logit_scale(model) or np.nan for model in men])
    tau = np.array([logit_scale(model) or np.nan for model in women])
    if np.isnan(sigma).any() or np.isnan(tau).any():
        raise UnsupportedModelError("surplus shares are defined for logit and heteroskedastic logit models")
    u = -sigma * np.log(mu.mu_x0 / r.n)
    v = -tau * np.log(mu.mu_0y / r.m)
    denom = u[:, None] + v[None, :]
    flagged = np.abs(denom) <= 1e-300
    if flagged.any():
        logger.warning(f"{int(flagged.sum())} cells with zero total utility have no defined share")
    with np.errstate(divide="ignore", invalid="ignore"):
        share = np.where(flagged, np.nan, u[:, None] / denom)
    return share


def semi_elasticities(model: ChoiceModel, U, y: int, forbidden=None) -> np.ndarray:
    """
    d log probs_t / dU_y for every inside option t. Closed form 1(y = t) - mu_y
    (divided by the scale) for logit; central differences otherwise. Entries
    with zero probability are NaN.
    """
    U = np.array(U, dtype=float).ravel()
    if not 0 <= y < U.size:
        raise DimensionError("semi-elasticity option", f"0..{U.size - 1}", y)
    p = model.probs(U, forbidden)
    scale = logit_scale(model)
    if scale is not None:
        out = -np.full(U.size, p[y]) / scale
        out[y] += 1.0 / scale
    else:
        h = FD_SEMI_ELASTICITY * (1.0 + abs(U[y]))
        up = U.copy()
        down = U.copy()
        up[y] += h
        down[y] -= h
        with np.errstate(divide="ignore"):
            out = (np.log(model.probs(up, forbidden)) - np.log(model.probs(down, forbidden))) / (2.0 * h)
    out = np.where(p > 0, out, np.nan)
    if np.isnan(out).any():
        logger.debug(f"semi-elasticities undefined for options {np.flatnonzero(np.isnan(out)).tolist()}")
    return out


def log_odds_ratio(mu: Matching, x: int, x2: int, y: int, y2: int) -> float:
    """log (mu_xy mu_x'y') / (mu_xy' mu_x'y); margin-free under logit."""
    M = np.asarray(mu.mu)
    return float(np.log(M[x, y]) + np.log(M[x2, y2]) - np.log(M[x, y2]) - np.log(M[x2, y]))

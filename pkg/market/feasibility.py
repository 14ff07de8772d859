"""Feasibility arithmetic shared by solvers, identification and estimation."""
from typing import Tuple

import numpy as np

from config import config
from market.errors import DimensionError, ValidationError
from market.models import Margins, Matching


def _check_shapes(mu: Matching, r: Margins) -> None:
    if mu.shape != r.shape:
        raise DimensionError("matching", r.shape, mu.shape)


def margin_residuals(mu: Matching, r: Margins) -> Tuple[np.ndarray, np.ndarray]:
    """Return (n_x - mu_x0 - sum_y mu_xy, m_y - mu_0y - sum_x mu_xy)."""
    _check_shapes(mu, r)
    return r.n - mu.n, r.m - mu.m


def max_residual(mu: Matching, r: Margins) -> float:
    rx, ry = margin_residuals(mu, r)
    return float(max(np.abs(rx).max(), np.abs(ry).max()))


def is_feasible(mu: Matching, r: Margins, tol: float = None) -> bool:
    tol = config.FEASIBILITY_TOL if tol is None else tol
    return max_residual(mu, r) <= tol


def conditional_probs(mu: Matching, r: Margins) -> Tuple[np.ndarray, np.ndarray]:
    """
    Conditional choice probabilities.

    Returns (mu_{y|x}, mu_{x|y}), both |X| x |Y|. The single shares are
    mu_x0 / n_x and mu_0y / m_y.
    """
    _check_shapes(mu, r)
    zero_x = np.flatnonzero(r.n <= 0)
    if zero_x.size:
        raise ValidationError(f"zero margin for man group x={int(zero_x[0])}")
    zero_y = np.flatnonzero(r.m <= 0)
    if zero_y.size:
        raise ValidationError(f"zero margin for woman group y={int(zero_y[0])}")
    return mu.mu / r.n[:, None], mu.mu / r.m[None, :]


def single_shares(mu: Matching, r: Margins) -> Tuple[np.ndarray, np.ndarray]:
    """Return (mu_{0|x}, mu_{0|y})."""
    conditional_probs(mu, r)
    return mu.mu_x0 / r.n, mu.mu_0y / r.m

"""Information criteria on the -2 loglik scale (smaller is better)."""
from typing import Optional, Tuple

import numpy as np

from market.errors import ValidationError


def criteria_values(loglik: float, dim: int, n_obs: float) -> Tuple[float, float]:
    """aic = -2 loglik + 2 dim, bic = -2 loglik + log(n_obs) dim."""
    if not np.isfinite(loglik):
        raise ValidationError(f"information criteria need a finite log-likelihood, got {loglik}")
    if n_obs <= 0:
        raise ValidationError(f"number of observations must be positive, got {n_obs}")
    return -2.0 * loglik + 2.0 * dim, -2.0 * loglik + np.log(n_obs) * dim


def information_criteria(result, n_obs: Optional[float] = None) -> Tuple[float, float]:
    """(aic, bic) of a fitted result; dim counts only the estimated parameters."""
    return criteria_values(result.loglik, result.dim, result.n_obs if n_obs is None else n_obs)

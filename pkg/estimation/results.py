"""Estimation outputs."""
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from market.models import Matching


def _clean(value):
    if isinstance(value, (float, np.floating)):
        return float(value) if np.isfinite(value) else None
    if isinstance(value, np.integer):
        return int(value)
    return value


def _listify(values):
    if values is None:
        return None
    return [None if not np.isfinite(v) else float(v) for v in np.asarray(values, dtype=float).ravel()]


@dataclass
class EstimationResult:
    estimator: str
    lam: np.ndarray
    theta: np.ndarray
    se: np.ndarray
    loglik: float
    aic: float
    bic: float
    comoments: np.ndarray
    converged: bool
    n_obs: int
    parameter_names: Tuple[str, ...] = ()
    observed_comoments: Optional[np.ndarray] = None
    matching: Optional[Matching] = None
    pinned_directions: List[List[float]] = field(default_factory=list)
    diagnostics: dict = field(default_factory=dict)
    fixed_theta: bool = False
    fixed_params: Tuple[int, ...] = ()

    @property
    def params(self) -> np.ndarray:
        return np.concatenate([np.ravel(self.lam), np.ravel(self.theta)])

    @property
    def dim(self) -> int:
        """Number of estimated parameters; held-fixed coordinates do not count."""
        estimated = np.size(self.lam) if self.fixed_theta else self.params.size
        return estimated - sum(1 for i in set(self.fixed_params) if i < estimated)

    def to_dict(self) -> dict:
        out = {
            "estimator": self.estimator,
            "parameter_names": list(self.parameter_names),
            "lambda": _listify(self.lam),
            "theta": _listify(self.theta),
            "se": _listify(self.se),
            "loglik": float(self.loglik),
            "aic": float(self.aic),
            "bic": float(self.bic),
            "comoments": _listify(self.comoments),
            "observed_comoments": _listify(self.observed_comoments),
            "converged": bool(self.converged),
            "n_obs": int(self.n_obs),
            "pinned_directions": self.pinned_directions,
            "fixed_theta": self.fixed_theta,
            "fixed_params": [int(i) for i in self.fixed_params],
            "dim": int(self.dim),
        }
        out.update({key: _clean(value) for key, value in self.diagnostics.items()})
        return out

"""Abstract contract shared by all heterogeneity families."""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import ClassVar, Optional, Sequence, Tuple

import numpy as np

from market.errors import (
    BoundaryError,
    ConvergenceError,
    DimensionError,
    InfeasibleProbabilitiesError,
    NumericalError,
    ValidationError,
)

logger = logging.getLogger(__name__)

# Forbidden alternatives enter as U_y = -LARGE, LARGE = LARGE_FACTOR * (1 + max|U|)
LARGE_FACTOR = 100.0
SIMPLEX_TOL = 1e-12

NEWTON_MAX_ITER = 200
NEWTON_TOL = 1e-12
NEWTON_ACCEPT_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class NestedForm:
    """
    Inverse demand of the scaled nested-logit family.

    U_y = scale * (lambda_n log(mu_y / mu_0) + (1 - lambda_n) log(mu_n / mu_0))
    for y in nest n. Logit is the case of singleton nests with lambda = 1.
    """

    scale: float
    nests: Tuple[np.ndarray, ...]
    lambdas: np.ndarray

    def nest_index(self, n_options: int) -> np.ndarray:
        out = np.empty(n_options, dtype=int)
        for k, members in enumerate(self.nests):
            out[members] = k
        return out

    def own_coefficients(self, n_options: int) -> np.ndarray:
        """Coefficient of log mu_y in U_y, per option."""
        return self.scale * self.lambdas[self.nest_index(n_options)]

    def rescaled(self, factor: float) -> "NestedForm":
        return NestedForm(self.scale * factor, self.nests, self.lambdas)

    @property
    def is_flat(self) -> bool:
        return bool(np.all(self.lambdas == 1.0))


def singleton_form(n_options: int, scale: float = 1.0) -> NestedForm:
    return NestedForm(scale, tuple(np.array([y]) for y in range(n_options)), np.ones(n_options))


class ChoiceModel(ABC):
    """
    A family of unobserved heterogeneity for one group.

    U is a vector of mean utilities over the inside options (the outside
    option is pinned at 0) and mu a sub-probability vector over the same
    options, with mu_0 = 1 - sum(mu). Forbidden options are passed through a
    boolean mask; they never receive probability.
    """

    family: ClassVar[str] = ""
    # False for piecewise-constant choice maps (argmax over finitely many draws)
    smooth: ClassVar[bool] = True

    @property
    def n_options(self) -> Optional[int]:
        """Number of inside options, or None when the family adapts to the input."""
        return None

    # ------------------------------------------------------------ public API

    def emax(self, U, forbidden=None) -> float:
        """Expected maximum utility G(U)."""
        U, allowed = self._prepare_utilities(U, forbidden)
        value = float(self._emax(self._mask(U, allowed)))
        if not np.isfinite(value):
            raise NumericalError(f"{self.family} emax is not finite")
        return value

    def probs(self, U, forbidden=None) -> np.ndarray:
        """Choice probabilities over the inside options (the gradient of emax)."""
        U, allowed = self._prepare_utilities(U, forbidden)
        p = np.array(self._probs(self._mask(U, allowed)), dtype=float)
        p[~allowed] = 0.0
        if not np.all(np.isfinite(p)):
            raise NumericalError(f"{self.family} probabilities are not finite")
        return p

    def conj(self, mu, forbidden=None) -> float:
        """Convex conjugate G*(mu) of the emax (minus the generalized entropy of choice)."""
        mu, allowed = self._prepare_probabilities(mu, forbidden)
        value = float(self._conj(mu, allowed))
        if not np.isfinite(value):
            raise NumericalError(f"{self.family} conjugate is not finite")
        return value

    def invert(self, mu, forbidden=None) -> np.ndarray:
        """Mean utilities U with probs(U) = mu; forbidden entries are NaN."""
        mu, allowed = self._prepare_probabilities(mu, forbidden)
        self._check_interior(mu, allowed)
        U = np.array(self._invert(mu, allowed), dtype=float)
        U[~allowed] = np.nan
        return U

    def nested_form(self, n_options: int) -> Optional[NestedForm]:
        """Inverse-demand structure used by the IPFP margin projection, if any."""
        return None

    @abstractmethod
    def to_dict(self) -> dict:
        """JSON-ready description of the model."""

    def __repr__(self):
        return f"<{type(self).__name__} {self.family}>"

    # ------------------------------------------------------------ hooks

    @abstractmethod
    def _emax(self, U: np.ndarray) -> float:
        """Emax at finite U."""

    @abstractmethod
    def _probs(self, U: np.ndarray) -> np.ndarray:
        """Probabilities at finite U."""

    def _conj(self, mu: np.ndarray, allowed: np.ndarray) -> float:
        # Legendre transform evaluated at its maximizer
        live = allowed & (mu > 0)
        self._check_interior(mu, live)
        U = self._invert(mu, live)
        return float(np.dot(mu[live], U[live]) - self._emax(self._mask(U, live)))

    def _invert(self, mu: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        return self._newton_invert(mu, allowed)

    def _shock_spread(self) -> float:
        """Range of the additive shocks, added to LARGE for bounded-support families."""
        return 0.0

    def _jacobian(self, U: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        """d probs / dU on the allowed options; central finite differences by default."""
        idx = np.flatnonzero(allowed)
        jac = np.empty((idx.size, idx.size))
        for col, j in enumerate(idx):
            h = 1e-6 * (1.0 + abs(U[j]))
            up = U.copy()
            down = U.copy()
            up[j] += h
            down[j] -= h
            p_up = self._probs(self._mask(up, allowed))
            p_down = self._probs(self._mask(down, allowed))
            jac[:, col] = (p_up[idx] - p_down[idx]) / (2.0 * h)
        return 0.5 * (jac + jac.T)

    # ------------------------------------------------------------ helpers

    def _prepare_utilities(self, U, forbidden) -> Tuple[np.ndarray, np.ndarray]:
        U = np.array(U, dtype=float).ravel()
        self._check_size(U.size)
        allowed = self._allowed_mask(U.size, forbidden)
        if not np.all(np.isfinite(U[allowed])):
            raise ValidationError(f"{self.family}: utilities must be finite on allowed options")
        return U, allowed

    def _prepare_probabilities(self, mu, forbidden) -> Tuple[np.ndarray, np.ndarray]:
        mu = np.array(mu, dtype=float).ravel()
        self._check_size(mu.size)
        allowed = self._allowed_mask(mu.size, forbidden)
        if not np.all(np.isfinite(mu)) or np.any(mu < -SIMPLEX_TOL):
            raise InfeasibleProbabilitiesError(f"{self.family}: probabilities must be finite and non-negative")
        mu = np.clip(mu, 0.0, None)
        total = mu.sum()
        if total > 1.0 + SIMPLEX_TOL:
            raise InfeasibleProbabilitiesError(
                f"{self.family}: probabilities sum to {total:.12g} > 1 (conjugate is +inf)"
            )
        if np.any(mu[~allowed] > 0):
            raise InfeasibleProbabilitiesError(f"{self.family}: positive probability on a forbidden option")
        return mu, allowed

    def _check_size(self, size: int) -> None:
        if self.n_options is not None and size != self.n_options:
            raise DimensionError(f"{self.family} options", self.n_options, size)

    @staticmethod
    def _allowed_mask(size: int, forbidden) -> np.ndarray:
        if forbidden is None:
            return np.ones(size, dtype=bool)
        forbidden = np.asarray(forbidden, dtype=bool).ravel()
        if forbidden.size != size:
            raise DimensionError("forbidden mask", size, forbidden.size)
        return ~forbidden

    @staticmethod
    def _check_interior(mu: np.ndarray, allowed: np.ndarray) -> None:
        cells = [(int(y),) for y in np.flatnonzero(allowed & (mu <= 0))]
        if cells:
            raise BoundaryError("inversion undefined at zero probability for options", cells)
        if 1.0 - mu.sum() <= 0:
            raise BoundaryError("inversion undefined when the outside option has zero probability", [(-1,)])

    def _mask(self, U: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        if allowed.all():
            return U
        out = U.copy()
        scale = np.abs(U[allowed]).max() if allowed.any() else 0.0
        out[~allowed] = -(LARGE_FACTOR * (1.0 + scale) + self._shock_spread())
        return out

    def _newton_invert(self, mu: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        """Damped Newton on probs(U) = mu started from the logit inversion."""
        idx = np.flatnonzero(allowed)
        mu0 = 1.0 - mu.sum()
        U = np.full(mu.size, np.nan)
        U[idx] = np.log(mu[idx]) - np.log(mu0)
        if idx.size == 0:
            return U

        def residual(values):
            p = self._probs(self._mask(values, allowed))
            return p[idx] - mu[idx]

        r = residual(U)
        err = np.abs(r).max()
        for iteration in range(NEWTON_MAX_ITER):
            if err <= NEWTON_TOL:
                break
            jac = self._jacobian(U, allowed)
            try:
                step = np.linalg.solve(jac, r)
            except np.linalg.LinAlgError:
                step = np.linalg.lstsq(jac, r, rcond=None)[0]
            damping = 1.0
            improved = False
            while damping > 1e-10:
                trial = U.copy()
                trial[idx] -= damping * step
                r_trial = residual(trial)
                err_trial = np.abs(r_trial).max()
                if np.isfinite(err_trial) and err_trial < err:
                    U, r, err = trial, r_trial, err_trial
                    improved = True
                    break
                damping *= 0.5
            if not improved:
                break
        if err > NEWTON_ACCEPT_TOL:
            raise ConvergenceError(f"{self.family} inversion stalled with residual {err:.3e}")
        logger.debug(f"{self.family} inversion converged, residual {err:.2e}")
        return U


def check_models(models: Sequence[ChoiceModel], count: int, n_options: int, side: str) -> None:
    """Validate a per-group list of models against market dimensions."""
    if len(models) != count:
        raise DimensionError(f"{side} models", count, len(models))
    for k, model in enumerate(models):
        if not isinstance(model, ChoiceModel):
            raise ValidationError(f"{side} model {k} is not a ChoiceModel")
        if model.n_options is not None and model.n_options != n_options:
            raise DimensionError(f"{side} model {k} options", n_options, model.n_options)

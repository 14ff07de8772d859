"""Random-coefficients logit and the pure characteristics model (temperature T = 0)."""
import logging
from typing import Optional, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from choice.base import ChoiceModel
from choice.transport import DiscretizedDistribution, TransportBackend, conj_ot
from market.errors import ConvergenceError, DimensionError, ParameterError

logger = logging.getLogger(__name__)


class RcLogitSpec(ChoiceModel):
    """
    Shocks eps = Z e + T eta over (outside, inside options): e follows a
    discretized law over d-vectors, eta is i.i.d. Gumbel.

    Z has one row per alternative with the outside option first.
    """

    family = "rc_logit"

    def __init__(self, Z, e_draws: DiscretizedDistribution, T: float = 1.0):
        Z = np.array(Z, dtype=float)
        if Z.ndim == 1:
            Z = Z[:, None]
        if not isinstance(e_draws, DiscretizedDistribution):
            raise ParameterError("e_draws must be a DiscretizedDistribution")
        if Z.shape[1] != e_draws.dim:
            raise DimensionError("Z columns", e_draws.dim, Z.shape[1])
        if Z.shape[0] < 2:
            raise DimensionError("Z rows", ">= 2 (outside plus one option)", Z.shape[0])
        T = float(T)
        if not np.isfinite(T) or T < 0:
            raise ParameterError(f"temperature T must be non-negative, got {T}")
        Z.setflags(write=False)
        self.Z = Z
        self.e_draws = e_draws
        self.T = T
        self.loadings = e_draws.support @ Z.T

    @property
    def smooth(self) -> bool:
        return self.T > 0

    @property
    def n_options(self) -> int:
        return self.Z.shape[0] - 1

    @property
    def weights(self) -> np.ndarray:
        return self.e_draws.weights

    def _values(self, U):
        return self.loadings + np.concatenate([[0.0], U])[None, :]

    def _emax(self, U):
        values = self._values(U)
        if self.T == 0:
            return float(self.weights @ values.max(axis=1))
        return float(self.weights @ (self.T * logsumexp(values / self.T, axis=1)))

    def _choice_shares(self, U) -> np.ndarray:
        """Per-draw choice probabilities, K x (1 + options)."""
        values = self._values(U)
        if self.T == 0:
            shares = np.zeros_like(values)
            shares[np.arange(values.shape[0]), values.argmax(axis=1)] = 1.0
            return shares
        return softmax(values / self.T, axis=1)

    def _probs(self, U):
        return (self.weights @ self._choice_shares(U))[1:]

    def _jacobian(self, U, allowed):
        if self.T == 0:
            return super()._jacobian(U, allowed)
        shares = self._choice_shares(self._mask(U, allowed))[:, 1:][:, allowed]
        weighted = shares * self.weights[:, None]
        return (np.diag(weighted.sum(axis=0)) - shares.T @ weighted) / self.T

    def _shock_spread(self):
        return float(self.loadings.max() - self.loadings.min())

    def _conj(self, mu, allowed):
        value, _ = conj_rc(self, mu, forbidden=~allowed)
        return -value

    def _invert(self, mu, allowed):
        _, U = conj_rc(self, mu, forbidden=~allowed)
        return U

    def induced_distribution(self) -> DiscretizedDistribution:
        """The law of Z e alone, as a discretized distribution over alternatives."""
        return DiscretizedDistribution(self.loadings, self.weights)

    def to_dict(self) -> dict:
        return {"family": self.family, "Z": self.Z.tolist(), "T": self.T, "e_draws": self.e_draws.to_dict()}

    def __repr__(self):
        return f"<RcLogitSpec options={self.n_options} d={self.Z.shape[1]} draws={self.e_draws.K} T={self.T:g}>"


def conj_rc(
    spec: RcLogitSpec,
    mu,
    forbidden=None,
    backend: Optional[TransportBackend] = None,
) -> Tuple[float, np.ndarray]:
    """
    Minimize emax(U) - mu.U over U (outside pinned at 0).

    Returns the minimum, which is -G*(mu), and the minimizing U. With T = 0 the
    problem is a semi-discrete transport problem solved exactly as an LP.
    """
    if spec.T < 0:
        raise ParameterError(f"temperature T must be non-negative, got {spec.T}")
    mu, allowed = spec._prepare_probabilities(mu, forbidden)
    if spec.T == 0:
        solution = conj_ot(spec.induced_distribution(), mu, forbidden=~allowed, backend=backend)
        return solution.value, solution.U

    spec._check_interior(mu, allowed)
    idx = np.flatnonzero(allowed)
    target = mu[idx]

    def expand(x):
        U = np.zeros(mu.size)
        U[idx] = x
        return spec._mask(U, allowed)

    def objective(x):
        return spec._emax(expand(x)) - target @ x

    def gradient(x):
        return spec._probs(expand(x))[idx] - target

    def hessian(x):
        return spec._jacobian(expand(x), allowed)

    start = np.log(target) - np.log(1.0 - mu.sum())
    res = minimize(objective, start, jac=gradient, hess=hessian, method="trust-exact", options={"gtol": 1e-11})
    residual = float(np.abs(gradient(res.x)).max())
    if residual > 1e-8:
        raise ConvergenceError(f"random-coefficients inversion stalled with residual {residual:.3e}")
    U = np.full(mu.size, np.nan)
    U[idx] = res.x
    logger.debug(f"conj_rc converged in {res.nit} iterations, residual {residual:.2e}")
    return float(res.fun), U

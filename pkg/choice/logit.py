"""Logit family: multinomial logit, two-layer nested logit and scaled (heteroskedastic) models."""
import logging
from typing import Optional, Sequence

import numpy as np
from scipy.special import logsumexp, softmax, xlogy

from choice.base import ChoiceModel, NestedForm, singleton_form
from market.errors import DimensionError, ParameterError

logger = logging.getLogger(__name__)


class LogitSpec(ChoiceModel):
    """Standard type-I extreme value shocks, i.i.d. across options."""

    family = "logit"

    def _emax(self, U: np.ndarray) -> float:
        return float(logsumexp(np.concatenate([[0.0], U])))

    def _probs(self, U: np.ndarray) -> np.ndarray:
        return softmax(np.concatenate([[0.0], U]))[1:]

    def _conj(self, mu: np.ndarray, allowed: np.ndarray) -> float:
        mu0 = max(1.0 - mu.sum(), 0.0)
        return float(xlogy(mu0, mu0) + xlogy(mu, mu).sum())

    def _invert(self, mu: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        U = np.full(mu.size, np.nan)
        U[allowed] = np.log(mu[allowed]) - np.log(1.0 - mu.sum())
        return U

    def _jacobian(self, U: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        p = self._probs(self._mask(U, allowed))[allowed]
        return np.diag(p) - np.outer(p, p)

    def nested_form(self, n_options: int) -> NestedForm:
        return singleton_form(n_options)

    def to_dict(self) -> dict:
        return {"family": self.family}

    def __repr__(self):
        return "<LogitSpec>"


class NestedLogitSpec(ChoiceModel):
    """
    Two-layer nested logit over a partition of the inside options.

    The outside option sits alone in its own nest with lambda = 1.
    """

    family = "nested_logit"

    def __init__(self, nests: Sequence[Sequence[int]], lambdas: Sequence[float]):
        nests = tuple(np.array(sorted(int(y) for y in nest), dtype=int) for nest in nests)
        lambdas = np.array(lambdas, dtype=float).ravel()
        if len(nests) != lambdas.size:
            raise DimensionError("nest lambdas", len(nests), lambdas.size)
        if any(nest.size == 0 for nest in nests):
            raise ParameterError("nests must not be empty")
        members = np.concatenate(nests)
        size = members.size
        if not np.array_equal(np.sort(members), np.arange(size)):
            raise ParameterError(f"nests must partition the options 0..{size - 1}, got {sorted(members.tolist())}")
        if not np.all((lambdas > 0) & (lambdas <= 1)):
            raise ParameterError(f"nest parameters must lie in (0, 1], got {lambdas.tolist()}")
        lambdas.setflags(write=False)
        self.nests = nests
        self.lambdas = lambdas
        self._size = size
        self._index = np.empty(size, dtype=int)
        for k, nest in enumerate(nests):
            self._index[nest] = k

    @property
    def n_options(self) -> int:
        return self._size

    def _inclusive_values(self, U: np.ndarray) -> np.ndarray:
        return np.array([lam * logsumexp(U[nest] / lam) for nest, lam in zip(self.nests, self.lambdas)])

    def _emax(self, U: np.ndarray) -> float:
        return float(logsumexp(np.concatenate([[0.0], self._inclusive_values(U)])))

    def _probs(self, U: np.ndarray) -> np.ndarray:
        inclusive = self._inclusive_values(U)
        nest_shares = softmax(np.concatenate([[0.0], inclusive]))[1:]
        p = np.empty(self._size)
        for k, (nest, lam) in enumerate(zip(self.nests, self.lambdas)):
            p[nest] = nest_shares[k] * softmax(U[nest] / lam)
        return p

    def nest_totals(self, mu: np.ndarray) -> np.ndarray:
        """Probability mass of each nest."""
        return np.array([mu[nest].sum() for nest in self.nests])

    def _conj(self, mu: np.ndarray, allowed: np.ndarray) -> float:
        mu0 = max(1.0 - mu.sum(), 0.0)
        totals = self.nest_totals(mu)
        value = xlogy(mu0, mu0)
        for k, (nest, lam) in enumerate(zip(self.nests, self.lambdas)):
            value += lam * xlogy(mu[nest], mu[nest]).sum() + (1.0 - lam) * xlogy(totals[k], totals[k])
        return float(value)

    def _invert(self, mu: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        log_mu0 = np.log(1.0 - mu.sum())
        totals = self.nest_totals(mu)
        lam = self.lambdas[self._index]
        U = np.full(mu.size, np.nan)
        with np.errstate(divide="ignore", invalid="ignore"):
            full = lam * (np.log(mu) - log_mu0) + (1.0 - lam) * (np.log(totals[self._index]) - log_mu0)
        U[allowed] = full[allowed]
        return U

    def nested_form(self, n_options: int) -> NestedForm:
        return NestedForm(1.0, self.nests, self.lambdas)

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "nests": [nest.tolist() for nest in self.nests],
            "lambdas": self.lambdas.tolist(),
        }

    def __repr__(self):
        return f"<NestedLogitSpec nests={len(self.nests)} lambdas={self.lambdas.tolist()}>"


class ScaledModel(ChoiceModel):
    """Base model with shocks multiplied by a positive scale sigma."""

    family = "scaled"

    def __init__(self, base: ChoiceModel, scale: float):
        if not isinstance(base, ChoiceModel):
            raise ParameterError("scaled model needs a ChoiceModel base")
        scale = float(scale)
        if not np.isfinite(scale) or scale <= 0:
            raise ParameterError(f"scale must be positive, got {scale}")
        self.base = base
        self.scale = scale

    @property
    def n_options(self) -> Optional[int]:
        return self.base.n_options

    def _emax(self, U: np.ndarray) -> float:
        return self.scale * self.base._emax(U / self.scale)

    def _probs(self, U: np.ndarray) -> np.ndarray:
        return self.base._probs(U / self.scale)

    def _conj(self, mu: np.ndarray, allowed: np.ndarray) -> float:
        return self.scale * self.base._conj(mu, allowed)

    def _invert(self, mu: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        return self.scale * self.base._invert(mu, allowed)

    def _jacobian(self, U: np.ndarray, allowed: np.ndarray) -> np.ndarray:
        return self.base._jacobian(U / self.scale, allowed) / self.scale

    def _shock_spread(self) -> float:
        return self.scale * self.base._shock_spread()

    def nested_form(self, n_options: int) -> Optional[NestedForm]:
        form = self.base.nested_form(n_options)
        return None if form is None else form.rescaled(self.scale)

    def to_dict(self) -> dict:
        return {"family": self.family, "scale": self.scale, "base": self.base.to_dict()}

    def __repr__(self):
        return f"<ScaledModel scale={self.scale:g} base={self.base!r}>"


def heteroskedastic_logit(scale: float) -> ChoiceModel:
    """Logit with shock scale sigma; plain logit when sigma is 1."""
    return LogitSpec() if scale == 1.0 else ScaledModel(LogitSpec(), scale)


def is_logit(model: ChoiceModel) -> bool:
    return type(model) is LogitSpec


def logit_scale(model: ChoiceModel) -> Optional[float]:
    """Scale of a (possibly scaled) plain logit model, None for other families."""
    if is_logit(model):
        return 1.0
    if isinstance(model, ScaledModel):
        inner = logit_scale(model.base)
        return None if inner is None else inner * model.scale
    return None

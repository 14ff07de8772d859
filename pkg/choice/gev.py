"""Generalized extreme value models built from an aggregation (generator) function."""
import logging
from abc import ABC, abstractmethod
from typing import Optional, Sequence

import numpy as np

from choice.base import ChoiceModel, NestedForm, singleton_form
from market.errors import DimensionError, ParameterError, UnsupportedModelError

logger = logging.getLogger(__name__)

EULER_GAMMA = 0.5772156649015329


class Generator(ABC):
    """
    Positive, 1-homogeneous aggregation function g over the outside option and
    the inside options (t[0] is the outside option).

    Implementations supply the value and the first derivatives; GevSpec only
    ever needs the Euler terms t_y * dg/dt_y, which sum to g.
    """

    kind = "custom"

    @abstractmethod
    def value(self, t: np.ndarray) -> float:
        """g(t)."""

    @abstractmethod
    def gradient(self, t: np.ndarray) -> np.ndarray:
        """dg/dt."""

    def weighted_gradient(self, t: np.ndarray) -> np.ndarray:
        """Euler terms t_y * dg/dt_y."""
        return t * self.gradient(t)

    def nested_form(self, n_options: int) -> Optional[NestedForm]:
        return None

    def to_dict(self) -> dict:
        raise UnsupportedModelError(f"generator '{type(self).__name__}' cannot be serialized")


class SumGenerator(Generator):
    """g(t) = sum t; yields the multinomial logit."""

    kind = "sum"

    def value(self, t):
        return float(t.sum())

    def gradient(self, t):
        return np.ones_like(t)

    def weighted_gradient(self, t):
        return t.copy()

    def nested_form(self, n_options):
        return singleton_form(n_options)

    def to_dict(self):
        return {"kind": self.kind}


class NestedGenerator(Generator):
    """g(t) = t_0 + sum_n (sum_{y in n} t_y^(1/lambda_n))^lambda_n; inside options indexed from 0."""

    kind = "nested"

    def __init__(self, nests: Sequence[Sequence[int]], lambdas: Sequence[float]):
        self.nests = tuple(np.array(sorted(int(y) for y in nest), dtype=int) for nest in nests)
        self.lambdas = np.array(lambdas, dtype=float).ravel()
        if len(self.nests) != self.lambdas.size:
            raise DimensionError("nest lambdas", len(self.nests), self.lambdas.size)
        if not np.all((self.lambdas > 0) & (self.lambdas <= 1)):
            raise ParameterError(f"nest parameters must lie in (0, 1], got {self.lambdas.tolist()}")

    def _nest_sums(self, t):
        inside = t[1:]
        return [np.sum(inside[nest] ** (1.0 / lam)) for nest, lam in zip(self.nests, self.lambdas)]

    def value(self, t):
        return float(t[0] + sum(s ** lam for s, lam in zip(self._nest_sums(t), self.lambdas)))

    def gradient(self, t):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.weighted_gradient(t) / t
        return np.where(t > 0, out, 0.0)

    def weighted_gradient(self, t):
        out = np.empty_like(t)
        out[0] = t[0]
        inside = t[1:]
        for nest, lam, s in zip(self.nests, self.lambdas, self._nest_sums(t)):
            if s > 0:
                out[1 + nest] = s ** (lam - 1.0) * inside[nest] ** (1.0 / lam)
            else:
                out[1 + nest] = 0.0
        return out

    def nested_form(self, n_options):
        return NestedForm(1.0, self.nests, self.lambdas)

    def to_dict(self):
        return {
            "kind": self.kind,
            "nests": [nest.tolist() for nest in self.nests],
            "lambdas": self.lambdas.tolist(),
        }


class FcMnlGenerator(Generator):
    """
    Flexible-coefficient multinomial logit aggregator
    g(t) = sum_{y,y'} b_{yy'} ((t_y^(1/rho) + t_y'^(1/rho)) / 2)^rho with rho = tau * sigma.
    """

    kind = "fcmnl"

    def __init__(self, b, sigma: float, tau: float):
        b = np.array(b, dtype=float)
        if b.ndim != 2 or b.shape[0] != b.shape[1]:
            raise DimensionError("b", "square matrix", b.shape)
        if np.any(b < 0) or not np.allclose(b, b.T) or not np.allclose(np.diag(b), 1.0):
            raise ParameterError("b must be non-negative, symmetric, with unit diagonal")
        if not 0 < sigma < 1:
            raise ParameterError(f"sigma must lie in (0, 1), got {sigma}")
        if not tau > 1 or tau * sigma > 1 + 1e-12:
            raise ParameterError(f"tau must exceed 1 with tau * sigma <= 1, got tau={tau}, sigma={sigma}")
        self.b = b
        self.sigma = float(sigma)
        self.tau = float(tau)
        self.rho = min(self.tau * self.sigma, 1.0)

    def _pairs(self, t):
        a = t ** (1.0 / self.rho)
        return a, 0.5 * (a[:, None] + a[None, :])

    def value(self, t):
        _, pairs = self._pairs(t)
        return float(np.sum(self.b * pairs ** self.rho))

    def gradient(self, t):
        with np.errstate(divide="ignore", invalid="ignore"):
            out = self.weighted_gradient(t) / t
        return np.where(t > 0, out, 0.0)

    def weighted_gradient(self, t):
        a, pairs = self._pairs(t)
        with np.errstate(divide="ignore", invalid="ignore"):
            powered = np.where(pairs > 0, pairs ** (self.rho - 1.0), 0.0)
        return a * np.sum(self.b * powered, axis=1)

    def to_dict(self):
        return {"kind": self.kind, "b": self.b.tolist(), "sigma": self.sigma, "tau": self.tau}


class GevSpec(ChoiceModel):
    """
    GEV model G(U) = log g(e^w) with w = (0, U).

    Euler's constant is left out of every emax value; it shifts all groups
    alike and plays no role in matching.
    """

    family = "gev"

    def __init__(self, generator: Generator, n_options: int):
        if not isinstance(generator, Generator):
            raise ParameterError("GEV model needs a Generator")
        self.generator = generator
        self._size = int(n_options)
        if self._size < 1:
            raise ParameterError("GEV model needs at least one inside option")

    @property
    def n_options(self) -> int:
        return self._size

    def _scaled_exponentials(self, U: np.ndarray):
        w = np.concatenate([[0.0], U])
        shift = w.max()
        return shift, np.exp(w - shift)

    def _emax(self, U: np.ndarray) -> float:
        shift, t = self._scaled_exponentials(U)
        return float(shift + np.log(self.generator.value(t)))

    def _probs(self, U: np.ndarray) -> np.ndarray:
        _, t = self._scaled_exponentials(U)
        return self.generator.weighted_gradient(t)[1:] / self.generator.value(t)

    def nested_form(self, n_options: int) -> Optional[NestedForm]:
        return self.generator.nested_form(n_options)

    def to_dict(self) -> dict:
        return {"family": self.family, "n_options": self._size, "generator": self.generator.to_dict()}

    def __repr__(self):
        return f"<GevSpec {self.generator.kind} options={self._size}>"


class FcMnlSpec(GevSpec):
    """
    FC-MNL over the outside option and the inside options; b is indexed with
    the outside option first. b = I is the multinomial logit.
    """

    family = "fcmnl"

    def __init__(self, b, sigma: float, tau: float):
        generator = FcMnlGenerator(b, sigma, tau)
        super().__init__(generator, generator.b.shape[0] - 1)

    @property
    def b(self) -> np.ndarray:
        return self.generator.b

    def nested_form(self, n_options: int) -> Optional[NestedForm]:
        if np.allclose(self.generator.b, np.eye(self._size + 1)):
            return singleton_form(n_options)
        return None

    def to_dict(self) -> dict:
        return {
            "family": self.family,
            "b": self.generator.b.tolist(),
            "sigma": self.generator.sigma,
            "tau": self.generator.tau,
        }

    def __repr__(self):
        return f"<FcMnlSpec options={self._size} sigma={self.generator.sigma:g} tau={self.generator.tau:g}>"


def generator_from_dict(doc: dict) -> Generator:
    kind = doc.get("kind")
    if kind == "sum":
        return SumGenerator()
    if kind == "nested":
        return NestedGenerator(doc["nests"], doc["lambdas"])
    if kind == "fcmnl":
        return FcMnlGenerator(doc["b"], doc["sigma"], doc["tau"])
    raise UnsupportedModelError(f"unknown GEV generator kind '{kind}'")

"""Parametric model specifications: basis surplus plus a map from theta to choice models."""
import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from choice.base import ChoiceModel
from choice.logit import LogitSpec, heteroskedastic_logit
from choice.registry import models_from_document
from estimation.basis import BasisSet, basis_from_dict, scale_labels
from market.errors import DimensionError, ValidationError
from market.models import SurplusMatrix

logger = logging.getLogger(__name__)

ModelMap = Callable[[np.ndarray], Tuple[List[ChoiceModel], List[ChoiceModel]]]


@dataclass
class ParamModelSpec:
    """
    Phi^lambda = sum_k lambda_k phi^k with heterogeneity (men, women) = dist_param_map(theta).

    normalization names the pinned scale; heteroskedastic maps carry no constant
    term for men.
    """

    basis: BasisSet
    dist_param_map: ModelMap
    theta_names: Tuple[str, ...] = ()
    theta_ref: Optional[np.ndarray] = None
    normalization: str = "logit scale of men pinned at 1 for constant labels"
    forbidden: Optional[np.ndarray] = None
    name: str = "custom"
    to_doc: Optional[dict] = field(default=None, repr=False)

    def __post_init__(self):
        if self.theta_ref is None:
            self.theta_ref = np.zeros(len(self.theta_names))
        self.theta_ref = np.asarray(self.theta_ref, dtype=float).ravel()
        if self.theta_ref.size != len(self.theta_names):
            raise DimensionError("theta_ref", len(self.theta_names), self.theta_ref.size)
        if self.forbidden is not None and np.shape(self.forbidden) != self.basis.shape:
            raise DimensionError("forbidden", self.basis.shape, np.shape(self.forbidden))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.basis.shape

    @property
    def K(self) -> int:
        return self.basis.K

    @property
    def dim_theta(self) -> int:
        return len(self.theta_names)

    @property
    def parameter_names(self) -> Tuple[str, ...]:
        return tuple(self.basis.names) + tuple(self.theta_names)

    def models(self, theta=None) -> Tuple[List[ChoiceModel], List[ChoiceModel]]:
        theta = self.theta_ref if theta is None else np.asarray(theta, dtype=float).ravel()
        if theta.size != self.dim_theta:
            raise DimensionError("theta", self.dim_theta, theta.size)
        return self.dist_param_map(theta)

    def phi(self, lam) -> SurplusMatrix:
        return SurplusMatrix(self.basis.surplus(lam), self.forbidden)

    def split(self, params) -> Tuple[np.ndarray, np.ndarray]:
        params = np.asarray(params, dtype=float).ravel()
        return params[: self.K], params[self.K:]


def fixed_models_spec(basis: BasisSet, men: Sequence[ChoiceModel], women: Sequence[ChoiceModel], name="fixed"):
    """Parameter-free heterogeneity."""
    men, women = list(men), list(women)
    return ParamModelSpec(basis, lambda theta: (men, women), name=name)


def logit_spec(basis: BasisSet) -> ParamModelSpec:
    """Choo-Siow homoskedastic logit on both sides."""
    nx, ny = basis.shape
    model = LogitSpec()
    return ParamModelSpec(basis, lambda theta: ([model] * nx, [model] * ny), name="logit")


def heteroskedastic_spec(
    basis: BasisSet,
    labels_x: Sequence[float],
    labels_y: Sequence[float],
    degree_x: int = 1,
    degree_y: int = 0,
) -> ParamModelSpec:
    """
    sigma_x = exp(sigma_1 x + ... + sigma_p x^p) with no constant, and
    tau_y = exp(tau_0 + tau_1 y + ... + tau_q y^q), labels scaled to [-1, 1].
    """
    xs = scale_labels(labels_x)
    ys = scale_labels(labels_y)
    if len(xs) != basis.shape[0] or len(ys) != basis.shape[1]:
        raise DimensionError("labels", basis.shape, (len(xs), len(ys)))
    powers_x = np.vstack([xs ** p for p in range(1, degree_x + 1)]) if degree_x > 0 else np.zeros((0, xs.size))
    powers_y = np.vstack([ys ** q for q in range(degree_y + 1)])
    names = tuple(f"sigma_{p}" for p in range(1, degree_x + 1)) + tuple(f"tau_{q}" for q in range(degree_y + 1))

    def build(theta):
        sigma = np.exp(theta[:degree_x] @ powers_x) if degree_x > 0 else np.ones(xs.size)
        tau = np.exp(theta[degree_x:] @ powers_y)
        return [heteroskedastic_logit(s) for s in sigma], [heteroskedastic_logit(t) for t in tau]

    return ParamModelSpec(basis, build, names, name="heteroskedastic")


def gender_spec(basis: BasisSet) -> ParamModelSpec:
    """Men logit with unit scale, women logit with scale tau = exp(tau_0)."""
    nx, ny = basis.shape

    def build(theta):
        return [LogitSpec()] * nx, [heteroskedastic_logit(float(np.exp(theta[0])))] * ny

    return ParamModelSpec(basis, build, ("tau_0",), name="gender")


def spec_from_dict(doc: dict, shape: Tuple[int, int], labels_x=None, labels_y=None) -> ParamModelSpec:
    """
    Build a specification from JSON:
    {"basis": {...}, "heterogeneity": {"kind": "logit" | "heteroskedastic" | "gender" | "fixed", ...},
     "theta": [...]}.
    """
    if not isinstance(doc, dict):
        raise ValidationError("estimation spec must be a JSON object")
    basis = basis_from_dict(doc.get("basis", {}), shape, labels_x, labels_y)
    hetero = doc.get("heterogeneity", {"kind": "logit"})
    kind = hetero.get("kind", "logit")
    if kind == "logit":
        spec = logit_spec(basis)
    elif kind == "heteroskedastic":
        lx = np.arange(shape[0]) if labels_x is None else labels_x
        ly = np.arange(shape[1]) if labels_y is None else labels_y
        spec = heteroskedastic_spec(basis, lx, ly, int(hetero.get("degree_x", 1)), int(hetero.get("degree_y", 0)))
    elif kind == "gender":
        spec = gender_spec(basis)
    elif kind == "fixed":
        men = models_from_document(hetero["men"], shape[0])
        women = models_from_document(hetero["women"], shape[1])
        spec = fixed_models_spec(basis, men, women)
    else:
        raise ValidationError(f"unknown heterogeneity kind '{kind}'")
    if "theta" in doc:
        theta = np.asarray(doc["theta"], dtype=float).ravel()
        if theta.size != spec.dim_theta:
            raise DimensionError("theta", spec.dim_theta, theta.size)
        spec.theta_ref = theta
    if "forbidden" in doc:
        forbidden = np.zeros(shape, dtype=bool)
        for x, y in doc["forbidden"]:
            forbidden[int(x), int(y)] = True
        spec.forbidden = forbidden
    spec.to_doc = doc
    logger.debug(f"Built {spec.name} spec with {spec.K} basis terms and {spec.dim_theta} distribution parameters")
    return spec

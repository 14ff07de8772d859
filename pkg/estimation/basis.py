"""Basis surplus matrices for the semilinear family Phi = sum_k lambda_k phi^k."""
import itertools
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from market.errors import DimensionError, ValidationError

logger = logging.getLogger(__name__)


def scale_labels(labels) -> np.ndarray:
    """Map group labels affinely to [-1, 1]; constant labels map to 0."""
    labels = np.asarray(labels, dtype=float)
    lo, hi = labels.min(), labels.max()
    if hi == lo:
        return np.zeros_like(labels)
    return 2.0 * (labels - lo) / (hi - lo) - 1.0


@dataclass(frozen=True, eq=False)
class BasisSet:
    """K linearly independent |X| x |Y| basis matrices."""

    bases: np.ndarray
    names: Optional[Tuple[str, ...]] = None

    def __post_init__(self):
        bases = np.array(self.bases, dtype=float)
        if bases.ndim == 2:
            bases = bases[None]
        if bases.ndim != 3 or bases.shape[0] < 1:
            raise DimensionError("bases", "K x |X| x |Y| array with K >= 1", bases.shape)
        if not np.all(np.isfinite(bases)):
            raise ValidationError("basis matrices must be finite")
        flat = bases.reshape(bases.shape[0], -1)
        rank = np.linalg.matrix_rank(flat)
        if rank < bases.shape[0]:
            raise ValidationError(f"basis is rank deficient: rank {rank} for {bases.shape[0]} matrices")
        bases.setflags(write=False)
        object.__setattr__(self, "bases", bases)
        names = self.names
        if names is None:
            names = tuple(f"lambda_{k}" for k in range(bases.shape[0]))
        elif len(names) != bases.shape[0]:
            raise DimensionError("basis names", bases.shape[0], len(names))
        object.__setattr__(self, "names", tuple(names))

    @property
    def K(self) -> int:
        return self.bases.shape[0]

    @property
    def shape(self) -> Tuple[int, int]:
        return self.bases.shape[1], self.bases.shape[2]

    @property
    def matrix(self) -> np.ndarray:
        """Cells x K design matrix."""
        return self.bases.reshape(self.K, -1).T

    @property
    def saturated(self) -> bool:
        """True when the basis spans every surplus matrix."""
        return self.K == self.bases.shape[1] * self.bases.shape[2]

    def surplus(self, lam) -> np.ndarray:
        lam = np.asarray(lam, dtype=float).ravel()
        if lam.size != self.K:
            raise DimensionError("lambda", self.K, lam.size)
        return np.tensordot(lam, self.bases, axes=1)

    def comoments(self, mu) -> np.ndarray:
        """C^k(mu) = sum_xy mu_xy phi^k_xy."""
        return np.tensordot(self.bases, np.asarray(mu, dtype=float), axes=([1, 2], [0, 1]))


def indicator_basis(shape: Tuple[int, int]) -> BasisSet:
    """One basis matrix per cell (the saturated model)."""
    nx, ny = shape
    bases = np.eye(nx * ny).reshape(nx * ny, nx, ny)
    names = tuple(f"cell_{x}_{y}" for x in range(nx) for y in range(ny))
    return BasisSet(bases, names)


def constant_basis(shape: Tuple[int, int]) -> BasisSet:
    return BasisSet(np.ones((1,) + tuple(shape)), ("constant",))


def polynomial_basis(
    labels_x: Sequence[float], labels_y: Sequence[float], degree_x: int, degree_y: int
) -> BasisSet:
    """
    Monomials x^p y^q for p <= degree_x, q <= degree_y in labels scaled to [-1, 1].
    """
    if degree_x < 0 or degree_y < 0:
        raise ValidationError("polynomial degrees must be non-negative")
    xs = scale_labels(labels_x)
    ys = scale_labels(labels_y)
    if degree_x >= xs.size or degree_y >= ys.size:
        raise ValidationError(
            f"degrees ({degree_x}, {degree_y}) too high for {xs.size} x {ys.size} groups"
        )
    bases, names = [], []
    for p, q in itertools.product(range(degree_x + 1), range(degree_y + 1)):
        bases.append(np.outer(xs ** p, ys ** q))
        names.append(f"x{p}_y{q}")
    return BasisSet(np.array(bases), tuple(names))


def basis_from_dict(doc: dict, shape: Tuple[int, int], labels_x=None, labels_y=None) -> BasisSet:
    kind = doc.get("kind", "indicator")
    if kind == "indicator":
        return indicator_basis(shape)
    if kind == "constant":
        return constant_basis(shape)
    if kind == "polynomial":
        lx = np.arange(shape[0]) if labels_x is None else labels_x
        ly = np.arange(shape[1]) if labels_y is None else labels_y
        return polynomial_basis(lx, ly, int(doc.get("degree_x", 1)), int(doc.get("degree_y", 1)))
    if kind == "explicit":
        bases = np.array(doc["bases"], dtype=float)
        if bases.shape[1:] != tuple(shape):
            raise DimensionError("explicit bases", tuple(shape), bases.shape[1:])
        return BasisSet(bases, tuple(doc["names"]) if "names" in doc else None)
    raise ValidationError(f"unknown basis kind '{kind}'")

"""Domain types for matching markets."""
from dataclasses import dataclass, field
from typing import Optional, Sequence, Tuple

import numpy as np

from market.errors import DimensionError, ValidationError


def _frozen(values, name: str, ndim: int) -> np.ndarray:
    """Copy to a read-only float array of the given rank."""
    arr = np.array(values, dtype=float)
    if arr.ndim != ndim:
        raise DimensionError(name, f"{ndim}-d array", f"{arr.ndim}-d array")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Margins:
    """Masses of each group of men (n) and women (m)."""

    n: np.ndarray
    m: np.ndarray
    labels_x: Optional[Tuple] = None
    labels_y: Optional[Tuple] = None

    def __post_init__(self):
        n = _frozen(self.n, "n", 1)
        m = _frozen(self.m, "m", 1)
        for name, arr in (("n", n), ("m", m)):
            if arr.size == 0:
                raise ValidationError(f"margin vector {name} is empty")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                bad = [int(i) for i in np.flatnonzero(~np.isfinite(arr) | (arr < 0))]
                raise ValidationError(f"margin vector {name} has negative or non-finite entries at {bad}")
            if not np.any(arr > 0):
                raise ValidationError(f"margin vector {name} has no positive entry")
        object.__setattr__(self, "n", n)
        object.__setattr__(self, "m", m)
        for attr, size in (("labels_x", n.size), ("labels_y", m.size)):
            labels = getattr(self, attr)
            if labels is not None:
                labels = tuple(labels)
                if len(labels) != size:
                    raise DimensionError(attr, size, len(labels))
                object.__setattr__(self, attr, labels)

    @property
    def nx(self) -> int:
        return self.n.size

    @property
    def ny(self) -> int:
        return self.m.size

    @property
    def shape(self) -> Tuple[int, int]:
        return self.nx, self.ny

    @property
    def total(self) -> float:
        """Total mass of individuals."""
        return float(self.n.sum() + self.m.sum())

    def scaled(self, c: float) -> "Margins":
        return Margins(self.n * c, self.m * c, self.labels_x, self.labels_y)

    def normalized(self) -> "Margins":
        """Margins rescaled so that the total mass of individuals is 1."""
        return self.scaled(1.0 / self.total)


@dataclass(frozen=True, eq=False)
class SurplusMatrix:
    """Systematic joint surplus with an explicit mask of forbidden cells."""

    phi: np.ndarray
    forbidden: Optional[np.ndarray] = None

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 2:
            raise DimensionError("phi", "2-d array", f"{phi.ndim}-d array")
        if self.forbidden is None:
            mask = np.isneginf(phi)
        else:
            mask = np.array(self.forbidden, dtype=bool)
            if mask.shape != phi.shape:
                raise DimensionError("forbidden", phi.shape, mask.shape)
            mask = mask | np.isneginf(phi)
        if not np.all(np.isfinite(phi[~mask])):
            raise ValidationError("surplus has non-finite entries outside the forbidden mask")
        phi = np.where(mask, np.nan, phi)
        phi.setflags(write=False)
        mask.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "forbidden", mask)

    @classmethod
    def from_array(cls, phi) -> "SurplusMatrix":
        """Build from an array in which -inf marks forbidden cells."""
        return cls(np.asarray(phi, dtype=float))

    @property
    def shape(self) -> Tuple[int, int]:
        return self.phi.shape

    @property
    def allowed(self) -> np.ndarray:
        return ~self.forbidden

    @property
    def has_forbidden(self) -> bool:
        return bool(self.forbidden.any())

    def filled(self, value: float = 0.0) -> np.ndarray:
        """Surplus values with forbidden cells replaced by a finite value."""
        return np.where(self.forbidden, value, self.phi)

    def with_values(self, phi) -> "SurplusMatrix":
        return SurplusMatrix(phi, self.forbidden)


@dataclass(frozen=True, eq=False)
class Matching:
    """Matched masses plus single men and single women."""

    mu: np.ndarray
    mu_x0: np.ndarray
    mu_0y: np.ndarray

    def __post_init__(self):
        mu = _frozen(self.mu, "mu", 2)
        mu_x0 = _frozen(self.mu_x0, "mu_x0", 1)
        mu_0y = _frozen(self.mu_0y, "mu_0y", 1)
        if mu_x0.size != mu.shape[0]:
            raise DimensionError("mu_x0", mu.shape[0], mu_x0.size)
        if mu_0y.size != mu.shape[1]:
            raise DimensionError("mu_0y", mu.shape[1], mu_0y.size)
        for name, arr in (("mu", mu), ("mu_x0", mu_x0), ("mu_0y", mu_0y)):
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValidationError(f"matching component {name} has negative or non-finite entries")
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "mu_x0", mu_x0)
        object.__setattr__(self, "mu_0y", mu_0y)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.mu.shape

    @property
    def n(self) -> np.ndarray:
        """Men margins implied by the matching."""
        return self.mu_x0 + self.mu.sum(axis=1)

    @property
    def m(self) -> np.ndarray:
        """Women margins implied by the matching."""
        return self.mu_0y + self.mu.sum(axis=0)

    def margins(self) -> Margins:
        return Margins(self.n, self.m)

    @property
    def total_households(self) -> float:
        return float(self.mu.sum() + self.mu_x0.sum() + self.mu_0y.sum())

    def scaled(self, c: float) -> "Matching":
        return Matching(self.mu * c, self.mu_x0 * c, self.mu_0y * c)

    def cells(self) -> np.ndarray:
        """All household cells, x-major couples first, then single men, then single women."""
        return np.concatenate([self.mu.ravel(), self.mu_x0, self.mu_0y])


@dataclass(frozen=True, eq=False)
class SystematicUtilities:
    """Systematic utilities U (men) and V (women); U + V = Phi at a solution."""

    U: np.ndarray
    V: np.ndarray

    def __post_init__(self):
        U = _frozen(self.U, "U", 2)
        V = _frozen(self.V, "V", 2)
        if U.shape != V.shape:
            raise DimensionError("V", U.shape, V.shape)
        object.__setattr__(self, "U", U)
        object.__setattr__(self, "V", V)

    @property
    def joint(self) -> np.ndarray:
        return self.U + self.V


@dataclass(frozen=True, eq=False)
class GroupUtilities:
    """Average utilities u_x of men and v_y of women."""

    u: np.ndarray
    v: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen(self.u, "u", 1))
        object.__setattr__(self, "v", _frozen(self.v, "v", 1))

    def total(self, r: Margins) -> float:
        """Dual value sum_x n_x u_x + sum_y m_y v_y (groups of zero mass are skipped)."""
        return float(
            np.dot(r.n[r.n > 0], self.u[r.n > 0]) + np.dot(r.m[r.m > 0], self.v[r.m > 0])
        )


@dataclass(frozen=True, eq=False)
class SampleCounts:
    """Observed household counts: couples, single men, single women."""

    muhat: np.ndarray
    muhat_x0: np.ndarray
    muhat_0y: np.ndarray
    labels_x: Optional[Sequence] = field(default=None, compare=False)
    labels_y: Optional[Sequence] = field(default=None, compare=False)

    def __post_init__(self):
        arrays = {}
        for name, ndim in (("muhat", 2), ("muhat_x0", 1), ("muhat_0y", 1)):
            raw = np.asarray(getattr(self, name))
            if raw.ndim != ndim:
                raise DimensionError(name, f"{ndim}-d array", f"{raw.ndim}-d array")
            if np.any(raw < 0) or not np.all(np.equal(np.mod(raw, 1), 0)):
                raise ValidationError(f"counts {name} must be non-negative integers")
            arr = raw.astype(np.int64)
            arr.setflags(write=False)
            arrays[name] = arr
        if arrays["muhat_x0"].size != arrays["muhat"].shape[0]:
            raise DimensionError("muhat_x0", arrays["muhat"].shape[0], arrays["muhat_x0"].size)
        if arrays["muhat_0y"].size != arrays["muhat"].shape[1]:
            raise DimensionError("muhat_0y", arrays["muhat"].shape[1], arrays["muhat_0y"].size)
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)

    @property
    def shape(self) -> Tuple[int, int]:
        return self.muhat.shape

    @property
    def H(self) -> int:
        """Total number of households."""
        return int(self.muhat.sum() + self.muhat_x0.sum() + self.muhat_0y.sum())

    @property
    def individuals(self) -> int:
        """Total number of individuals S = sum N_x + sum M_y."""
        return int(2 * self.muhat.sum() + self.muhat_x0.sum() + self.muhat_0y.sum())

    def cells(self) -> np.ndarray:
        return np.concatenate([self.muhat.ravel(), self.muhat_x0, self.muhat_0y])

    @classmethod
    def from_cells(cls, cells, shape: Tuple[int, int], labels_x=None, labels_y=None) -> "SampleCounts":
        nx, ny = shape
        cells = np.asarray(cells)
        return cls(
            cells[: nx * ny].reshape(nx, ny),
            cells[nx * ny: nx * ny + nx],
            cells[nx * ny + nx:],
            labels_x,
            labels_y,
        )

    def margins(self) -> Margins:
        """Empirical margins r-hat, normalized by the number of individuals."""
        s = self.individuals
        if s == 0:
            raise ValidationError("sample has no individuals")
        n = (self.muhat_x0 + self.muhat.sum(axis=1)) / s
        m = (self.muhat_0y + self.muhat.sum(axis=0)) / s
        return Margins(n, m, self.labels_x, self.labels_y)

    def matching(self) -> Matching:
        """Empirical frequencies, on the same scale as margins()."""
        s = self.individuals
        if s == 0:
            raise ValidationError("sample has no individuals")
        return Matching(self.muhat / s, self.muhat_x0 / s, self.muhat_0y / s)

"""Discretized error laws and the optimal-transport form of the conjugate Emax."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np
import pandas as pd
from scipy import sparse
from scipy.optimize import linprog
from scipy.special import logsumexp
from scipy.stats import qmc

from choice.base import ChoiceModel
from choice.gev import EULER_GAMMA
from config import config
from market.errors import BackendError, DimensionError, ParameterError, ParseError, ValidationError

logger = logging.getLogger(__name__)


@dataclass
class TransportPlan:
    """Solution of max <pi, S> over couplings of (a, b), with dual potentials f + g >= S."""

    value: float
    plan: np.ndarray
    f: np.ndarray
    g: np.ndarray
    gap: float = 0.0
    unique: bool = True


class TransportBackend:
    """Pluggable solver for the dense assignment problem between two discrete laws."""

    name = "abstract"

    def solve(self, surplus: np.ndarray, a: np.ndarray, b: np.ndarray) -> TransportPlan:
        raise NotImplementedError


class SimplexBackend(TransportBackend):
    """Exact LP through the HiGHS dual simplex."""

    name = "simplex"

    def solve(self, surplus, a, b):
        K, J = surplus.shape
        rows = sparse.kron(sparse.identity(K), np.ones((1, J)))
        cols = sparse.kron(np.ones((1, K)), sparse.identity(J))
        A_eq = sparse.vstack([rows, cols]).tocsr()
        b_eq = np.concatenate([a, b])
        res = linprog(-surplus.ravel(), A_eq=A_eq, b_eq=b_eq, bounds=(0, None), method="highs-ds")
        if res.status != 0:
            raise BackendError(f"transport LP failed with status {res.status}: {res.message}")
        plan = res.x.reshape(K, J)
        # marginals are d(-value)/d(b_eq)
        duals = -res.eqlin.marginals
        positive = int(np.count_nonzero(plan > 1e-12))
        unique = positive >= K + J - 1
        if not unique:
            logger.debug(f"Degenerate transport basis: {positive} positive entries for {K}x{J}")
        return TransportPlan(float(-res.fun), plan, duals[:K], duals[K:], 0.0, unique)


class SinkhornBackend(TransportBackend):
    """
    Entropic approximation in the log domain with an annealed regularization.

    The final column potential is made dual-feasible by a c-transform, so the
    reported value is an upper bound and gap bounds its error.
    """

    name = "sinkhorn"

    def __init__(self, eta_final: float = 1e-3, decay: float = 0.5, inner_iter: int = 200, tol: float = 1e-9):
        if eta_final <= 0 or not 0 < decay < 1:
            raise ParameterError("sinkhorn needs eta_final > 0 and decay in (0, 1)")
        self.eta_final = eta_final
        self.decay = decay
        self.inner_iter = inner_iter
        self.tol = tol

    def solve(self, surplus, a, b):
        live_rows = a > 0
        live_cols = b > 0
        S = surplus[np.ix_(live_rows, live_cols)]
        log_a = np.log(a[live_rows])
        log_b = np.log(b[live_cols])
        scale = max(float(S.max() - S.min()), 1.0)
        eta = scale
        f = np.zeros(S.shape[0])
        g = np.zeros(S.shape[1])
        while True:
            for _ in range(self.inner_iter):
                f = eta * (logsumexp((S - g[None, :]) / eta, axis=1) - log_a)
                g_new = eta * (logsumexp((S - f[:, None]) / eta, axis=0) - log_b)
                shift = np.abs(g_new - g).max()
                g = g_new
                if shift <= self.tol * scale:
                    break
            if eta <= self.eta_final * scale:
                break
            eta = max(eta * self.decay, self.eta_final * scale)
        plan_live = np.exp((S - f[:, None] - g[None, :]) / eta)
        # c-transform gives a feasible dual
        f = (S - g[None, :]).max(axis=1)
        dual = float(a[live_rows] @ f + b[live_cols] @ g)
        primal = float(np.sum(plan_live * S))
        plan = np.zeros(surplus.shape)
        plan[np.ix_(live_rows, live_cols)] = plan_live
        f_full = np.full(surplus.shape[0], np.nan)
        g_full = np.full(surplus.shape[1], np.nan)
        f_full[live_rows] = f
        g_full[live_cols] = g
        return TransportPlan(dual, plan, f_full, g_full, abs(dual - primal), bool(live_cols.all()))


def default_backend(entries: int) -> TransportBackend:
    if entries > config.LP_DENSE_LIMIT:
        return SinkhornBackend()
    return SimplexBackend()


class DiscretizedDistribution(ChoiceModel):
    """
    Finitely supported error law: K draws over (outside, inside options)
    with probability weights.

    The support is indexed with the outside option in column 0. As a choice
    model, emax is the weighted average of the best option per draw and the
    conjugate is an optimal transport value.
    """

    family = "discretized"
    smooth = False

    def __init__(self, support, weights=None, backend: Optional[TransportBackend] = None):
        support = np.array(support, dtype=float)
        if support.ndim == 1:
            support = support[None, :]
        if support.ndim != 2 or support.shape[0] < 1 or support.shape[1] < 1:
            raise DimensionError("support", "K x dim matrix with K >= 1", support.shape)
        if not np.all(np.isfinite(support)):
            raise ValidationError("support points must be finite")
        if weights is None:
            weights = np.full(support.shape[0], 1.0 / support.shape[0])
        weights = np.array(weights, dtype=float).ravel()
        if weights.size != support.shape[0]:
            raise DimensionError("weights", support.shape[0], weights.size)
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-9:
            raise ValidationError("weights must be non-negative and sum to 1")
        support.setflags(write=False)
        weights.setflags(write=False)
        self.support = support
        self.weights = weights
        self.backend = backend

    @property
    def K(self) -> int:
        return self.support.shape[0]

    @property
    def dim(self) -> int:
        return self.support.shape[1]

    @property
    def n_options(self) -> int:
        return self.dim - 1

    # ---------------------------------------------------------- constructors

    @classmethod
    def gumbel(cls, K: int, dim: int, seed: int = 0, method: str = "random") -> "DiscretizedDistribution":
        """
        K equally weighted centered Gumbel draws over dim alternatives.

        method is 'random' (i.i.d. draws), 'halton' (scrambled Halton points)
        or 'quantile' (per-column quantile nodes in independently shuffled order).
        """
        if K < 1 or dim < 1:
            raise ParameterError("gumbel discretization needs K >= 1 and dim >= 1")
        rng = np.random.Generator(np.random.PCG64(seed))
        if method == "random":
            u = rng.uniform(size=(K, dim))
        elif method == "halton":
            u = qmc.Halton(d=dim, scramble=True, seed=rng).random(K)
        elif method == "quantile":
            nodes = (np.arange(K) + 0.5) / K
            u = np.column_stack([rng.permutation(nodes) for _ in range(dim)])
        else:
            raise ParameterError(f"unknown discretization method '{method}'")
        u = np.clip(u, 1e-300, 1.0 - 1e-16)
        return cls(-np.log(-np.log(u)) - EULER_GAMMA)

    @classmethod
    def from_csv(cls, path) -> "DiscretizedDistribution":
        """Read support points from a CSV with a 'weight' column and one column per alternative."""
        path = Path(path)
        try:
            df = pd.read_csv(path, encoding="utf-8", skipinitialspace=True)
        except FileNotFoundError:
            raise ParseError(path, "file not found")
        except (pd.errors.ParserError, pd.errors.EmptyDataError) as e:
            raise ParseError(path, f"cannot parse CSV ({e})")
        df.columns = [str(c).strip() for c in df.columns]
        if "weight" not in df.columns or len(df.columns) < 2:
            raise ParseError(path, "expected a 'weight' column and at least one support column", line=1)
        numeric = df.apply(pd.to_numeric, errors="coerce")
        bad = np.flatnonzero(numeric.isna().any(axis=1).to_numpy())
        if bad.size:
            raise ParseError(path, "non-numeric value", line=int(bad[0]) + 2)
        weights = numeric.pop("weight").to_numpy()
        return cls(numeric.to_numpy(), weights / weights.sum())

    def to_csv_frame(self) -> pd.DataFrame:
        df = pd.DataFrame(self.support, columns=[f"eps_{j}" for j in range(self.dim)])
        df.insert(0, "weight", self.weights)
        return df

    # ---------------------------------------------------------- choice model

    def _values(self, U: np.ndarray) -> np.ndarray:
        return self.support + np.concatenate([[0.0], U])[None, :]

    def _emax(self, U):
        return float(self.weights @ self._values(U).max(axis=1))

    def _probs(self, U):
        # ties go to the lowest index
        choice = self._values(U).argmax(axis=1)
        shares = np.bincount(choice, weights=self.weights, minlength=self.dim)
        return shares[1:]

    def _shock_spread(self):
        return float(self.support.max() - self.support.min())

    def _conj(self, mu, allowed):
        return -conj_ot(self, mu, forbidden=~allowed, backend=self.backend).value

    def _invert(self, mu, allowed):
        return conj_ot(self, mu, forbidden=~allowed, backend=self.backend).U

    def to_dict(self) -> dict:
        return {"family": self.family, "support": self.support.tolist(), "weights": self.weights.tolist()}

    def __repr__(self):
        return f"<DiscretizedDistribution K={self.K} dim={self.dim}>"


@dataclass
class TransportSolution:
    """-G*(mu) as a transport value, with mean utilities recovered from the duals."""

    value: float
    U: np.ndarray
    plan: np.ndarray
    unique: bool
    gap: float
    backend: str


def conj_ot(
    dist: DiscretizedDistribution,
    mu,
    forbidden=None,
    backend: Optional[TransportBackend] = None,
) -> TransportSolution:
    """
    Optimal transport between the choice law (mu_0, mu) and the support of dist.

    The value equals -G*(mu). Mean utilities are U_y = g_0 - g_y for the column
    potentials g; forbidden options are dropped from the problem and get NaN.
    """
    mu, allowed = dist._prepare_probabilities(mu, forbidden)
    mu0 = 1.0 - mu.sum()
    columns = np.concatenate([[0], 1 + np.flatnonzero(allowed)])
    b = np.concatenate([[mu0], mu[allowed]])
    surplus = dist.support[:, columns]
    if backend is None:
        backend = dist.backend or default_backend(surplus.size)
    result = backend.solve(surplus, np.asarray(dist.weights), b)
    U = np.full(mu.size, np.nan)
    with np.errstate(invalid="ignore"):
        U[allowed] = result.g[0] - result.g[1:]
    if not np.isfinite(result.g[0]) or np.any(b <= 0):
        result.unique = False
    if not result.unique:
        logger.debug("Transport duals are not unique; mean utilities are one selection")
    logger.debug(f"conj_ot via {backend.name}: value {result.value:.10g}, gap {result.gap:.2e}")
    return TransportSolution(result.value, U, result.plan, result.unique, result.gap, backend.name)

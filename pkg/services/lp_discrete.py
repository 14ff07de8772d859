"""Equilibrium with discretized heterogeneity as one linear program over (U, u^k, v^l)."""
import logging
import time
from typing import Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.optimize import linprog

from choice.transport import DiscretizedDistribution
from market.errors import BackendError, DimensionError, UnsupportedModelError
from market.feasibility import max_residual
from market.models import GroupUtilities, Margins, Matching, SurplusMatrix
from services.options import SolveOptions, SolveReport

logger = logging.getLogger(__name__)


def _check_dists(dists: Sequence, count: int, options: int, side: str) -> None:
    if len(dists) != count:
        raise DimensionError(f"{side} distributions", count, len(dists))
    for k, dist in enumerate(dists):
        if not isinstance(dist, DiscretizedDistribution):
            raise UnsupportedModelError(f"{side} model {k} is {dist.family}; lp_discrete needs discretized laws")
        if dist.dim != options + 1:
            raise DimensionError(f"{side} distribution {k} support columns", options + 1, dist.dim)


class _Builder:
    """Accumulates sparse rows of A_ub x <= b_ub."""

    def __init__(self):
        self.rows, self.cols, self.vals, self.rhs = [], [], [], []

    def add(self, entries, rhs: float) -> int:
        row = len(self.rhs)
        for col, val in entries:
            self.rows.append(row)
            self.cols.append(col)
            self.vals.append(val)
        self.rhs.append(rhs)
        return row

    def matrix(self, n_vars: int):
        A = sparse.coo_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.rhs), n_vars))
        return A.tocsr(), np.array(self.rhs)


def solve_lp_discrete(
    men_dist: Sequence[DiscretizedDistribution],
    women_dist: Sequence[DiscretizedDistribution],
    phi: SurplusMatrix,
    r: Margins,
    opts: SolveOptions = None,
) -> Tuple[Matching, GroupUtilities, SolveReport]:
    """
    min sum_x n_x sum_k r^k u^k_x + sum_y m_y sum_l s^l v^l_y subject to
    u^k_x >= U_xy + eps^xk_y, u^k_x >= eps^xk_0, v^l_y >= Phi_xy - U_xy + eta^yl_x,
    v^l_y >= eta^yl_0. The matching is read off the constraint multipliers.
    """
    opts = opts or SolveOptions(method="lp_discrete")
    if phi.shape != r.shape:
        raise DimensionError("phi", r.shape, phi.shape)
    nx, ny = r.shape
    _check_dists(men_dist, nx, ny, "men")
    _check_dists(women_dist, ny, nx, "women")
    started = time.perf_counter()
    allowed = phi.allowed
    Phi = phi.filled(0.0)

    # variable layout: U on allowed cells, then u^k_x, then v^l_y
    cell_index = -np.ones((nx, ny), dtype=int)
    cell_index[allowed] = np.arange(int(allowed.sum()))
    offset = int(allowed.sum())
    men_index, women_index = [], []
    cost = [np.zeros(offset)]
    for x, dist in enumerate(men_dist):
        men_index.append(offset + np.arange(dist.K))
        cost.append(r.n[x] * np.asarray(dist.weights))
        offset += dist.K
    for y, dist in enumerate(women_dist):
        women_index.append(offset + np.arange(dist.K))
        cost.append(r.m[y] * np.asarray(dist.weights))
        offset += dist.K
    c = np.concatenate(cost)

    builder = _Builder()
    couple_rows, single_men_rows, single_women_rows = [], [], []
    for x, dist in enumerate(men_dist):
        for k in range(dist.K):
            uk = int(men_index[x][k])
            for y in np.flatnonzero(allowed[x]):
                row = builder.add([(int(cell_index[x, y]), 1.0), (uk, -1.0)], -dist.support[k, 1 + y])
                couple_rows.append((row, x, y))
            single_men_rows.append((builder.add([(uk, -1.0)], -dist.support[k, 0]), x))
    for y, dist in enumerate(women_dist):
        for l in range(dist.K):
            vl = int(women_index[y][l])
            for x in np.flatnonzero(allowed[:, y]):
                builder.add([(int(cell_index[x, y]), -1.0), (vl, -1.0)], -Phi[x, y] - dist.support[l, 1 + x])
            single_women_rows.append((builder.add([(vl, -1.0)], -dist.support[l, 0]), y))
    A_ub, b_ub = builder.matrix(offset)

    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=(None, None), method="highs")
    if res.status != 0:
        raise BackendError(
            f"discretized equilibrium LP failed with status {res.status}: {res.message} "
            f"({A_ub.shape[0]} constraints, {offset} variables)"
        )
    # multipliers of <= constraints are non-positive for a minimization
    weights = -res.ineqlin.marginals
    mu = np.zeros((nx, ny))
    for row, x, y in couple_rows:
        mu[x, y] += weights[row]
    mu_x0 = np.zeros(nx)
    for row, x in single_men_rows:
        mu_x0[x] += weights[row]
    mu_0y = np.zeros(ny)
    for row, y in single_women_rows:
        mu_0y[y] += weights[row]
    matching = Matching(np.clip(mu, 0.0, None), np.clip(mu_x0, 0.0, None), np.clip(mu_0y, 0.0, None))

    u = np.array([dist.weights @ res.x[men_index[x]] for x, dist in enumerate(men_dist)])
    v = np.array([dist.weights @ res.x[women_index[y]] for y, dist in enumerate(women_dist)])
    residual = max_residual(matching, r)
    report = SolveReport(
        converged=True,
        iterations=int(getattr(res, "nit", 0)),
        final_residual=residual,
        social_welfare=float(res.fun),
        wall_time=time.perf_counter() - started,
        method="lp_discrete",
        message=str(res.message),
    )
    logger.info(f"Discretized LP done: {nx}x{ny}, {A_ub.shape[0]} constraints, W={res.fun:.8g}")
    return matching, GroupUtilities(u, v), report

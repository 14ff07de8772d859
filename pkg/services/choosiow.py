"""Choo-Siow logit market: the strictly convex dual objective F(u, v) and its minimizer."""
import logging
import time
from typing import Tuple

import numpy as np
from scipy.optimize import minimize

from market.errors import DimensionError
from market.feasibility import max_residual
from market.models import GroupUtilities, Margins, Matching, SurplusMatrix
from services.options import SolveOptions, SolveReport

logger = logging.getLogger(__name__)


def _kernel(phi: SurplusMatrix, r: Margins) -> np.ndarray:
    """sqrt(n_x m_y) exp(Phi_xy / 2), zero on forbidden cells."""
    return np.sqrt(np.outer(r.n, r.m)) * np.exp(phi.filled(-np.inf) / 2.0)


def matching_from_utilities(phi: SurplusMatrix, r: Margins, u: np.ndarray, v: np.ndarray) -> Matching:
    """mu_x0 = n e^-u, mu_0y = m e^-v, mu_xy = sqrt(n m) e^((Phi - u - v) / 2)."""
    u0 = np.where(r.n > 0, u, 0.0)
    v0 = np.where(r.m > 0, v, 0.0)
    mu = _kernel(phi, r) * np.exp(-0.5 * (u0[:, None] + v0[None, :]))
    return Matching(mu, r.n * np.exp(-u0), r.m * np.exp(-v0))


def choosiow_objective(phi: SurplusMatrix, r: Margins, u: np.ndarray, v: np.ndarray) -> float:
    """F(u, v); its minimum is the social welfare."""
    mu = matching_from_utilities(phi, r, u, v)
    live_x = r.n > 0
    live_y = r.m > 0
    value = np.sum(r.n[live_x] * (u[live_x] + np.exp(-u[live_x]) - 1.0))
    value += np.sum(r.m[live_y] * (v[live_y] + np.exp(-v[live_y]) - 1.0))
    return float(value + 2.0 * mu.mu.sum())


def solve_F_choosiow(
    phi: SurplusMatrix, r: Margins, opts: SolveOptions = None
) -> Tuple[GroupUtilities, Matching, SolveReport]:
    """Minimize F over the utilities of groups with positive mass (trust-region Newton-CG)."""
    opts = opts or SolveOptions(method="choosiow_f")
    if phi.shape != r.shape:
        raise DimensionError("phi", r.shape, phi.shape)
    started = time.perf_counter()
    nx, ny = r.shape
    live_x = np.flatnonzero(r.n > 0)
    live_y = np.flatnonzero(r.m > 0)
    K = _kernel(phi, r)[np.ix_(live_x, live_y)]
    n = r.n[live_x]
    m = r.m[live_y]

    def split(z):
        return z[: live_x.size], z[live_x.size:]

    def couples(u, v):
        return K * np.exp(-0.5 * (u[:, None] + v[None, :]))

    def fun(z):
        u, v = split(z)
        return float(
            np.sum(n * (u + np.exp(-u) - 1.0)) + np.sum(m * (v + np.exp(-v) - 1.0)) + 2.0 * couples(u, v).sum()
        )

    def jac(z):
        u, v = split(z)
        mu = couples(u, v)
        return np.concatenate([n - n * np.exp(-u) - mu.sum(axis=1), m - m * np.exp(-v) - mu.sum(axis=0)])

    def hessp(z, p):
        u, v = split(z)
        pu, pv = split(p)
        mu = couples(u, v)
        hu = (n * np.exp(-u) + 0.5 * mu.sum(axis=1)) * pu + 0.5 * mu @ pv
        hv = (m * np.exp(-v) + 0.5 * mu.sum(axis=0)) * pv + 0.5 * mu.T @ pu
        return np.concatenate([hu, hv])

    z0 = np.full(live_x.size + live_y.size, np.log(2.0))
    res = minimize(fun, z0, jac=jac, hessp=hessp, method="trust-ncg", options={"gtol": opts.tol, "maxiter": opts.max_iter})

    u = np.full(nx, np.nan)
    v = np.full(ny, np.nan)
    u[live_x], v[live_y] = split(res.x)
    utilities = GroupUtilities(u, v)
    matching = matching_from_utilities(phi, r, u, v)
    residual = max_residual(matching, r)
    report = SolveReport(
        converged=residual <= opts.tol,
        iterations=int(res.nit),
        final_residual=residual,
        social_welfare=float(res.fun),
        wall_time=time.perf_counter() - started,
        method="choosiow_f",
        message=str(res.message),
    )
    if not report.converged:
        logger.warning(f"F minimization stopped with residual {residual:.3e} after {res.nit} iterations")
    logger.info(f"F minimization done: {r.nx}x{r.ny}, residual {residual:.2e}, W={report.social_welfare:.8g}")
    return utilities, matching, report

"""min-Emax: minimize G(U, n) + H(Phi - U, m) over the systematic utilities of men."""
import logging
import time
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize
from scipy.special import logsumexp, softmax

from choice.base import ChoiceModel, check_models
from choice.logit import logit_scale
from market.errors import DimensionError
from market.feasibility import max_residual
from market.models import GroupUtilities, Margins, Matching, SurplusMatrix, SystematicUtilities
from services.options import SolveOptions, SolveReport

logger = logging.getLogger(__name__)


class _LogitSide:
    """Vectorized emax and choice probabilities for a side made of scaled logits."""

    def __init__(self, scales: np.ndarray, masses: np.ndarray, allowed: np.ndarray):
        self.scales = scales
        self.masses = masses
        self.allowed = allowed

    def _augmented(self, U: np.ndarray) -> np.ndarray:
        values = np.where(self.allowed, U, -np.inf) / self.scales[:, None]
        return np.hstack([np.zeros((U.shape[0], 1)), values])

    def value_and_shares(self, U: np.ndarray):
        z = self._augmented(U)
        emax = self.scales * logsumexp(z, axis=1)
        shares = softmax(z, axis=1)[:, 1:]
        return float(self.masses @ emax), shares, emax


class _GenericSide:
    """Group-by-group evaluation through the ChoiceModel contract."""

    def __init__(self, models: Sequence[ChoiceModel], masses: np.ndarray, allowed: np.ndarray):
        self.models = models
        self.masses = masses
        self.allowed = allowed

    def value_and_shares(self, U: np.ndarray):
        shares = np.zeros(U.shape)
        emax = np.zeros(U.shape[0])
        for i, model in enumerate(self.models):
            row = np.where(self.allowed[i], U[i], 0.0)
            forbidden = None if self.allowed[i].all() else ~self.allowed[i]
            emax[i] = model.emax(row, forbidden)
            shares[i] = model.probs(row, forbidden)
        live = self.masses > 0
        return float(self.masses[live] @ emax[live]), shares, emax


def _side(models: Sequence[ChoiceModel], masses: np.ndarray, allowed: np.ndarray):
    scales = [logit_scale(model) for model in models]
    if all(s is not None for s in scales):
        return _LogitSide(np.array(scales, dtype=float), masses, allowed)
    return _GenericSide(models, masses, allowed)


def solve_minemax(
    men: Sequence[ChoiceModel],
    women: Sequence[ChoiceModel],
    phi: SurplusMatrix,
    r: Margins,
    opts: SolveOptions = None,
    init: Optional[SystematicUtilities] = None,
) -> Tuple[SystematicUtilities, Matching, SolveReport]:
    """
    L-BFGS-B descent on U over the allowed cells, starting from Phi / 2.
    The gradient at (x, y) is n_x probs_x(U_x.)_y - m_y probs_y(V_.y)_x.
    """
    opts = opts or SolveOptions(method="minemax")
    if phi.shape != r.shape:
        raise DimensionError("phi", r.shape, phi.shape)
    nx, ny = r.shape
    check_models(men, nx, ny, "men")
    check_models(women, ny, nx, "women")
    started = time.perf_counter()
    allowed = phi.allowed
    Phi = phi.filled(0.0)
    cells = np.flatnonzero(allowed.ravel())
    men_side = _side(men, r.n, allowed)
    women_side = _side(women, r.m, allowed.T)
    calls = {"count": 0}

    def unpack(z):
        U = np.zeros(nx * ny)
        U[cells] = z
        return U.reshape(nx, ny)

    def fun(z):
        calls["count"] += 1
        U = unpack(z)
        g_value, g_shares, _ = men_side.value_and_shares(U)
        h_value, h_shares, _ = women_side.value_and_shares((Phi - U).T)
        grad = r.n[:, None] * g_shares - (r.m[:, None] * h_shares).T
        return g_value + h_value, grad.ravel()[cells]

    z0 = (Phi / 2.0).ravel()[cells] if init is None else np.asarray(init.U).ravel()[cells]
    res = minimize(
        fun,
        z0,
        jac=True,
        method="L-BFGS-B",
        options={"gtol": opts.tol, "ftol": 1e-15, "maxiter": opts.max_iter, "maxfun": 10 * opts.max_iter},
    )

    U = unpack(res.x)
    _, g_shares, u = men_side.value_and_shares(U)
    _, h_shares, v = women_side.value_and_shares((Phi - U).T)
    mu = r.n[:, None] * g_shares
    matching = Matching(mu, r.n * (1.0 - g_shares.sum(axis=1)), r.m * (1.0 - h_shares.sum(axis=1)))
    gradient = mu - (r.m[:, None] * h_shares).T
    grad_norm = float(np.abs(gradient[allowed]).max()) if cells.size else 0.0
    residual = max(max_residual(matching, r), grad_norm)
    systematic = SystematicUtilities(np.where(allowed, U, np.nan), np.where(allowed, Phi - U, np.nan))
    report = SolveReport(
        converged=residual <= opts.tol,
        iterations=int(res.nit),
        final_residual=float(residual),
        social_welfare=float(res.fun),
        wall_time=time.perf_counter() - started,
        method="minemax",
        message=str(res.message),
    )
    if not report.converged:
        logger.warning(f"min-Emax stopped with residual {residual:.3e} after {res.nit} iterations: {res.message}")
    logger.info(f"min-Emax done: {nx}x{ny}, {res.nit} iterations, {calls['count']} evaluations")
    return systematic, matching, report


def minemax_utilities(men, women, systematic: SystematicUtilities, r: Margins, phi: SurplusMatrix) -> GroupUtilities:
    """Group utilities u_x = G_x(U_x.) and v_y = H_y(V_.y) at a min-Emax solution."""
    allowed = phi.allowed
    U = np.where(allowed, systematic.U, 0.0)
    V = np.where(allowed, systematic.V, 0.0)
    _, _, u = _side(men, r.n, allowed).value_and_shares(U)
    _, _, v = _side(women, r.m, allowed.T).value_and_shares(V.T)
    return GroupUtilities(np.where(r.n > 0, u, np.nan), np.where(r.m > 0, v, np.nan))

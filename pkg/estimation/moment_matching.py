"""Moment-matching estimator for surplus linear in lambda with parameter-free heterogeneity."""
import logging
from typing import Optional

import numpy as np
from scipy.optimize import minimize

from estimation.criteria import criteria_values
from estimation.information import standard_errors
from estimation.likelihood import ModelSolver, matching_loglik
from estimation.results import EstimationResult
from estimation.spec import ParamModelSpec
from market.errors import CupidError, DimensionError, EstimationError
from market.models import SampleCounts
from services.identification import identify_surplus
from services.options import SolveOptions

logger = logging.getLogger(__name__)

COMOMENT_TOL = 1e-6


def least_squares_start(spec: ParamModelSpec, data: SampleCounts, theta=None) -> np.ndarray:
    """Regress the identified surplus on the basis; zeros when identification is impossible."""
    men, women = spec.models(theta)
    try:
        phi_hat = identify_surplus(men, women, data.matching(), data.margins())
    except CupidError as e:
        logger.debug(f"No identified start ({e}); starting from zero")
        return np.zeros(spec.K)
    allowed = phi_hat.allowed.ravel()
    if spec.forbidden is not None:
        allowed &= ~np.asarray(spec.forbidden).ravel()
    design = spec.basis.matrix[allowed]
    target = phi_hat.filled(0.0).ravel()[allowed]
    if design.shape[0] < spec.K:
        return np.zeros(spec.K)
    lam, *_ = np.linalg.lstsq(design, target, rcond=None)
    return lam


def moment_match(
    spec: ParamModelSpec,
    data: SampleCounts,
    theta=None,
    init=None,
    opts: Optional[SolveOptions] = None,
    compute_se: bool = True,
) -> EstimationResult:
    """
    Maximize the concave map lambda -> C-hat . lambda - W(Phi^lambda, r-hat).

    The gradient is C-hat - C(mu^lambda), so at the optimum predicted comoments
    equal observed comoments.
    """
    if data.shape != spec.shape:
        raise DimensionError("data", spec.shape, data.shape)
    theta = spec.theta_ref if theta is None else np.asarray(theta, dtype=float).ravel()
    margins = data.margins()
    observed = spec.basis.comoments(data.matching().mu)
    solver = ModelSolver(spec, margins, opts)

    def objective(lam):
        equilibrium = solver(lam, theta)
        predicted = spec.basis.comoments(equilibrium.matching.mu)
        value = equilibrium.report.social_welfare - float(observed @ lam)
        return value, predicted - observed

    start = least_squares_start(spec, data, theta) if init is None else np.asarray(init, dtype=float)
    logger.info(f"Moment matching {spec.name} spec: K={spec.K}, H={data.H}")
    try:
        res = minimize(objective, start, jac=True, method="BFGS", options={"gtol": 1e-10, "maxiter": 1000})
    except CupidError as e:
        raise EstimationError(f"inner equilibrium failed during moment matching: {e}") from e

    lam = res.x
    equilibrium = solver(lam, theta)
    predicted = spec.basis.comoments(equilibrium.matching.mu)
    gap = float(np.abs(predicted - observed).max())
    converged = gap <= COMOMENT_TOL
    if not converged:
        logger.warning(f"Moment matching stopped with comoment gap {gap:.3e} ({res.message})")

    def loglik_of(lam_):
        return matching_loglik(solver(lam_, theta).matching, data)

    loglik = matching_loglik(equilibrium.matching, data)
    if compute_se:
        se, pinned = standard_errors(loglik_of, lam, spec.basis.names)
    else:
        se, pinned = np.full(spec.K, np.nan), []
    aic, bic = criteria_values(loglik, spec.K, data.H)
    logger.info(f"Moment matching done: loglik={loglik:.6g}, comoment gap {gap:.2e}, {solver.solves} solves")
    return EstimationResult(
        estimator="mm",
        lam=lam,
        theta=np.asarray(theta, dtype=float),
        se=se,
        loglik=loglik,
        aic=aic,
        bic=bic,
        comoments=predicted,
        converged=converged,
        n_obs=data.H,
        parameter_names=spec.basis.names,
        observed_comoments=observed,
        matching=equilibrium.matching,
        pinned_directions=pinned,
        diagnostics={"comoment_gap": gap, "inner_solves": solver.solves},
        fixed_theta=True,
    )

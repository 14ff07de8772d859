"""Maximum likelihood over surplus coefficients and distributional parameters."""
import logging
from typing import Dict, Optional, Sequence

import numpy as np
import pandas as pd
from scipy.optimize import minimize

from estimation.criteria import criteria_values
from estimation.information import fd_gradient, standard_errors
from estimation.likelihood import ModelSolver, matching_loglik
from estimation.moment_matching import moment_match
from estimation.results import EstimationResult
from estimation.spec import ParamModelSpec
from market.errors import CupidError, DimensionError, EstimationError, ValidationError
from market.models import SampleCounts
from services.options import SolveOptions

logger = logging.getLogger(__name__)

# Objective value used where the model misses an observed cell.
INFEASIBLE_PENALTY = 1e10
GRADIENT_TOL = 1e-4


def _initial_params(spec: ParamModelSpec, data: SampleCounts, opts) -> np.ndarray:
    try:
        start = moment_match(spec, data, spec.theta_ref, opts=opts, compute_se=False)
        lam = start.lam
    except CupidError as e:
        logger.warning(f"Moment-matching start failed ({e}); starting MLE from zero")
        lam = np.zeros(spec.K)
    return np.concatenate([lam, spec.theta_ref])


def mle(
    spec: ParamModelSpec,
    data: SampleCounts,
    init=None,
    opts: Optional[SolveOptions] = None,
    fixed: Optional[Dict[int, float]] = None,
    compute_se: bool = True,
) -> EstimationResult:
    """
    Quasi-Newton maximization of the household log-likelihood over (lambda, theta),
    with central finite-difference gradients. Coordinates in `fixed` are held at
    the given values.
    """
    if data.shape != spec.shape:
        raise DimensionError("data", spec.shape, data.shape)
    dim = spec.K + spec.dim_theta
    fixed = dict(fixed or {})
    if any(not 0 <= i < dim for i in fixed):
        raise ValidationError(f"fixed parameter index out of range 0..{dim - 1}")
    free = np.array([i for i in range(dim) if i not in fixed], dtype=int)
    names = spec.parameter_names

    full = _initial_params(spec, data, opts) if init is None else np.asarray(init, dtype=float).ravel()
    if full.size != dim:
        raise DimensionError("initial parameters", dim, full.size)
    for i, value in fixed.items():
        full[i] = value

    solver = ModelSolver(spec, data.margins(), opts)
    H = data.H

    def expand(free_params):
        params = full.copy()
        params[free] = free_params
        return params

    def loglik_full(params):
        lam, theta = spec.split(params)
        try:
            return matching_loglik(solver(lam, theta).matching, data)
        except CupidError as e:
            logger.debug(f"Likelihood evaluation failed at {np.round(params, 6).tolist()}: {e}")
            return -np.inf

    def objective(free_params):
        value = loglik_full(expand(free_params))
        return -value / H if np.isfinite(value) else INFEASIBLE_PENALTY

    def gradient(free_params):
        return fd_gradient(objective, free_params)

    logger.info(f"MLE for {spec.name} spec: {free.size} free parameters, H={H}")
    if free.size:
        res = minimize(objective, full[free], jac=gradient, method="BFGS", options={"gtol": GRADIENT_TOL, "maxiter": 500})
        full = expand(res.x)
        grad_max = float(np.abs(gradient(res.x)).max())
        converged = bool(res.success or grad_max <= GRADIENT_TOL)
        message = str(res.message)
    else:
        grad_max, converged, message = 0.0, True, "all parameters fixed"
    if not converged:
        logger.warning(f"MLE did not converge: {message} (max gradient {grad_max:.3e})")

    lam, theta = spec.split(full)
    try:
        equilibrium = solver(lam, theta)
    except CupidError as e:
        raise EstimationError(f"equilibrium failed at the MLE: {e}") from e
    loglik = matching_loglik(equilibrium.matching, data)
    if not np.isfinite(loglik):
        raise EstimationError("log-likelihood is not finite at the MLE")

    se = np.full(dim, np.nan)
    pinned = []
    if compute_se and free.size:
        se_free, pinned = standard_errors(
            lambda p: loglik_full(expand(p)), full[free], tuple(names[i] for i in free)
        )
        se[free] = se_free
    aic, bic = criteria_values(loglik, int(free.size), H)
    logger.info(f"MLE done: loglik={loglik:.6g}, {solver.solves} inner solves")
    result = EstimationResult(
        estimator="mle",
        lam=lam,
        theta=theta,
        se=se,
        loglik=loglik,
        aic=aic,
        bic=bic,
        comoments=spec.basis.comoments(equilibrium.matching.mu),
        converged=converged,
        n_obs=H,
        parameter_names=names,
        observed_comoments=spec.basis.comoments(data.matching().mu),
        matching=equilibrium.matching,
        pinned_directions=pinned,
        diagnostics={"max_gradient": grad_max, "inner_solves": solver.solves, "message": message},
        fixed_params=tuple(sorted(fixed)),
    )
    return result


def profile_likelihood(
    spec: ParamModelSpec,
    data: SampleCounts,
    parameter: str,
    grid: Sequence[float],
    opts: Optional[SolveOptions] = None,
) -> pd.DataFrame:
    """Maximized log-likelihood with one parameter held at each grid value."""
    names = spec.parameter_names
    if parameter not in names:
        raise ValidationError(f"unknown parameter '{parameter}' (expected one of {list(names)})")
    index = names.index(parameter)
    rows = []
    init = None
    for value in grid:
        try:
            result = mle(spec, data, init=init, opts=opts, fixed={index: float(value)}, compute_se=False)
            rows.append({"value": float(value), "loglik": result.loglik, "converged": result.converged})
            init = result.params
        except CupidError as e:
            logger.error(f"Profile point {parameter}={value} failed: {e}")
            rows.append({"value": float(value), "loglik": np.nan, "converged": False})
    frame = pd.DataFrame(rows, columns=["value", "loglik", "converged"])
    frame.insert(0, "parameter", parameter)
    return frame

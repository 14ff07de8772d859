"""Minimum distance estimation: weighted least squares of the identified surplus on the basis."""
import logging
from typing import Optional, Union

import numpy as np
from scipy.stats import chi2

from choice.logit import logit_scale
from estimation.criteria import criteria_values
from estimation.likelihood import ModelSolver, matching_loglik
from estimation.results import EstimationResult
from estimation.spec import ParamModelSpec
from market.errors import DimensionError, EstimationError, ValidationError
from market.models import Matching, SampleCounts
from services.identification import identify_surplus

logger = logging.getLogger(__name__)

LOG_COUNT_STEP = 1e-5


def _log_count_jacobian(men, women, counts: Matching, rows: np.ndarray, cells: np.ndarray) -> np.ndarray:
    """
    d Phi-hat[rows] / d log count[cells]. Exact for (scaled) logit models, central
    differences over log counts otherwise.
    """
    nx, ny = counts.shape
    sigma = [logit_scale(model) for model in men]
    tau = [logit_scale(model) for model in women]
    if all(s is not None for s in sigma) and all(t is not None for t in tau):
        full = np.zeros((nx * ny, nx * ny + nx + ny))
        for x in range(nx):
            for y in range(ny):
                xy = x * ny + y
                full[xy, xy] = sigma[x] + tau[y]
                full[xy, nx * ny + x] = -sigma[x]
                full[xy, nx * ny + nx + y] = -tau[y]
        return full[np.ix_(rows, cells)]

    base = counts.cells()
    jac = np.empty((rows.size, cells.size))
    for j, cell in enumerate(cells):
        shifted = []
        for sign in (1.0, -1.0):
            bumped = base.copy()
            bumped[cell] *= np.exp(sign * LOG_COUNT_STEP)
            mu = Matching(bumped[: nx * ny].reshape(nx, ny), bumped[nx * ny: nx * ny + nx], bumped[nx * ny + nx:])
            phi = identify_surplus(men, women, mu, mu.margins())
            shifted.append(phi.filled(0.0).ravel()[rows])
        jac[:, j] = (shifted[0] - shifted[1]) / (2.0 * LOG_COUNT_STEP)
    return jac


def min_distance(
    spec: ParamModelSpec,
    data: SampleCounts,
    weighting: Union[str, np.ndarray] = "efficient",
    theta=None,
) -> EstimationResult:
    """
    lambda-hat = argmin (B lambda - Phi-hat)' Omega (B lambda - Phi-hat) over cells with
    positive couple counts, where Phi-hat is the surplus identified from the data.
    The minimized value is the J-statistic, chi2 with (cells - K) degrees of freedom
    under the efficient weighting.
    """
    if data.shape != spec.shape:
        raise DimensionError("data", spec.shape, data.shape)
    theta = spec.theta_ref if theta is None else np.asarray(theta, dtype=float).ravel()
    men, women = spec.models(theta)
    counts = Matching(data.muhat.astype(float), data.muhat_x0.astype(float), data.muhat_0y.astype(float))
    phi_hat = identify_surplus(men, women, counts, counts.margins())

    rows = np.flatnonzero(data.muhat.ravel() > 0)
    if spec.forbidden is not None:
        rows = np.setdiff1d(rows, np.flatnonzero(np.asarray(spec.forbidden).ravel()))
    excluded = data.muhat.size - rows.size
    if excluded:
        logger.warning(f"Excluding {excluded} zero or forbidden cells from minimum distance")
    if rows.size < spec.K:
        raise EstimationError(f"{rows.size} usable cells cannot identify {spec.K} coefficients")

    B = spec.basis.matrix[rows]
    target = phi_hat.filled(0.0).ravel()[rows]
    cells = np.flatnonzero(data.cells() > 0)
    c = data.cells()[cells].astype(float)
    J = _log_count_jacobian(men, women, counts, rows, cells)
    V = J @ (np.diag(1.0 / c) - np.ones((c.size, c.size)) / data.H) @ J.T

    if isinstance(weighting, str):
        if weighting == "efficient":
            try:
                omega = np.linalg.inv(V)
            except np.linalg.LinAlgError as e:
                raise EstimationError(f"covariance of the identified surplus is singular: {e}") from e
        elif weighting == "identity":
            omega = np.eye(rows.size)
        else:
            raise ValidationError(f"unknown weighting '{weighting}' (expected efficient, identity or a matrix)")
        label = weighting
    else:
        omega = np.asarray(weighting, dtype=float)
        if omega.shape == (data.muhat.size, data.muhat.size):
            omega = omega[np.ix_(rows, rows)]
        if omega.shape != (rows.size, rows.size):
            raise DimensionError("weighting matrix", (rows.size, rows.size), omega.shape)
        label = "matrix"
    omega = 0.5 * (omega + omega.T)
    try:
        np.linalg.cholesky(omega)
    except np.linalg.LinAlgError:
        raise ValidationError("weighting matrix is not positive definite")

    bread = B.T @ omega @ B
    lam = np.linalg.solve(bread, B.T @ omega @ target)
    residual = B @ lam - target
    j_stat = float(residual @ omega @ residual)
    df = int(rows.size - spec.K)
    p_value = float(chi2.sf(j_stat, df)) if df > 0 else np.nan

    bread_inv = np.linalg.inv(bread)
    cov = bread_inv @ B.T @ omega @ V @ omega @ B @ bread_inv
    se = np.sqrt(np.clip(np.diag(cov), 0.0, None))

    equilibrium = ModelSolver(spec, data.margins())(lam, theta)
    loglik = matching_loglik(equilibrium.matching, data)
    aic, bic = criteria_values(loglik, spec.K, data.H)
    logger.info(f"Minimum distance ({label}): J={j_stat:.4g} on {df} df, p={p_value:.4g}")
    return EstimationResult(
        estimator="md",
        lam=lam,
        theta=np.asarray(theta, dtype=float),
        se=se,
        loglik=loglik,
        aic=aic,
        bic=bic,
        comoments=spec.basis.comoments(equilibrium.matching.mu),
        converged=True,
        n_obs=data.H,
        parameter_names=spec.basis.names,
        observed_comoments=spec.basis.comoments(data.matching().mu),
        matching=equilibrium.matching,
        diagnostics={
            "j_statistic": j_stat,
            "df": df,
            "p_value": p_value,
            "weighting": label,
            "excluded_cells": int(excluded),
        },
        fixed_theta=True,
    )

"""Iterative projection fitting: closed-form logit updates and general margin projections."""
import logging
import time
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import brentq, root
from scipy.special import logsumexp

from choice.base import ChoiceModel, NestedForm, check_models
from choice.logit import LogitSpec
from market.errors import ConvergenceError, DimensionError, UnsupportedModelError
from market.feasibility import max_residual
from market.models import GroupUtilities, Margins, Matching, SurplusMatrix
from services.choosiow import choosiow_objective
from services.options import SolveOptions, SolveReport
from services.welfare import side_utilities

logger = logging.getLogger(__name__)

BRACKET_STEPS = 200


def _check_market(phi: SurplusMatrix, r: Margins) -> None:
    if phi.shape != r.shape:
        raise DimensionError("phi", r.shape, phi.shape)


def _logit_utilities(r: Margins, mu_x0: np.ndarray, mu_0y: np.ndarray) -> GroupUtilities:
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(r.n > 0, -np.log(mu_x0 / r.n), np.nan)
        v = np.where(r.m > 0, -np.log(mu_0y / r.m), np.nan)
    return GroupUtilities(u, v)


def _half_update(masses: np.ndarray, A: np.ndarray) -> np.ndarray:
    """
    sqrt of singles solving s^2 + s A = mass, written to avoid cancellation.
    An empty group with no allowed partner (mass = A = 0) stays at 0.
    """
    denom = np.sqrt(masses + A * A / 4.0) + A / 2.0
    return np.divide(masses, denom, out=np.zeros_like(denom, dtype=float), where=denom > 0)


def solve_ipfp_logit(
    phi: SurplusMatrix,
    r: Margins,
    opts: SolveOptions = None,
    init: Optional[Matching] = None,
) -> Tuple[Matching, GroupUtilities, SolveReport]:
    """
    Choo-Siow IPFP. Alternates the quadratic updates for sqrt(mu_x0) and
    sqrt(mu_0y) with K = exp(Phi / 2) until both margin residuals are within tol.
    """
    opts = opts or SolveOptions()
    _check_market(phi, r)
    started = time.perf_counter()
    K = np.exp(phi.filled(-np.inf) / 2.0)
    n, m = r.n, r.m
    b = np.sqrt(init.mu_0y) if init is not None else np.sqrt(m)
    a = np.sqrt(n)
    trace = []
    residual = np.inf
    iteration = 0
    for iteration in range(1, opts.max_iter + 1):
        a_new = _half_update(n, K @ b)
        a = a_new if opts.damping == 1.0 else a ** (1 - opts.damping) * a_new ** opts.damping
        if opts.trace:
            trace.append(_trace_value(phi, r, a, b))
        b_new = _half_update(m, K.T @ a)
        b = b_new if opts.damping == 1.0 else b ** (1 - opts.damping) * b_new ** opts.damping
        if opts.trace:
            trace.append(_trace_value(phi, r, a, b))
        men_residual = np.abs(a * a + a * (K @ b) - n).max()
        women_residual = np.abs(b * b + b * (K.T @ a) - m).max()
        residual = float(max(men_residual, women_residual))
        logger.debug(f"IPFP iteration {iteration}: residual {residual:.3e}")
        if residual <= opts.tol:
            break

    matching = Matching(K * np.outer(a, b), a * a, b * b)
    utilities = _logit_utilities(r, matching.mu_x0, matching.mu_0y)
    converged = residual <= opts.tol
    report = SolveReport(
        converged=converged,
        iterations=iteration,
        final_residual=residual,
        social_welfare=utilities.total(r),
        wall_time=time.perf_counter() - started,
        method="ipfp",
        objective_trace=trace,
    )
    if not converged:
        logger.warning(f"Logit IPFP did not converge in {opts.max_iter} iterations (residual {residual:.3e})")
    logger.info(f"Logit IPFP done: {r.nx}x{r.ny}, {iteration} iterations, residual {residual:.2e}")
    return matching, utilities, report


def _trace_value(phi, r, a, b) -> float:
    """Choo-Siow F at the utilities implied by the current singles."""
    utilities = _logit_utilities(r, a * a, b * b)
    return choosiow_objective(phi, r, np.nan_to_num(utilities.u), np.nan_to_num(utilities.v))


# ---------------------------------------------------------------- general IPFP


def _partner_terms(
    models: Sequence[ChoiceModel], M: np.ndarray, singles: np.ndarray, masses: np.ndarray, allowed: np.ndarray
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Linearize the partner side's inverse demand in log mu: V_ij = beta_ij log M_ij + c_ij.

    Rows of M are the partner groups. Nested forms are exact with frozen nest
    totals and singles; other models use a logit-like tangent at the iterate.
    """
    beta = np.ones(M.shape)
    c = np.zeros(M.shape)
    for i, model in enumerate(models):
        if masses[i] <= 0:
            continue
        row_allowed = allowed[i] & (M[i] > 0)
        form = model.nested_form(M.shape[1])
        with np.errstate(divide="ignore"):
            log_row = np.log(M[i])
        if form is not None:
            index = form.nest_index(M.shape[1])
            lam = form.lambdas[index]
            totals = np.array([M[i][nest].sum() for nest in form.nests])
            with np.errstate(divide="ignore"):
                log_totals = np.log(totals)[index]
            beta[i] = form.scale * lam
            c[i] = form.scale * (np.where(lam < 1, (1.0 - lam) * log_totals, 0.0) - np.log(singles[i]))
        else:
            U = model.invert(M[i] / masses[i], ~row_allowed)
            c[i] = np.where(row_allowed, U - log_row, 0.0)
    return beta, c


def _expanding_root(f, start: float, step: float = 1.0) -> float:
    """Root of a decreasing function by bracket expansion around start, then Brent."""
    lo = hi = start
    f_lo = f_hi = f(start)
    if f_lo == 0:
        return start
    for _ in range(BRACKET_STEPS):
        if f_lo > 0 and f_hi < 0:
            break
        if f_lo <= 0:
            lo -= step
            f_lo = f(lo)
        if f_hi >= 0:
            hi += step
            f_hi = f(hi)
        step *= 2.0
    else:
        raise ConvergenceError("could not bracket the margin projection root")
    return brentq(f, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def _project_nested(
    form: NestedForm, t: np.ndarray, beta: np.ndarray, allowed: np.ndarray, mass: float
) -> Tuple[np.ndarray, float]:
    """
    Solve one group's margin given frozen partner terms:
    U_j(mu) + beta_j log mu_j = t_j on allowed options and mu_0 + sum mu = mass.
    """
    size = t.size
    index = form.nest_index(size)
    lam = form.lambdas[index]
    s = form.scale
    denom = s * lam + beta
    nests = [nest[allowed[nest]] for nest in form.nests]
    nest_lambdas = [form.lambdas[k] for k in range(len(form.nests))]

    def nest_logs(a: float):
        logs = np.full(size, -np.inf)
        totals = []
        for members, lam_n in zip(nests, nest_lambdas):
            if members.size == 0:
                continue
            base = (t[members] + s * a) / denom[members]
            if lam_n == 1.0:
                logs[members] = base
                totals.append(logsumexp(base))
                continue
            slope = s * (1.0 - lam_n) / denom[members]

            def gap(S):
                return logsumexp(base - slope * S) - S

            S = _expanding_root(gap, logsumexp(base))
            logs[members] = base - slope * S
            totals.append(S)
        return logs, totals

    def balance(a: float) -> float:
        _, totals = nest_logs(a)
        return np.log(mass) - logsumexp([a] + totals)

    a = _expanding_root(balance, np.log(mass))
    logs, _ = nest_logs(a)
    return np.exp(logs), float(np.exp(a))


def _project_generic(
    model: ChoiceModel, t: np.ndarray, beta: np.ndarray, allowed: np.ndarray, mass: float, start: np.ndarray
) -> Tuple[np.ndarray, float]:
    """Same projection for models without a nested form, solved for U by Powell's hybrid method."""
    idx = np.flatnonzero(allowed)
    forbidden = ~allowed

    def shares(x):
        U = np.zeros(t.size)
        U[idx] = x
        return model.probs(U, forbidden)

    def equations(x):
        p = shares(x)[idx]
        return x + beta[idx] * np.log(np.maximum(mass * p, 1e-300)) - t[idx]

    res = root(equations, start[idx], method="hybr", options={"xtol": 1e-13})
    if not res.success and np.abs(equations(res.x)).max() > 1e-8:
        raise ConvergenceError(f"{model.family} margin projection failed: {res.message}")
    p = shares(res.x)
    return mass * p, float(mass * (1.0 - p.sum()))


def _project_side(
    models: Sequence[ChoiceModel],
    T: np.ndarray,
    beta: np.ndarray,
    allowed: np.ndarray,
    masses: np.ndarray,
    current: np.ndarray,
    current_singles: np.ndarray,
    jobs: int,
) -> Tuple[np.ndarray, np.ndarray]:
    """Row-wise projections for one side; rows are independent."""

    def solve_row(i: int):
        if masses[i] <= 0:
            return np.zeros(T.shape[1]), 0.0
        model = models[i]
        form = model.nested_form(T.shape[1])
        if form is not None:
            return _project_nested(form, T[i], beta[i], allowed[i], masses[i])
        with np.errstate(divide="ignore"):
            start = model.invert(current[i] / masses[i], ~(allowed[i] & (current[i] > 0)))
        start = np.where(np.isfinite(start), start, 0.0)
        return _project_generic(model, T[i], beta[i], allowed[i], masses[i], start)

    rows = range(T.shape[0])
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(solve_row, rows))
    else:
        results = [solve_row(i) for i in rows]
    M = np.vstack([row for row, _ in results])
    singles = np.array([single for _, single in results])
    return M, singles


def _damped(old: np.ndarray, new: np.ndarray, damping: float) -> np.ndarray:
    if damping == 1.0:
        return new
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where((old > 0) & (new > 0), old ** (1 - damping) * new ** damping, new)
    return out


def _check_projectable(models: Sequence[ChoiceModel], side: str) -> None:
    for k, model in enumerate(models):
        if not model.smooth and model.nested_form(1) is None:
            raise UnsupportedModelError(
                f"{side} model {k} ({model.family}) has no margin projection and no smooth inversion; "
                f"use the lp_discrete method"
            )


def solve_ipfp_general(
    men: Sequence[ChoiceModel],
    women: Sequence[ChoiceModel],
    phi: SurplusMatrix,
    r: Margins,
    opts: SolveOptions = None,
    init: Optional[Matching] = None,
) -> Tuple[Matching, GroupUtilities, SolveReport]:
    """
    IPFP for any smooth separable model. Each half-step re-solves one side's
    margins with the other side's inverse demand frozen at the current iterate.
    """
    opts = opts or SolveOptions()
    _check_market(phi, r)
    nx, ny = r.shape
    check_models(men, nx, ny, "men")
    check_models(women, ny, nx, "women")
    _check_projectable(men, "men")
    _check_projectable(women, "women")
    started = time.perf_counter()
    allowed = phi.allowed
    Phi = phi.filled(0.0)

    if init is None:
        init, _, _ = solve_ipfp_logit(phi, r, SolveOptions(tol=max(opts.tol, 1e-10), max_iter=opts.max_iter))
    mu = np.array(init.mu)
    mu_x0 = np.array(init.mu_x0)
    mu_0y = np.array(init.mu_0y)

    residual = np.inf
    iteration = 0
    for iteration in range(1, opts.max_iter + 1):
        beta_w, c_w = _partner_terms(women, mu.T, mu_0y, r.m, allowed.T)
        new_mu, new_x0 = _project_side(men, Phi - c_w.T, beta_w.T, allowed, r.n, mu, mu_x0, opts.jobs)
        mu = _damped(mu, new_mu, opts.damping)
        mu_x0 = _damped(mu_x0, new_x0, opts.damping)

        beta_m, c_m = _partner_terms(men, mu, mu_x0, r.n, allowed)
        new_mu_t, new_0y = _project_side(women, (Phi - c_m).T, beta_m.T, allowed.T, r.m, mu.T, mu_0y, opts.jobs)
        mu = _damped(mu, new_mu_t.T, opts.damping)
        mu_0y = _damped(mu_0y, new_0y, opts.damping)

        residual = max_residual(Matching(mu, mu_x0, mu_0y), r)
        logger.debug(f"General IPFP iteration {iteration}: residual {residual:.3e}")
        if residual <= opts.tol:
            break

    matching = Matching(mu, mu_x0, mu_0y)
    utilities = _general_utilities(men, women, matching, r, phi)
    converged = residual <= opts.tol
    report = SolveReport(
        converged=converged,
        iterations=iteration,
        final_residual=float(residual),
        social_welfare=utilities.total(r),
        wall_time=time.perf_counter() - started,
        method="ipfp",
    )
    if not converged:
        logger.warning(f"General IPFP did not converge in {opts.max_iter} iterations (residual {residual:.3e})")
    logger.info(f"General IPFP done: {nx}x{ny}, {iteration} iterations, residual {residual:.2e}")
    return matching, utilities, report


def _general_utilities(men, women, matching: Matching, r: Margins, phi: SurplusMatrix) -> GroupUtilities:
    forbidden = phi.forbidden if phi.has_forbidden else None
    forbidden_t = None if forbidden is None else forbidden.T
    _, u = side_utilities(men, np.asarray(matching.mu), r.n, forbidden)
    _, v = side_utilities(women, np.asarray(matching.mu).T, r.m, forbidden_t)
    return GroupUtilities(u, v)


def all_logit(models: List[ChoiceModel]) -> bool:
    return all(type(model) is LogitSpec for model in models)

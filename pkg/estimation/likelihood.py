"""Model equilibrium at the empirical margins and the household log-likelihood."""
import logging
from typing import Optional

import numpy as np
from scipy.special import xlogy

from config import config
from estimation.spec import ParamModelSpec
from market.errors import DimensionError
from market.models import Margins, Matching, SampleCounts
from services.equilibrium import solve
from services.options import Equilibrium, SolveOptions

logger = logging.getLogger(__name__)

# Inner solves are tightened well below the outer finite-difference step.
INNER_TOL = 0.01 * config.FD_STEP ** 2


def inner_options(opts: Optional[SolveOptions] = None) -> SolveOptions:
    opts = opts or SolveOptions()
    return opts.replace(tol=min(opts.tol, INNER_TOL))


class ModelSolver:
    """Solves the parametric model at r-hat, warm-starting from the last equilibrium."""

    def __init__(self, spec: ParamModelSpec, margins: Margins, opts: Optional[SolveOptions] = None):
        if margins.shape != spec.shape:
            raise DimensionError("data", spec.shape, margins.shape)
        self.spec = spec
        self.margins = margins
        self.opts = inner_options(opts)
        self.last: Optional[Matching] = None
        self.solves = 0

    def __call__(self, lam, theta=None) -> Equilibrium:
        men, women = self.spec.models(theta)
        equilibrium = solve(men, women, self.spec.phi(lam), self.margins, self.opts, init=self.last)
        self.solves += 1
        if not equilibrium.report.converged:
            logger.warning(
                f"Inner equilibrium not converged at lambda={np.round(lam, 6).tolist()} "
                f"(residual {equilibrium.report.final_residual:.3e})"
            )
        self.last = equilibrium.matching
        return equilibrium


def matching_loglik(model: Matching, data: SampleCounts) -> float:
    """
    sum over all household cells of count * log(mu_cell / H), with H the model's
    number of households. Cells with zero count contribute 0.
    """
    if model.shape != data.shape:
        raise DimensionError("model matching", data.shape, model.shape)
    counts = data.cells().astype(float)
    masses = model.cells()
    households = model.total_households
    missing = (masses <= 0) & (counts > 0)
    if missing.any():
        logger.warning(f"Model puts zero mass on {int(missing.sum())} observed cells; log-likelihood is -inf")
        return -np.inf
    return float(np.sum(xlogy(counts, masses / households)))


def log_likelihood(
    spec: ParamModelSpec,
    lam,
    theta,
    data: SampleCounts,
    opts: Optional[SolveOptions] = None,
) -> float:
    """Multinomial household log-likelihood of the model equilibrium at the empirical margins."""
    solver = ModelSolver(spec, data.margins(), opts)
    return matching_loglik(solver(lam, theta).matching, data)
